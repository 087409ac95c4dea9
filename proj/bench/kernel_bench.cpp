// Times the serial reference kernels against the OpenMP variants on the
// desk-scale layer shapes the training loop actually runs.

#include <chrono>
#include <cstdio>
#include <string>
#include <vector>

#include "avsync/gemm_conv.hpp"
#include "avsync/kernels.hpp"
#include "avsync/rng.hpp"

using namespace avsync;
using namespace avsync::kernels;
using Clock = std::chrono::steady_clock;

namespace {

std::vector<float> randn(std::size_t n, Rng& rng) {
  std::vector<float> v(n);
  for (auto& x : v) x = static_cast<float>(rng.normal());
  return v;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct LayerShape {
  const char* name;
  std::size_t N, Ci, Ti, Hi, Wi, Co, Kt;
  std::size_t sh;
};

void bench_conv(const LayerShape& s, int iters) {
  Rng rng(1);
  const auto d = conv3d_dims(s.N, s.Ci, s.Ti, s.Hi, s.Wi, s.Co, s.Kt, 3, 3, 1, s.sh, s.sh,
                             s.Kt == 3 ? 1 : 0, 1, 1);
  auto in = randn(d.N * d.Ci * d.Ti * d.Hi * d.Wi, rng);
  auto w = randn(d.Co * d.Ci * d.Kt * 9, rng);
  auto b = randn(d.Co, rng);
  std::vector<float> out(d.N * d.Co * d.To * d.Ho * d.Wo);
  auto gout = randn(out.size(), rng);
  std::vector<float> gw(w.size(), 0.0f), gin(in.size(), 0.0f);

  const double fwd_flops = 2.0 * static_cast<double>(out.size()) * d.Ci * d.Kt * 9;

  auto t0 = Clock::now();
  for (int i = 0; i < iters; ++i)
    conv3d_forward_serial(in.data(), w.data(), b.data(), out.data(), d);
  const double serial = seconds_since(t0) / iters;

  t0 = Clock::now();
  for (int i = 0; i < iters; ++i)
    conv3d_forward_omp(in.data(), w.data(), b.data(), out.data(), d);
  const double omp = seconds_since(t0) / iters;

  t0 = Clock::now();
  for (int i = 0; i < iters; ++i)
    conv3d_backward_weight_omp(gout.data(), in.data(), gw.data(), d);
  const double bw_w = seconds_since(t0) / iters;

  t0 = Clock::now();
  for (int i = 0; i < iters; ++i) conv3d_backward_input_omp(gout.data(), w.data(), gin.data(), d);
  const double bw_in = seconds_since(t0) / iters;

  const auto padded = pad_input(in.data(), d);
  t0 = Clock::now();
  for (int i = 0; i < iters; ++i)
    conv3d_forward_gemm(padded, w.data(), b.data(), out.data(), d);
  const double gemm_f = seconds_since(t0) / iters;
  t0 = Clock::now();
  for (int i = 0; i < iters; ++i)
    conv3d_backward_weight_gemm(gout.data(), padded, gw.data(), d);
  const double gemm_w = seconds_since(t0) / iters;
  t0 = Clock::now();
  for (int i = 0; i < iters; ++i)
    conv3d_backward_input_gemm(gout.data(), w.data(), gin.data(), d);
  const double gemm_in = seconds_since(t0) / iters;
  std::printf(
      "%-10s gemm fwd %7.2f ms (%5.1f GF/s) | gemm bw_w %7.2f ms (%5.1f GF/s) | gemm bw_in "
      "%7.2f ms (%5.1f GF/s)\n",
      s.name, gemm_f * 1e3, fwd_flops / gemm_f * 1e-9, gemm_w * 1e3, fwd_flops / gemm_w * 1e-9,
      gemm_in * 1e3, fwd_flops / gemm_in * 1e-9);

  std::printf(
      "%-10s fwd serial %7.2f ms (%5.1f GF/s) | fwd omp %7.2f ms (%5.1f GF/s) | "
      "bw_w %7.2f ms (%5.1f GF/s) | bw_in %7.2f ms (%5.1f GF/s)\n",
      s.name, serial * 1e3, fwd_flops / serial * 1e-9, omp * 1e3, fwd_flops / omp * 1e-9,
      bw_w * 1e3, fwd_flops / bw_w * 1e-9, bw_in * 1e3, fwd_flops / bw_in * 1e-9);
}

}  // namespace

int main(int argc, char** argv) {
  const int iters = argc > 1 ? std::atoi(argv[1]) : 5;
#ifdef _OPENMP
  std::printf("openmp max threads: %d\n", omp_get_max_threads());
#endif
  // desk video subnet shapes (batch 16)
  bench_conv({"video/g1", 16, 3, 25, 64, 64, 16, 3, 2}, iters);
  bench_conv({"video/g2", 16, 16, 12, 16, 16, 32, 3, 1}, iters);
  bench_conv({"video/g3", 16, 32, 6, 8, 8, 64, 3, 1}, iters);
  bench_conv({"video/g4", 16, 64, 3, 4, 4, 64, 1, 1}, iters);
  // audio subnet dominant block (batch 16)
  bench_conv({"audio/c2", 16, 16, 1, 49, 20, 32, 1, 1}, iters);

  // pooling
  {
    Rng rng(2);
    const auto d = pool3d_dims(16, 16, 25, 32, 32, 2, 2, 2, 2, 2, 2);
    auto in = randn(d.N * d.C * d.Ti * d.Hi * d.Wi, rng);
    std::vector<float> out(d.N * d.C * d.To * d.Ho * d.Wo);
    std::vector<std::int64_t> am(out.size());
    auto t0 = Clock::now();
    for (int i = 0; i < iters; ++i)
      maxpool3d_forward_serial(in.data(), out.data(), am.data(), d);
    const double serial = seconds_since(t0) / iters;
    t0 = Clock::now();
    for (int i = 0; i < iters; ++i) maxpool3d_forward_omp(in.data(), out.data(), am.data(), d);
    const double omp = seconds_since(t0) / iters;
    std::printf("%-10s fwd serial %7.2f ms | fwd omp %7.2f ms\n", "maxpool", serial * 1e3,
                omp * 1e3);
  }
  return 0;
}
