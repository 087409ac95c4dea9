#include <doctest.h>

#include <cmath>
#include <vector>

#include "avsync/gemm_conv.hpp"
#include "avsync/kernels.hpp"
#include "avsync/rng.hpp"

using namespace avsync;
using namespace avsync::kernels;

namespace {

std::vector<float> randu(std::size_t n, Rng& rng) {
  std::vector<float> v(n);
  for (auto& x : v) x = static_cast<float>(rng.normal());
  return v;
}

struct ConvCase {
  Conv3dDims d;
  std::vector<float> in, w, b, gout;
};

ConvCase make_case(Rng& rng, std::size_t st, std::size_t sh, std::size_t sw, std::size_t pt,
                   std::size_t ph, std::size_t pw) {
  ConvCase c;
  c.d = conv3d_dims(3, 4, 6, 9, 10, 5, 3, 3, 3, st, sh, sw, pt, ph, pw);
  c.in = randu(c.d.N * c.d.Ci * c.d.Ti * c.d.Hi * c.d.Wi, rng);
  c.w = randu(c.d.Co * c.d.Ci * c.d.Kt * c.d.Kh * c.d.Kw, rng);
  c.b = randu(c.d.Co, rng);
  c.gout = randu(c.d.N * c.d.Co * c.d.To * c.d.Ho * c.d.Wo, rng);
  return c;
}

}  // namespace

// The OpenMP kernels are gather-form / sample-partitioned, so they must match
// the serial reference bit for bit, independent of thread count.
TEST_CASE("kernels: parallel conv3d forward matches serial reference exactly") {
  Rng rng(42);
  for (auto [st, sh, sw, pt, ph, pw] :
       {std::array<std::size_t, 6>{1, 1, 1, 0, 0, 0}, std::array<std::size_t, 6>{1, 2, 2, 1, 1, 1},
        std::array<std::size_t, 6>{2, 2, 2, 1, 0, 1}}) {
    auto c = make_case(rng, st, sh, sw, pt, ph, pw);
    const std::size_t on = c.d.N * c.d.Co * c.d.To * c.d.Ho * c.d.Wo;
    std::vector<float> o1(on), o2(on);
    conv3d_forward_serial(c.in.data(), c.w.data(), c.b.data(), o1.data(), c.d);
    conv3d_forward_omp(c.in.data(), c.w.data(), c.b.data(), o2.data(), c.d);
    CHECK(o1 == o2);
  }
}

TEST_CASE("kernels: parallel conv3d backward (weight, input) matches serial exactly") {
  Rng rng(43);
  auto c = make_case(rng, 1, 2, 1, 1, 1, 1);
  const std::size_t wn = c.w.size(), in_n = c.in.size();
  std::vector<float> gw1(wn, 0.0f), gw2(wn, 0.0f), gi1(in_n, 0.0f), gi2(in_n, 0.0f);
  conv3d_backward_weight_serial(c.gout.data(), c.in.data(), gw1.data(), c.d);
  conv3d_backward_weight_omp(c.gout.data(), c.in.data(), gw2.data(), c.d);
  CHECK(gw1 == gw2);
  conv3d_backward_input_serial(c.gout.data(), c.w.data(), gi1.data(), c.d);
  conv3d_backward_input_omp(c.gout.data(), c.w.data(), gi2.data(), c.d);
  CHECK(gi1 == gi2);
}

TEST_CASE("kernels: parallel pooling matches serial exactly") {
  Rng rng(44);
  auto d = pool3d_dims(2, 3, 6, 8, 8, 2, 2, 2, 2, 2, 2);
  auto in = randu(d.N * d.C * d.Ti * d.Hi * d.Wi, rng);
  const std::size_t on = d.N * d.C * d.To * d.Ho * d.Wo;
  std::vector<float> o1(on), o2(on);
  std::vector<std::int64_t> a1(on), a2(on);
  maxpool3d_forward_serial(in.data(), o1.data(), a1.data(), d);
  maxpool3d_forward_omp(in.data(), o2.data(), a2.data(), d);
  CHECK(o1 == o2);
  CHECK(a1 == a2);
  avgpool3d_forward_serial(in.data(), o1.data(), d);
  avgpool3d_forward_omp(in.data(), o2.data(), d);
  CHECK(o1 == o2);
}

// The GEMM route is the production path; the direct serial kernels are its
// independent reference. Accumulation orders differ, so compare within a
// tolerance rather than bitwise.
TEST_CASE("kernels: GEMM conv path matches the direct reference") {
  Rng rng(45);
  for (auto [st, sh, sw, pt, ph, pw] :
       {std::array<std::size_t, 6>{1, 1, 1, 1, 1, 1}, std::array<std::size_t, 6>{1, 2, 2, 1, 1, 1},
        std::array<std::size_t, 6>{2, 1, 2, 0, 1, 0}}) {
    auto c = make_case(rng, st, sh, sw, pt, ph, pw);
    const auto padded = pad_input(c.in.data(), c.d);
    const std::size_t on = c.d.N * c.d.Co * c.d.To * c.d.Ho * c.d.Wo;
    std::vector<float> o_ref(on), o_gemm(on);
    conv3d_forward_serial(c.in.data(), c.w.data(), c.b.data(), o_ref.data(), c.d);
    conv3d_forward_gemm(padded, c.w.data(), c.b.data(), o_gemm.data(), c.d);
    for (std::size_t i = 0; i < on; ++i)
      CHECK(o_gemm[i] == doctest::Approx(o_ref[i]).epsilon(1e-4));

    std::vector<float> gw_ref(c.w.size(), 0.0f), gw_gemm(c.w.size(), 0.0f);
    conv3d_backward_weight_serial(c.gout.data(), c.in.data(), gw_ref.data(), c.d);
    conv3d_backward_weight_gemm(c.gout.data(), padded, gw_gemm.data(), c.d);
    for (std::size_t i = 0; i < gw_ref.size(); ++i)
      CHECK(gw_gemm[i] == doctest::Approx(gw_ref[i]).epsilon(1e-3));

    std::vector<float> gi_ref(c.in.size(), 0.0f), gi_gemm(c.in.size(), 0.0f);
    conv3d_backward_input_serial(c.gout.data(), c.w.data(), gi_ref.data(), c.d);
    conv3d_backward_input_gemm(c.gout.data(), c.w.data(), gi_gemm.data(), c.d);
    for (std::size_t i = 0; i < gi_ref.size(); ++i)
      CHECK(gi_gemm[i] == doctest::Approx(gi_ref[i]).epsilon(1e-3));
  }
}

TEST_CASE("kernels: conv against a transcribed small example") {
  // 1x1x1x2x2 input [[1,2],[3,4]], kernel [[1,0],[0,1]]: single output 1+4
  Conv3dDims d = conv3d_dims(1, 1, 1, 2, 2, 1, 1, 2, 2, 1, 1, 1, 0, 0, 0);
  std::vector<float> in{1, 2, 3, 4}, w{1, 0, 0, 1}, b{0.5f}, out(1);
  conv3d_forward_serial(in.data(), w.data(), b.data(), out.data(), d);
  CHECK(out[0] == doctest::Approx(5.5f));
}
