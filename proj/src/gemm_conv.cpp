#include "avsync/gemm_conv.hpp"

#include <cblas.h>

#include <mutex>
#include <vector>

extern "C" void openblas_set_num_threads(int);

namespace avsync::kernels {

namespace {

// Parallelism lives in the per-sample outer loops; BLAS itself must stay
// sequential so every GEMM accumulates in one fixed order.
void ensure_single_threaded_blas() {
  static std::once_flag flag;
  std::call_once(flag, [] { openblas_set_num_threads(1); });
}

void gemm(CBLAS_TRANSPOSE ta, CBLAS_TRANSPOSE tb, int m, int n, int k, float alpha,
          const float* a, int lda, const float* b, int ldb, float beta, float* c, int ldc) {
  cblas_sgemm(CblasRowMajor, ta, tb, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}
void gemm(CBLAS_TRANSPOSE ta, CBLAS_TRANSPOSE tb, int m, int n, int k, double alpha,
          const double* a, int lda, const double* b, int ldb, double beta, double* c, int ldc) {
  cblas_dgemm(CblasRowMajor, ta, tb, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

// column matrix: rows are kernel taps (ic,kt,kh,kw), columns are output
// positions (to,ho,wo)
template <typename T>
void im2col_sample(const PaddedVolume<T>& in, const Conv3dDims& d, std::size_t n, T* cols) {
  const std::size_t in_chw = in.Tp * in.Hp * in.Wp, in_hw = in.Hp * in.Wp;
  const std::size_t N = d.To * d.Ho * d.Wo;
  const T* inp = in.data.data() + n * d.Ci * in_chw;
  std::size_t k = 0;
  for (std::size_t ic = 0; ic < d.Ci; ++ic)
    for (std::size_t kt = 0; kt < d.Kt; ++kt)
      for (std::size_t kh = 0; kh < d.Kh; ++kh)
        for (std::size_t kw = 0; kw < d.Kw; ++kw, ++k) {
          T* dst = cols + k * N;
          for (std::size_t to = 0; to < d.To; ++to) {
            const T* slab = inp + ic * in_chw + (to * d.st + kt) * in_hw + kh * in.Wp + kw;
            for (std::size_t ho = 0; ho < d.Ho; ++ho) {
              const T* src = slab + ho * d.sh * in.Wp;
              T* drow = dst + (to * d.Ho + ho) * d.Wo;
              if (d.sw == 1) {
                std::copy_n(src, d.Wo, drow);
              } else {
                for (std::size_t wo = 0; wo < d.Wo; ++wo) drow[wo] = src[wo * d.sw];
              }
            }
          }
        }
}

// transpose of the forward mapping: adds column-matrix entries back into the
// (unpadded) input gradient
template <typename T>
void col2im_add_sample(const T* cols, const Conv3dDims& d, std::size_t n, T* gin) {
  const std::size_t in_chw = d.Ti * d.Hi * d.Wi, in_hw = d.Hi * d.Wi;
  const std::size_t N = d.To * d.Ho * d.Wo;
  T* ginp = gin + n * d.Ci * in_chw;
  std::size_t k = 0;
  for (std::size_t ic = 0; ic < d.Ci; ++ic)
    for (std::size_t kt = 0; kt < d.Kt; ++kt)
      for (std::size_t kh = 0; kh < d.Kh; ++kh)
        for (std::size_t kw = 0; kw < d.Kw; ++kw, ++k) {
          const T* src = cols + k * N;
          for (std::size_t to = 0; to < d.To; ++to) {
            const std::size_t tq = to * d.st + kt;
            if (tq < d.pt || tq - d.pt >= d.Ti) continue;
            const std::size_t ti = tq - d.pt;
            for (std::size_t ho = 0; ho < d.Ho; ++ho) {
              const std::size_t hq = ho * d.sh + kh;
              if (hq < d.ph || hq - d.ph >= d.Hi) continue;
              T* girow = ginp + ic * in_chw + ti * in_hw + (hq - d.ph) * d.Wi;
              const T* srow = src + (to * d.Ho + ho) * d.Wo;
              for (std::size_t wo = 0; wo < d.Wo; ++wo) {
                const std::size_t wq = wo * d.sw + kw;
                if (wq < d.pw || wq - d.pw >= d.Wi) continue;
                girow[wq - d.pw] += srow[wo];
              }
            }
          }
        }
}

}  // namespace

template <typename T>
void conv3d_forward_gemm(const PaddedVolume<T>& in, const T* w, const T* b, T* out,
                         const Conv3dDims& d) {
  ensure_single_threaded_blas();
  const int M = static_cast<int>(d.Co);
  const int K = static_cast<int>(d.Ci * d.Kt * d.Kh * d.Kw);
  const int N = static_cast<int>(d.To * d.Ho * d.Wo);
  const long NN = static_cast<long>(d.N);
#pragma omp parallel
  {
    std::vector<T> cols(static_cast<std::size_t>(K) * N);
#pragma omp for schedule(static)
    for (long n = 0; n < NN; ++n) {
      im2col_sample(in, d, static_cast<std::size_t>(n), cols.data());
      T* outp = out + static_cast<std::size_t>(n) * d.Co * N;
      for (int oc = 0; oc < M; ++oc) std::fill(outp + oc * N, outp + (oc + 1) * N, b[oc]);
      gemm(CblasNoTrans, CblasNoTrans, M, N, K, T(1), w, K, cols.data(), N, T(1), outp, N);
    }
  }
}

template <typename T>
void conv3d_backward_weight_gemm(const T* gout, const PaddedVolume<T>& in, T* gw,
                                 const Conv3dDims& d) {
  ensure_single_threaded_blas();
  const int M = static_cast<int>(d.Co);
  const int K = static_cast<int>(d.Ci * d.Kt * d.Kh * d.Kw);
  const int N = static_cast<int>(d.To * d.Ho * d.Wo);
  std::vector<T> cols(static_cast<std::size_t>(K) * N);
  // fixed sample order keeps the accumulation deterministic
  for (std::size_t n = 0; n < d.N; ++n) {
    im2col_sample(in, d, n, cols.data());
    gemm(CblasNoTrans, CblasTrans, M, K, N, T(1), gout + n * d.Co * N, N, cols.data(), N, T(1),
         gw, K);
  }
}

template <typename T>
void conv3d_backward_input_gemm(const T* gout, const T* w, T* gin, const Conv3dDims& d) {
  ensure_single_threaded_blas();
  const int M = static_cast<int>(d.Co);
  const int K = static_cast<int>(d.Ci * d.Kt * d.Kh * d.Kw);
  const int N = static_cast<int>(d.To * d.Ho * d.Wo);
  const long NN = static_cast<long>(d.N);
#pragma omp parallel
  {
    std::vector<T> cols(static_cast<std::size_t>(K) * N);
#pragma omp for schedule(static)
    for (long n = 0; n < NN; ++n) {
      gemm(CblasTrans, CblasNoTrans, K, N, M, T(1), w, K, gout + static_cast<std::size_t>(n) * d.Co * N,
           N, T(0), cols.data(), N);
      col2im_add_sample(cols.data(), d, static_cast<std::size_t>(n), gin);
    }
  }
}

#define AVSYNC_INSTANTIATE(T)                                                                   \
  template void conv3d_forward_gemm<T>(const PaddedVolume<T>&, const T*, const T*, T*,         \
                                       const Conv3dDims&);                                      \
  template void conv3d_backward_weight_gemm<T>(const T*, const PaddedVolume<T>&, T*,           \
                                               const Conv3dDims&);                             \
  template void conv3d_backward_input_gemm<T>(const T*, const T*, T*, const Conv3dDims&);

AVSYNC_INSTANTIATE(float)
AVSYNC_INSTANTIATE(double)
#undef AVSYNC_INSTANTIATE

}  // namespace avsync::kernels
