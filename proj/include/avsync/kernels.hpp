#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "avsync/common.hpp"

// Dense conv/pool/norm kernels. Every parallel variant is written in gather
// form (or partitioned scatter): each output element is accumulated by exactly
// one thread in a fixed order, so results are bit-identical for any thread
// count. The serial variants are the reference implementations the unit tests
// and the kernel benchmark compare against.
//
// Convolutions run on zero-padded copies of their inputs, which removes every
// edge branch from the hot loops; the row kernels are instantiated on the
// compile-time output width so accumulator rows stay in registers.
namespace avsync::kernels {

struct Conv3dDims {
  std::size_t N, Ci, Ti, Hi, Wi;  // input
  std::size_t Co, Kt, Kh, Kw;     // weight
  std::size_t st, sh, sw;         // stride
  std::size_t pt, ph, pw;         // zero padding
  std::size_t To, Ho, Wo;         // output (derived)
};

inline std::size_t conv_out_extent(std::size_t in, std::size_t k, std::size_t s, std::size_t p) {
  check(in + 2 * p >= k, cat("conv: kernel extent ", k, " exceeds padded input ", in + 2 * p));
  return (in + 2 * p - k) / s + 1;
}

inline Conv3dDims conv3d_dims(std::size_t N, std::size_t Ci, std::size_t Ti, std::size_t Hi,
                              std::size_t Wi, std::size_t Co, std::size_t Kt, std::size_t Kh,
                              std::size_t Kw, std::size_t st, std::size_t sh, std::size_t sw,
                              std::size_t pt, std::size_t ph, std::size_t pw) {
  Conv3dDims d{N, Ci, Ti, Hi, Wi, Co, Kt, Kh, Kw, st, sh, sw, pt, ph, pw, 0, 0, 0};
  d.To = conv_out_extent(Ti, Kt, st, pt);
  d.Ho = conv_out_extent(Hi, Kh, sh, ph);
  d.Wo = conv_out_extent(Wi, Kw, sw, pw);
  return d;
}

// Zero-padded copy of a batched channel volume.
template <typename T>
struct PaddedVolume {
  std::size_t Tp = 0, Hp = 0, Wp = 0;
  std::vector<T> data;  // N x C x Tp x Hp x Wp
};

template <typename T>
PaddedVolume<T> pad_input(const T* in, const Conv3dDims& d);

template <typename T>
void conv3d_forward_serial(const PaddedVolume<T>& in, const T* w, const T* b, T* out,
                           const Conv3dDims& d);
template <typename T>
void conv3d_forward_omp(const PaddedVolume<T>& in, const T* w, const T* b, T* out,
                        const Conv3dDims& d);

template <typename T>
void conv3d_backward_bias(const T* gout, T* gb, const Conv3dDims& d);

template <typename T>
void conv3d_backward_weight_serial(const T* gout, const PaddedVolume<T>& in, T* gw,
                                   const Conv3dDims& d);
template <typename T>
void conv3d_backward_weight_omp(const T* gout, const PaddedVolume<T>& in, T* gw,
                                const Conv3dDims& d);

template <typename T>
void conv3d_backward_input_serial(const T* gout, const T* w, T* gin, const Conv3dDims& d);
template <typename T>
void conv3d_backward_input_omp(const T* gout, const T* w, T* gin, const Conv3dDims& d);

// Convenience wrappers that pad internally (tests, benchmarks).
template <typename T>
void conv3d_forward_serial(const T* in, const T* w, const T* b, T* out, const Conv3dDims& d) {
  conv3d_forward_serial(pad_input(in, d), w, b, out, d);
}
template <typename T>
void conv3d_forward_omp(const T* in, const T* w, const T* b, T* out, const Conv3dDims& d) {
  conv3d_forward_omp(pad_input(in, d), w, b, out, d);
}
template <typename T>
void conv3d_backward_weight_serial(const T* gout, const T* in, T* gw, const Conv3dDims& d) {
  conv3d_backward_weight_serial(gout, pad_input(in, d), gw, d);
}
template <typename T>
void conv3d_backward_weight_omp(const T* gout, const T* in, T* gw, const Conv3dDims& d) {
  conv3d_backward_weight_omp(gout, pad_input(in, d), gw, d);
}

// ---------------------------------------------------------------------------
// pooling
// ---------------------------------------------------------------------------

struct Pool3dDims {
  std::size_t N, C, Ti, Hi, Wi;
  std::size_t Kt, Kh, Kw;
  std::size_t st, sh, sw;
  std::size_t To, Ho, Wo;
};

inline Pool3dDims pool3d_dims(std::size_t N, std::size_t C, std::size_t Ti, std::size_t Hi,
                              std::size_t Wi, std::size_t Kt, std::size_t Kh, std::size_t Kw,
                              std::size_t st, std::size_t sh, std::size_t sw) {
  check(Kt <= Ti && Kh <= Hi && Kw <= Wi,
        cat("pool: window ", Kt, "x", Kh, "x", Kw, " larger than input ", Ti, "x", Hi, "x", Wi));
  Pool3dDims d{N, C, Ti, Hi, Wi, Kt, Kh, Kw, st, sh, sw, 0, 0, 0};
  d.To = (Ti - Kt) / st + 1;
  d.Ho = (Hi - Kh) / sh + 1;
  d.Wo = (Wi - Kw) / sw + 1;
  return d;
}

template <typename T>
void maxpool3d_forward_serial(const T* in, T* out, std::int64_t* argmax, const Pool3dDims& d);
template <typename T>
void maxpool3d_forward_omp(const T* in, T* out, std::int64_t* argmax, const Pool3dDims& d);
template <typename T>
void maxpool3d_backward(const T* gout, const std::int64_t* argmax, T* gin, const Pool3dDims& d);

template <typename T>
void avgpool3d_forward_serial(const T* in, T* out, const Pool3dDims& d);
template <typename T>
void avgpool3d_forward_omp(const T* in, T* out, const Pool3dDims& d);
template <typename T>
void avgpool3d_backward(const T* gout, T* gin, const Pool3dDims& d);

}  // namespace avsync::kernels
