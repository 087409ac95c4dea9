#pragma once

// im2col + BLAS GEMM convolution path. This is the production route the ops
// layer uses; the direct kernels in kernels.hpp remain the reference
// implementation the tests compare it against. All sample loops are either
// independent (forward, input gradient) or serialized in a fixed order
// (weight gradient), and BLAS runs single-threaded, so results are
// bit-identical across runs and thread counts.

#include "avsync/kernels.hpp"

namespace avsync::kernels {

template <typename T>
void conv3d_forward_gemm(const PaddedVolume<T>& in, const T* w, const T* b, T* out,
                         const Conv3dDims& d);

template <typename T>
void conv3d_backward_weight_gemm(const T* gout, const PaddedVolume<T>& in, T* gw,
                                 const Conv3dDims& d);

template <typename T>
void conv3d_backward_input_gemm(const T* gout, const T* w, T* gin, const Conv3dDims& d);

}  // namespace avsync::kernels
