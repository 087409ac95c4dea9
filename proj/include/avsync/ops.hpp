#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <memory>
#include <vector>

#include "avsync/gemm_conv.hpp"
#include "avsync/kernels.hpp"
#include "avsync/tape.hpp"
#include "avsync/tensor.hpp"

namespace avsync::ops {

enum class PoolKind { Max, Average };

// ---------------------------------------------------------------------------
// convolution (weight rank 5 -> 3D, rank 4 -> 2D; a 2D conv is the Kt=1 case
// of the same kernel, so both ranks share one code path)
// ---------------------------------------------------------------------------

template <typename T>
Ten<T> conv(Tape<T>& tape, const Ten<T>& in, const Ten<T>& w, const Ten<T>& b,
            std::vector<std::size_t> stride, std::vector<std::size_t> pad) {
  check(w->rank() == 4 || w->rank() == 5,
        cat("conv: weight must be rank 4 (2D) or 5 (3D), got ", shape_str(w->shape)));
  const bool is3d = w->rank() == 5;
  const std::size_t spatial = is3d ? 3 : 2;
  check(in->rank() == spatial + 2, cat("conv: input rank ", in->rank(), " does not match ",
                                       (is3d ? "3D" : "2D"), " weight ", shape_str(w->shape)));
  check(stride.size() == spatial && pad.size() == spatial,
        cat("conv: need ", spatial, " stride/pad components"));
  for (auto s : stride) check(s >= 1, "conv: stride components must be >= 1");
  check(in->shape[1] == w->shape[1],
        cat("conv: input channel dim ", in->shape[1], " != weight input channel dim ",
            w->shape[1]));
  check(b->rank() == 1 && b->shape[0] == w->shape[0],
        cat("conv: bias shape ", shape_str(b->shape), " != output channels ", w->shape[0]));

  const std::size_t N = in->shape[0], Ci = in->shape[1];
  const std::size_t Ti = is3d ? in->shape[2] : 1;
  const std::size_t Hi = in->shape[is3d ? 3 : 2], Wi = in->shape[is3d ? 4 : 3];
  const std::size_t Co = w->shape[0];
  const std::size_t Kt = is3d ? w->shape[2] : 1;
  const std::size_t Kh = w->shape[is3d ? 3 : 2], Kw = w->shape[is3d ? 4 : 3];
  const std::size_t st = is3d ? stride[0] : 1, sh = stride[is3d ? 1 : 0],
                    sw = stride[is3d ? 2 : 1];
  const std::size_t pt = is3d ? pad[0] : 0, ph = pad[is3d ? 1 : 0], pw = pad[is3d ? 2 : 1];

  const auto d = kernels::conv3d_dims(N, Ci, Ti, Hi, Wi, Co, Kt, Kh, Kw, st, sh, sw, pt, ph, pw);
  Shape out_shape = is3d ? Shape{N, Co, d.To, d.Ho, d.Wo} : Shape{N, Co, d.Ho, d.Wo};
  auto out = make_tensor<T>(out_shape);
  // the padded copy feeds the forward GEMM and is reused by the weight
  // gradient in backward
  auto padded = std::make_shared<kernels::PaddedVolume<T>>(
      kernels::pad_input(in->values.data(), d));
  kernels::conv3d_forward_gemm(*padded, w->values.data(), b->values.data(), out->values.data(),
                               d);

  tape.record("conv", {in, w, b}, out, [in, w, b, out, d, padded]() {
    const T* g = out->grad.data();
    if (b->requires_grad) {
      b->ensure_grad();
      kernels::conv3d_backward_bias(g, b->grad.data(), d);
    }
    if (w->requires_grad) {
      w->ensure_grad();
      kernels::conv3d_backward_weight_gemm(g, *padded, w->grad.data(), d);
    }
    if (in->requires_grad) {
      in->ensure_grad();
      kernels::conv3d_backward_input_gemm(g, w->values.data(), in->grad.data(), d);
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// pooling
// ---------------------------------------------------------------------------

template <typename T>
Ten<T> pool(Tape<T>& tape, const Ten<T>& in, PoolKind kind, std::vector<std::size_t> window,
            std::vector<std::size_t> stride) {
  check(in->rank() == 4 || in->rank() == 5,
        cat("pool: input must be rank 4 or 5, got ", shape_str(in->shape)));
  const bool is3d = in->rank() == 5;
  const std::size_t spatial = is3d ? 3 : 2;
  check(window.size() == spatial && stride.size() == spatial,
        cat("pool: need ", spatial, " window/stride components"));
  for (auto s : stride) check(s >= 1, "pool: stride components must be >= 1");

  const std::size_t N = in->shape[0], C = in->shape[1];
  const std::size_t Ti = is3d ? in->shape[2] : 1;
  const std::size_t Hi = in->shape[is3d ? 3 : 2], Wi = in->shape[is3d ? 4 : 3];
  const std::size_t Kt = is3d ? window[0] : 1, Kh = window[is3d ? 1 : 0],
                    Kw = window[is3d ? 2 : 1];
  const std::size_t st = is3d ? stride[0] : 1, sh = stride[is3d ? 1 : 0],
                    sw = stride[is3d ? 2 : 1];
  const auto d = kernels::pool3d_dims(N, C, Ti, Hi, Wi, Kt, Kh, Kw, st, sh, sw);
  Shape out_shape = is3d ? Shape{N, C, d.To, d.Ho, d.Wo} : Shape{N, C, d.Ho, d.Wo};
  auto out = make_tensor<T>(out_shape);

  if (kind == PoolKind::Max) {
    auto argmax = std::make_shared<std::vector<std::int64_t>>(out->numel());
    kernels::maxpool3d_forward_omp(in->values.data(), out->values.data(), argmax->data(), d);
    tape.record("maxpool", {in}, out, [in, out, argmax, d]() {
      if (!in->requires_grad) return;
      in->ensure_grad();
      kernels::maxpool3d_backward(out->grad.data(), argmax->data(), in->grad.data(), d);
    });
  } else {
    kernels::avgpool3d_forward_omp(in->values.data(), out->values.data(), d);
    tape.record("avgpool", {in}, out, [in, out, d]() {
      if (!in->requires_grad) return;
      in->ensure_grad();
      kernels::avgpool3d_backward(out->grad.data(), in->grad.data(), d);
    });
  }
  return out;
}

// Collapses every axis after the channel axis; output is N x C.
template <typename T>
Ten<T> global_avg_pool(Tape<T>& tape, const Ten<T>& in) {
  check(in->rank() >= 3, cat("global_avg_pool: need rank >= 3, got ", shape_str(in->shape)));
  const std::size_t N = in->shape[0], C = in->shape[1];
  const std::size_t S = in->numel() / (N * C);
  auto out = make_tensor<T>({N, C});
  const T inv = T(1) / static_cast<T>(S);
  for (std::size_t nc = 0; nc < N * C; ++nc) {
    double acc = 0;
    const T* p = in->values.data() + nc * S;
    for (std::size_t s = 0; s < S; ++s) acc += p[s];
    out->values[nc] = static_cast<T>(acc) * inv;
  }
  tape.record("global_avg_pool", {in}, out, [in, out, N, C, S, inv]() {
    if (!in->requires_grad) return;
    in->ensure_grad();
    for (std::size_t nc = 0; nc < N * C; ++nc) {
      const T gv = out->grad[nc] * inv;
      T* gi = in->grad.data() + nc * S;
      for (std::size_t s = 0; s < S; ++s) gi[s] += gv;
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// affine (fully connected): out = in * w + b
// ---------------------------------------------------------------------------

template <typename T>
Ten<T> affine(Tape<T>& tape, const Ten<T>& in, const Ten<T>& w, const Ten<T>& b) {
  check(in->rank() == 2, cat("affine: input must be rank 2 (batch x features), got ",
                             shape_str(in->shape)));
  check(w->rank() == 2 && b->rank() == 1, "affine: weight must be rank 2, bias rank 1");
  check(in->shape[1] == w->shape[0], cat("affine: input feature dim ", in->shape[1],
                                         " != weight input dim ", w->shape[0]));
  check(b->shape[0] == w->shape[1], cat("affine: bias dim ", b->shape[0],
                                        " != weight output dim ", w->shape[1]));
  const std::size_t N = in->shape[0], F = w->shape[0], U = w->shape[1];
  auto out = make_tensor<T>({N, U});
  for (std::size_t n = 0; n < N; ++n) {
    T* o = out->values.data() + n * U;
    for (std::size_t u = 0; u < U; ++u) o[u] = b->values[u];
    const T* x = in->values.data() + n * F;
    for (std::size_t f = 0; f < F; ++f) {
      const T xv = x[f];
      const T* wr = w->values.data() + f * U;
      for (std::size_t u = 0; u < U; ++u) o[u] += xv * wr[u];
    }
  }
  tape.record("affine", {in, w, b}, out, [in, w, b, out, N, F, U]() {
    const T* g = out->grad.data();
    if (b->requires_grad) {
      b->ensure_grad();
      for (std::size_t n = 0; n < N; ++n)
        for (std::size_t u = 0; u < U; ++u) b->grad[u] += g[n * U + u];
    }
    if (w->requires_grad) {
      w->ensure_grad();
      for (std::size_t n = 0; n < N; ++n) {
        const T* x = in->values.data() + n * F;
        const T* gr = g + n * U;
        for (std::size_t f = 0; f < F; ++f) {
          const T xv = x[f];
          T* gw = w->grad.data() + f * U;
          for (std::size_t u = 0; u < U; ++u) gw[u] += xv * gr[u];
        }
      }
    }
    if (in->requires_grad) {
      in->ensure_grad();
      for (std::size_t n = 0; n < N; ++n) {
        const T* gr = g + n * U;
        T* gi = in->grad.data() + n * F;
        for (std::size_t f = 0; f < F; ++f) {
          const T* wr = w->values.data() + f * U;
          T acc = T(0);
          for (std::size_t u = 0; u < U; ++u) acc += gr[u] * wr[u];
          gi[f] += acc;
        }
      }
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// elementwise
// ---------------------------------------------------------------------------

template <typename T>
Ten<T> relu(Tape<T>& tape, const Ten<T>& in) {
  auto out = make_tensor<T>(in->shape);
  const std::size_t n = in->numel();
  for (std::size_t i = 0; i < n; ++i) out->values[i] = in->values[i] > T(0) ? in->values[i] : T(0);
  tape.record("relu", {in}, out, [in, out, n]() {
    if (!in->requires_grad) return;
    in->ensure_grad();
    // subgradient at 0 is 0
    for (std::size_t i = 0; i < n; ++i)
      if (in->values[i] > T(0)) in->grad[i] += out->grad[i];
  });
  return out;
}

template <typename T>
Ten<T> scale(Tape<T>& tape, const Ten<T>& in, T s) {
  auto out = make_tensor<T>(in->shape);
  for (std::size_t i = 0; i < in->numel(); ++i) out->values[i] = s * in->values[i];
  tape.record("scale", {in}, out, [in, out, s]() {
    if (!in->requires_grad) return;
    in->ensure_grad();
    for (std::size_t i = 0; i < in->numel(); ++i) in->grad[i] += s * out->grad[i];
  });
  return out;
}

template <typename T>
Ten<T> reshape(Tape<T>& tape, const Ten<T>& in, Shape shape) {
  check(shape_numel(shape) == in->numel(),
        cat("reshape: ", shape_str(in->shape), " cannot view as ", shape_str(shape)));
  auto out = make_tensor<T>(shape, in->values);
  tape.record("reshape", {in}, out, [in, out]() {
    if (!in->requires_grad) return;
    in->ensure_grad();
    for (std::size_t i = 0; i < in->numel(); ++i) in->grad[i] += out->grad[i];
  });
  return out;
}

template <typename T>
Ten<T> concat_cols(Tape<T>& tape, const Ten<T>& a, const Ten<T>& b) {
  check(a->rank() == 2 && b->rank() == 2 && a->shape[0] == b->shape[0],
        cat("concat: need matching batch, got ", shape_str(a->shape), " and ",
            shape_str(b->shape)));
  const std::size_t N = a->shape[0], A = a->shape[1], B = b->shape[1];
  auto out = make_tensor<T>({N, A + B});
  for (std::size_t n = 0; n < N; ++n) {
    std::copy_n(a->values.data() + n * A, A, out->values.data() + n * (A + B));
    std::copy_n(b->values.data() + n * B, B, out->values.data() + n * (A + B) + A);
  }
  tape.record("concat", {a, b}, out, [a, b, out, N, A, B]() {
    if (a->requires_grad) {
      a->ensure_grad();
      for (std::size_t n = 0; n < N; ++n)
        for (std::size_t i = 0; i < A; ++i) a->grad[n * A + i] += out->grad[n * (A + B) + i];
    }
    if (b->requires_grad) {
      b->ensure_grad();
      for (std::size_t n = 0; n < N; ++n)
        for (std::size_t i = 0; i < B; ++i) b->grad[n * B + i] += out->grad[n * (A + B) + A + i];
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// batch normalization
// ---------------------------------------------------------------------------

template <typename T>
struct BatchNormState {
  Ten<T> running_mean;  // [C]
  Ten<T> running_var;   // [C]
};

template <typename T>
BatchNormState<T> make_batchnorm_state(std::size_t channels) {
  BatchNormState<T> s;
  s.running_mean = make_tensor<T>({channels});
  s.running_var = full_like_shape<T>({channels}, T(1));
  return s;
}

// Per-channel statistics over all non-channel axes (channel axis = 1).
// Train mode normalizes by batch stats and updates running stats with
// momentum 0.9; eval mode uses the running stats. eps = 1e-5.
template <typename T>
Ten<T> batchnorm(Tape<T>& tape, const Ten<T>& in, const Ten<T>& gamma, const Ten<T>& beta,
                 BatchNormState<T>& state, bool train, T momentum = T(0.9),
                 T eps = T(1e-5)) {
  check(in->rank() >= 2, cat("batchnorm: need rank >= 2, got ", shape_str(in->shape)));
  const std::size_t N = in->shape[0], C = in->shape[1];
  const std::size_t S = in->numel() / (N * C);  // per-sample spatial extent
  check(gamma->numel() == C && beta->numel() == C,
        cat("batchnorm: gamma/beta must have ", C, " channels"));
  check(!train || N >= 2, "batchnorm: train mode requires batch size >= 2");
  const std::size_t M = N * S;

  auto out = make_tensor<T>(in->shape);
  auto xhat = std::make_shared<std::vector<T>>(in->numel());
  auto invstd = std::make_shared<std::vector<T>>(C);

  const long Cl = static_cast<long>(C);
#pragma omp parallel for schedule(static)
  for (long cl = 0; cl < Cl; ++cl) {
    const std::size_t c = static_cast<std::size_t>(cl);
    T mean, var;
    if (train) {
      double acc = 0;
      for (std::size_t n = 0; n < N; ++n) {
        const T* p = in->values.data() + (n * C + c) * S;
        for (std::size_t s = 0; s < S; ++s) acc += p[s];
      }
      mean = static_cast<T>(acc / static_cast<double>(M));
      double vacc = 0;
      for (std::size_t n = 0; n < N; ++n) {
        const T* p = in->values.data() + (n * C + c) * S;
        for (std::size_t s = 0; s < S; ++s) {
          const double dd = static_cast<double>(p[s]) - static_cast<double>(mean);
          vacc += dd * dd;
        }
      }
      var = static_cast<T>(vacc / static_cast<double>(M));
      state.running_mean->values[c] = momentum * state.running_mean->values[c] +
                                      (T(1) - momentum) * mean;
      state.running_var->values[c] = momentum * state.running_var->values[c] +
                                     (T(1) - momentum) * var;
    } else {
      mean = state.running_mean->values[c];
      var = state.running_var->values[c];
    }
    const T is = T(1) / std::sqrt(var + eps);
    (*invstd)[c] = is;
    const T g = gamma->values[c], bta = beta->values[c];
    for (std::size_t n = 0; n < N; ++n) {
      const T* p = in->values.data() + (n * C + c) * S;
      T* xh = xhat->data() + (n * C + c) * S;
      T* o = out->values.data() + (n * C + c) * S;
      for (std::size_t s = 0; s < S; ++s) {
        xh[s] = (p[s] - mean) * is;
        o[s] = g * xh[s] + bta;
      }
    }
  }

  tape.record("batchnorm", {in, gamma, beta}, out,
              [in, gamma, beta, out, xhat, invstd, N, C, S, M, train]() {
                const long Cl2 = static_cast<long>(C);
                const bool need_in = in->requires_grad;
                if (need_in) in->ensure_grad();
                if (gamma->requires_grad) gamma->ensure_grad();
                if (beta->requires_grad) beta->ensure_grad();
#pragma omp parallel for schedule(static)
                for (long cl = 0; cl < Cl2; ++cl) {
                  const std::size_t c = static_cast<std::size_t>(cl);
                  double gsum = 0, gxsum = 0;
                  for (std::size_t n = 0; n < N; ++n) {
                    const T* g = out->grad.data() + (n * C + c) * S;
                    const T* xh = xhat->data() + (n * C + c) * S;
                    for (std::size_t s = 0; s < S; ++s) {
                      gsum += g[s];
                      gxsum += static_cast<double>(g[s]) * xh[s];
                    }
                  }
                  if (gamma->requires_grad) gamma->grad[c] += static_cast<T>(gxsum);
                  if (beta->requires_grad) beta->grad[c] += static_cast<T>(gsum);
                  if (!need_in) continue;
                  const T gc = gamma->values[c], is = (*invstd)[c];
                  if (train) {
                    const T k = gc * is / static_cast<T>(M);
                    const T mg = static_cast<T>(gsum), mgx = static_cast<T>(gxsum);
                    for (std::size_t n = 0; n < N; ++n) {
                      const T* g = out->grad.data() + (n * C + c) * S;
                      const T* xh = xhat->data() + (n * C + c) * S;
                      T* gi = in->grad.data() + (n * C + c) * S;
                      for (std::size_t s = 0; s < S; ++s)
                        gi[s] += k * (static_cast<T>(M) * g[s] - mg - xh[s] * mgx);
                    }
                  } else {
                    const T k = gc * is;
                    for (std::size_t n = 0; n < N; ++n) {
                      const T* g = out->grad.data() + (n * C + c) * S;
                      T* gi = in->grad.data() + (n * C + c) * S;
                      for (std::size_t s = 0; s < S; ++s) gi[s] += k * g[s];
                    }
                  }
                }
              });
  return out;
}

// ---------------------------------------------------------------------------
// row-wise L2 normalization: y = x / (||x|| + eps)
// ---------------------------------------------------------------------------

template <typename T>
Ten<T> l2_normalize(Tape<T>& tape, const Ten<T>& in, T eps = T(1e-8)) {
  check(in->rank() == 2, cat("l2_normalize: need rank 2 (batch x dim), got ",
                             shape_str(in->shape)));
  const std::size_t N = in->shape[0], D = in->shape[1];
  auto out = make_tensor<T>(in->shape);
  auto norms = std::make_shared<std::vector<T>>(N);
  for (std::size_t n = 0; n < N; ++n) {
    const T* x = in->values.data() + n * D;
    double acc = 0;
    for (std::size_t d = 0; d < D; ++d) acc += static_cast<double>(x[d]) * x[d];
    const T nm = static_cast<T>(std::sqrt(acc));
    (*norms)[n] = nm;
    const T inv = T(1) / (nm + eps);
    T* y = out->values.data() + n * D;
    for (std::size_t d = 0; d < D; ++d) y[d] = x[d] * inv;
  }
  tape.record("l2_normalize", {in}, out, [in, out, norms, N, D, eps]() {
    if (!in->requires_grad) return;
    in->ensure_grad();
    for (std::size_t n = 0; n < N; ++n) {
      const T* x = in->values.data() + n * D;
      const T* g = out->grad.data() + n * D;
      T* gi = in->grad.data() + n * D;
      const T nm = (*norms)[n];
      const T s = nm + eps;
      double dot = 0;
      for (std::size_t d = 0; d < D; ++d) dot += static_cast<double>(g[d]) * x[d];
      const T proj = nm > T(1e-20) ? static_cast<T>(dot) / (s * s * nm) : T(0);
      for (std::size_t d = 0; d < D; ++d) gi[d] += g[d] / s - x[d] * proj;
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// losses
// ---------------------------------------------------------------------------

// Batch mean of y*d^2 + (1-y)*max(eta - d, 0)^2 with d = ||f_v - f_a||_2.
template <typename T>
Ten<T> contrastive_loss(Tape<T>& tape, const Ten<T>& f_v, const Ten<T>& f_a,
                        const std::vector<int>& y, T eta) {
  check(f_v->rank() == 2 && f_a->rank() == 2, "contrastive_loss: embeddings must be rank 2");
  check(f_v->shape == f_a->shape, cat("contrastive_loss: batch shapes differ, ",
                                      shape_str(f_v->shape), " vs ", shape_str(f_a->shape)));
  check(y.size() == f_v->shape[0], cat("contrastive_loss: ", y.size(), " labels for batch ",
                                       f_v->shape[0]));
  check(eta > T(0), "contrastive_loss: eta must be > 0");
  for (int v : y) check(v == 0 || v == 1, cat("contrastive_loss: label ", v, " not in {0,1}"));

  const std::size_t N = f_v->shape[0], D = f_v->shape[1];
  auto dist = std::make_shared<std::vector<T>>(N);
  double loss = 0;
  for (std::size_t n = 0; n < N; ++n) {
    const T* a = f_v->values.data() + n * D;
    const T* b = f_a->values.data() + n * D;
    double d2 = 0;
    for (std::size_t i = 0; i < D; ++i) {
      const double df = static_cast<double>(a[i]) - b[i];
      d2 += df * df;
    }
    const double d = std::sqrt(d2);
    (*dist)[n] = static_cast<T>(d);
    if (y[n] == 1) {
      loss += d2;
    } else {
      const double m = std::max(static_cast<double>(eta) - d, 0.0);
      loss += m * m;
    }
  }
  auto out = scalar_tensor<T>(static_cast<T>(loss / static_cast<double>(N)));
  auto labels = std::make_shared<std::vector<int>>(y);
  tape.record("contrastive_loss", {f_v, f_a}, out,
              [f_v, f_a, out, dist, labels, N, D, eta]() {
                const T g = out->grad[0];
                const T invN = T(1) / static_cast<T>(N);
                if (f_v->requires_grad) f_v->ensure_grad();
                if (f_a->requires_grad) f_a->ensure_grad();
                for (std::size_t n = 0; n < N; ++n) {
                  const T* a = f_v->values.data() + n * D;
                  const T* b = f_a->values.data() + n * D;
                  T coef;
                  if ((*labels)[n] == 1) {
                    coef = T(2) * invN * g;
                  } else {
                    const T d = (*dist)[n];
                    if (d >= eta || d < T(1e-12)) continue;  // hinge saturated or zero distance
                    coef = T(-2) * (eta - d) / d * invN * g;
                  }
                  for (std::size_t i = 0; i < D; ++i) {
                    const T df = a[i] - b[i];
                    if (f_v->requires_grad) f_v->grad[n * D + i] += coef * df;
                    if (f_a->requires_grad) f_a->grad[n * D + i] -= coef * df;
                  }
                }
              });
  return out;
}

// Mean negative log-softmax of the true class, computed with the
// log-sum-exp max shift.
template <typename T>
Ten<T> cross_entropy(Tape<T>& tape, const Ten<T>& logits, const std::vector<int>& labels) {
  check(logits->rank() == 2, "cross_entropy: logits must be rank 2");
  const std::size_t N = logits->shape[0], K = logits->shape[1];
  check(labels.size() == N, cat("cross_entropy: ", labels.size(), " labels for batch ", N));
  for (int l : labels)
    check(l >= 0 && static_cast<std::size_t>(l) < K,
          cat("cross_entropy: label ", l, " out of range [0, ", K, ")"));

  auto softmax = std::make_shared<std::vector<T>>(N * K);
  double loss = 0;
  for (std::size_t n = 0; n < N; ++n) {
    const T* z = logits->values.data() + n * K;
    T zmax = z[0];
    for (std::size_t k = 1; k < K; ++k) zmax = std::max(zmax, z[k]);
    double denom = 0;
    for (std::size_t k = 0; k < K; ++k) denom += std::exp(static_cast<double>(z[k] - zmax));
    const double logden = std::log(denom);
    for (std::size_t k = 0; k < K; ++k)
      (*softmax)[n * K + k] =
          static_cast<T>(std::exp(static_cast<double>(z[k] - zmax)) / denom);
    loss += logden - static_cast<double>(z[labels[n]] - zmax);
  }
  auto out = scalar_tensor<T>(static_cast<T>(loss / static_cast<double>(N)));
  auto lab = std::make_shared<std::vector<int>>(labels);
  tape.record("cross_entropy", {logits}, out, [logits, out, softmax, lab, N, K]() {
    if (!logits->requires_grad) return;
    logits->ensure_grad();
    const T g = out->grad[0] / static_cast<T>(N);
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t k = 0; k < K; ++k) {
        T v = (*softmax)[n * K + k];
        if (static_cast<std::size_t>((*lab)[n]) == k) v -= T(1);
        logits->grad[n * K + k] += g * v;
      }
  });
  return out;
}

// Scalar sum over the batch of squared Euclidean distances. Used as the
// similarity target for gradient-based localization (negated by the caller).
template <typename T>
Ten<T> squared_distance_sum(Tape<T>& tape, const Ten<T>& a, const Ten<T>& b) {
  check(a->shape == b->shape, "squared_distance_sum: shapes differ");
  double acc = 0;
  for (std::size_t i = 0; i < a->numel(); ++i) {
    const double d = static_cast<double>(a->values[i]) - b->values[i];
    acc += d * d;
  }
  auto out = scalar_tensor<T>(static_cast<T>(acc));
  tape.record("squared_distance_sum", {a, b}, out, [a, b, out]() {
    const T g = out->grad[0];
    if (a->requires_grad) a->ensure_grad();
    if (b->requires_grad) b->ensure_grad();
    for (std::size_t i = 0; i < a->numel(); ++i) {
      const T d = a->values[i] - b->values[i];
      if (a->requires_grad) a->grad[i] += T(2) * d * g;
      if (b->requires_grad) b->grad[i] -= T(2) * d * g;
    }
  });
  return out;
}

// Fixed-weight contraction to a scalar; the gradcheck harness uses this to
// reduce any op output to a differentiable scalar.
template <typename T>
Ten<T> inner(Tape<T>& tape, const Ten<T>& in, std::shared_ptr<std::vector<T>> weights) {
  check(weights->size() == in->numel(), "inner: weight count mismatch");
  double acc = 0;
  for (std::size_t i = 0; i < in->numel(); ++i)
    acc += static_cast<double>(in->values[i]) * (*weights)[i];
  auto out = scalar_tensor<T>(static_cast<T>(acc));
  tape.record("inner", {in}, out, [in, out, weights]() {
    if (!in->requires_grad) return;
    in->ensure_grad();
    const T g = out->grad[0];
    for (std::size_t i = 0; i < in->numel(); ++i) in->grad[i] += g * (*weights)[i];
  });
  return out;
}

}  // namespace avsync::ops
