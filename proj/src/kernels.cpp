// Kernel implementations, explicitly instantiated for float and double. The
// row kernels are templated on the output width so the accumulator row is a
// fixed-size register array and the compiler fully unrolls the tap loops.

#include "avsync/kernels.hpp"

namespace avsync::kernels {

namespace {

// widths used by the desk models plus small powers; anything else takes the
// runtime-width fallback
#define AVSYNC_FOR_EACH_WIDTH(X) \
  X(1) X(2) X(3) X(4) X(5) X(6) X(7) X(8) X(10) X(12) X(14) X(16) X(20) X(24) X(28) X(32) X(40) X(56) X(64)

template <typename T, int WO>
void forward_rows(const T* __restrict__ inp, const T* __restrict__ w, const T* __restrict__ b,
                  T* __restrict__ out, const Conv3dDims& d, std::size_t Tp, std::size_t Hp,
                  std::size_t Wp, std::size_t n) {
  const std::size_t in_chw = Tp * Hp * Wp, in_hw = Hp * Wp;
  const std::size_t out_chw = d.To * d.Ho * d.Wo, out_hw = d.Ho * d.Wo;
  const std::size_t w_ck = d.Ci * d.Kt * d.Kh * d.Kw, w_k = d.Kt * d.Kh * d.Kw;
  const T* in0 = inp + n * d.Ci * in_chw;
  for (std::size_t oc = 0; oc < d.Co; ++oc) {
    const T* wc0 = w + oc * w_ck;
    T* outc = out + (n * d.Co + oc) * out_chw;
    for (std::size_t to = 0; to < d.To; ++to) {
      for (std::size_t ho = 0; ho < d.Ho; ++ho) {
        T acc[WO];
        for (int wo = 0; wo < WO; ++wo) acc[wo] = b[oc];
        const T* inc = in0;
        const T* wc = wc0;
        for (std::size_t ic = 0; ic < d.Ci; ++ic, inc += in_chw, wc += w_k) {
          for (std::size_t kt = 0; kt < d.Kt; ++kt) {
            const T* slab = inc + (to * d.st + kt) * in_hw + ho * d.sh * Wp;
            const T* wrow = wc + kt * d.Kh * d.Kw;
            for (std::size_t kh = 0; kh < d.Kh; ++kh) {
              const T* __restrict__ row = slab + kh * Wp;
              for (std::size_t kw = 0; kw < d.Kw; ++kw) {
                const T wv = wrow[kh * d.Kw + kw];
                if (d.sw == 1) {
#pragma omp simd
                  for (int wo = 0; wo < WO; ++wo) acc[wo] += wv * row[wo + kw];
                } else {
#pragma omp simd
                  for (int wo = 0; wo < WO; ++wo)
                    acc[wo] += wv * row[static_cast<std::size_t>(wo) * d.sw + kw];
                }
              }
            }
          }
        }
        T* orow = outc + to * out_hw + ho * d.Wo;
        for (int wo = 0; wo < WO; ++wo) orow[wo] = acc[wo];
      }
    }
  }
}

template <typename T>
void forward_rows_generic(const T* __restrict__ inp, const T* __restrict__ w,
                          const T* __restrict__ b, T* __restrict__ out, const Conv3dDims& d,
                          std::size_t Tp, std::size_t Hp, std::size_t Wp, std::size_t n) {
  const std::size_t in_chw = Tp * Hp * Wp, in_hw = Hp * Wp;
  const std::size_t out_chw = d.To * d.Ho * d.Wo, out_hw = d.Ho * d.Wo;
  const std::size_t w_ck = d.Ci * d.Kt * d.Kh * d.Kw, w_k = d.Kt * d.Kh * d.Kw;
  const T* in0 = inp + n * d.Ci * in_chw;
  std::vector<T> acc(d.Wo);
  for (std::size_t oc = 0; oc < d.Co; ++oc) {
    const T* wc0 = w + oc * w_ck;
    T* outc = out + (n * d.Co + oc) * out_chw;
    for (std::size_t to = 0; to < d.To; ++to) {
      for (std::size_t ho = 0; ho < d.Ho; ++ho) {
        std::fill(acc.begin(), acc.end(), b[oc]);
        const T* inc = in0;
        const T* wc = wc0;
        for (std::size_t ic = 0; ic < d.Ci; ++ic, inc += in_chw, wc += w_k) {
          for (std::size_t kt = 0; kt < d.Kt; ++kt) {
            const T* slab = inc + (to * d.st + kt) * in_hw + ho * d.sh * Wp;
            const T* wrow = wc + kt * d.Kh * d.Kw;
            for (std::size_t kh = 0; kh < d.Kh; ++kh) {
              const T* __restrict__ row = slab + kh * Wp;
              for (std::size_t kw = 0; kw < d.Kw; ++kw) {
                const T wv = wrow[kh * d.Kw + kw];
                T* __restrict__ a = acc.data();
#pragma omp simd
                for (std::size_t wo = 0; wo < d.Wo; ++wo) a[wo] += wv * row[wo * d.sw + kw];
              }
            }
          }
        }
        T* orow = outc + to * out_hw + ho * d.Wo;
        for (std::size_t wo = 0; wo < d.Wo; ++wo) orow[wo] = acc[wo];
      }
    }
  }
}

template <typename T>
void forward_sample(const T* inp, const T* w, const T* b, T* out, const Conv3dDims& d,
                    std::size_t Tp, std::size_t Hp, std::size_t Wp, std::size_t n) {
  switch (d.Wo) {
#define AVSYNC_CASE(W)                                            \
  case W:                                                         \
    forward_rows<T, W>(inp, w, b, out, d, Tp, Hp, Wp, n);         \
    return;
    AVSYNC_FOR_EACH_WIDTH(AVSYNC_CASE)
#undef AVSYNC_CASE
    default: forward_rows_generic(inp, w, b, out, d, Tp, Hp, Wp, n); return;
  }
}

// weight gradient for one (oc, ic) pair over padded input rows
template <typename T, int WO>
void backward_weight_rows(const T* __restrict__ gout, const T* __restrict__ inp,
                          T* __restrict__ lw, const Conv3dDims& d, std::size_t Tp,
                          std::size_t Hp, std::size_t Wp, std::size_t n, std::size_t oc,
                          std::size_t ic) {
  const std::size_t in_chw = Tp * Hp * Wp, in_hw = Hp * Wp;
  const std::size_t out_chw = d.To * d.Ho * d.Wo, out_hw = d.Ho * d.Wo;
  const T* gc = gout + (n * d.Co + oc) * out_chw;
  const T* inc = inp + (n * d.Ci + ic) * in_chw;
  for (std::size_t kt = 0; kt < d.Kt; ++kt) {
    for (std::size_t kh = 0; kh < d.Kh; ++kh) {
      for (std::size_t kw = 0; kw < d.Kw; ++kw) {
        T acc = T(0);
        for (std::size_t to = 0; to < d.To; ++to) {
          const T* slab = inc + (to * d.st + kt) * in_hw + kh * Wp + kw;
          const T* grow = gc + to * out_hw;
          for (std::size_t ho = 0; ho < d.Ho; ++ho) {
            const T* __restrict__ src = slab + ho * d.sh * Wp;
            const T* __restrict__ g = grow + ho * d.Wo;
            T a0 = T(0);
            if (d.sw == 1) {
#pragma omp simd reduction(+ : a0)
              for (int wo = 0; wo < WO; ++wo) a0 += g[wo] * src[wo];
            } else {
#pragma omp simd reduction(+ : a0)
              for (int wo = 0; wo < WO; ++wo)
                a0 += g[wo] * src[static_cast<std::size_t>(wo) * d.sw];
            }
            acc += a0;
          }
        }
        lw[(kt * d.Kh + kh) * d.Kw + kw] += acc;
      }
    }
  }
}

template <typename T>
void backward_weight_rows_generic(const T* __restrict__ gout, const T* __restrict__ inp,
                                  T* __restrict__ lw, const Conv3dDims& d, std::size_t Tp,
                                  std::size_t Hp, std::size_t Wp, std::size_t n, std::size_t oc,
                                  std::size_t ic) {
  const std::size_t in_chw = Tp * Hp * Wp, in_hw = Hp * Wp;
  const std::size_t out_chw = d.To * d.Ho * d.Wo, out_hw = d.Ho * d.Wo;
  const T* gc = gout + (n * d.Co + oc) * out_chw;
  const T* inc = inp + (n * d.Ci + ic) * in_chw;
  for (std::size_t kt = 0; kt < d.Kt; ++kt)
    for (std::size_t kh = 0; kh < d.Kh; ++kh)
      for (std::size_t kw = 0; kw < d.Kw; ++kw) {
        T acc = T(0);
        for (std::size_t to = 0; to < d.To; ++to) {
          const T* slab = inc + (to * d.st + kt) * in_hw + kh * Wp + kw;
          const T* grow = gc + to * out_hw;
          for (std::size_t ho = 0; ho < d.Ho; ++ho) {
            const T* __restrict__ src = slab + ho * d.sh * Wp;
            const T* __restrict__ g = grow + ho * d.Wo;
            T a0 = T(0);
#pragma omp simd reduction(+ : a0)
            for (std::size_t wo = 0; wo < d.Wo; ++wo) a0 += g[wo] * src[wo * d.sw];
            acc += a0;
          }
        }
        lw[(kt * d.Kh + kh) * d.Kw + kw] += acc;
      }
}

template <typename T>
void backward_weight_channel(const T* gout, const T* inp, T* gw, const Conv3dDims& d,
                             std::size_t Tp, std::size_t Hp, std::size_t Wp, std::size_t oc) {
  const std::size_t w_ck = d.Ci * d.Kt * d.Kh * d.Kw, w_k = d.Kt * d.Kh * d.Kw;
  std::vector<T> local(w_ck, T(0));
  for (std::size_t n = 0; n < d.N; ++n) {
    for (std::size_t ic = 0; ic < d.Ci; ++ic) {
      T* lw = local.data() + ic * w_k;
      switch (d.Wo) {
#define AVSYNC_CASE(W)                                                         \
  case W:                                                                      \
    backward_weight_rows<T, W>(gout, inp, lw, d, Tp, Hp, Wp, n, oc, ic);       \
    break;
        AVSYNC_FOR_EACH_WIDTH(AVSYNC_CASE)
#undef AVSYNC_CASE
        default:
          backward_weight_rows_generic(gout, inp, lw, d, Tp, Hp, Wp, n, oc, ic);
          break;
      }
    }
  }
  T* gwc = gw + oc * w_ck;
  for (std::size_t i = 0; i < w_ck; ++i) gwc[i] += local[i];
}

// input gradient in full-correlation form over a zero-extended gradient row;
// stride-1 only (the strided path scatters instead)
template <typename T, int WI>
void backward_input_rows(const T* __restrict__ gpad, const T* __restrict__ w,
                         T* __restrict__ gin, const Conv3dDims& d, std::size_t Tg,
                         std::size_t Hg, std::size_t Wg, std::size_t n) {
  const std::size_t in_chw = d.Ti * d.Hi * d.Wi, in_hw = d.Hi * d.Wi;
  const std::size_t g_chw = Tg * Hg * Wg, g_hw = Hg * Wg;
  const std::size_t w_ck = d.Ci * d.Kt * d.Kh * d.Kw, w_k = d.Kt * d.Kh * d.Kw;
  // padded gout coordinate of gin element (ti,hi,wi) under tap k is
  // (ti + pt + K-1 - k), always in bounds of the zero-extended buffer
  const std::size_t t_base = d.pt + d.Kt - 1, h_base = d.ph + d.Kh - 1, w_base = d.pw + d.Kw - 1;
  for (std::size_t ic = 0; ic < d.Ci; ++ic) {
    T* ginc = gin + (n * d.Ci + ic) * in_chw;
    for (std::size_t ti = 0; ti < d.Ti; ++ti) {
      for (std::size_t hi = 0; hi < d.Hi; ++hi) {
        T acc[WI];
        for (int wi = 0; wi < WI; ++wi) acc[wi] = T(0);
        for (std::size_t oc = 0; oc < d.Co; ++oc) {
          const T* gc = gpad + (n * d.Co + oc) * g_chw;
          const T* wc = w + oc * w_ck + ic * w_k;
          for (std::size_t kt = 0; kt < d.Kt; ++kt) {
            const T* slab = gc + (ti + t_base - kt) * g_hw;
            for (std::size_t kh = 0; kh < d.Kh; ++kh) {
              const T* __restrict__ grow = slab + (hi + h_base - kh) * Wg + w_base;
              const T* __restrict__ wrow = wc + (kt * d.Kh + kh) * d.Kw;
              for (std::size_t kw = 0; kw < d.Kw; ++kw) {
                const T wv = wrow[kw];
                const T* __restrict__ gk = grow - kw;
#pragma omp simd
                for (int wi = 0; wi < WI; ++wi) acc[wi] += wv * gk[wi];
              }
            }
          }
        }
        T* girow = ginc + ti * in_hw + hi * d.Wi;
        for (int wi = 0; wi < WI; ++wi) girow[wi] += acc[wi];
      }
    }
  }
}

template <typename T>
void backward_input_rows_generic(const T* __restrict__ gpad, const T* __restrict__ w,
                                 T* __restrict__ gin, const Conv3dDims& d, std::size_t Tg,
                                 std::size_t Hg, std::size_t Wg, std::size_t n) {
  const std::size_t in_chw = d.Ti * d.Hi * d.Wi, in_hw = d.Hi * d.Wi;
  const std::size_t g_chw = Tg * Hg * Wg, g_hw = Hg * Wg;
  const std::size_t w_ck = d.Ci * d.Kt * d.Kh * d.Kw, w_k = d.Kt * d.Kh * d.Kw;
  const std::size_t t_base = d.pt + d.Kt - 1, h_base = d.ph + d.Kh - 1, w_base = d.pw + d.Kw - 1;
  std::vector<T> acc(d.Wi);
  for (std::size_t ic = 0; ic < d.Ci; ++ic) {
    T* ginc = gin + (n * d.Ci + ic) * in_chw;
    for (std::size_t ti = 0; ti < d.Ti; ++ti) {
      for (std::size_t hi = 0; hi < d.Hi; ++hi) {
        std::fill(acc.begin(), acc.end(), T(0));
        for (std::size_t oc = 0; oc < d.Co; ++oc) {
          const T* gc = gpad + (n * d.Co + oc) * g_chw;
          const T* wc = w + oc * w_ck + ic * w_k;
          for (std::size_t kt = 0; kt < d.Kt; ++kt) {
            const T* slab = gc + (ti + t_base - kt) * g_hw;
            for (std::size_t kh = 0; kh < d.Kh; ++kh) {
              const T* __restrict__ grow = slab + (hi + h_base - kh) * Wg + w_base;
              const T* __restrict__ wrow = wc + (kt * d.Kh + kh) * d.Kw;
              for (std::size_t kw = 0; kw < d.Kw; ++kw) {
                const T wv = wrow[kw];
                const T* __restrict__ gk = grow - kw;
                T* __restrict__ a = acc.data();
#pragma omp simd
                for (std::size_t wi = 0; wi < d.Wi; ++wi) a[wi] += wv * gk[wi];
              }
            }
          }
        }
        T* girow = ginc + ti * in_hw + hi * d.Wi;
        for (std::size_t wi = 0; wi < d.Wi; ++wi) girow[wi] += acc[wi];
      }
    }
  }
}

// zero-extends gout so every (input, tap) pair indexes in bounds
template <typename T>
std::vector<T> pad_gout(const T* gout, const Conv3dDims& d, std::size_t& Tg, std::size_t& Hg,
                        std::size_t& Wg) {
  Tg = d.To + 2 * (d.Kt - 1);
  Hg = d.Ho + 2 * (d.Kh - 1);
  Wg = d.Wo + 2 * (d.Kw - 1);
  std::vector<T> gpad(d.N * d.Co * Tg * Hg * Wg, T(0));
  const std::size_t g_chw = Tg * Hg * Wg, g_hw = Hg * Wg;
  const std::size_t o_chw = d.To * d.Ho * d.Wo, o_hw = d.Ho * d.Wo;
  for (std::size_t nc = 0; nc < d.N * d.Co; ++nc) {
    const T* src = gout + nc * o_chw;
    T* dst = gpad.data() + nc * g_chw + (d.Kt - 1) * g_hw + (d.Kh - 1) * Wg + (d.Kw - 1);
    for (std::size_t to = 0; to < d.To; ++to)
      for (std::size_t ho = 0; ho < d.Ho; ++ho)
        std::copy_n(src + to * o_hw + ho * d.Wo, d.Wo, dst + to * g_hw + ho * Wg);
  }
  return gpad;
}

template <typename T>
void backward_input_sample_strided(const T* __restrict__ gout, const T* __restrict__ w,
                                   T* __restrict__ gin, const Conv3dDims& d, std::size_t n) {
  const std::size_t in_chw = d.Ti * d.Hi * d.Wi, in_hw = d.Hi * d.Wi;
  const std::size_t out_chw = d.To * d.Ho * d.Wo, out_hw = d.Ho * d.Wo;
  const std::size_t w_ck = d.Ci * d.Kt * d.Kh * d.Kw, w_k = d.Kt * d.Kh * d.Kw;
  for (std::size_t oc = 0; oc < d.Co; ++oc) {
    const T* gc = gout + (n * d.Co + oc) * out_chw;
    for (std::size_t ic = 0; ic < d.Ci; ++ic) {
      T* ginc = gin + (n * d.Ci + ic) * in_chw;
      const T* wc = w + oc * w_ck + ic * w_k;
      for (std::size_t to = 0; to < d.To; ++to) {
        for (std::size_t kt = 0; kt < d.Kt; ++kt) {
          const std::size_t tq = to * d.st + kt;
          if (tq < d.pt || tq - d.pt >= d.Ti) continue;
          const std::size_t ti = tq - d.pt;
          for (std::size_t ho = 0; ho < d.Ho; ++ho) {
            const T* __restrict__ grow = gc + to * out_hw + ho * d.Wo;
            for (std::size_t kh = 0; kh < d.Kh; ++kh) {
              const std::size_t hq = ho * d.sh + kh;
              if (hq < d.ph || hq - d.ph >= d.Hi) continue;
              T* __restrict__ ginrow = ginc + ti * in_hw + (hq - d.ph) * d.Wi;
              const T* __restrict__ wrow = wc + (kt * d.Kh + kh) * d.Kw;
              for (std::size_t kw = 0; kw < d.Kw; ++kw) {
                const T wv = wrow[kw];
                for (std::size_t wo = 0; wo < d.Wo; ++wo) {
                  const std::size_t wq = wo * d.sw + kw;
                  if (wq < d.pw || wq - d.pw >= d.Wi) continue;
                  ginrow[wq - d.pw] += wv * grow[wo];
                }
              }
            }
          }
        }
      }
    }
  }
}

template <typename T>
void backward_input_dispatch(const T* gpad, const T* w, T* gin, const Conv3dDims& d,
                             std::size_t Tg, std::size_t Hg, std::size_t Wg, std::size_t n) {
  switch (d.Wi) {
#define AVSYNC_CASE(W)                                                 \
  case W:                                                              \
    backward_input_rows<T, W>(gpad, w, gin, d, Tg, Hg, Wg, n);         \
    return;
    AVSYNC_FOR_EACH_WIDTH(AVSYNC_CASE)
#undef AVSYNC_CASE
    default: backward_input_rows_generic(gpad, w, gin, d, Tg, Hg, Wg, n); return;
  }
}

}  // namespace

template <typename T>
PaddedVolume<T> pad_input(const T* in, const Conv3dDims& d) {
  PaddedVolume<T> p;
  p.Tp = d.Ti + 2 * d.pt;
  p.Hp = d.Hi + 2 * d.ph;
  p.Wp = d.Wi + 2 * d.pw;
  p.data.assign(d.N * d.Ci * p.Tp * p.Hp * p.Wp, T(0));
  const std::size_t i_chw = d.Ti * d.Hi * d.Wi, i_hw = d.Hi * d.Wi;
  const std::size_t p_chw = p.Tp * p.Hp * p.Wp, p_hw = p.Hp * p.Wp;
  const long NC = static_cast<long>(d.N * d.Ci);
#pragma omp parallel for schedule(static)
  for (long nc = 0; nc < NC; ++nc) {
    const T* src = in + nc * i_chw;
    T* dst = p.data.data() + nc * p_chw + d.pt * p_hw + d.ph * p.Wp + d.pw;
    for (std::size_t t = 0; t < d.Ti; ++t)
      for (std::size_t h = 0; h < d.Hi; ++h)
        std::copy_n(src + t * i_hw + h * d.Wi, d.Wi, dst + t * p_hw + h * p.Wp);
  }
  return p;
}

template <typename T>
void conv3d_forward_serial(const PaddedVolume<T>& in, const T* w, const T* b, T* out,
                           const Conv3dDims& d) {
  for (std::size_t n = 0; n < d.N; ++n)
    forward_sample(in.data.data(), w, b, out, d, in.Tp, in.Hp, in.Wp, n);
}

template <typename T>
void conv3d_forward_omp(const PaddedVolume<T>& in, const T* w, const T* b, T* out,
                        const Conv3dDims& d) {
  const long N = static_cast<long>(d.N);
#pragma omp parallel for schedule(static)
  for (long n = 0; n < N; ++n)
    forward_sample(in.data.data(), w, b, out, d, in.Tp, in.Hp, in.Wp,
                   static_cast<std::size_t>(n));
}

template <typename T>
void conv3d_backward_bias(const T* gout, T* gb, const Conv3dDims& d) {
  const std::size_t out_chw = d.To * d.Ho * d.Wo;
  for (std::size_t oc = 0; oc < d.Co; ++oc) {
    T acc = T(0);
    for (std::size_t n = 0; n < d.N; ++n) {
      const T* g = gout + (n * d.Co + oc) * out_chw;
      for (std::size_t i = 0; i < out_chw; ++i) acc += g[i];
    }
    gb[oc] += acc;
  }
}

template <typename T>
void conv3d_backward_weight_serial(const T* gout, const PaddedVolume<T>& in, T* gw,
                                   const Conv3dDims& d) {
  for (std::size_t oc = 0; oc < d.Co; ++oc)
    backward_weight_channel(gout, in.data.data(), gw, d, in.Tp, in.Hp, in.Wp, oc);
}

template <typename T>
void conv3d_backward_weight_omp(const T* gout, const PaddedVolume<T>& in, T* gw,
                                const Conv3dDims& d) {
  const long Co = static_cast<long>(d.Co);
#pragma omp parallel for schedule(static)
  for (long oc = 0; oc < Co; ++oc)
    backward_weight_channel(gout, in.data.data(), gw, d, in.Tp, in.Hp, in.Wp,
                            static_cast<std::size_t>(oc));
}

template <typename T>
void conv3d_backward_input_serial(const T* gout, const T* w, T* gin, const Conv3dDims& d) {
  if (d.st == 1 && d.sh == 1 && d.sw == 1) {
    std::size_t Tg, Hg, Wg;
    auto gpad = pad_gout(gout, d, Tg, Hg, Wg);
    for (std::size_t n = 0; n < d.N; ++n)
      backward_input_dispatch(gpad.data(), w, gin, d, Tg, Hg, Wg, n);
  } else {
    for (std::size_t n = 0; n < d.N; ++n) backward_input_sample_strided(gout, w, gin, d, n);
  }
}

template <typename T>
void conv3d_backward_input_omp(const T* gout, const T* w, T* gin, const Conv3dDims& d) {
  const long N = static_cast<long>(d.N);
  if (d.st == 1 && d.sh == 1 && d.sw == 1) {
    std::size_t Tg, Hg, Wg;
    auto gpad = pad_gout(gout, d, Tg, Hg, Wg);
#pragma omp parallel for schedule(static)
    for (long n = 0; n < N; ++n)
      backward_input_dispatch(gpad.data(), w, gin, d, Tg, Hg, Wg,
                              static_cast<std::size_t>(n));
  } else {
#pragma omp parallel for schedule(static)
    for (long n = 0; n < N; ++n)
      backward_input_sample_strided(gout, w, gin, d, static_cast<std::size_t>(n));
  }
}

// ---------------------------------------------------------------------------
// pooling
// ---------------------------------------------------------------------------

namespace {

template <typename T>
void maxpool_plane(const T* __restrict__ in, T* __restrict__ out,
                   std::int64_t* __restrict__ argmax, const Pool3dDims& d, std::size_t nc) {
  const std::size_t in_thw = d.Ti * d.Hi * d.Wi, in_hw = d.Hi * d.Wi;
  const std::size_t out_thw = d.To * d.Ho * d.Wo;
  const T* inp = in + nc * in_thw;
  T* outp = out + nc * out_thw;
  std::int64_t* amp = argmax + nc * out_thw;
  std::size_t o = 0;
  for (std::size_t to = 0; to < d.To; ++to)
    for (std::size_t ho = 0; ho < d.Ho; ++ho)
      for (std::size_t wo = 0; wo < d.Wo; ++wo, ++o) {
        const std::size_t t0 = to * d.st, h0 = ho * d.sh, w0 = wo * d.sw;
        T best = inp[t0 * in_hw + h0 * d.Wi + w0];
        std::size_t besti = t0 * in_hw + h0 * d.Wi + w0;
        for (std::size_t kt = 0; kt < d.Kt; ++kt)
          for (std::size_t kh = 0; kh < d.Kh; ++kh) {
            const std::size_t base = (t0 + kt) * in_hw + (h0 + kh) * d.Wi + w0;
            for (std::size_t kw = 0; kw < d.Kw; ++kw) {
              if (inp[base + kw] > best) {
                best = inp[base + kw];
                besti = base + kw;
              }
            }
          }
        outp[o] = best;
        amp[o] = static_cast<std::int64_t>(besti);
      }
}

template <typename T>
void avgpool_plane(const T* __restrict__ in, T* __restrict__ out, const Pool3dDims& d,
                   std::size_t nc) {
  const std::size_t in_thw = d.Ti * d.Hi * d.Wi, in_hw = d.Hi * d.Wi;
  const std::size_t out_thw = d.To * d.Ho * d.Wo;
  const T inv = T(1) / static_cast<T>(d.Kt * d.Kh * d.Kw);
  const T* inp = in + nc * in_thw;
  T* outp = out + nc * out_thw;
  std::size_t o = 0;
  for (std::size_t to = 0; to < d.To; ++to)
    for (std::size_t ho = 0; ho < d.Ho; ++ho)
      for (std::size_t wo = 0; wo < d.Wo; ++wo, ++o) {
        T acc = T(0);
        for (std::size_t kt = 0; kt < d.Kt; ++kt)
          for (std::size_t kh = 0; kh < d.Kh; ++kh) {
            const std::size_t base =
                (to * d.st + kt) * in_hw + (ho * d.sh + kh) * d.Wi + wo * d.sw;
            for (std::size_t kw = 0; kw < d.Kw; ++kw) acc += inp[base + kw];
          }
        outp[o] = acc * inv;
      }
}

}  // namespace

template <typename T>
void maxpool3d_forward_serial(const T* in, T* out, std::int64_t* argmax, const Pool3dDims& d) {
  for (std::size_t nc = 0; nc < d.N * d.C; ++nc) maxpool_plane(in, out, argmax, d, nc);
}

template <typename T>
void maxpool3d_forward_omp(const T* in, T* out, std::int64_t* argmax, const Pool3dDims& d) {
  const long NC = static_cast<long>(d.N * d.C);
#pragma omp parallel for schedule(static)
  for (long nc = 0; nc < NC; ++nc)
    maxpool_plane(in, out, argmax, d, static_cast<std::size_t>(nc));
}

template <typename T>
void maxpool3d_backward(const T* gout, const std::int64_t* argmax, T* gin, const Pool3dDims& d) {
  const std::size_t in_thw = d.Ti * d.Hi * d.Wi, out_thw = d.To * d.Ho * d.Wo;
  const long NC = static_cast<long>(d.N * d.C);
#pragma omp parallel for schedule(static)
  for (long nc = 0; nc < NC; ++nc) {
    const T* g = gout + nc * out_thw;
    const std::int64_t* am = argmax + nc * out_thw;
    T* gi = gin + nc * in_thw;
    for (std::size_t o = 0; o < out_thw; ++o) gi[am[o]] += g[o];
  }
}

template <typename T>
void avgpool3d_forward_serial(const T* in, T* out, const Pool3dDims& d) {
  for (std::size_t nc = 0; nc < d.N * d.C; ++nc) avgpool_plane(in, out, d, nc);
}

template <typename T>
void avgpool3d_forward_omp(const T* in, T* out, const Pool3dDims& d) {
  const long NC = static_cast<long>(d.N * d.C);
#pragma omp parallel for schedule(static)
  for (long nc = 0; nc < NC; ++nc) avgpool_plane(in, out, d, static_cast<std::size_t>(nc));
}

template <typename T>
void avgpool3d_backward(const T* gout, T* gin, const Pool3dDims& d) {
  const std::size_t in_thw = d.Ti * d.Hi * d.Wi, in_hw = d.Hi * d.Wi;
  const std::size_t out_thw = d.To * d.Ho * d.Wo;
  const T inv = T(1) / static_cast<T>(d.Kt * d.Kh * d.Kw);
  const long NC = static_cast<long>(d.N * d.C);
#pragma omp parallel for schedule(static)
  for (long nc = 0; nc < NC; ++nc) {
    const T* g = gout + nc * out_thw;
    T* gi = gin + nc * in_thw;
    std::size_t o = 0;
    for (std::size_t to = 0; to < d.To; ++to)
      for (std::size_t ho = 0; ho < d.Ho; ++ho)
        for (std::size_t wo = 0; wo < d.Wo; ++wo, ++o) {
          const T gv = g[o] * inv;
          for (std::size_t kt = 0; kt < d.Kt; ++kt)
            for (std::size_t kh = 0; kh < d.Kh; ++kh) {
              const std::size_t base =
                  (to * d.st + kt) * in_hw + (ho * d.sh + kh) * d.Wi + wo * d.sw;
              for (std::size_t kw = 0; kw < d.Kw; ++kw) gi[base + kw] += gv;
            }
        }
  }
}

#define AVSYNC_INSTANTIATE(T)                                                                  \
  template PaddedVolume<T> pad_input<T>(const T*, const Conv3dDims&);                          \
  template void conv3d_forward_serial<T>(const PaddedVolume<T>&, const T*, const T*, T*,      \
                                         const Conv3dDims&);                                   \
  template void conv3d_forward_omp<T>(const PaddedVolume<T>&, const T*, const T*, T*,         \
                                      const Conv3dDims&);                                      \
  template void conv3d_backward_bias<T>(const T*, T*, const Conv3dDims&);                     \
  template void conv3d_backward_weight_serial<T>(const T*, const PaddedVolume<T>&, T*,        \
                                                 const Conv3dDims&);                           \
  template void conv3d_backward_weight_omp<T>(const T*, const PaddedVolume<T>&, T*,           \
                                              const Conv3dDims&);                              \
  template void conv3d_backward_input_serial<T>(const T*, const T*, T*, const Conv3dDims&);   \
  template void conv3d_backward_input_omp<T>(const T*, const T*, T*, const Conv3dDims&);      \
  template void maxpool3d_forward_serial<T>(const T*, T*, std::int64_t*, const Pool3dDims&);  \
  template void maxpool3d_forward_omp<T>(const T*, T*, std::int64_t*, const Pool3dDims&);     \
  template void maxpool3d_backward<T>(const T*, const std::int64_t*, T*, const Pool3dDims&);  \
  template void avgpool3d_forward_serial<T>(const T*, T*, const Pool3dDims&);                 \
  template void avgpool3d_forward_omp<T>(const T*, T*, const Pool3dDims&);                    \
  template void avgpool3d_backward<T>(const T*, T*, const Pool3dDims&);

AVSYNC_INSTANTIATE(float)
AVSYNC_INSTANTIATE(double)
#undef AVSYNC_INSTANTIATE

}  // namespace avsync::kernels
