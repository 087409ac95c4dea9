#include "avsync/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "avsync/rng.hpp"

namespace avsync {

void fft_radix2(std::vector<std::complex<double>>& a) {
  const std::size_t n = a.size();
  check((n & (n - 1)) == 0 && n > 0, cat("fft: size ", n, " is not a power of two"));
  // bit-reversal permutation
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * M_PI / static_cast<double>(len);
    const std::complex<double> wl(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        const std::complex<double> u = a[i + k];
        const std::complex<double> v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wl;
      }
    }
  }
}

FilterbankExtractor::FilterbankExtractor(std::size_t sample_rate, FilterbankSpec spec)
    : spec_(spec), sample_rate_(sample_rate) {
  check(sample_rate_ > 0, "filterbank: sample rate must be > 0");
  check(spec_.num_filters >= 1, "filterbank: need at least one filter");
  win_ = static_cast<std::size_t>(std::llround(spec_.window_length * sample_rate_));
  step_ = static_cast<std::size_t>(std::llround(spec_.window_step * sample_rate_));
  check(win_ > 0 && step_ > 0, "filterbank: window/step too small for sample rate");
  check(win_ <= spec_.fft_size, cat("filterbank: window of ", win_,
                                    " samples exceeds fft size ", spec_.fft_size));
  window_.resize(win_);
  for (std::size_t i = 0; i < win_; ++i)
    window_[i] = 0.5 * (1.0 - std::cos(2.0 * M_PI * i / static_cast<double>(win_ - 1)));

  const std::size_t bins = spec_.fft_size / 2 + 1;
  const double nyquist = static_cast<double>(sample_rate_) / 2.0;
  const double mel_max = hz_to_mel(nyquist);
  std::vector<double> edges(spec_.num_filters + 2);
  for (std::size_t i = 0; i < edges.size(); ++i)
    edges[i] = mel_to_hz(mel_max * static_cast<double>(i) / (spec_.num_filters + 1));
  filters_.assign(spec_.num_filters * bins, 0.0);
  for (std::size_t m = 0; m < spec_.num_filters; ++m) {
    const double lo = edges[m], mid = edges[m + 1], hi = edges[m + 2];
    for (std::size_t k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * sample_rate_ / spec_.fft_size;
      double wgt = 0.0;
      if (f > lo && f < mid)
        wgt = (f - lo) / (mid - lo);
      else if (f >= mid && f < hi)
        wgt = (hi - f) / (hi - mid);
      filters_[m * bins + k] = wgt;
    }
  }
}

std::size_t FilterbankExtractor::frame_count(std::size_t n_samples) const {
  check(n_samples >= win_, cat("filterbank: waveform of ", n_samples,
                               " samples too short; need at least ", win_));
  return (n_samples - win_) / step_ + 1;
}

FilterbankFeatures FilterbankExtractor::features(const Waveform& w) const {
  check(w.sample_rate == sample_rate_, cat("filterbank: extractor built for ", sample_rate_,
                                           " Hz, waveform is ", w.sample_rate, " Hz"));
  const std::size_t T = frame_count(w.samples.size());
  const std::size_t bins = spec_.fft_size / 2 + 1;
  FilterbankFeatures out;
  out.frames = T;
  out.filters = spec_.num_filters;
  out.values.resize(T * spec_.num_filters);

  std::vector<std::complex<double>> buf(spec_.fft_size);
  std::vector<double> power(bins);
  for (std::size_t t = 0; t < T; ++t) {
    const float* src = w.samples.data() + t * step_;
    for (std::size_t i = 0; i < win_; ++i)
      buf[i] = std::complex<double>(static_cast<double>(src[i]) * window_[i], 0.0);
    std::fill(buf.begin() + win_, buf.end(), std::complex<double>(0.0, 0.0));
    fft_radix2(buf);
    for (std::size_t k = 0; k < bins; ++k) power[k] = std::norm(buf[k]);
    for (std::size_t m = 0; m < spec_.num_filters; ++m) {
      const double* fr = filters_.data() + m * bins;
      double e = 0.0;
      for (std::size_t k = 0; k < bins; ++k) e += fr[k] * power[k];
      out.values[t * spec_.num_filters + m] = static_cast<float>(std::log(e + spec_.log_floor));
    }
  }
  return out;
}

FilterbankFeatures filterbank_features(const Waveform& w, const FilterbankSpec& spec) {
  return FilterbankExtractor(w.sample_rate, spec).features(w);
}

NormStats compute_norm_stats(const std::vector<FilterbankFeatures>& corpus, double fraction,
                             std::uint64_t seed) {
  check(!corpus.empty(), "norm stats: empty corpus");
  check(fraction > 0.0 && fraction <= 1.0, cat("norm stats: fraction ", fraction,
                                               " outside (0, 1]"));
  const std::size_t n = corpus.size();
  std::size_t count = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(derive_seed(seed, "norm-stats"));
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = rng.uniform_index(i);
    std::swap(order[i - 1], order[j]);
  }
  if (count == 0) {
    std::fprintf(stderr, "[avsync] norm stats: sampled subset empty, using whole corpus\n");
    count = n;
  }

  const std::size_t dims = corpus[0].filters;
  std::vector<double> sum(dims, 0.0), sumsq(dims, 0.0);
  std::size_t frames = 0;
  for (std::size_t i = 0; i < count; ++i) {
    const auto& f = corpus[order[i]];
    check(f.filters == dims, "norm stats: inconsistent feature dimensions in corpus");
    for (std::size_t t = 0; t < f.frames; ++t)
      for (std::size_t d = 0; d < dims; ++d) {
        const double v = f.at(t, d);
        sum[d] += v;
        sumsq[d] += v * v;
      }
    frames += f.frames;
  }
  check(frames > 0, "norm stats: subset has no frames");

  NormStats stats;
  stats.source_fraction = fraction;
  stats.mean.resize(dims);
  stats.stddev.resize(dims);
  for (std::size_t d = 0; d < dims; ++d) {
    const double mu = sum[d] / static_cast<double>(frames);
    const double var = std::max(0.0, sumsq[d] / static_cast<double>(frames) - mu * mu);
    stats.mean[d] = static_cast<float>(mu);
    stats.stddev[d] = static_cast<float>(std::max(std::sqrt(var), 1e-6));
  }
  return stats;
}

FilterbankFeatures z_normalize(const FilterbankFeatures& f, const NormStats& stats) {
  check(f.filters == stats.mean.size(), cat("z-normalize: feature dim ", f.filters,
                                            " != stats dim ", stats.mean.size()));
  FilterbankFeatures out = f;
  for (std::size_t t = 0; t < f.frames; ++t)
    for (std::size_t d = 0; d < f.filters; ++d)
      out.values[t * f.filters + d] = (f.at(t, d) - stats.mean[d]) / stats.stddev[d];
  return out;
}

}  // namespace avsync
