#pragma once

#include <complex>
#include <cstdint>
#include <vector>

#include "avsync/wav.hpp"

namespace avsync {

struct FilterbankSpec {
  double window_length = 0.02;   // seconds
  double window_step = 0.01;     // seconds
  std::size_t fft_size = 1024;
  std::size_t num_filters = 40;
  double log_floor = 1e-10;
};

// frames x filters log-energy matrix, row-major.
struct FilterbankFeatures {
  std::size_t frames = 0;
  std::size_t filters = 0;
  std::vector<float> values;

  float at(std::size_t t, std::size_t f) const { return values[t * filters + f]; }
};

struct NormStats {
  std::vector<float> mean;
  std::vector<float> stddev;  // floored at 1e-6
  double source_fraction = 0.20;
};

// In-place iterative radix-2 FFT; size must be a power of two.
void fft_radix2(std::vector<std::complex<double>>& a);

// Precomputes the Hann window and the mel triangular filterbank for one
// (sample_rate, spec) pair. Filters span 0 Hz to Nyquist on the HTK mel scale.
class FilterbankExtractor {
 public:
  FilterbankExtractor(std::size_t sample_rate, FilterbankSpec spec = {});

  FilterbankFeatures features(const Waveform& w) const;
  // Frame count the framing formula yields for n samples.
  std::size_t frame_count(std::size_t n_samples) const;
  std::size_t window_samples() const { return win_; }
  std::size_t step_samples() const { return step_; }
  const FilterbankSpec& spec() const { return spec_; }
  // num_filters x (fft_size/2 + 1) triangular weights.
  const std::vector<double>& filter_matrix() const { return filters_; }

 private:
  FilterbankSpec spec_;
  std::size_t sample_rate_;
  std::size_t win_, step_;
  std::vector<double> window_;   // Hann, length win_
  std::vector<double> filters_;  // row-major
};

FilterbankFeatures filterbank_features(const Waveform& w, const FilterbankSpec& spec = {});

// Per-dimension mean/std over all frames of a seeded `fraction` subset of the
// corpus. An empty subset falls back to the whole corpus with a warning.
NormStats compute_norm_stats(const std::vector<FilterbankFeatures>& corpus, double fraction,
                             std::uint64_t seed);

FilterbankFeatures z_normalize(const FilterbankFeatures& f, const NormStats& stats);

inline double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

}  // namespace avsync
