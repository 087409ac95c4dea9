#include <doctest.h>

#include <cmath>
#include <complex>
#include <filesystem>
#include <fstream>

#include "avsync/audio.hpp"
#include "avsync/rng.hpp"
#include "avsync/wav.hpp"

using namespace avsync;

#include "audio_oracle.hpp"

using avsync::testing::naive_dft;
using avsync::testing::reference_filterbank;

namespace {

Waveform sine_wave(double freq, double seconds, std::size_t rate, float amp = 0.5f) {
  Waveform w;
  w.sample_rate = rate;
  w.samples.resize(static_cast<std::size_t>(seconds * static_cast<double>(rate)));
  for (std::size_t i = 0; i < w.samples.size(); ++i)
    w.samples[i] = amp * static_cast<float>(
                             std::sin(2.0 * M_PI * freq * static_cast<double>(i) / rate));
  return w;
}

}  // namespace

TEST_CASE("filterbank: one second of silence yields 99 frames of ln(log_floor)") {
  Waveform w;
  w.sample_rate = 16000;
  w.samples.assign(16000, 0.0f);
  auto f = filterbank_features(w);
  CHECK(f.frames == 99);
  CHECK(f.filters == 40);
  const float expect = static_cast<float>(std::log(1e-10));
  for (float v : f.values) CHECK(v == doctest::Approx(expect));
}

TEST_CASE("filterbank: frame count obeys the framing formula for many lengths") {
  FilterbankExtractor ex(16000);
  for (std::size_t n : {320u, 321u, 479u, 480u, 640u, 16000u, 31999u, 32000u}) {
    CHECK(ex.frame_count(n) == (n - 320) / 160 + 1);
  }
  CHECK_THROWS_WITH_AS(ex.frame_count(319), doctest::Contains("at least 320"),
                       std::runtime_error);
}

TEST_CASE("filterbank: pure sine at a filter's center frequency wins that filter") {
  FilterbankExtractor ex(16000);
  const double mel_max = hz_to_mel(8000.0);
  for (std::size_t k : {5u, 10u, 20u, 30u, 35u}) {
    const double center = mel_to_hz(mel_max * static_cast<double>(k + 1) / 41.0);
    auto w = sine_wave(center, 0.1, 16000);
    auto f = ex.features(w);
    for (std::size_t t = 0; t < f.frames; ++t) {
      std::size_t argmax = 0;
      for (std::size_t m = 1; m < f.filters; ++m)
        if (f.at(t, m) > f.at(t, argmax)) argmax = m;
      CAPTURE(k);
      CAPTURE(t);
      CHECK(argmax == k);
    }
  }
}

TEST_CASE("filterbank: pipeline matches the naive-DFT reference within 1e-6") {
  Rng rng(5150);
  Waveform w;
  w.sample_rate = 16000;
  w.samples.resize(320 + 160 * 3);  // 4 frames
  for (auto& s : w.samples) s = static_cast<float>(rng.uniform(-0.8, 0.8));
  FilterbankExtractor ex(16000);
  auto fast = ex.features(w);
  auto ref = reference_filterbank(w, ex);
  REQUIRE(fast.values.size() == ref.size());
  double max_diff = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i)
    max_diff = std::max(max_diff, std::fabs(static_cast<double>(fast.values[i]) - ref[i]));
  CHECK(max_diff < 1e-6);
}

TEST_CASE("filterbank: Parseval — spectrum energy equals windowed-signal energy") {
  Rng rng(77);
  const std::size_t n = 1024;
  std::vector<double> x(n, 0.0);
  for (std::size_t i = 0; i < 320; ++i) x[i] = rng.uniform(-1.0, 1.0);
  auto dft = naive_dft(x);
  double spec_energy = 0.0, sig_energy = 0.0;
  for (const auto& c : dft) spec_energy += std::norm(c);
  for (double v : x) sig_energy += v * v;
  CHECK(spec_energy / static_cast<double>(n) == doctest::Approx(sig_energy).epsilon(1e-6));

  // and the radix-2 FFT agrees with the naive DFT bin by bin
  std::vector<std::complex<double>> buf(n);
  for (std::size_t i = 0; i < n; ++i) buf[i] = x[i];
  fft_radix2(buf);
  for (std::size_t k = 0; k < n; k += 37)
    CHECK(std::abs(buf[k] - dft[k]) < 1e-6);
}

TEST_CASE("filterbank: triangular filters are non-negative with contiguous support") {
  FilterbankExtractor ex(16000);
  const std::size_t bins = 1024 / 2 + 1;
  for (std::size_t m = 0; m < 40; ++m) {
    bool seen = false, ended = false;
    for (std::size_t k = 0; k < bins; ++k) {
      const double v = ex.filter_matrix()[m * bins + k];
      CHECK(v >= 0.0);
      if (v > 0.0) {
        CHECK_FALSE(ended);  // support must not restart
        seen = true;
      } else if (seen) {
        ended = true;
      }
    }
    CHECK(seen);
  }
}

TEST_CASE("filterbank: extraction is deterministic") {
  Rng rng(99);
  Waveform w;
  w.sample_rate = 16000;
  w.samples.resize(4800);
  for (auto& s : w.samples) s = static_cast<float>(rng.uniform(-1.0, 1.0));
  auto a = filterbank_features(w);
  auto b = filterbank_features(w);
  CHECK(a.values == b.values);
}

TEST_CASE("norm stats: constant corpus, full-fraction exactness, determinism") {
  FilterbankFeatures c;
  c.frames = 3;
  c.filters = 2;
  c.values = {1.5f, -2.0f, 1.5f, -2.0f, 1.5f, -2.0f};
  std::vector<FilterbankFeatures> corpus{c, c, c};

  SUBCASE("identical constant matrices floor the std") {
    auto stats = compute_norm_stats(corpus, 1.0, 1);
    CHECK(stats.mean[0] == doctest::Approx(1.5f));
    CHECK(stats.mean[1] == doctest::Approx(-2.0f));
    CHECK(stats.stddev[0] == doctest::Approx(1e-6f));
    CHECK(stats.stddev[1] == doctest::Approx(1e-6f));
  }
  SUBCASE("fraction 1.0 reproduces exact corpus statistics") {
    FilterbankFeatures d = c;
    d.values = {0.5f, 1.0f, 2.5f, -5.0f, 0.0f, 0.0f};
    std::vector<FilterbankFeatures> mix{c, d};
    auto stats = compute_norm_stats(mix, 1.0, 7);
    double sum0 = 0;
    for (std::size_t t = 0; t < 3; ++t) sum0 += c.at(t, 0) + d.at(t, 0);
    CHECK(stats.mean[0] == doctest::Approx(sum0 / 6.0));
  }
  SUBCASE("same seed twice gives bit-identical stats") {
    auto a = compute_norm_stats(corpus, 0.5, 1234);
    auto b = compute_norm_stats(corpus, 0.5, 1234);
    CHECK(a.mean == b.mean);
    CHECK(a.stddev == b.stddev);
  }
}

TEST_CASE("z-normalize: construction, identity, and round trip") {
  Rng rng(202);
  std::vector<FilterbankFeatures> corpus;
  for (int i = 0; i < 5; ++i) {
    FilterbankFeatures f;
    f.frames = 20;
    f.filters = 4;
    f.values.resize(80);
    for (auto& v : f.values) v = static_cast<float>(rng.normal(3.0, 2.0));
    corpus.push_back(std::move(f));
  }
  auto stats = compute_norm_stats(corpus, 1.0, 5);

  SUBCASE("normalizing the source corpus yields mean 0, std 1") {
    double sum = 0, sumsq = 0;
    std::size_t count = 0;
    for (const auto& f : corpus) {
      auto z = z_normalize(f, stats);
      for (float v : z.values) {
        sum += v;
        sumsq += static_cast<double>(v) * v;
        ++count;
      }
    }
    const double mean = sum / static_cast<double>(count);
    const double var = sumsq / static_cast<double>(count) - mean * mean;
    CHECK(std::fabs(mean) < 1e-4);
    CHECK(std::fabs(var - 1.0) < 1e-3);
  }
  SUBCASE("identity stats leave features unchanged") {
    NormStats id;
    id.mean.assign(4, 0.0f);
    id.stddev.assign(4, 1.0f);
    auto z = z_normalize(corpus[0], id);
    CHECK(z.values == corpus[0].values);
  }
  SUBCASE("round trip recovers the input") {
    auto z = z_normalize(corpus[0], stats);
    for (std::size_t t = 0; t < z.frames; ++t)
      for (std::size_t d = 0; d < z.filters; ++d) {
        const float back = z.at(t, d) * stats.stddev[d] + stats.mean[d];
        CHECK(back == doctest::Approx(corpus[0].at(t, d)).epsilon(1e-6));
      }
  }
  SUBCASE("dimension mismatch rejected") {
    NormStats bad;
    bad.mean.assign(3, 0.0f);
    bad.stddev.assign(3, 1.0f);
    CHECK_THROWS_AS(z_normalize(corpus[0], bad), std::runtime_error);
  }
}

TEST_CASE("wav: quantized waveforms round-trip bit exactly") {
  Rng rng(31);
  Waveform w;
  w.sample_rate = 16000;
  w.samples.resize(1000);
  for (auto& s : w.samples) s = static_cast<float>(rng.uniform(-1.2, 1.2));
  quantize_to_pcm16(w.samples);
  const auto path = std::filesystem::temp_directory_path() / "avsync_wav_test.wav";
  write_wav(path.string(), w);
  auto r = read_wav(path.string());
  CHECK(r.sample_rate == 16000);
  CHECK(r.samples == w.samples);
  std::filesystem::remove(path);
}

TEST_CASE("wav: truncated file is rejected, not silently padded") {
  Waveform w;
  w.sample_rate = 16000;
  w.samples.assign(100, 0.25f);
  const auto path = std::filesystem::temp_directory_path() / "avsync_wav_trunc.wav";
  write_wav(path.string(), w);
  std::filesystem::resize_file(path, std::filesystem::file_size(path) - 37);
  CHECK_THROWS_WITH_AS(read_wav(path.string()), doctest::Contains("truncated"),
                       std::runtime_error);
  std::filesystem::remove(path);
}
