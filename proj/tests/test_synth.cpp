#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "avsync/manifest.hpp"
#include "avsync/synth.hpp"
#include "sync_oracle.hpp"

using namespace avsync;
namespace fs = std::filesystem;

namespace {

SynthConfig small_config() {
  SynthConfig cfg;
  cfg.num_videos = 6;
  cfg.duration = 4.0;
  cfg.height = cfg.width = 32;
  cfg.events_min = 2;
  cfg.events_max = 3;
  cfg.seed = 11;
  return cfg;
}

std::string manifest_text(const DatasetManifest& m) {
  const auto path = fs::temp_directory_path() / "avsync_manifest_probe.txt";
  write_manifest(m, path.string());
  std::ifstream is(path);
  std::stringstream ss;
  ss << is.rdbuf();
  fs::remove(path);
  return ss.str();
}

}  // namespace

TEST_CASE("plan: same config twice gives a bit-identical manifest") {
  auto a = plan_dataset(small_config());
  auto b = plan_dataset(small_config());
  CHECK(manifest_text(a) == manifest_text(b));
}

TEST_CASE("plan: events never overlap and stay inside the video") {
  SynthConfig cfg;
  cfg.num_videos = 300;
  cfg.seed = 3;
  auto m = plan_dataset(cfg);
  for (const auto& r : m.records) {
    CHECK(!r.events.empty());
    for (std::size_t e = 0; e < r.events.size(); ++e) {
      const auto& ev = r.events[e];
      CHECK(ev.onset >= 0.0);
      CHECK(ev.onset + ev.duration <= cfg.duration + 1e-9);
      if (e > 0)
        CHECK(ev.onset >= r.events[e - 1].onset + r.events[e - 1].duration - 1e-9);
      // audio onset sample and visual onset frame describe the same instant
      const double audio_onset = std::round(ev.onset * cfg.sample_rate) / cfg.sample_rate;
      const double video_onset = std::round(ev.onset * cfg.fps) / cfg.fps;
      CHECK(std::fabs(audio_onset - video_onset) < 1.0 / cfg.fps);
    }
  }
}

TEST_CASE("plan: splits are disjoint, cover all records, and depend only on (seed, id)") {
  SynthConfig cfg;
  cfg.num_videos = 500;
  cfg.seed = 17;
  auto m = plan_dataset(cfg);
  std::size_t train = 0, val = 0, test = 0;
  for (const auto& r : m.records) {
    if (r.split == "train") ++train;
    else if (r.split == "val") ++val;
    else ++test;
  }
  CHECK(train + val + test == 500);
  CHECK(train > 300);
  CHECK(val > 10);
  CHECK(test > 10);

  SynthConfig bigger = cfg;
  bigger.num_videos = 700;  // same seed: shared ids keep their split
  auto m2 = plan_dataset(bigger);
  for (std::size_t i = 0; i < 500; ++i) CHECK(m.records[i].split == m2.records[i].split);
}

TEST_CASE("plan: class counts stay within 3 sigma of uniform under the default config") {
  SynthConfig cfg;  // default: 1000 videos, 8 classes
  cfg.seed = 0;
  auto m = plan_dataset(cfg);
  std::vector<int> counts(cfg.num_classes, 0);
  for (const auto& r : m.records) ++counts[static_cast<std::size_t>(r.label)];
  const double p = 1.0 / static_cast<double>(cfg.num_classes);
  const double mean = p * static_cast<double>(cfg.num_videos);
  const double sigma = std::sqrt(static_cast<double>(cfg.num_videos) * p * (1 - p));
  for (int c : counts) CHECK(std::fabs(c - mean) <= 3.0 * sigma);
}

TEST_CASE("plan: unsatisfiable event packing rejected with the offending parameters") {
  SynthConfig cfg;
  cfg.duration = 2.0;
  cfg.events_min = cfg.events_max = 6;
  cfg.event_min_dur = 0.8;
  CHECK_THROWS_WITH_AS(plan_dataset(cfg), doctest::Contains("cannot pack"), std::runtime_error);
}

TEST_CASE("generate: bit-identical output for the same config, exact round trips") {
  const auto dir = fs::temp_directory_path() / "avsync_synth_test";
  fs::remove_all(dir);
  auto cfg = small_config();
  auto m = generate_dataset(cfg, dir.string());

  SUBCASE("write-then-read equals the in-memory original bit for bit") {
    for (int id : {0, 3}) {
      auto loaded = load_record(m, id);
      const auto frames = render_frames(cfg, m.record_by_id(id));
      const auto audio = render_audio(cfg, m.record_by_id(id));
      CHECK(loaded.frames.data == frames.data);
      CHECK(loaded.waveform.samples == audio.samples);
    }
  }
  SUBCASE("regeneration is bit-identical") {
    const auto dir2 = fs::temp_directory_path() / "avsync_synth_test2";
    fs::remove_all(dir2);
    generate_dataset(cfg, dir2.string());
    auto bytes = [](const fs::path& p) {
      std::ifstream is(p, std::ios::binary);
      std::stringstream ss;
      ss << is.rdbuf();
      return ss.str();
    };
    for (const auto& r : m.records) {
      CHECK(bytes(dir / r.frames_path) == bytes(dir2 / r.frames_path));
      CHECK(bytes(dir / r.wav_path) == bytes(dir2 / r.wav_path));
    }
    CHECK(bytes(dir / "manifest.txt") == bytes(dir2 / "manifest.txt"));
    fs::remove_all(dir2);
  }
  SUBCASE("manifest round trip") {
    auto r = read_manifest((dir / "manifest.txt").string());
    CHECK(r.records.size() == m.records.size());
    CHECK(manifest_text(r) == manifest_text(m));
  }
  SUBCASE("truncated frame file errors with path and byte count") {
    auto mm = read_manifest((dir / "manifest.txt").string());
    const auto victim = dir / mm.records[1].frames_path;
    fs::resize_file(victim, fs::file_size(victim) / 2);
    CHECK_THROWS_WITH_AS(load_record(mm, 1), doctest::Contains("truncated"),
                         std::runtime_error);
  }
  SUBCASE("unknown id is a lookup error") {
    CHECK_THROWS_WITH_AS(load_record(m, 999), doctest::Contains("unknown record id"),
                         std::runtime_error);
  }
  fs::remove_all(dir);
}

TEST_CASE("generate: clean single-event waveform is zero outside the event") {
  SynthConfig cfg = small_config();
  cfg.noise_level = 0.0;
  cfg.distractor_motion_level = 0.0;
  cfg.events_min = cfg.events_max = 1;
  cfg.num_videos = 2;
  auto m = plan_dataset(cfg);
  const auto& rec = m.records[0];
  auto audio = render_audio(cfg, rec);
  const auto& ev = rec.events[0];
  const auto s0 = static_cast<std::size_t>(std::llround(ev.onset * cfg.sample_rate));
  const auto s1 = s0 + static_cast<std::size_t>(std::llround(ev.duration * cfg.sample_rate));
  for (std::size_t s = 0; s < audio.samples.size(); ++s) {
    if (s < s0 || s >= s1) CHECK(audio.samples[s] == 0.0f);
  }
}

TEST_CASE("oracle: envelope correlation separates positives from hard negatives") {
  const auto dir = fs::temp_directory_path() / "avsync_oracle_test";
  fs::remove_all(dir);
  SynthConfig cfg;
  cfg.num_videos = 24;
  cfg.duration = 6.0;
  cfg.height = cfg.width = 48;
  cfg.seed = 123;
  auto m = generate_dataset(cfg, dir.string());

  PairSampler sampler(m, "train");
  Rng rng(7);
  std::vector<PairExample> pairs;
  for (int i = 0; i < 60; ++i) pairs.push_back(sampler.sample_positive(rng));
  for (int i = 0; i < 60; ++i) pairs.push_back(sampler.sample_negative(NegativeKind::Hard, rng));
  avsync::testing::SyncOracle oracle(m);
  const double acc = oracle.separation_accuracy(pairs);
  CHECK(acc >= 0.95);
  fs::remove_all(dir);
}
