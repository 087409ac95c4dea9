#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "avsync/video.hpp"
#include "avsync/wav.hpp"

namespace avsync {

struct SynthConfig {
  std::size_t num_videos = 1000;
  double duration = 10.0;  // seconds
  double fps = 25.0;
  std::size_t sample_rate = 16000;
  std::size_t height = 64, width = 64;
  std::size_t num_classes = 8;
  std::size_t events_min = 4, events_max = 7;
  double event_min_dur = 0.6, event_max_dur = 1.2;  // seconds
  double distractor_motion_level = 1.0;
  double noise_level = 0.015;  // audio noise std
  double box_frac = 0.32;      // event box side / min(H, W)
  double train_frac = 0.8, val_frac = 0.1;
  std::uint64_t seed = 0;
};

struct Event {
  double onset = 0.0, duration = 0.0;  // seconds, snapped to the frame grid
  int cls = 0;
  int box_x = 0, box_y = 0, box_w = 0, box_h = 0;  // pixels
};

struct AVRecord {
  int id = 0;
  std::string frames_path;  // relative to the manifest directory
  std::string wav_path;
  std::string split;  // train | val | test
  int label = 0;      // dominant event class
  std::vector<Event> events;
};

struct DatasetManifest {
  int version = 1;
  SynthConfig config;
  std::vector<AVRecord> records;
  std::string root_dir;  // directory the relative paths resolve against

  std::string frames_file(const AVRecord& r) const { return root_dir + "/" + r.frames_path; }
  std::string wav_file(const AVRecord& r) const { return root_dir + "/" + r.wav_path; }
  const AVRecord& record_by_id(int id) const;
  std::vector<const AVRecord*> split_records(const std::string& split) const;
};

// Deterministic event/split/label plan; no rendering, no file IO.
DatasetManifest plan_dataset(const SynthConfig& cfg);

// Synthesizes one record's media from its plan. Every byte is a function of
// (cfg.seed, record id) only.
FrameSequence render_frames(const SynthConfig& cfg, const AVRecord& rec);
Waveform render_audio(const SynthConfig& cfg, const AVRecord& rec);

// plan + render + write everything under out_dir (frames/, audio/,
// manifest.txt). Parallelizes over records.
DatasetManifest generate_dataset(const SynthConfig& cfg, const std::string& out_dir);

struct LoadedRecord {
  FrameSequence frames;
  Waveform waveform;
  const AVRecord* record = nullptr;
};

LoadedRecord load_record(const DatasetManifest& manifest, int id);

// Class tone parameters: 8 classes = 4 fundamentals x 2 pulse rates, so
// spectral content alone cannot separate every pair of classes.
double class_fundamental_hz(int cls);
double class_pulse_hz(int cls);

// Shared audio/visual event envelope at time tau in [0, duration).
double event_envelope(double tau, double duration, double pulse_hz);

}  // namespace avsync
