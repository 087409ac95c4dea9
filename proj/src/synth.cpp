#include "avsync/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "avsync/manifest.hpp"
#include "avsync/tensor_io.hpp"

namespace avsync {

namespace {

constexpr double kFundamentals[4] = {400.0, 800.0, 1600.0, 3200.0};
constexpr double kPulseRates[2] = {2.0, 6.0};

std::string record_stem(int id) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%05d", id);
  return buf;
}

}  // namespace

double class_fundamental_hz(int cls) { return kFundamentals[cls % 4]; }
double class_pulse_hz(int cls) { return kPulseRates[(cls / 4) % 2]; }

double event_envelope(double tau, double duration, double pulse_hz) {
  if (tau < 0.0 || tau >= duration) return 0.0;
  const double attack = std::sin(M_PI * tau / duration);
  const double pulse = std::sin(M_PI * pulse_hz * tau);
  return attack * attack * pulse * pulse;
}

const AVRecord& DatasetManifest::record_by_id(int id) const {
  for (const auto& r : records)
    if (r.id == id) return r;
  fail(cat("manifest: unknown record id ", id));
}

std::vector<const AVRecord*> DatasetManifest::split_records(const std::string& split) const {
  std::vector<const AVRecord*> out;
  for (const auto& r : records)
    if (r.split == split) out.push_back(&r);
  return out;
}

DatasetManifest plan_dataset(const SynthConfig& cfg) {
  check(cfg.num_videos >= 1, "synth: need at least one video");
  check(cfg.num_classes >= 2, "synth: need at least two classes");
  check(cfg.events_min >= 1 && cfg.events_min <= cfg.events_max, "synth: bad event count range");
  check(cfg.event_min_dur > 0 && cfg.event_min_dur <= cfg.event_max_dur,
        "synth: bad event duration range");
  check(std::fabs(cfg.duration * cfg.fps - std::round(cfg.duration * cfg.fps)) < 1e-9,
        cat("synth: duration ", cfg.duration, " s is not integral at ", cfg.fps, " fps"));
  const double slot = cfg.duration / static_cast<double>(cfg.events_max);
  check(slot >= cfg.event_min_dur + 0.2,
        cat("synth: cannot pack up to ", cfg.events_max, " events of >= ", cfg.event_min_dur,
            " s into ", cfg.duration, " s without overlap"));
  check(cfg.train_frac > 0 && cfg.val_frac >= 0 && cfg.train_frac + cfg.val_frac < 1.0,
        "synth: split fractions must leave room for a test split");

  DatasetManifest m;
  m.config = cfg;
  m.records.resize(cfg.num_videos);
  const std::size_t box_side = std::max<std::size_t>(
      4, static_cast<std::size_t>(std::llround(cfg.box_frac * std::min(cfg.height, cfg.width))));

  for (std::size_t i = 0; i < cfg.num_videos; ++i) {
    AVRecord& rec = m.records[i];
    rec.id = static_cast<int>(i);
    rec.frames_path = "frames/" + record_stem(rec.id) + ".ten";
    rec.wav_path = "audio/" + record_stem(rec.id) + ".wav";

    // split is a pure function of (seed, id)
    const double u = Rng(derive_seed(cfg.seed, "split", i)).uniform();
    rec.split = u < cfg.train_frac ? "train" : (u < cfg.train_frac + cfg.val_frac ? "val" : "test");

    Rng rng(derive_seed(cfg.seed, "record", i));
    const int cls = static_cast<int>(rng.uniform_index(cfg.num_classes));
    rec.label = cls;

    const std::size_t n_events =
        cfg.events_min + rng.uniform_index(cfg.events_max - cfg.events_min + 1);
    // one slot per event keeps events disjoint by construction
    const double slot_len = cfg.duration / static_cast<double>(n_events);
    for (std::size_t e = 0; e < n_events; ++e) {
      Event ev;
      ev.cls = cls;
      const double max_dur = std::min(cfg.event_max_dur, slot_len - 0.2);
      double dur = rng.uniform(cfg.event_min_dur, std::max(cfg.event_min_dur, max_dur));
      double onset = slot_len * static_cast<double>(e) +
                     rng.uniform(0.05, std::max(0.06, slot_len - dur - 0.05));
      // snap to the frame grid so audio and video onsets align exactly
      const double frame = 1.0 / cfg.fps;
      onset = std::round(onset / frame) * frame;
      dur = std::max(frame, std::round(dur / frame) * frame);
      if (onset + dur > cfg.duration) onset = cfg.duration - dur;
      ev.onset = onset;
      ev.duration = dur;
      ev.box_w = ev.box_h = static_cast<int>(box_side);
      ev.box_x = 1 + static_cast<int>(rng.uniform_index(cfg.width - box_side - 2));
      ev.box_y = 1 + static_cast<int>(rng.uniform_index(cfg.height - box_side - 2));
      rec.events.push_back(ev);
    }
    // events are slot-disjoint; make the invariant explicit
    for (std::size_t e = 1; e < rec.events.size(); ++e)
      check(rec.events[e].onset >= rec.events[e - 1].onset + rec.events[e - 1].duration,
            cat("synth: overlapping events in record ", rec.id));
  }
  return m;
}

Waveform render_audio(const SynthConfig& cfg, const AVRecord& rec) {
  Rng rng(derive_seed(cfg.seed, "audio", static_cast<std::uint64_t>(rec.id)));
  Waveform w;
  w.sample_rate = cfg.sample_rate;
  w.samples.assign(static_cast<std::size_t>(cfg.duration * cfg.sample_rate), 0.0f);
  const double dt = 1.0 / static_cast<double>(cfg.sample_rate);
  for (const auto& ev : rec.events) {
    const double f0 = class_fundamental_hz(ev.cls);
    const double pulse = class_pulse_hz(ev.cls);
    const std::size_t s0 = static_cast<std::size_t>(std::llround(ev.onset * cfg.sample_rate));
    const std::size_t s1 = std::min(
        w.samples.size(),
        s0 + static_cast<std::size_t>(std::llround(ev.duration * cfg.sample_rate)));
    for (std::size_t s = s0; s < s1; ++s) {
      const double tau = static_cast<double>(s - s0) * dt;
      const double env = event_envelope(tau, ev.duration, pulse);
      const double tone = std::sin(2.0 * M_PI * f0 * tau) +
                          0.3 * std::sin(4.0 * M_PI * f0 * tau);
      w.samples[s] += static_cast<float>(0.55 * env * tone);
    }
  }
  if (cfg.noise_level > 0.0) {
    for (auto& s : w.samples) s += static_cast<float>(rng.normal(0.0, cfg.noise_level));
  }
  quantize_to_pcm16(w.samples);
  return w;
}

namespace {

// Distractor: soft discs drifting on per-record random paths, plus a slow
// global brightness wave. Motion is uncorrelated with the audio.
struct Distractor {
  double cx, cy, ax, ay, fx, fy, phase, sigma, gain;
  double r, g, b;
};

void draw_event_shape(FrameSequence& seq, std::size_t t, const Event& ev, double brightness) {
  const int shape = ev.cls % 4;
  const double cx = ev.box_x + ev.box_w / 2.0, cy = ev.box_y + ev.box_h / 2.0;
  const double half = ev.box_w / 2.0;
  // class tint: spread hues over the class index
  const double hue = static_cast<double>(ev.cls) / 8.0;
  const double tint[3] = {0.6 + 0.4 * std::cos(2.0 * M_PI * hue),
                          0.6 + 0.4 * std::cos(2.0 * M_PI * (hue + 1.0 / 3.0)),
                          0.6 + 0.4 * std::cos(2.0 * M_PI * (hue + 2.0 / 3.0))};
  for (int y = ev.box_y; y < ev.box_y + ev.box_h; ++y) {
    for (int x = ev.box_x; x < ev.box_x + ev.box_w; ++x) {
      const double dx = (x - cx) / half, dy = (y - cy) / half;
      bool inside = false;
      switch (shape) {
        case 0: inside = std::max(std::fabs(dx), std::fabs(dy)) <= 0.9; break;   // square
        case 1: inside = dx * dx + dy * dy <= 0.81; break;                       // disc
        case 2: inside = std::fabs(dx) + std::fabs(dy) <= 0.95; break;           // diamond
        default: {                                                               // ring
          const double r2 = dx * dx + dy * dy;
          inside = r2 <= 0.9 && r2 >= 0.30;
          break;
        }
      }
      if (!inside) continue;
      for (std::size_t c = 0; c < 3; ++c) {
        float& px = seq.at(c, t, static_cast<std::size_t>(y), static_cast<std::size_t>(x));
        px = static_cast<float>(
            std::clamp(px + brightness * tint[c], 0.0, 1.0));
      }
    }
  }
}

}  // namespace

FrameSequence render_frames(const SynthConfig& cfg, const AVRecord& rec) {
  Rng rng(derive_seed(cfg.seed, "video", static_cast<std::uint64_t>(rec.id)));
  FrameSequence seq;
  seq.fps = cfg.fps;
  seq.frames = static_cast<std::size_t>(std::llround(cfg.duration * cfg.fps));
  seq.height = cfg.height;
  seq.width = cfg.width;
  seq.data.assign(3 * seq.frames * seq.plane(), 0.0f);

  std::vector<Distractor> distractors;
  const int n_distractors = cfg.distractor_motion_level > 0.0 ? 2 : 0;
  for (int i = 0; i < n_distractors; ++i) {
    Distractor d;
    d.cx = rng.uniform(8.0, cfg.width - 8.0);
    d.cy = rng.uniform(8.0, cfg.height - 8.0);
    d.ax = cfg.distractor_motion_level * rng.uniform(4.0, 10.0);
    d.ay = cfg.distractor_motion_level * rng.uniform(4.0, 10.0);
    d.fx = rng.uniform(0.2, 0.7);
    d.fy = rng.uniform(0.2, 0.7);
    d.phase = rng.uniform(0.0, 2.0 * M_PI);
    d.sigma = rng.uniform(5.0, 9.0);
    d.gain = rng.uniform(0.10, 0.20);
    d.r = rng.uniform(0.3, 1.0);
    d.g = rng.uniform(0.3, 1.0);
    d.b = rng.uniform(0.3, 1.0);
    distractors.push_back(d);
  }
  const double base = 0.18 + (cfg.distractor_motion_level > 0.0 ? rng.uniform(0.0, 0.06) : 0.0);

  for (std::size_t t = 0; t < seq.frames; ++t) {
    const double time = static_cast<double>(t) / cfg.fps;
    for (std::size_t c = 0; c < 3; ++c) {
      float* plane = seq.data.data() + (c * seq.frames + t) * seq.plane();
      std::fill(plane, plane + seq.plane(), static_cast<float>(base));
    }
    for (const auto& d : distractors) {
      const double cx = d.cx + d.ax * std::sin(2.0 * M_PI * d.fx * time + d.phase);
      const double cy = d.cy + d.ay * std::sin(2.0 * M_PI * d.fy * time + 0.7 * d.phase);
      const double inv2s2 = 1.0 / (2.0 * d.sigma * d.sigma);
      const int x0 = std::max(0, static_cast<int>(cx - 3 * d.sigma));
      const int x1 = std::min(static_cast<int>(cfg.width), static_cast<int>(cx + 3 * d.sigma) + 1);
      const int y0 = std::max(0, static_cast<int>(cy - 3 * d.sigma));
      const int y1 = std::min(static_cast<int>(cfg.height), static_cast<int>(cy + 3 * d.sigma) + 1);
      const double col[3] = {d.r, d.g, d.b};
      for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) {
          const double r2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
          const double a = d.gain * std::exp(-r2 * inv2s2);
          for (std::size_t c = 0; c < 3; ++c) {
            float& px = seq.at(c, t, static_cast<std::size_t>(y), static_cast<std::size_t>(x));
            px = static_cast<float>(std::clamp(px + a * col[c], 0.0, 1.0));
          }
        }
    }
    for (const auto& ev : rec.events) {
      const double tau = time - ev.onset;
      if (tau < 0.0 || tau >= ev.duration) continue;
      const double b = event_envelope(tau, ev.duration, class_pulse_hz(ev.cls));
      draw_event_shape(seq, t, ev, 0.75 * b);
    }
  }
  return seq;
}

DatasetManifest generate_dataset(const SynthConfig& cfg, const std::string& out_dir) {
  namespace fs = std::filesystem;
  DatasetManifest m = plan_dataset(cfg);
  m.root_dir = out_dir;
  fs::create_directories(fs::path(out_dir) / "frames");
  fs::create_directories(fs::path(out_dir) / "audio");

  const long n = static_cast<long>(m.records.size());
#pragma omp parallel for schedule(dynamic)
  for (long i = 0; i < n; ++i) {
    const AVRecord& rec = m.records[static_cast<std::size_t>(i)];
    const FrameSequence seq = render_frames(cfg, rec);
    io::write_tensor_file(m.frames_file(rec), {3, seq.frames, seq.height, seq.width}, seq.data);
    write_wav(m.wav_file(rec), render_audio(cfg, rec));
  }
  write_manifest(m, out_dir + "/manifest.txt");
  return m;
}

LoadedRecord load_record(const DatasetManifest& manifest, int id) {
  const AVRecord& rec = manifest.record_by_id(id);
  LoadedRecord out;
  out.record = &rec;
  auto [shape, data] = io::read_tensor_file(manifest.frames_file(rec));
  check(shape.size() == 4 && shape[0] == 3,
        cat(manifest.frames_file(rec), ": expected 3xTxHxW tensor, got ", shape_str(shape)));
  out.frames.frames = shape[1];
  out.frames.height = shape[2];
  out.frames.width = shape[3];
  out.frames.fps = manifest.config.fps;
  out.frames.data = std::move(data);
  out.waveform = read_wav(manifest.wav_file(rec));
  check(out.waveform.sample_rate == manifest.config.sample_rate,
        cat(manifest.wav_file(rec), ": sample rate mismatch"));
  return out;
}

}  // namespace avsync
