// avsync — audio-visual temporal synchronization workbench.
// Subcommands cover the full pipeline: corpus synthesis, contrastive
// training, evaluation, the audio linear probe, feature extraction,
// gradient-based localization, metric plots, and the three-regime
// curriculum comparison table.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "avsync/config.hpp"
#include "avsync/eval.hpp"
#include "avsync/gradcam.hpp"
#include "avsync/manifest.hpp"
#include "avsync/plot.hpp"
#include "avsync/train.hpp"

using namespace avsync;
namespace fs = std::filesystem;

namespace {

struct GlobalArgs {
  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool seed_set = false;
  bool single_thread = false;
  bool overwrite = false;
};

const std::map<std::string, std::set<std::string>>& config_registry() {
  static const std::map<std::string, std::set<std::string>> reg{
      {"run", {"seed", "out_dir"}},
      {"synth",
       {"num_videos", "duration", "fps", "sample_rate", "height", "width", "num_classes",
        "events_min", "events_max", "event_min_dur", "event_max_dur",
        "distractor_motion_level", "noise_level", "box_frac", "train_frac", "val_frac"}},
      {"model", {"video_x", "embed_dim", "video_channels", "audio_channels"}},
      {"train",
       {"manifest", "eta", "batch_size", "epochs", "phase_boundary", "schedule", "lr",
        "lr_auto", "lr_grid", "grid_epochs", "momentum", "steps_per_epoch", "checkpoint_every",
        "val_pairs", "stats_fraction", "clip_seconds", "hard_gap", "overlap_fraction",
        "export_pairs", "finetune_epochs", "resume"}},
      {"eval",
       {"manifest", "checkpoint", "protocol", "pairs", "hard_fraction", "superhard_fraction",
        "finetune_mode", "head_hidden"}},
      {"probe",
       {"manifest", "checkpoint", "checkpoint_dir", "subclips", "subclip_seconds",
        "regularization", "epochs", "train_split", "eval_split", "include_random_baseline"}},
      {"extract", {"manifest", "checkpoint", "split", "subclips", "subclip_seconds"}},
      {"localize", {"manifest", "checkpoint", "clips", "filter_frac", "split"}},
      {"plot", {"csv"}},
      {"table1", {"manifest", "margin_note"}},
  };
  return reg;
}

void refuse_or_clear(const fs::path& marker, bool overwrite) {
  if (!fs::exists(marker)) return;
  if (!overwrite)
    fail(cat(marker.string(),
             " already exists; pass --overwrite to regenerate (outputs are deterministic, a "
             "rerun reproduces them bit for bit)"));
}

SynthConfig synth_config_from(const RunConfig& cfg, std::uint64_t seed) {
  SynthConfig c;
  c.num_videos = static_cast<std::size_t>(cfg.get_int("synth", "num_videos", 1000));
  c.duration = cfg.get_double("synth", "duration", 10.0);
  c.fps = cfg.get_double("synth", "fps", 25.0);
  c.sample_rate = static_cast<std::size_t>(cfg.get_int("synth", "sample_rate", 16000));
  c.height = static_cast<std::size_t>(cfg.get_int("synth", "height", 64));
  c.width = static_cast<std::size_t>(cfg.get_int("synth", "width", 64));
  c.num_classes = static_cast<std::size_t>(cfg.get_int("synth", "num_classes", 8));
  c.events_min = static_cast<std::size_t>(cfg.get_int("synth", "events_min", 4));
  c.events_max = static_cast<std::size_t>(cfg.get_int("synth", "events_max", 7));
  c.event_min_dur = cfg.get_double("synth", "event_min_dur", 0.6);
  c.event_max_dur = cfg.get_double("synth", "event_max_dur", 1.2);
  c.distractor_motion_level = cfg.get_double("synth", "distractor_motion_level", 1.0);
  c.noise_level = cfg.get_double("synth", "noise_level", 0.015);
  c.box_frac = cfg.get_double("synth", "box_frac", 0.32);
  c.train_frac = cfg.get_double("synth", "train_frac", 0.8);
  c.val_frac = cfg.get_double("synth", "val_frac", 0.1);
  c.seed = seed;
  return c;
}

std::vector<std::size_t> channels_from(const RunConfig& cfg, const char* key,
                                       std::vector<std::size_t> fallback) {
  if (!cfg.has("model", key)) return fallback;
  std::vector<std::size_t> out;
  for (double v : cfg.get_list("model", key, {}))
    out.push_back(static_cast<std::size_t>(v));
  return out;
}

TrainConfig train_config_from(const RunConfig& cfg, const DatasetManifest& manifest,
                              std::uint64_t seed, const std::string& out_dir) {
  TrainConfig c;
  c.eta = static_cast<float>(cfg.get_double("train", "eta", 0.99));
  c.batch_size = static_cast<std::size_t>(cfg.get_int("train", "batch_size", 16));
  c.epochs = static_cast<int>(cfg.get_int("train", "epochs", 90));
  c.phase_boundary = static_cast<int>(cfg.get_int("train", "phase_boundary", 50));
  c.schedule = cfg.get("train", "schedule", "curriculum");
  c.lr = static_cast<float>(cfg.get_double("train", "lr", 0.01));
  c.lr_auto = cfg.get_bool("train", "lr_auto", false) || cfg.get("train", "lr", "") == "auto";
  if (cfg.get("train", "lr", "") == "auto") c.lr = 0.01f;
  c.lr_grid.clear();
  for (double v : cfg.get_list("train", "lr_grid", {0.1, 0.01, 0.001}))
    c.lr_grid.push_back(static_cast<float>(v));
  c.grid_epochs = static_cast<int>(cfg.get_int("train", "grid_epochs", 5));
  c.momentum = static_cast<float>(cfg.get_double("train", "momentum", 0.9));
  c.seed = seed;
  c.steps_per_epoch = static_cast<std::size_t>(cfg.get_int("train", "steps_per_epoch", 16));
  c.checkpoint_every = static_cast<int>(cfg.get_int("train", "checkpoint_every", 10));
  c.val_pairs = static_cast<std::size_t>(cfg.get_int("train", "val_pairs", 256));
  c.stats_fraction = cfg.get_double("train", "stats_fraction", 0.20);
  c.clip_seconds = cfg.get_double("train", "clip_seconds", 1.0);
  c.hard_gap = cfg.get_double("train", "hard_gap", 0.5);
  c.overlap_fraction = cfg.get_double("train", "overlap_fraction", 0.5);
  c.export_pairs = cfg.get_bool("train", "export_pairs", false);
  c.finetune_epochs = static_cast<int>(cfg.get_int("train", "finetune_epochs", 20));
  c.resume_from = cfg.get("train", "resume", "");
  c.out_dir = out_dir;

  c.video.x = static_cast<std::size_t>(cfg.get_int("model", "video_x", 3));
  c.video.channels = channels_from(cfg, "video_channels", c.video.channels);
  c.video.embed_dim = static_cast<std::size_t>(cfg.get_int("model", "embed_dim", 128));
  c.video.t = static_cast<std::size_t>(
      std::llround(c.clip_seconds * manifest.config.fps));
  c.video.h = manifest.config.height;
  c.video.w = manifest.config.width;
  c.audio.channels = channels_from(cfg, "audio_channels", c.audio.channels);
  c.audio.embed_dim = c.video.embed_dim;
  return c;
}

DatasetManifest manifest_from(const RunConfig& cfg, const char* section) {
  const std::string path = cfg.get(section, "manifest", "");
  check(!path.empty(), cat("config: [", section, "] manifest = <path> is required"));
  check(fs::exists(path), cat("missing prerequisite artifact: ", path,
                              " (run `avsync synth` first)"));
  return read_manifest(path);
}

std::string checkpoint_from(const RunConfig& cfg, const char* section) {
  const std::string path = cfg.get(section, "checkpoint", "");
  check(!path.empty(), cat("config: [", section, "] checkpoint = <path> is required"));
  check(fs::exists(path), cat("missing prerequisite artifact: ", path,
                              " (run `avsync train` first)"));
  return path;
}

// ---------------------------------------------------------------------------
// subcommands
// ---------------------------------------------------------------------------

int cmd_synth(const RunConfig& cfg, const GlobalArgs& g) {
  refuse_or_clear(fs::path(g.out_dir) / "manifest.txt", g.overwrite);
  fs::create_directories(g.out_dir);
  cfg.write_echo(g.out_dir + "/config_echo.txt");
  const SynthConfig sc = synth_config_from(cfg, g.seed);
  auto manifest = generate_dataset(sc, g.out_dir);
  std::printf("synth: %zu videos -> %s/manifest.txt\n", manifest.records.size(),
              g.out_dir.c_str());
  return 0;
}

int cmd_train(const RunConfig& cfg, const GlobalArgs& g) {
  refuse_or_clear(fs::path(g.out_dir) / "metrics.csv",
                  g.overwrite || cfg.has("train", "resume"));
  fs::create_directories(g.out_dir);
  cfg.write_echo(g.out_dir + "/run_config_echo.txt");
  auto manifest = manifest_from(cfg, "train");
  const TrainConfig tc = train_config_from(cfg, manifest, g.seed, g.out_dir);
  auto state = train_avts(manifest, tc);
  std::printf("train: %d epochs, final loss %.5f, checkpoint %s\n", state.epoch,
              state.metrics.empty() ? 0.0 : state.metrics.back().loss,
              state.checkpoint_path.c_str());
  return 0;
}

int cmd_eval(const RunConfig& cfg, const GlobalArgs& g) {
  refuse_or_clear(fs::path(g.out_dir) / "report.txt", g.overwrite);
  fs::create_directories(g.out_dir);
  cfg.write_echo(g.out_dir + "/run_config_echo.txt");
  auto manifest = manifest_from(cfg, "eval");
  const std::string ckpt_path = checkpoint_from(cfg, "eval");
  const TrainConfig tc = train_config_from(cfg, manifest, g.seed, g.out_dir);
  TrainState state = load_train_state(ckpt_path, tc);

  AugmentConfig aug;
  aug.out_h = tc.video.h;
  aug.out_w = tc.video.w;
  PairBatchLoader loader(manifest, state.audio_stats, state.video_stats, aug, tc.video.t);

  const auto pairs_n = static_cast<std::size_t>(cfg.get_int("eval", "pairs", 400));
  const double hard = cfg.get_double("eval", "hard_fraction", 0.0);
  const double superhard = cfg.get_double("eval", "superhard_fraction", 0.0);
  auto test_pairs = make_eval_pairs(manifest, "test", pairs_n, hard, superhard,
                                    derive_seed(g.seed, "test-pairs"), tc.clip_seconds);
  auto val_pairs = make_eval_pairs(manifest, "val", tc.val_pairs, 0.0, 0.0,
                                   derive_seed(g.seed, "val-pairs"), tc.clip_seconds);

  const std::string protocol = cfg.get("eval", "protocol", "threshold");
  EvalReport rep;
  if (protocol == "threshold") {
    rep = evaluate_threshold(*state.model, loader, manifest, val_pairs, test_pairs);
  } else if (protocol == "finetuned-head") {
    const bool end_to_end = cfg.get("eval", "finetune_mode", "frozen") == "end-to-end";
    FusionHeadConfig head_cfg;
    head_cfg.hidden = static_cast<std::size_t>(cfg.get_int("eval", "head_hidden", 512));
    head_cfg.outputs = 2;
    auto ft = finetune_head(manifest, ckpt_path, head_cfg, FinetuneTask::AvtsBinary, end_to_end,
                            tc);
    rep = evaluate_finetuned_head(*ft.model, *ft.head, loader, test_pairs, tc.batch_size);
  } else {
    fail(cat("config: eval.protocol '", protocol, "' (expected threshold | finetuned-head)"));
  }
  rep.split = "test";
  rep.hard_fraction = hard;
  rep.superhard_fraction = superhard;
  rep.seed = g.seed;
  rep.checkpoint = ckpt_path;
  rep.write(g.out_dir);
  std::printf("eval: protocol=%s accuracy=%.4f (%zu pairs, hard=%.2f) -> %s/report.txt\n",
              rep.protocol.c_str(), rep.accuracy, rep.num_pairs, hard, g.out_dir.c_str());
  return 0;
}

int cmd_probe(const RunConfig& cfg, const GlobalArgs& g) {
  refuse_or_clear(fs::path(g.out_dir) / "probe_report.csv", g.overwrite);
  fs::create_directories(g.out_dir);
  cfg.write_echo(g.out_dir + "/run_config_echo.txt");
  auto manifest = manifest_from(cfg, "probe");
  const TrainConfig tc = train_config_from(cfg, manifest, g.seed, g.out_dir);

  ProbeConfig pc;
  pc.subclips = static_cast<std::size_t>(cfg.get_int("probe", "subclips", 10));
  pc.subclip_seconds = cfg.get_double("probe", "subclip_seconds", 2.0);
  pc.regularization = cfg.get_double("probe", "regularization", 1e-4);
  pc.epochs = static_cast<int>(cfg.get_int("probe", "epochs", 50));
  pc.seed = g.seed;
  const std::string train_split = cfg.get("probe", "train_split", "train");
  const std::string eval_split = cfg.get("probe", "eval_split", "test");

  // checkpoints to probe: one file, or every epoch checkpoint in a directory
  std::vector<std::pair<int, std::string>> targets;
  if (cfg.has("probe", "checkpoint_dir")) {
    const std::string dir = cfg.get("probe", "checkpoint_dir", "");
    check(fs::exists(dir), cat("missing prerequisite artifact: ", dir));
    for (const auto& e : fs::directory_iterator(dir)) {
      const std::string name = e.path().filename().string();
      int epoch = 0;
      if (std::sscanf(name.c_str(), "ckpt_epoch_%d.avts", &epoch) == 1)
        targets.emplace_back(epoch, e.path().string());
    }
    std::sort(targets.begin(), targets.end());
    check(!targets.empty(), cat(dir, ": no ckpt_epoch_*.avts checkpoints found"));
  } else {
    targets.emplace_back(-1, checkpoint_from(cfg, "probe"));
  }

  std::ofstream csv(g.out_dir + "/probe_report.csv", std::ios::trunc);
  csv << "epoch,accuracy\n";

  auto run_probe = [&](TwoStreamModel<float>& model, const NormStats& stats) {
    auto train_f = extract_probe_features(model, manifest, train_split, stats, pc);
    auto eval_f = extract_probe_features(model, manifest, eval_split, stats, pc);
    auto probe = LinearProbe::train(train_f, manifest.config.num_classes, pc);
    return probe.sample_accuracy(eval_f);
  };

  if (cfg.get_bool("probe", "include_random_baseline", true)) {
    TwoStreamModel<float> random_model(tc.video, tc.audio, tc.seed);
    NormStats stats = compute_corpus_audio_stats(manifest, tc.stats_fraction,
                                                 derive_seed(tc.seed, "astats"));
    const double acc = run_probe(random_model, stats);
    csv << "0," << acc << "\n";
    std::printf("probe: epoch 0 (random init) accuracy %.4f\n", acc);
  }
  for (const auto& [epoch, path] : targets) {
    TrainState state = load_train_state(path, tc);
    const double acc = run_probe(*state.model, state.audio_stats);
    csv << (epoch < 0 ? state.epoch : epoch) << "," << acc << "\n";
    std::printf("probe: epoch %d accuracy %.4f\n", epoch < 0 ? state.epoch : epoch, acc);
  }
  csv.close();
  plot_csv(g.out_dir + "/probe_report.csv", g.out_dir);
  return 0;
}

int cmd_extract(const RunConfig& cfg, const GlobalArgs& g) {
  fs::create_directories(g.out_dir + "/features");
  cfg.write_echo(g.out_dir + "/run_config_echo.txt");
  auto manifest = manifest_from(cfg, "extract");
  const TrainConfig tc = train_config_from(cfg, manifest, g.seed, g.out_dir);
  TrainState state = load_train_state(checkpoint_from(cfg, "extract"), tc);

  ProbeConfig pc;
  pc.subclips = static_cast<std::size_t>(cfg.get_int("extract", "subclips", 10));
  pc.subclip_seconds = cfg.get_double("extract", "subclip_seconds", 2.0);
  const std::string split = cfg.get("extract", "split", "test");

  Tape<float> tape;
  tape.set_recording(false);
  std::size_t written = 0;
  for (const auto* rec : manifest.split_records(split)) {
    const Waveform w = read_wav(manifest.wav_file(*rec));
    std::vector<float> rows;
    std::size_t count = 0;
    for (const auto& feats : extract_subclips(w, pc)) {
      const auto z = z_normalize(feats, state.audio_stats);
      auto x = make_tensor<float>({1, 1, z.frames, z.filters}, z.values);
      auto v = state.model->audio.conv5_features(tape, x);
      rows.insert(rows.end(), v.begin(), v.end());
      ++count;
    }
    char name[64];
    std::snprintf(name, sizeof(name), "/features/%05d.ten", rec->id);
    io::write_tensor_file(g.out_dir + name,
                          {count, state.model->audio.conv5_channels()}, rows);
    ++written;
  }
  std::printf("extract: %zu feature dumps -> %s/features\n", written, g.out_dir.c_str());
  return 0;
}

int cmd_localize(const RunConfig& cfg, const GlobalArgs& g) {
  refuse_or_clear(fs::path(g.out_dir) / "localization.csv", g.overwrite);
  fs::create_directories(g.out_dir);
  cfg.write_echo(g.out_dir + "/run_config_echo.txt");
  auto manifest = manifest_from(cfg, "localize");
  const TrainConfig tc = train_config_from(cfg, manifest, g.seed, g.out_dir);
  TrainState state = load_train_state(checkpoint_from(cfg, "localize"), tc);
  const std::size_t want = static_cast<std::size_t>(cfg.get_int("localize", "clips", 20));
  const double filter_frac = cfg.get_double("localize", "filter_frac", 0.2);
  const std::string split = cfg.get("localize", "split", "test");

  AugmentConfig aug;
  aug.out_h = tc.video.h;
  aug.out_w = tc.video.w;
  PairBatchLoader loader(manifest, state.audio_stats, state.video_stats, aug, tc.video.t);

  std::ofstream csv(g.out_dir + "/localization.csv", std::ios::trunc);
  csv << "record,event_onset,box_mass_fraction\n";
  double total = 0.0;
  std::size_t done = 0;
  const std::int64_t spf = static_cast<std::int64_t>(
      std::llround(manifest.config.sample_rate / manifest.config.fps));
  const std::int64_t clip_ticks =
      static_cast<std::int64_t>(tc.video.t) * spf;
  const std::int64_t dur_ticks = static_cast<std::int64_t>(
      std::llround(manifest.config.duration * manifest.config.sample_rate));
  for (const auto* rec : manifest.split_records(split)) {
    if (done >= want) break;
    if (rec->events.empty()) continue;
    const Event& ev = rec->events[rec->events.size() / 2];
    // clip centered on the event
    std::int64_t begin = static_cast<std::int64_t>(
        std::llround((ev.onset + ev.duration / 2) * manifest.config.sample_rate)) -
        clip_ticks / 2;
    begin = std::clamp<std::int64_t>(begin, 0, dur_ticks - clip_ticks);
    begin = (begin / spf) * spf;  // frame aligned
    PairExample p;
    p.audio_id = p.video_id = rec->id;
    p.audio_begin = p.video_begin = begin;
    p.audio_end = p.video_end = begin + clip_ticks;
    p.y = 1;
    auto batch = loader.load({p}, false, derive_seed(g.seed, "localize", done));
    auto heat = gradcam_localize(*state.model, batch.clips, batch.feats, filter_frac);
    const double frac = box_mass_fraction(heat, ev.box_x, ev.box_y, ev.box_w, ev.box_h);
    csv << rec->id << "," << ev.onset << "," << frac << "\n";
    total += frac;
    char name[64];
    for (std::size_t t = 0; t < heat.frames; ++t) {
      std::snprintf(name, sizeof(name), "/heat_%05d_f%02zu.pgm", rec->id, t);
      write_pgm(g.out_dir + name, heat.data.data() + t * heat.height * heat.width, heat.height,
                heat.width, heat.max_value());
    }
    ++done;
  }
  check(done > 0, "localize: no test records with events");
  std::printf("localize: %zu clips, mean top-decile box mass %.4f -> %s\n", done, total / done,
              g.out_dir.c_str());
  return 0;
}

int cmd_plot(const RunConfig& cfg, const GlobalArgs& g) {
  const std::string csv = cfg.get("plot", "csv", "");
  check(!csv.empty(), "config: [plot] csv = <path> is required");
  check(fs::exists(csv), cat("missing prerequisite artifact: ", csv));
  fs::create_directories(g.out_dir);
  auto files = plot_csv(csv, g.out_dir);
  std::printf("plot: %zu charts -> %s\n", files.size(), g.out_dir.c_str());
  return 0;
}

int cmd_table1(const RunConfig& cfg, const GlobalArgs& g) {
  refuse_or_clear(fs::path(g.out_dir) / "table1.txt", g.overwrite);
  fs::create_directories(g.out_dir);
  cfg.write_echo(g.out_dir + "/run_config_echo.txt");
  auto manifest = manifest_from(cfg, "table1");
  TrainConfig base = train_config_from(cfg, manifest, g.seed, g.out_dir);

  struct Regime {
    const char* name;
    const char* schedule;
    const char* epochs_note;
  };
  const Regime regimes[] = {
      {"single-stage easy", "easy-only", "1-%d"},
      {"single-stage hard", "hard-from-start", "1-%d"},
      {"curriculum 75/25 after easy", "curriculum", "1-%d, hard mixed in from %d"},
  };

  auto test_easy = make_eval_pairs(manifest, "test", 400, 0.0, 0.0,
                                   derive_seed(g.seed, "test-pairs"), base.clip_seconds);
  auto test_mixed = make_eval_pairs(manifest, "test", 400, 0.25, 0.0,
                                    derive_seed(g.seed, "test-pairs-mixed"), base.clip_seconds);
  auto val_pairs = make_eval_pairs(manifest, "val", base.val_pairs, 0.0, 0.0,
                                   derive_seed(g.seed, "val-pairs"), base.clip_seconds);

  std::ofstream table(g.out_dir + "/table1.txt", std::ios::trunc);
  table << "regime                          train negatives      epochs        easy-test  "
           "mixed-test\n";
  std::ofstream csv(g.out_dir + "/table1.csv", std::ios::trunc);
  csv << "regime,schedule,easy_test_accuracy,mixed_test_accuracy\n";

  for (const auto& regime : regimes) {
    TrainConfig tc = base;
    tc.schedule = regime.schedule;
    tc.out_dir = g.out_dir + "/" + regime.schedule;
    auto state = train_avts(manifest, tc);

    AugmentConfig aug;
    aug.out_h = tc.video.h;
    aug.out_w = tc.video.w;
    PairBatchLoader loader(manifest, state.audio_stats, state.video_stats, aug, tc.video.t);
    auto rep_easy = evaluate_threshold(*state.model, loader, manifest, val_pairs, test_easy);
    auto rep_mixed = evaluate_threshold(*state.model, loader, manifest, val_pairs, test_mixed);

    char epochs[64];
    std::snprintf(epochs, sizeof(epochs), regime.epochs_note, tc.epochs,
                  tc.phase_boundary + 1);
    char row[256];
    std::snprintf(row, sizeof(row), "%-31s %-20s %-13s %9.4f  %9.4f\n", regime.name,
                  regime.schedule, epochs, rep_easy.accuracy, rep_mixed.accuracy);
    table << row;
    csv << regime.name << "," << regime.schedule << "," << rep_easy.accuracy << ","
        << rep_mixed.accuracy << "\n";
    std::printf("table1: %-18s easy %.4f mixed %.4f\n", regime.schedule, rep_easy.accuracy,
                rep_mixed.accuracy);
  }
  std::printf("table1: -> %s/table1.txt\n", g.out_dir.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"avsync: audio-visual temporal synchronization workbench"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalArgs g;
  app.add_option("--config", g.config_path, "run configuration file (key = value sections)");
  auto* seed_opt = app.add_option("--seed", g.seed, "global seed (overrides [run] seed)");
  app.add_option("--out", g.out_dir, "output directory");
  app.add_flag("--single-thread", g.single_thread, "force deterministic single-thread mode");
  app.add_flag("--overwrite", g.overwrite, "allow overwriting existing outputs");

  std::map<std::string, int (*)(const RunConfig&, const GlobalArgs&)> handlers{
      {"synth", cmd_synth},   {"train", cmd_train},       {"eval", cmd_eval},
      {"probe", cmd_probe},   {"extract", cmd_extract},   {"localize", cmd_localize},
      {"plot", cmd_plot},     {"table1", cmd_table1},
  };
  app.add_subcommand("synth", "generate the synthetic audio-video corpus");
  app.add_subcommand("train", "contrastive sync training with the curriculum schedule");
  app.add_subcommand("eval", "sync accuracy via threshold or finetuned-head protocol");
  app.add_subcommand("probe", "linear probe on frozen conv5 audio features");
  app.add_subcommand("extract", "dump conv5 audio features to tensor files");
  app.add_subcommand("localize", "gradient-based sound localization heatmaps");
  app.add_subcommand("plot", "SVG line charts from a metrics CSV");
  app.add_subcommand("table1", "train and compare the three curriculum regimes");

  CLI11_PARSE(app, argc, argv);

  try {
#ifdef _OPENMP
    if (g.single_thread) {
      omp_set_num_threads(1);
    } else if (const char* env = std::getenv("AVTS_NUM_WORKERS")) {
      const int cap = std::atoi(env);
      check(cap >= 1, "AVTS_NUM_WORKERS must be >= 1");
      omp_set_num_threads(std::min(cap, omp_get_max_threads()));
    }
#endif
    RunConfig cfg;
    if (!g.config_path.empty()) cfg = RunConfig::load(g.config_path);
    cfg.validate_known(config_registry());
    if (seed_opt->count() == 0)
      g.seed = static_cast<std::uint64_t>(cfg.get_int("run", "seed", 0));
    else
      cfg.override_value("run", "seed", std::to_string(g.seed));

    const std::string sub = app.get_subcommands().front()->get_name();
    if (g.out_dir.empty())
      g.out_dir = cfg.get("run", "out_dir", "runs/" + sub);
    else
      cfg.override_value("run", "out_dir", g.out_dir);

    return handlers.at(sub)(cfg, g);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "avsync: %s\n", e.what());
    return 1;
  }
}
