#include "avsync/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "avsync/eval.hpp"
#include "avsync/ops.hpp"

namespace avsync {

namespace {

std::string epoch_checkpoint_path(const std::string& out_dir, int epoch) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "/ckpt_epoch_%03d.avts", epoch);
  return out_dir + buf;
}

void append_stats_meta(Checkpoint& ckpt, const NormStats& audio, const ChannelStats& video) {
  auto push = [&](const std::string& name, const std::vector<float>& v) {
    ckpt.meta.push_back(NamedTensor{name, {v.size()}, v});
  };
  push("stats/audio_mean", audio.mean);
  push("stats/audio_std", audio.stddev);
  push("stats/audio_fraction", {static_cast<float>(audio.source_fraction)});
  push("stats/video_mean", {video.mean[0], video.mean[1], video.mean[2]});
  push("stats/video_std", {video.stddev[0], video.stddev[1], video.stddev[2]});
}

void restore_stats_meta(const Checkpoint& ckpt, NormStats& audio, ChannelStats& video) {
  auto need = [&](const std::string& name) {
    const NamedTensor* t = ckpt.find(ckpt.meta, name);
    check(t != nullptr, cat("checkpoint: missing meta tensor '", name, "'"));
    return t;
  };
  audio.mean = need("stats/audio_mean")->data;
  audio.stddev = need("stats/audio_std")->data;
  audio.source_fraction = need("stats/audio_fraction")->data[0];
  const auto* vm = need("stats/video_mean");
  const auto* vs = need("stats/video_std");
  for (std::size_t c = 0; c < 3; ++c) {
    video.mean[c] = vm->data[c];
    video.stddev[c] = vs->data[c];
  }
}

std::string train_config_echo(const TrainConfig& cfg, const std::string& manifest_note) {
  std::ostringstream os;
  os << "[train]\n"
     << "eta = " << cfg.eta << "\nbatch_size = " << cfg.batch_size
     << "\nepochs = " << cfg.epochs << "\nphase_boundary = " << cfg.phase_boundary
     << "\nschedule = " << cfg.schedule << "\nlr = " << cfg.lr
     << "\nlr_auto = " << (cfg.lr_auto ? "true" : "false") << "\nmomentum = " << cfg.momentum
     << "\nseed = " << cfg.seed << "\nsteps_per_epoch = " << cfg.steps_per_epoch
     << "\ncheckpoint_every = " << cfg.checkpoint_every << "\nval_pairs = " << cfg.val_pairs
     << "\nstats_fraction = " << cfg.stats_fraction
     << "\nclip_seconds = " << cfg.clip_seconds << "\nhard_gap = " << cfg.hard_gap
     << "\noverlap_fraction = " << cfg.overlap_fraction
     << "\nfinetune_epochs = " << cfg.finetune_epochs << "\n[model]\nvideo_x = " << cfg.video.x
     << "\nembed_dim = " << cfg.video.embed_dim << "\nvideo_channels =";
  for (auto c : cfg.video.channels) os << " " << c;
  os << "\naudio_channels =";
  for (auto c : cfg.audio.channels) os << " " << c;
  os << "\n[data]\nmanifest = " << manifest_note << "\n";
  return os.str();
}

}  // namespace

void write_metrics_csv(const std::string& path, const std::vector<MetricsRow>& rows) {
  std::ofstream os(path, std::ios::trunc);
  check(os.good(), cat("cannot open for write: ", path));
  os << "epoch,phase,loss,val_acc,lr\n";
  for (const auto& r : rows) {
    char line[160];
    std::snprintf(line, sizeof(line), "%d,%d,%.9g,%.9g,%.9g\n", r.epoch, r.phase, r.loss,
                  r.val_acc, r.lr);
    os << line;
  }
  check(os.good(), cat("write failed: ", path));
}

std::vector<MetricsRow> read_metrics_csv(const std::string& path) {
  std::ifstream is(path);
  check(is.good(), cat("cannot open metrics: ", path));
  std::string line;
  check(static_cast<bool>(std::getline(is, line)) && line == "epoch,phase,loss,val_acc,lr",
        cat(path, ": unexpected metrics header"));
  std::vector<MetricsRow> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    MetricsRow r;
    if (std::sscanf(line.c_str(), "%d,%d,%lf,%lf,%lf", &r.epoch, &r.phase, &r.loss, &r.val_acc,
                    &r.lr) != 5)
      fail(cat(path, ": malformed metrics row: ", line));
    rows.push_back(r);
  }
  return rows;
}

void save_train_checkpoint(const std::string& path, TwoStreamModel<float>& model,
                           Sgd<float>* opt, const PlateauScheduler<float>* sched, int epoch,
                           const NormStats& audio_stats, const ChannelStats& video_stats) {
  Checkpoint ckpt;
  append_named(ckpt.params, model.named_parameters());
  append_named(ckpt.params, model.named_buffers());
  if (opt) {
    const auto named = model.named_parameters();
    auto& vel = opt->velocity();
    check(vel.size() == named.size(), "checkpoint: optimizer/parameter count mismatch");
    for (std::size_t i = 0; i < named.size(); ++i)
      ckpt.optim.push_back(
          NamedTensor{"vel/" + named[i].first, named[i].second->shape, vel[i]});
  }
  auto meta_scalar = [&](const std::string& name, float v) {
    ckpt.meta.push_back(NamedTensor{name, {1}, {v}});
  };
  meta_scalar("meta/epoch", static_cast<float>(epoch));
  if (opt) {
    meta_scalar("meta/lr", opt->learning_rate());
    meta_scalar("meta/momentum", opt->momentum());
  }
  if (sched) {
    meta_scalar("meta/best_loss", sched->best_loss());
    meta_scalar("meta/stagnant", static_cast<float>(sched->stagnant_epochs()));
  }
  append_stats_meta(ckpt, audio_stats, video_stats);
  save_checkpoint(path, ckpt);
}

TrainState load_train_state(const std::string& checkpoint_path, const TrainConfig& cfg) {
  const Checkpoint ckpt = load_checkpoint(checkpoint_path);
  TrainState state;
  state.model = std::make_shared<TwoStreamModel<float>>(cfg.video, cfg.audio, cfg.seed);
  restore_named(ckpt.params, state.model->named_parameters(), "parameter");
  restore_named(ckpt.params, state.model->named_buffers(), "buffer");
  restore_stats_meta(ckpt, state.audio_stats, state.video_stats);
  state.epoch = static_cast<int>(ckpt.meta_value("meta/epoch", 0));
  state.lr = static_cast<float>(ckpt.meta_value("meta/lr", cfg.lr));
  state.best_loss = static_cast<float>(
      ckpt.meta_value("meta/best_loss", std::numeric_limits<float>::infinity()));
  state.stagnant = static_cast<int>(ckpt.meta_value("meta/stagnant", 0));
  state.checkpoint_path = checkpoint_path;
  return state;
}

float select_learning_rate(const DatasetManifest& manifest, const TrainConfig& cfg) {
  check(!cfg.lr_grid.empty(), "lr grid: empty candidate set");
  float best_lr = cfg.lr_grid.front();
  double best_loss = std::numeric_limits<double>::infinity();
  for (float candidate : cfg.lr_grid) {
    TrainConfig trial = cfg;
    trial.lr = candidate;
    trial.lr_auto = false;
    trial.epochs = cfg.grid_epochs;
    trial.schedule = "easy-only";
    trial.checkpoint_every = 0;
    trial.out_dir = cfg.out_dir + "/lr_grid_" + std::to_string(candidate);
    TrainState state = train_avts(manifest, trial);

    // validation contrastive loss decides the winner
    PairBatchLoader loader(manifest, state.audio_stats, state.video_stats, AugmentConfig{});
    auto val = make_eval_pairs(manifest, "val", cfg.val_pairs, 0.0, 0.0,
                               derive_seed(cfg.seed, "val-pairs"), cfg.clip_seconds);
    Tape<float> tape;
    tape.set_recording(false);
    double loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t i = 0; i < val.size(); i += cfg.batch_size) {
      const std::size_t count = std::min(cfg.batch_size, val.size() - i);
      std::vector<PairExample> chunk(val.begin() + i, val.begin() + i + count);
      auto batch = loader.load(chunk, false, derive_seed(cfg.seed, "grid-val", i));
      auto f_v = state.model->video.forward(tape, batch.clips, false);
      auto f_a = state.model->audio.forward(tape, batch.feats, false);
      loss += ops::contrastive_loss(tape, f_v, f_a, batch.labels, cfg.eta)->values[0];
      ++batches;
    }
    loss /= static_cast<double>(batches);
    std::printf("[avsync] lr grid: lr=%g -> val loss %.6f\n", candidate, loss);
    if (loss < best_loss) {
      best_loss = loss;
      best_lr = candidate;
    }
  }
  std::printf("[avsync] lr grid: selected lr=%g\n", best_lr);
  return best_lr;
}

TrainState train_avts(const DatasetManifest& manifest, const TrainConfig& cfg) {
  check(!cfg.out_dir.empty(), "train: out_dir not set");
  std::filesystem::create_directories(cfg.out_dir);
  const CurriculumSchedule schedule =
      CurriculumSchedule::parse(cfg.schedule, cfg.phase_boundary, cfg.epochs);
  PairSampler sampler(manifest, "train", cfg.clip_seconds, cfg.hard_gap, cfg.overlap_fraction);

  TrainState state;
  int start_epoch = 1;
  float lr = cfg.lr;
  if (!cfg.resume_from.empty()) {
    state = load_train_state(cfg.resume_from, cfg);
    start_epoch = state.epoch + 1;
    lr = state.lr;
    const std::string metrics_path = cfg.out_dir + "/metrics.csv";
    if (std::filesystem::exists(metrics_path)) {
      for (const auto& row : read_metrics_csv(metrics_path))
        if (row.epoch <= state.epoch) state.metrics.push_back(row);
    }
  } else {
    if (cfg.lr_auto) {
      TrainConfig grid_cfg = cfg;
      grid_cfg.lr_auto = false;
      lr = select_learning_rate(manifest, grid_cfg);
    }
    state.model = std::make_shared<TwoStreamModel<float>>(cfg.video, cfg.audio, cfg.seed);
    state.audio_stats =
        compute_corpus_audio_stats(manifest, cfg.stats_fraction, derive_seed(cfg.seed, "astats"));
    state.video_stats =
        compute_corpus_video_stats(manifest, cfg.stats_fraction, derive_seed(cfg.seed, "vstats"));
  }

  {
    std::ofstream echo(cfg.out_dir + "/config_echo.txt", std::ios::trunc);
    echo << train_config_echo(cfg, manifest.root_dir + "/manifest.txt");
  }

  AugmentConfig aug;
  aug.out_h = cfg.video.h;
  aug.out_w = cfg.video.w;
  PairBatchLoader loader(manifest, state.audio_stats, state.video_stats, aug, cfg.video.t);

  auto params = state.model->parameters();
  Sgd<float> opt(params, lr, cfg.momentum);
  PlateauScheduler<float> sched;
  if (!cfg.resume_from.empty()) {
    sched.restore(state.best_loss, state.stagnant);
    const Checkpoint ckpt = load_checkpoint(cfg.resume_from);
    const auto named = state.model->named_parameters();
    auto& vel = opt.velocity();
    for (std::size_t i = 0; i < named.size(); ++i) {
      const NamedTensor* t = ckpt.find(ckpt.optim, "vel/" + named[i].first);
      check(t != nullptr, cat("resume: checkpoint has no optimizer state for '",
                              named[i].first, "'"));
      check(t->data.size() == vel[i].size(), cat("resume: optimizer state size mismatch for '",
                                                 named[i].first, "'"));
      std::copy(t->data.begin(), t->data.end(), vel[i].begin());
    }
  }

  const auto val_pairs = make_eval_pairs(manifest, "val", cfg.val_pairs, 0.0, 0.0,
                                         derive_seed(cfg.seed, "val-pairs"), cfg.clip_seconds);

  for (int epoch = start_epoch; epoch <= cfg.epochs; ++epoch) {
    const auto batches =
        sampler.epoch_stream(epoch, schedule, cfg.batch_size, cfg.steps_per_epoch, cfg.seed);
    if (cfg.export_pairs) {
      std::vector<PairExample> flat;
      for (const auto& b : batches) flat.insert(flat.end(), b.begin(), b.end());
      char name[48];
      std::snprintf(name, sizeof(name), "/pairs_epoch_%03d.txt", epoch);
      export_pair_list(flat, static_cast<double>(manifest.config.sample_rate),
                       cfg.out_dir + name);
    }

    double loss_sum = 0.0;
    const float lr_used = opt.learning_rate();
    for (std::size_t b = 0; b < batches.size(); ++b) {
      auto tensors = loader.load(
          batches[b], true,
          derive_seed(cfg.seed, "augment",
                      (static_cast<std::uint64_t>(epoch) << 20) | static_cast<std::uint64_t>(b)));
      Tape<float> tape;
      auto f_v = state.model->video.forward(tape, tensors.clips, true);
      auto f_a = state.model->audio.forward(tape, tensors.feats, true);
      auto loss = ops::contrastive_loss(tape, f_v, f_a, tensors.labels, cfg.eta);
      const float loss_value = loss->values[0];
      if (!std::isfinite(loss_value)) {
        char name[48];
        std::snprintf(name, sizeof(name), "/diag_nan_epoch_%03d_batch_%03zu.txt", epoch, b);
        export_pair_list(batches[b], static_cast<double>(manifest.config.sample_rate),
                         cfg.out_dir + name);
        fail(cat("train: non-finite loss at epoch ", epoch, " batch ", b,
                 "; offending pair ids dumped to ", cfg.out_dir + name));
      }
      if (epoch == 1 && b == 0) {
        Checkpoint dump;
        dump.params.push_back(NamedTensor{"f_v", f_v->shape, f_v->values});
        dump.params.push_back(NamedTensor{"f_a", f_a->shape, f_a->values});
        std::vector<float> y(tensors.labels.begin(), tensors.labels.end());
        dump.params.push_back(NamedTensor{"y", {y.size()}, y});
        dump.params.push_back(NamedTensor{"loss", {1}, {loss_value}});
        save_checkpoint(cfg.out_dir + "/embed_dump_e1b1.avts", dump);
      }
      opt.zero_grad();
      tape.backward(loss);
      opt.step();
      loss_sum += loss_value;
    }
    const double mean_loss = loss_sum / static_cast<double>(batches.size());

    std::vector<int> val_labels;
    for (const auto& p : val_pairs) val_labels.push_back(p.y);
    const auto val_d = pair_distances(*state.model, loader, val_pairs, cfg.batch_size);
    const auto cal = calibrate_tau(val_d, val_labels);

    sched.update(opt, static_cast<float>(mean_loss));

    MetricsRow row;
    row.epoch = epoch;
    row.phase = schedule.phase_index(epoch);
    row.loss = mean_loss;
    row.val_acc = cal.accuracy;
    row.lr = lr_used;
    state.metrics.push_back(row);
    write_metrics_csv(cfg.out_dir + "/metrics.csv", state.metrics);
    std::printf("[avsync] epoch %3d phase %d loss %.5f val_acc %.4f lr %g\n", epoch, row.phase,
                mean_loss, cal.accuracy, static_cast<double>(lr_used));
    std::fflush(stdout);

    const bool cadence = cfg.checkpoint_every > 0 && epoch % cfg.checkpoint_every == 0;
    if (cadence || epoch == cfg.epochs) {
      const std::string path = epoch_checkpoint_path(cfg.out_dir, epoch);
      save_train_checkpoint(path, *state.model, &opt, &sched, epoch, state.audio_stats,
                            state.video_stats);
      state.checkpoint_path = path;
    }
    state.epoch = epoch;
    state.lr = opt.learning_rate();
    state.best_loss = sched.best_loss();
    state.stagnant = sched.stagnant_epochs();
  }
  if (!state.checkpoint_path.empty()) {
    std::filesystem::copy_file(state.checkpoint_path, cfg.out_dir + "/ckpt_final.avts",
                               std::filesystem::copy_options::overwrite_existing);
    state.checkpoint_path = cfg.out_dir + "/ckpt_final.avts";
  }
  return state;
}

double train_head_on_embeddings(FusionHead<float>& head, const Ten<float>& f_a,
                                const Ten<float>& f_v, const std::vector<int>& labels,
                                float lr, int epochs) {
  std::vector<Ten<float>> params;
  for (auto& [name, p] : head.named_parameters()) params.push_back(p);
  Sgd<float> opt(params, lr, 0.9f);
  for (int e = 0; e < epochs; ++e) {
    Tape<float> tape;
    auto logits = head.forward(tape, f_a, f_v);
    auto loss = ops::cross_entropy(tape, logits, labels);
    opt.zero_grad();
    tape.backward(loss);
    opt.step();
  }
  Tape<float> tape;
  tape.set_recording(false);
  auto logits = head.forward(tape, f_a, f_v);
  const std::size_t K = logits->shape[1];
  std::size_t correct = 0;
  for (std::size_t n = 0; n < labels.size(); ++n) {
    std::size_t arg = 0;
    for (std::size_t k = 1; k < K; ++k)
      if (logits->values[n * K + k] > logits->values[n * K + arg]) arg = k;
    if (static_cast<int>(arg) == labels[n]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

FinetuneResult finetune_head(const DatasetManifest& manifest, const std::string& checkpoint_path,
                             FusionHeadConfig head_cfg, FinetuneTask task, bool end_to_end,
                             const TrainConfig& cfg) {
  if (task == FinetuneTask::AvtsBinary)
    check(head_cfg.outputs == 2, "finetune: the sync head needs 2 output units");
  else
    check(head_cfg.outputs == manifest.config.num_classes,
          cat("finetune: multimodal head needs ", manifest.config.num_classes, " output units"));

  FinetuneResult result;
  TrainState pre = load_train_state(checkpoint_path, cfg);
  result.model = pre.model;
  result.head = std::make_shared<FusionHead<float>>(head_cfg, cfg.video.embed_dim,
                                                    derive_seed(cfg.seed, "fusion-head"));

  AugmentConfig aug;
  aug.out_h = cfg.video.h;
  aug.out_w = cfg.video.w;
  PairBatchLoader loader(manifest, pre.audio_stats, pre.video_stats, aug, cfg.video.t);
  PairSampler sampler(manifest, "train", cfg.clip_seconds, cfg.hard_gap, cfg.overlap_fraction);

  std::vector<Ten<float>> params;
  for (auto& [name, p] : result.head->named_parameters()) params.push_back(p);
  std::vector<Ten<float>> backbone = result.model->parameters();
  if (end_to_end) {
    for (auto& p : backbone) params.push_back(p);
  } else {
    for (auto& p : backbone) p->requires_grad = false;
  }
  Sgd<float> opt(params, cfg.lr, cfg.momentum);

  const auto schedule = CurriculumSchedule::easy_only(cfg.finetune_epochs);
  Rng label_rng(derive_seed(cfg.seed, "finetune"));
  for (int epoch = 1; epoch <= cfg.finetune_epochs; ++epoch) {
    double loss_sum = 0.0;
    std::size_t correct = 0, seen = 0;
    const auto batches =
        sampler.epoch_stream(epoch, schedule, cfg.batch_size, cfg.steps_per_epoch, cfg.seed);
    for (std::size_t b = 0; b < batches.size(); ++b) {
      std::vector<PairExample> pairs = batches[b];
      std::vector<int> labels;
      if (task == FinetuneTask::AvtsBinary) {
        for (const auto& p : pairs) labels.push_back(p.y);
      } else {
        // aligned pairs only; the target is the record's event class
        Rng rng(derive_seed(cfg.seed, "mm-pairs",
                            (static_cast<std::uint64_t>(epoch) << 20) | b));
        pairs.clear();
        for (std::size_t i = 0; i < cfg.batch_size; ++i) {
          auto p = sampler.sample_positive(rng);
          labels.push_back(manifest.record_by_id(p.audio_id).label);
          pairs.push_back(p);
        }
      }
      auto tensors = loader.load(
          pairs, true,
          derive_seed(cfg.seed, "ft-augment",
                      (static_cast<std::uint64_t>(epoch) << 20) | static_cast<std::uint64_t>(b)));
      Tape<float> tape;
      const bool train_backbone = end_to_end;
      auto f_v = result.model->video.forward(tape, tensors.clips, train_backbone);
      auto f_a = result.model->audio.forward(tape, tensors.feats, train_backbone);
      auto logits = result.head->forward(tape, f_a, f_v);
      auto loss = ops::cross_entropy(tape, logits, labels);
      opt.zero_grad();
      tape.backward(loss);
      opt.step();
      loss_sum += loss->values[0];
      const std::size_t K = logits->shape[1];
      for (std::size_t n = 0; n < labels.size(); ++n) {
        std::size_t arg = 0;
        for (std::size_t k = 1; k < K; ++k)
          if (logits->values[n * K + k] > logits->values[n * K + arg]) arg = k;
        if (static_cast<int>(arg) == labels[n]) ++correct;
        ++seen;
      }
    }
    MetricsRow row;
    row.epoch = epoch;
    row.loss = loss_sum / static_cast<double>(cfg.steps_per_epoch);
    row.val_acc = static_cast<double>(correct) / static_cast<double>(seen);
    row.lr = opt.learning_rate();
    result.metrics.push_back(row);
  }
  if (!end_to_end) {
    for (auto& p : backbone) p->requires_grad = true;
  }
  if (!cfg.out_dir.empty()) {
    std::filesystem::create_directories(cfg.out_dir);
    write_metrics_csv(cfg.out_dir + "/finetune_metrics.csv", result.metrics);
  }
  return result;
}

}  // namespace avsync
