#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "avsync/loader.hpp"
#include "avsync/models.hpp"
#include "avsync/optim.hpp"
#include "avsync/sampler.hpp"

namespace avsync {

struct TrainConfig {
  float eta = 0.99f;
  std::size_t batch_size = 16;
  int epochs = 90;
  int phase_boundary = 50;
  std::string schedule = "curriculum";  // curriculum | easy-only | hard-from-start
  float lr = 0.01f;
  bool lr_auto = false;  // run the grid search below and take the winner
  std::vector<float> lr_grid{0.1f, 0.01f, 0.001f};
  int grid_epochs = 5;
  float momentum = 0.9f;
  std::uint64_t seed = 0;
  std::size_t steps_per_epoch = 16;  // batches per epoch
  int checkpoint_every = 10;         // epochs; 0 disables intermediate checkpoints
  std::size_t val_pairs = 256;
  double stats_fraction = 0.20;
  double clip_seconds = 1.0;
  double hard_gap = 0.5;
  double overlap_fraction = 0.5;
  bool export_pairs = false;  // per-epoch pair lists for audit
  VideoSubnetConfig video;
  AudioSubnetConfig audio;
  std::string out_dir;
  std::string resume_from;  // checkpoint path; empty = fresh run
  int finetune_epochs = 20;
};

struct MetricsRow {
  int epoch = 0;
  int phase = 0;
  double loss = 0.0;
  double val_acc = 0.0;
  double lr = 0.0;
};

struct TrainState {
  std::shared_ptr<TwoStreamModel<float>> model;
  NormStats audio_stats;
  ChannelStats video_stats;
  std::vector<MetricsRow> metrics;
  int epoch = 0;  // last completed epoch
  float lr = 0.0f;
  float best_loss = 0.0f;
  int stagnant = 0;
  std::string checkpoint_path;  // final checkpoint location
};

// Contrastive training under the curriculum schedule. Resumable via
// cfg.resume_from; writes metrics.csv, checkpoints, the config echo, and an
// embedding dump of epoch 1 / batch 1 under cfg.out_dir.
TrainState train_avts(const DatasetManifest& manifest, const TrainConfig& cfg);

// Grid-search helper: short fresh runs per candidate, best validation loss
// wins.
float select_learning_rate(const DatasetManifest& manifest, const TrainConfig& cfg);

// Loads a checkpoint (model weights, optimizer+scheduler state, normalization
// stats, metrics position) so training can continue the identical run.
TrainState load_train_state(const std::string& checkpoint_path, const TrainConfig& cfg);

enum class FinetuneTask { AvtsBinary, MultimodalClass };

struct FinetuneResult {
  std::shared_ptr<TwoStreamModel<float>> model;
  std::shared_ptr<FusionHead<float>> head;
  std::vector<MetricsRow> metrics;  // loss column carries cross-entropy
};

// Attaches a fusion head to a pretrained two-stream checkpoint and trains it
// with cross-entropy, either frozen-backbone or end-to-end.
FinetuneResult finetune_head(const DatasetManifest& manifest, const std::string& checkpoint_path,
                             FusionHeadConfig head_cfg, FinetuneTask task, bool end_to_end,
                             const TrainConfig& cfg);

// Head training on pre-computed embeddings (toy-set sanity checks and tests).
double train_head_on_embeddings(FusionHead<float>& head, const Ten<float>& f_a,
                                const Ten<float>& f_v, const std::vector<int>& labels,
                                float lr, int epochs);

void write_metrics_csv(const std::string& path, const std::vector<MetricsRow>& rows);
std::vector<MetricsRow> read_metrics_csv(const std::string& path);

// Serializes model + optimizer + scheduler + stats into the checkpoint
// container.
void save_train_checkpoint(const std::string& path, TwoStreamModel<float>& model,
                           Sgd<float>* opt, const PlateauScheduler<float>* sched, int epoch,
                           const NormStats& audio_stats, const ChannelStats& video_stats);

}  // namespace avsync
