#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "avsync/gradcam.hpp"
#include "avsync/loader.hpp"
#include "avsync/models.hpp"
#include "avsync/sampler.hpp"

namespace avsync {

// ---------------------------------------------------------------------------
// distance-threshold classification: predict in-sync iff ||f_v - f_a|| < tau
// ---------------------------------------------------------------------------

struct TauCalibration {
  float tau = 1.0f;
  double accuracy = 0.0;
};

// Sweeps the midpoints of the sorted validation distances and returns the
// accuracy-maximizing threshold; ties resolve to the smallest tau.
TauCalibration calibrate_tau(const std::vector<float>& distances, const std::vector<int>& labels);

double threshold_accuracy(const std::vector<float>& distances, const std::vector<int>& labels,
                          float tau);

// Embedding distances for a pair set under the deterministic eval transform.
std::vector<float> pair_distances(TwoStreamModel<float>& model, const PairBatchLoader& loader,
                                  const std::vector<PairExample>& pairs,
                                  std::size_t batch_size = 16);

struct EvalReport {
  std::string protocol;  // "threshold" or "finetuned-head"
  std::string split;
  double hard_fraction = 0.0;
  double superhard_fraction = 0.0;
  std::size_t num_pairs = 0;
  double accuracy = 0.0;
  float tau = 0.0f;  // threshold protocol only
  std::uint64_t seed = 0;
  std::string checkpoint;

  std::string text() const;
  std::string csv() const;
  void write(const std::string& dir) const;  // report.txt + report.csv
};

EvalReport evaluate_threshold(TwoStreamModel<float>& model, const PairBatchLoader& loader,
                              const DatasetManifest& manifest,
                              const std::vector<PairExample>& val_pairs,
                              const std::vector<PairExample>& test_pairs);

EvalReport evaluate_finetuned_head(TwoStreamModel<float>& model, FusionHead<float>& head,
                                   const PairBatchLoader& loader,
                                   const std::vector<PairExample>& test_pairs,
                                   std::size_t batch_size = 16);

// ---------------------------------------------------------------------------
// audio linear probe on conv5 features
// ---------------------------------------------------------------------------

struct ProbeConfig {
  std::size_t subclips = 10;
  double subclip_seconds = 2.0;
  double regularization = 1e-4;
  int epochs = 50;
  std::uint64_t seed = 0;
};

// Equally spaced sub-clip start times: i*(duration - len)/(n - 1). Shorter
// audio degrades to fewer sub-clips with a warning (minimum one).
std::vector<double> subclip_starts(double duration, const ProbeConfig& cfg);

std::vector<FilterbankFeatures> extract_subclips(const Waveform& w, const ProbeConfig& cfg,
                                                 const FilterbankSpec& spec = {});

struct ProbeFeatures {
  std::vector<std::vector<float>> features;  // one conv5 vector per sub-clip
  std::vector<int> labels;                   // per sub-clip (sample's class)
  std::vector<int> sample;                   // owning sample index
  std::size_t num_samples = 0;
};

// conv5 features for every sub-clip of every record in the split (audio is
// z-normalized with the training stats). max_records > 0 caps the record
// count (records keep their manifest order).
ProbeFeatures extract_probe_features(TwoStreamModel<float>& model,
                                     const DatasetManifest& manifest, const std::string& split,
                                     const NormStats& audio_stats, const ProbeConfig& cfg,
                                     std::size_t max_records = 0);

// One-vs-all linear SVM trained with Pegasos-style subgradient descent on
// standardized features. Sample prediction is the argmax over classes of the
// mean sub-clip margin.
class LinearProbe {
 public:
  static LinearProbe train(const ProbeFeatures& train_data, std::size_t num_classes,
                           const ProbeConfig& cfg);

  double sample_accuracy(const ProbeFeatures& data) const;
  std::vector<double> class_scores(const std::vector<float>& feature) const;

 private:
  std::size_t classes_ = 0, dim_ = 0;
  std::vector<float> mean_, inv_std_;        // standardization
  std::vector<double> weights_;              // classes x (dim + 1), bias last
};

// ---------------------------------------------------------------------------
// localization metric
// ---------------------------------------------------------------------------

// Fraction of the top-decile activation mass that falls inside the box.
double box_mass_fraction(const HeatmapStack& heat, int box_x, int box_y, int box_w, int box_h);

}  // namespace avsync
