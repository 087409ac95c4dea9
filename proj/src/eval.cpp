#include "avsync/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "avsync/gradcam.hpp"

namespace avsync {

TauCalibration calibrate_tau(const std::vector<float>& distances,
                             const std::vector<int>& labels) {
  check(!distances.empty(), "calibrate_tau: empty validation set");
  check(distances.size() == labels.size(), "calibrate_tau: distance/label count mismatch");
  std::vector<float> sorted = distances;
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());

  std::vector<float> candidates;
  for (std::size_t i = 0; i + 1 < sorted.size(); ++i)
    candidates.push_back(0.5f * (sorted[i] + sorted[i + 1]));
  if (candidates.empty()) candidates.push_back(1.0f);  // degenerate: all distances equal

  TauCalibration best;
  best.tau = candidates.front();
  best.accuracy = -1.0;
  for (float tau : candidates) {
    const double acc = threshold_accuracy(distances, labels, tau);
    if (acc > best.accuracy + 1e-12) {  // ties keep the smallest tau
      best.accuracy = acc;
      best.tau = tau;
    }
  }
  return best;
}

double threshold_accuracy(const std::vector<float>& distances, const std::vector<int>& labels,
                          float tau) {
  check(distances.size() == labels.size() && !distances.empty(),
        "threshold_accuracy: bad inputs");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < distances.size(); ++i) {
    const int pred = distances[i] < tau ? 1 : 0;
    if (pred == labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(distances.size());
}

std::vector<float> pair_distances(TwoStreamModel<float>& model, const PairBatchLoader& loader,
                                  const std::vector<PairExample>& pairs,
                                  std::size_t batch_size) {
  std::vector<float> out;
  out.reserve(pairs.size());
  Tape<float> tape;
  tape.set_recording(false);
  for (std::size_t i = 0; i < pairs.size(); i += batch_size) {
    const std::size_t count = std::min(batch_size, pairs.size() - i);
    std::vector<PairExample> chunk(pairs.begin() + i, pairs.begin() + i + count);
    auto batch = loader.load(chunk, false, derive_seed(0, "eval-batch", i));
    auto f_v = model.video.forward(tape, batch.clips, false);
    auto f_a = model.audio.forward(tape, batch.feats, false);
    const std::size_t D = f_v->shape[1];
    for (std::size_t n = 0; n < count; ++n) {
      double d2 = 0;
      for (std::size_t k = 0; k < D; ++k) {
        const double df = f_v->values[n * D + k] - f_a->values[n * D + k];
        d2 += df * df;
      }
      out.push_back(static_cast<float>(std::sqrt(d2)));
    }
  }
  return out;
}

std::string EvalReport::text() const {
  return cat("protocol: ", protocol, "\nsplit: ", split, "\nnegative_mixture: hard=",
             hard_fraction, " superhard=", superhard_fraction, "\npairs: ", num_pairs,
             "\naccuracy: ", accuracy, "\ntau: ", protocol == "threshold" ? std::to_string(tau)
                                                                          : std::string("n/a"),
             "\nseed: ", seed, "\ncheckpoint: ", checkpoint, "\n");
}

std::string EvalReport::csv() const {
  return cat("protocol,split,hard_fraction,superhard_fraction,pairs,accuracy,tau\n", protocol,
             ",", split, ",", hard_fraction, ",", superhard_fraction, ",", num_pairs, ",",
             accuracy, ",", protocol == "threshold" ? std::to_string(tau) : std::string(""),
             "\n");
}

void EvalReport::write(const std::string& dir) const {
  std::filesystem::create_directories(dir);
  std::ofstream t(dir + "/report.txt", std::ios::trunc);
  t << text();
  check(t.good(), cat("write failed: ", dir, "/report.txt"));
  std::ofstream c(dir + "/report.csv", std::ios::trunc);
  c << csv();
  check(c.good(), cat("write failed: ", dir, "/report.csv"));
}

EvalReport evaluate_threshold(TwoStreamModel<float>& model, const PairBatchLoader& loader,
                              const DatasetManifest& manifest,
                              const std::vector<PairExample>& val_pairs,
                              const std::vector<PairExample>& test_pairs) {
  check(!val_pairs.empty(), "evaluate_threshold: tau calibration needs validation pairs");
  std::vector<int> val_labels, test_labels;
  for (const auto& p : val_pairs) val_labels.push_back(p.y);
  for (const auto& p : test_pairs) test_labels.push_back(p.y);
  const auto val_d = pair_distances(model, loader, val_pairs);
  const auto cal = calibrate_tau(val_d, val_labels);
  const auto test_d = pair_distances(model, loader, test_pairs);
  EvalReport rep;
  rep.protocol = "threshold";
  rep.tau = cal.tau;
  rep.num_pairs = test_pairs.size();
  rep.accuracy = threshold_accuracy(test_d, test_labels, cal.tau);
  rep.seed = manifest.config.seed;
  return rep;
}

EvalReport evaluate_finetuned_head(TwoStreamModel<float>& model, FusionHead<float>& head,
                                   const PairBatchLoader& loader,
                                   const std::vector<PairExample>& test_pairs,
                                   std::size_t batch_size) {
  EvalReport rep;
  rep.protocol = "finetuned-head";
  rep.num_pairs = test_pairs.size();
  std::size_t correct = 0;
  Tape<float> tape;
  tape.set_recording(false);
  for (std::size_t i = 0; i < test_pairs.size(); i += batch_size) {
    const std::size_t count = std::min(batch_size, test_pairs.size() - i);
    std::vector<PairExample> chunk(test_pairs.begin() + i, test_pairs.begin() + i + count);
    auto batch = loader.load(chunk, false, derive_seed(0, "head-eval", i));
    auto f_v = model.video.forward(tape, batch.clips, false);
    auto f_a = model.audio.forward(tape, batch.feats, false);
    auto logits = head.forward(tape, f_a, f_v);
    const std::size_t K = logits->shape[1];
    for (std::size_t n = 0; n < count; ++n) {
      std::size_t arg = 0;
      for (std::size_t k = 1; k < K; ++k)
        if (logits->values[n * K + k] > logits->values[n * K + arg]) arg = k;
      if (static_cast<int>(arg) == chunk[n].y) ++correct;
    }
  }
  rep.accuracy = static_cast<double>(correct) / static_cast<double>(test_pairs.size());
  return rep;
}

// ---------------------------------------------------------------------------
// linear probe
// ---------------------------------------------------------------------------

std::vector<double> subclip_starts(double duration, const ProbeConfig& cfg) {
  const double len = cfg.subclip_seconds;
  if (duration < len) {
    std::fprintf(stderr,
                 "[avsync] probe: audio of %.2f s shorter than the %.2f s sub-clip; using one "
                 "full-length sub-clip\n",
                 duration, len);
    return {0.0};
  }
  std::vector<double> starts;
  const double span = duration - len;
  for (std::size_t i = 0; i < cfg.subclips; ++i) {
    const double s = cfg.subclips == 1
                         ? 0.0
                         : span * static_cast<double>(i) / static_cast<double>(cfg.subclips - 1);
    if (!starts.empty() && s == starts.back()) continue;  // degenerate spacing collapses
    starts.push_back(s);
  }
  if (starts.size() < cfg.subclips)
    std::fprintf(stderr, "[avsync] probe: degenerate spacing, %zu unique sub-clips\n",
                 starts.size());
  return starts;
}

std::vector<FilterbankFeatures> extract_subclips(const Waveform& w, const ProbeConfig& cfg,
                                                 const FilterbankSpec& spec) {
  FilterbankExtractor extractor(w.sample_rate, spec);
  std::vector<FilterbankFeatures> out;
  for (double start : subclip_starts(w.duration(), cfg)) {
    const std::size_t s0 = static_cast<std::size_t>(
        std::llround(start * static_cast<double>(w.sample_rate)));
    const std::size_t len = std::min(
        w.samples.size() - s0,
        static_cast<std::size_t>(std::llround(cfg.subclip_seconds *
                                              static_cast<double>(w.sample_rate))));
    Waveform slice;
    slice.sample_rate = w.sample_rate;
    slice.samples.assign(w.samples.begin() + s0, w.samples.begin() + s0 + len);
    out.push_back(extractor.features(slice));
  }
  return out;
}

ProbeFeatures extract_probe_features(TwoStreamModel<float>& model,
                                     const DatasetManifest& manifest, const std::string& split,
                                     const NormStats& audio_stats, const ProbeConfig& cfg,
                                     std::size_t max_records) {
  auto records = manifest.split_records(split);
  check(!records.empty(), cat("probe: split '", split, "' is empty"));
  if (max_records > 0 && records.size() > max_records) records.resize(max_records);
  ProbeFeatures out;
  out.num_samples = records.size();
  Tape<float> tape;
  tape.set_recording(false);
  for (std::size_t ri = 0; ri < records.size(); ++ri) {
    const Waveform w = read_wav(manifest.wav_file(*records[ri]));
    for (const auto& feats : extract_subclips(w, cfg)) {
      const FilterbankFeatures z = z_normalize(feats, audio_stats);
      auto x = make_tensor<float>({1, 1, z.frames, z.filters}, z.values);
      auto v = model.audio.conv5_features(tape, x);
      out.features.push_back(std::move(v));
      out.labels.push_back(records[ri]->label);
      out.sample.push_back(static_cast<int>(ri));
    }
  }
  return out;
}

LinearProbe LinearProbe::train(const ProbeFeatures& train_data, std::size_t num_classes,
                               const ProbeConfig& cfg) {
  check(num_classes >= 2, "probe: need at least two classes");
  check(!train_data.features.empty(), "probe: no training features");
  {
    std::set<int> distinct(train_data.labels.begin(), train_data.labels.end());
    check(distinct.size() >= 2, "probe: training labels cover a single class");
  }
  LinearProbe p;
  p.classes_ = num_classes;
  p.dim_ = train_data.features[0].size();
  const std::size_t n = train_data.features.size();

  // per-dimension standardization from the training features
  p.mean_.assign(p.dim_, 0.0f);
  p.inv_std_.assign(p.dim_, 1.0f);
  std::vector<double> sum(p.dim_, 0.0), sumsq(p.dim_, 0.0);
  for (const auto& f : train_data.features)
    for (std::size_t d = 0; d < p.dim_; ++d) {
      sum[d] += f[d];
      sumsq[d] += static_cast<double>(f[d]) * f[d];
    }
  for (std::size_t d = 0; d < p.dim_; ++d) {
    const double mu = sum[d] / static_cast<double>(n);
    const double var = std::max(0.0, sumsq[d] / static_cast<double>(n) - mu * mu);
    p.mean_[d] = static_cast<float>(mu);
    p.inv_std_[d] = static_cast<float>(1.0 / std::max(std::sqrt(var), 1e-6));
  }

  std::vector<double> x(p.dim_ + 1);
  p.weights_.assign(num_classes * (p.dim_ + 1), 0.0);
  const double lambda = cfg.regularization;
  Rng rng(derive_seed(cfg.seed, "probe-shuffle"));
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::size_t t = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.uniform_index(i)]);
    for (std::size_t i = 0; i < n; ++i) {
      const auto& f = train_data.features[order[i]];
      for (std::size_t d = 0; d < p.dim_; ++d) x[d] = (f[d] - p.mean_[d]) * p.inv_std_[d];
      x[p.dim_] = 1.0;
      ++t;
      const double eta = 1.0 / (lambda * static_cast<double>(t));
      const double shrink = std::max(0.0, 1.0 - eta * lambda);
      for (std::size_t c = 0; c < num_classes; ++c) {
        double* w = p.weights_.data() + c * (p.dim_ + 1);
        const double y = train_data.labels[order[i]] == static_cast<int>(c) ? 1.0 : -1.0;
        double margin = 0;
        for (std::size_t d = 0; d <= p.dim_; ++d) margin += w[d] * x[d];
        if (y * margin < 1.0) {
          for (std::size_t d = 0; d <= p.dim_; ++d) w[d] = shrink * w[d] + eta * y * x[d];
        } else {
          for (std::size_t d = 0; d <= p.dim_; ++d) w[d] = shrink * w[d];
        }
      }
    }
  }
  return p;
}

std::vector<double> LinearProbe::class_scores(const std::vector<float>& feature) const {
  check(feature.size() == dim_, "probe: feature dimension mismatch");
  std::vector<double> scores(classes_, 0.0);
  for (std::size_t c = 0; c < classes_; ++c) {
    const double* w = weights_.data() + c * (dim_ + 1);
    double s = w[dim_];  // bias
    for (std::size_t d = 0; d < dim_; ++d)
      s += w[d] * (feature[d] - mean_[d]) * inv_std_[d];
    scores[c] = s;
  }
  return scores;
}

double LinearProbe::sample_accuracy(const ProbeFeatures& data) const {
  check(!data.features.empty(), "probe: no evaluation features");
  // mean sub-clip margin per sample, then argmax over classes
  std::vector<std::vector<double>> acc(data.num_samples, std::vector<double>(classes_, 0.0));
  std::vector<int> counts(data.num_samples, 0), label(data.num_samples, -1);
  for (std::size_t i = 0; i < data.features.size(); ++i) {
    const auto scores = class_scores(data.features[i]);
    const int s = data.sample[i];
    for (std::size_t c = 0; c < classes_; ++c) acc[s][c] += scores[c];
    ++counts[s];
    label[s] = data.labels[i];
  }
  std::size_t correct = 0, total = 0;
  for (std::size_t s = 0; s < data.num_samples; ++s) {
    if (counts[s] == 0) continue;
    ++total;
    std::size_t arg = 0;
    for (std::size_t c = 1; c < classes_; ++c)
      if (acc[s][c] > acc[s][arg]) arg = c;
    if (static_cast<int>(arg) == label[s]) ++correct;
  }
  check(total > 0, "probe: no samples to evaluate");
  return static_cast<double>(correct) / static_cast<double>(total);
}

double box_mass_fraction(const HeatmapStack& heat, int box_x, int box_y, int box_w, int box_h) {
  std::vector<std::pair<float, bool>> cells;
  cells.reserve(heat.data.size());
  for (std::size_t t = 0; t < heat.frames; ++t)
    for (std::size_t y = 0; y < heat.height; ++y)
      for (std::size_t x = 0; x < heat.width; ++x) {
        const bool inside = static_cast<int>(x) >= box_x &&
                            static_cast<int>(x) < box_x + box_w &&
                            static_cast<int>(y) >= box_y && static_cast<int>(y) < box_y + box_h;
        cells.emplace_back(heat.at(t, y, x), inside);
      }
  std::sort(cells.begin(), cells.end(),
            [](const auto& a, const auto& b) { return a.first > b.first; });
  const std::size_t top = std::max<std::size_t>(1, cells.size() / 10);
  double total = 0, inside_mass = 0;
  for (std::size_t i = 0; i < top; ++i) {
    total += cells[i].first;
    if (cells[i].second) inside_mass += cells[i].first;
  }
  if (total <= 0.0) return 0.0;
  return inside_mass / total;
}

}  // namespace avsync
