#pragma once

#include <cstdint>
#include <vector>

#include "avsync/audio.hpp"
#include "avsync/sampler.hpp"
#include "avsync/tensor.hpp"
#include "avsync/video.hpp"

namespace avsync {

struct BatchTensors {
  Ten<float> clips;  // N x 3 x t x h x w
  Ten<float> feats;  // N x 1 x T x filters
  std::vector<int> labels;
};

// Assembles model-ready batches from pair descriptions: clip slices are read
// straight out of the per-video frame files, waveform slices run through the
// filterbank, and both sides are normalized with the corpus statistics.
// Items use rng streams derived from (stream_seed, item index), so batches are
// identical for any worker count.
class PairBatchLoader {
 public:
  PairBatchLoader(const DatasetManifest& manifest, NormStats audio_stats,
                  ChannelStats video_stats, AugmentConfig augment_cfg,
                  std::size_t clip_frames = 25);

  // augmented = training transform (random crop/flip); otherwise the
  // deterministic evaluation transform (full centered crop, no flip)
  BatchTensors load(const std::vector<PairExample>& pairs, bool augmented,
                    std::uint64_t stream_seed) const;

  const NormStats& audio_stats() const { return audio_stats_; }
  const ChannelStats& video_stats() const { return video_stats_; }
  std::size_t feature_frames() const { return feature_frames_; }

 private:
  const DatasetManifest* manifest_;
  NormStats audio_stats_;
  ChannelStats video_stats_;
  AugmentConfig augment_cfg_;
  AugmentConfig eval_cfg_;
  FilterbankExtractor extractor_;
  std::size_t clip_frames_;
  std::size_t feature_frames_;
  std::int64_t ticks_per_frame_;
};

// Corpus-level normalization statistics from the training split (seeded 20%
// subsets per the preprocessing convention).
NormStats compute_corpus_audio_stats(const DatasetManifest& manifest, double fraction,
                                     std::uint64_t seed);
ChannelStats compute_corpus_video_stats(const DatasetManifest& manifest, double fraction,
                                        std::uint64_t seed);

}  // namespace avsync
