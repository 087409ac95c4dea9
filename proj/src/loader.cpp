#include "avsync/loader.hpp"

#include <cmath>

#include "avsync/tensor_io.hpp"

namespace avsync {

PairBatchLoader::PairBatchLoader(const DatasetManifest& manifest, NormStats audio_stats,
                                 ChannelStats video_stats, AugmentConfig augment_cfg,
                                 std::size_t clip_frames)
    : manifest_(&manifest),
      audio_stats_(std::move(audio_stats)),
      video_stats_(video_stats),
      augment_cfg_(augment_cfg),
      eval_cfg_(augment_cfg),
      extractor_(manifest.config.sample_rate),
      clip_frames_(clip_frames) {
  augment_cfg_.norm = video_stats_;
  eval_cfg_ = augment_cfg_;
  eval_cfg_.crop_scales = {1.0};
  eval_cfg_.hflip_prob = 0.0;
  ticks_per_frame_ = static_cast<std::int64_t>(
      std::llround(manifest.config.sample_rate / manifest.config.fps));
  const std::size_t clip_samples = clip_frames_ * static_cast<std::size_t>(ticks_per_frame_);
  feature_frames_ = extractor_.frame_count(clip_samples);
}

BatchTensors PairBatchLoader::load(const std::vector<PairExample>& pairs, bool augmented,
                                   std::uint64_t stream_seed) const {
  const std::size_t n = pairs.size();
  check(n > 0, "loader: empty batch");
  const auto& cfg = manifest_->config;
  BatchTensors out;
  out.clips = make_tensor<float>({n, 3, clip_frames_, augment_cfg_.out_h, augment_cfg_.out_w});
  out.feats = make_tensor<float>({n, 1, feature_frames_, extractor_.spec().num_filters});
  out.labels.resize(n);

  const std::size_t clip_elems = 3 * clip_frames_ * augment_cfg_.out_h * augment_cfg_.out_w;
  const std::size_t feat_elems = feature_frames_ * extractor_.spec().num_filters;
  const long nn = static_cast<long>(n);
#pragma omp parallel for schedule(dynamic)
  for (long i = 0; i < nn; ++i) {
    const PairExample& p = pairs[static_cast<std::size_t>(i)];
    out.labels[static_cast<std::size_t>(i)] = p.y;

    // video side: slice [start_frame, start_frame + t) from the frame file
    const AVRecord& vrec = manifest_->record_by_id(p.video_id);
    const std::string vpath = manifest_->frames_file(vrec);
    const std::size_t start_frame =
        static_cast<std::size_t>(p.video_begin / ticks_per_frame_);
    Clip clip;
    clip.frames = clip_frames_;
    clip.height = cfg.height;
    clip.width = cfg.width;
    clip.data.resize(3 * clip_frames_ * cfg.height * cfg.width);
    const std::size_t plane = cfg.height * cfg.width;
    const std::size_t total_frames = static_cast<std::size_t>(
        std::llround(cfg.duration * cfg.fps));
    for (std::size_t c = 0; c < 3; ++c) {
      auto [shape, data] = io::read_tensor_slice(
          vpath, (c * total_frames + start_frame) * plane, clip_frames_ * plane);
      std::copy(data.begin(), data.end(), clip.data.begin() + c * clip_frames_ * plane);
    }
    Rng rng(derive_seed(stream_seed, "item", static_cast<std::uint64_t>(i)));
    Clip aug = augment(clip, augmented ? augment_cfg_ : eval_cfg_, rng);
    std::copy(aug.data.begin(), aug.data.end(),
              out.clips->values.begin() + static_cast<std::size_t>(i) * clip_elems);

    // audio side: waveform slice -> filterbank -> z-normalize
    const AVRecord& arec = manifest_->record_by_id(p.audio_id);
    Waveform w = read_wav(manifest_->wav_file(arec));
    check(p.audio_end <= static_cast<std::int64_t>(w.samples.size()),
          cat("loader: audio interval exceeds waveform for record ", p.audio_id));
    Waveform slice;
    slice.sample_rate = w.sample_rate;
    slice.samples.assign(w.samples.begin() + p.audio_begin, w.samples.begin() + p.audio_end);
    FilterbankFeatures f = z_normalize(extractor_.features(slice), audio_stats_);
    check(f.frames == feature_frames_, cat("loader: expected ", feature_frames_,
                                           " feature frames, got ", f.frames));
    std::copy(f.values.begin(), f.values.end(),
              out.feats->values.begin() + static_cast<std::size_t>(i) * feat_elems);
  }
  return out;
}

NormStats compute_corpus_audio_stats(const DatasetManifest& manifest, double fraction,
                                     std::uint64_t seed) {
  const auto train = manifest.split_records("train");
  check(!train.empty(), "audio stats: empty train split");
  check(fraction > 0.0 && fraction <= 1.0, "audio stats: fraction outside (0, 1]");
  // pick the record subset first so only sampled waveforms are featurized
  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(derive_seed(seed, "audio-stats-subset"));
  for (std::size_t i = order.size(); i > 1; --i)
    std::swap(order[i - 1], order[rng.uniform_index(i)]);
  const std::size_t count = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(fraction * static_cast<double>(train.size()))));
  FilterbankExtractor extractor(manifest.config.sample_rate);
  std::vector<FilterbankFeatures> feats(count);
  const long n = static_cast<long>(count);
#pragma omp parallel for schedule(dynamic)
  for (long i = 0; i < n; ++i)
    feats[static_cast<std::size_t>(i)] = extractor.features(
        read_wav(manifest.wav_file(*train[order[static_cast<std::size_t>(i)]])));
  return compute_norm_stats(feats, 1.0, seed);
}

ChannelStats compute_corpus_video_stats(const DatasetManifest& manifest, double fraction,
                                        std::uint64_t seed) {
  const auto train = manifest.split_records("train");
  check(!train.empty(), "video stats: empty train split");
  std::vector<std::string> files;
  files.reserve(train.size());
  for (const auto* r : train) files.push_back(manifest.frames_file(*r));
  return compute_channel_stats(files, fraction, seed);
}

}  // namespace avsync
