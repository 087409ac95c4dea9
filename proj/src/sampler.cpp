#include "avsync/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace avsync {

const char* pair_kind_name(PairKind k) {
  switch (k) {
    case PairKind::Positive: return "positive";
    case PairKind::Easy: return "easy";
    case PairKind::Hard: return "hard";
    case PairKind::SuperHard: return "superhard";
  }
  return "?";
}

std::int64_t interval_gap_ticks(std::int64_t a_begin, std::int64_t a_end, std::int64_t b_begin,
                                std::int64_t b_end) {
  return std::max(b_begin - a_end, a_begin - b_end);
}

std::int64_t interval_overlap_ticks(std::int64_t a_begin, std::int64_t a_end,
                                    std::int64_t b_begin, std::int64_t b_end) {
  return std::min(a_end, b_end) - std::max(a_begin, b_begin);
}

CurriculumSchedule CurriculumSchedule::curriculum(int boundary, int total) {
  CurriculumSchedule s;
  s.phases.push_back({1, boundary, 1.0, 0.0, 0.0});
  s.phases.push_back({boundary + 1, total, 0.75, 0.25, 0.0});
  s.validate();
  return s;
}

CurriculumSchedule CurriculumSchedule::easy_only(int total) {
  CurriculumSchedule s;
  s.phases.push_back({1, total, 1.0, 0.0, 0.0});
  s.validate();
  return s;
}

CurriculumSchedule CurriculumSchedule::hard_from_start(int total) {
  CurriculumSchedule s;
  s.phases.push_back({1, total, 0.0, 1.0, 0.0});
  s.validate();
  return s;
}

CurriculumSchedule CurriculumSchedule::parse(const std::string& name, int boundary, int total) {
  if (name == "curriculum") return curriculum(boundary, total);
  if (name == "easy-only") return easy_only(total);
  if (name == "hard-from-start") return hard_from_start(total);
  fail(cat("unknown schedule '", name,
           "' (expected curriculum | easy-only | hard-from-start)"));
}

void CurriculumSchedule::validate() const {
  check(!phases.empty(), "schedule: no phases");
  int expect = 1;
  for (const auto& p : phases) {
    check(p.first_epoch == expect, cat("schedule: phases not contiguous at epoch ", p.first_epoch));
    check(p.last_epoch >= p.first_epoch, "schedule: empty phase");
    const double sum = p.easy + p.hard + p.superhard;
    check(std::fabs(sum - 1.0) < 1e-9, cat("schedule: mixture sums to ", sum, ", not 1"));
    check(p.easy >= 0 && p.hard >= 0 && p.superhard >= 0, "schedule: negative mixture weight");
    expect = p.last_epoch + 1;
  }
}

const CurriculumPhase& CurriculumSchedule::phase_for(int epoch) const {
  for (const auto& p : phases)
    if (epoch >= p.first_epoch && epoch <= p.last_epoch) return p;
  fail(cat("schedule: epoch ", epoch, " outside all phases (1..", last_epoch(), ")"));
}

int CurriculumSchedule::phase_index(int epoch) const {
  for (std::size_t i = 0; i < phases.size(); ++i)
    if (epoch >= phases[i].first_epoch && epoch <= phases[i].last_epoch)
      return static_cast<int>(i);
  fail(cat("schedule: epoch ", epoch, " outside all phases"));
}

PairSampler::PairSampler(const DatasetManifest& manifest, std::string split, double clip_seconds,
                         double hard_gap_seconds, double overlap_fraction)
    : manifest_(&manifest) {
  const auto& cfg = manifest.config;
  const double spf = static_cast<double>(cfg.sample_rate) / cfg.fps;
  ticks_per_frame_ = static_cast<std::int64_t>(std::llround(spf));
  check(std::fabs(spf - static_cast<double>(ticks_per_frame_)) < 1e-9,
        cat("sampler: sample rate ", cfg.sample_rate, " not divisible by fps ", cfg.fps));
  clip_ticks_ = static_cast<std::int64_t>(std::llround(clip_seconds * cfg.sample_rate));
  check(clip_ticks_ % ticks_per_frame_ == 0,
        cat("sampler: clip length ", clip_seconds, " s is not a whole number of frames"));
  gap_ticks_ = static_cast<std::int64_t>(std::llround(hard_gap_seconds * cfg.sample_rate));
  check(overlap_fraction > 0.0 && overlap_fraction < 1.0,
        "sampler: overlap fraction must lie in (0,1)");
  overlap_ticks_ = static_cast<std::int64_t>(
      std::llround(overlap_fraction * static_cast<double>(clip_ticks_)));
  duration_ticks_ = static_cast<std::int64_t>(std::llround(cfg.duration * cfg.sample_rate));
  check(duration_ticks_ >= clip_ticks_, "sampler: records shorter than one clip");
  check(duration_ticks_ >= 2 * clip_ticks_ + gap_ticks_,
        cat("sampler: hard negatives need duration >= 2*clip + gap = ",
            static_cast<double>(2 * clip_ticks_ + gap_ticks_) / cfg.sample_rate, " s, records are ",
            cfg.duration, " s"));

  records_ = manifest.split_records(split);
  check(!records_.empty(), cat("sampler: split '", split, "' has no records"));
  check(records_.size() >= 2 || split.empty(),
        cat("sampler: split '", split, "' needs >= 2 records for easy negatives"));
}

std::int64_t PairSampler::random_video_start(Rng& rng) const {
  const std::int64_t max_frame = (duration_ticks_ - clip_ticks_) / ticks_per_frame_;
  return static_cast<std::int64_t>(rng.uniform_index(static_cast<std::uint64_t>(max_frame + 1))) *
         ticks_per_frame_;
}

PairExample PairSampler::sample_positive(Rng& rng) const {
  const AVRecord* rec = records_[rng.uniform_index(records_.size())];
  const std::int64_t start = random_video_start(rng);
  PairExample p;
  p.audio_id = p.video_id = rec->id;
  p.audio_begin = p.video_begin = start;
  p.audio_end = p.video_end = start + clip_ticks_;
  p.y = 1;
  p.kind = PairKind::Positive;
  return p;
}

PairExample PairSampler::sample_negative(NegativeKind kind, Rng& rng) const {
  PairExample p;
  p.y = 0;
  if (kind == NegativeKind::Easy) {
    check(records_.size() >= 2, "sampler: easy negatives need >= 2 records");
    const std::size_t i = rng.uniform_index(records_.size());
    std::size_t j = rng.uniform_index(records_.size() - 1);
    if (j >= i) ++j;  // distinct by construction
    p.video_id = records_[i]->id;
    p.audio_id = records_[j]->id;
    p.video_begin = random_video_start(rng);
    p.audio_begin = random_video_start(rng);
    p.video_end = p.video_begin + clip_ticks_;
    p.audio_end = p.audio_begin + clip_ticks_;
    p.kind = PairKind::Easy;
    return p;
  }
  const AVRecord* rec = records_[rng.uniform_index(records_.size())];
  p.video_id = p.audio_id = rec->id;
  if (kind == NegativeKind::Hard) {
    for (int attempt = 0; attempt < 10000; ++attempt) {
      const std::int64_t v = random_video_start(rng);
      const std::int64_t a = random_video_start(rng);
      if (interval_gap_ticks(a, a + clip_ticks_, v, v + clip_ticks_) >= gap_ticks_) {
        p.video_begin = v;
        p.audio_begin = a;
        p.video_end = v + clip_ticks_;
        p.audio_end = a + clip_ticks_;
        p.kind = PairKind::Hard;
        return p;
      }
    }
    fail("sampler: could not satisfy the hard-negative gap after bounded retries");
  }
  // superhard: audio shifted by exactly clip - overlap ticks
  const std::int64_t shift = clip_ticks_ - overlap_ticks_;
  for (int attempt = 0; attempt < 10000; ++attempt) {
    const std::int64_t v = random_video_start(rng);
    const bool after = rng.bernoulli(0.5);
    const std::int64_t a = after ? v + shift : v - shift;
    if (a < 0 || a + clip_ticks_ > duration_ticks_) continue;
    p.video_begin = v;
    p.audio_begin = a;
    p.video_end = v + clip_ticks_;
    p.audio_end = a + clip_ticks_;
    p.kind = PairKind::SuperHard;
    return p;
  }
  fail("sampler: could not place a superhard negative after bounded retries");
}

PairExample PairSampler::sample_from_mixture(const CurriculumPhase& phase, Rng& rng) const {
  const double u = rng.uniform();
  if (u < phase.easy) return sample_negative(NegativeKind::Easy, rng);
  if (u < phase.easy + phase.hard) return sample_negative(NegativeKind::Hard, rng);
  return sample_negative(NegativeKind::SuperHard, rng);
}

std::vector<std::vector<PairExample>> PairSampler::epoch_stream(
    int epoch, const CurriculumSchedule& schedule, std::size_t batch_size,
    std::size_t num_batches, std::uint64_t seed) const {
  check(batch_size >= 2 && batch_size % 2 == 0,
        cat("sampler: batch size ", batch_size, " must be even (half positives)"));
  const CurriculumPhase& phase = schedule.phase_for(epoch);
  Rng rng(derive_seed(seed, "epoch-stream", static_cast<std::uint64_t>(epoch)));
  std::vector<std::vector<PairExample>> batches(num_batches);
  for (auto& batch : batches) {
    batch.reserve(batch_size);
    for (std::size_t i = 0; i < batch_size / 2; ++i) batch.push_back(sample_positive(rng));
    for (std::size_t i = 0; i < batch_size / 2; ++i)
      batch.push_back(sample_from_mixture(phase, rng));
    for (std::size_t i = batch.size(); i > 1; --i)
      std::swap(batch[i - 1], batch[rng.uniform_index(i)]);
  }
  return batches;
}

std::vector<PairExample> make_eval_pairs(const DatasetManifest& manifest,
                                         const std::string& split, std::size_t num_pairs,
                                         double hard_fraction, double superhard_fraction,
                                         std::uint64_t seed, double clip_seconds) {
  check(hard_fraction >= 0 && superhard_fraction >= 0 &&
            hard_fraction + superhard_fraction <= 1.0,
        "eval pairs: bad negative mixture");
  PairSampler sampler(manifest, split, clip_seconds);
  Rng rng(derive_seed(seed, "eval-pairs"));
  std::vector<PairExample> pairs;
  pairs.reserve(num_pairs);
  for (std::size_t i = 0; i < num_pairs; ++i) {
    if (i % 2 == 0) {
      pairs.push_back(sampler.sample_positive(rng));
    } else {
      const double u = rng.uniform();
      NegativeKind kind = NegativeKind::Easy;
      if (u < hard_fraction)
        kind = NegativeKind::Hard;
      else if (u < hard_fraction + superhard_fraction)
        kind = NegativeKind::SuperHard;
      pairs.push_back(sampler.sample_negative(kind, rng));
    }
  }
  return pairs;
}

void export_pair_list(const std::vector<PairExample>& pairs, double sample_rate,
                      const std::string& path) {
  std::ofstream os(path, std::ios::trunc);
  check(os.good(), cat("cannot open for write: ", path));
  for (const auto& p : pairs) {
    char line[160];
    std::snprintf(line, sizeof(line), "%d %.6f %d %.6f %d %s\n", p.audio_id,
                  p.audio_begin_sec(sample_rate), p.video_id, p.video_begin_sec(sample_rate), p.y,
                  pair_kind_name(p.kind));
    os << line;
  }
  check(os.good(), cat("write failed: ", path));
}

}  // namespace avsync
