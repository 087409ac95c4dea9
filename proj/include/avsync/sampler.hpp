#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "avsync/rng.hpp"
#include "avsync/synth.hpp"

namespace avsync {

enum class NegativeKind { Easy, Hard, SuperHard };
enum class PairKind { Positive, Easy, Hard, SuperHard };

const char* pair_kind_name(PairKind k);

// Intervals are stored in audio sample ticks so the 0.5 s gap and the fixed
// overlap are exact integer arithmetic. Video intervals always sit on the
// frame grid; superhard audio intervals intentionally do not.
struct PairExample {
  int audio_id = 0, video_id = 0;
  std::int64_t audio_begin = 0, audio_end = 0;  // ticks @ sample_rate
  std::int64_t video_begin = 0, video_end = 0;
  int y = 0;
  PairKind kind = PairKind::Positive;

  double audio_begin_sec(double sr) const { return static_cast<double>(audio_begin) / sr; }
  double video_begin_sec(double sr) const { return static_cast<double>(video_begin) / sr; }
};

// Nearest-boundary distance between two disjoint tick intervals; negative
// when they overlap.
std::int64_t interval_gap_ticks(std::int64_t a_begin, std::int64_t a_end, std::int64_t b_begin,
                                std::int64_t b_end);
std::int64_t interval_overlap_ticks(std::int64_t a_begin, std::int64_t a_end,
                                    std::int64_t b_begin, std::int64_t b_end);

struct CurriculumPhase {
  int first_epoch = 1, last_epoch = 1;  // inclusive
  double easy = 1.0, hard = 0.0, superhard = 0.0;
};

struct CurriculumSchedule {
  std::vector<CurriculumPhase> phases;

  // epochs 1..boundary easy only; boundary+1..total 75% easy / 25% hard
  static CurriculumSchedule curriculum(int boundary = 50, int total = 90);
  static CurriculumSchedule easy_only(int total = 90);
  static CurriculumSchedule hard_from_start(int total = 90);
  static CurriculumSchedule parse(const std::string& name, int boundary, int total);

  const CurriculumPhase& phase_for(int epoch) const;
  int phase_index(int epoch) const;
  int last_epoch() const { return phases.empty() ? 0 : phases.back().last_epoch; }
  void validate() const;
};

class PairSampler {
 public:
  PairSampler(const DatasetManifest& manifest, std::string split, double clip_seconds = 1.0,
              double hard_gap_seconds = 0.5, double overlap_fraction = 0.5);

  PairExample sample_positive(Rng& rng) const;
  PairExample sample_negative(NegativeKind kind, Rng& rng) const;
  PairExample sample_from_mixture(const CurriculumPhase& phase, Rng& rng) const;

  // All batches of one epoch; deterministic in (seed, epoch). Every batch is
  // exactly half positives.
  std::vector<std::vector<PairExample>> epoch_stream(int epoch,
                                                     const CurriculumSchedule& schedule,
                                                     std::size_t batch_size,
                                                     std::size_t num_batches,
                                                     std::uint64_t seed) const;

  std::int64_t clip_ticks() const { return clip_ticks_; }
  std::int64_t gap_ticks() const { return gap_ticks_; }
  std::int64_t overlap_ticks() const { return overlap_ticks_; }
  std::int64_t ticks_per_frame() const { return ticks_per_frame_; }
  const std::vector<const AVRecord*>& records() const { return records_; }

 private:
  std::int64_t random_video_start(Rng& rng) const;  // frame-grid ticks

  const DatasetManifest* manifest_;
  std::vector<const AVRecord*> records_;
  std::int64_t clip_ticks_, gap_ticks_, overlap_ticks_, ticks_per_frame_, duration_ticks_;
};

// Balanced positive/negative evaluation pairs with the requested negative
// mixture, materialized from one split's records.
std::vector<PairExample> make_eval_pairs(const DatasetManifest& manifest,
                                         const std::string& split, std::size_t num_pairs,
                                         double hard_fraction, double superhard_fraction,
                                         std::uint64_t seed, double clip_seconds = 1.0);

// Pair-list export for audit/replay: one pair per line,
//   audio_id audio_start_sec video_id video_start_sec y kind
void export_pair_list(const std::vector<PairExample>& pairs, double sample_rate,
                      const std::string& path);

}  // namespace avsync
