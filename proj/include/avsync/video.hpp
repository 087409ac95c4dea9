#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "avsync/common.hpp"
#include "avsync/rng.hpp"

namespace avsync {

// Channel-major frame stack: 3 x T x H x W, values in [0, 1].
struct FrameSequence {
  std::size_t frames = 0, height = 0, width = 0;
  double fps = 25.0;
  std::vector<float> data;  // 3*T*H*W

  static constexpr std::size_t channels = 3;
  std::size_t plane() const { return height * width; }
  float& at(std::size_t c, std::size_t t, std::size_t y, std::size_t x) {
    return data[((c * frames + t) * height + y) * width + x];
  }
  float at(std::size_t c, std::size_t t, std::size_t y, std::size_t x) const {
    return data[((c * frames + t) * height + y) * width + x];
  }
};

struct TimeInterval {
  double begin = 0.0, end = 0.0;
  double length() const { return end - begin; }
};

// A contiguous t-frame slice with the exact time interval it was cut from,
// which the pair sampler's gap arithmetic relies on.
struct Clip {
  std::size_t frames = 0, height = 0, width = 0;
  std::vector<float> data;  // 3*t*H*W
  TimeInterval interval;

  float& at(std::size_t c, std::size_t t, std::size_t y, std::size_t x) {
    return data[((c * frames + t) * height + y) * width + x];
  }
  float at(std::size_t c, std::size_t t, std::size_t y, std::size_t x) const {
    return data[((c * frames + t) * height + y) * width + x];
  }
};

Clip sample_clip(const FrameSequence& seq, std::size_t start_frame, std::size_t t_frames);

struct ChannelStats {
  std::array<float, 3> mean{0.0f, 0.0f, 0.0f};
  std::array<float, 3> stddev{1.0f, 1.0f, 1.0f};
};

struct AugmentConfig {
  std::vector<double> crop_scales{1.0, 0.875, 0.75};
  double hflip_prob = 0.5;
  ChannelStats norm;
  std::size_t out_h = 64, out_w = 64;
};

struct AugmentTrace {
  std::size_t scale_index = 0;
  std::size_t crop_y = 0, crop_x = 0, crop_side = 0;
  bool flipped = false;
};

// One scale draw, one crop window and one flip decision shared by every frame
// of the clip; bilinear resize to out_h x out_w; per-channel normalization.
Clip augment(const Clip& clip, const AugmentConfig& cfg, Rng& rng,
             AugmentTrace* trace = nullptr);

Clip flip_horizontal(const Clip& clip);

// Per-channel mean/std over a seeded `fraction` subset of the frames in the
// given frame files (the training-split videos).
ChannelStats compute_channel_stats(const std::vector<std::string>& frame_files, double fraction,
                                   std::uint64_t seed);

}  // namespace avsync
