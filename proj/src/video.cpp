#include "avsync/video.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "avsync/tensor_io.hpp"

namespace avsync {

Clip sample_clip(const FrameSequence& seq, std::size_t start_frame, std::size_t t_frames) {
  check(t_frames >= 1, "sample_clip: need at least one frame");
  check(start_frame + t_frames <= seq.frames,
        cat("sample_clip: [", start_frame, ", ", start_frame + t_frames, ") out of range for ",
            seq.frames, " frames"));
  Clip clip;
  clip.frames = t_frames;
  clip.height = seq.height;
  clip.width = seq.width;
  clip.data.resize(3 * t_frames * seq.plane());
  const std::size_t plane = seq.plane();
  for (std::size_t c = 0; c < 3; ++c) {
    const float* src = seq.data.data() + (c * seq.frames + start_frame) * plane;
    std::copy_n(src, t_frames * plane, clip.data.data() + c * t_frames * plane);
  }
  clip.interval.begin = static_cast<double>(start_frame) / seq.fps;
  clip.interval.end = static_cast<double>(start_frame + t_frames) / seq.fps;
  return clip;
}

Clip flip_horizontal(const Clip& clip) {
  Clip out = clip;
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t t = 0; t < clip.frames; ++t)
      for (std::size_t y = 0; y < clip.height; ++y)
        for (std::size_t x = 0; x < clip.width; ++x)
          out.at(c, t, y, x) = clip.at(c, t, y, clip.width - 1 - x);
  return out;
}

namespace {

// Bilinear sample of one frame plane at (fy, fx) with edge clamping.
float bilinear(const float* plane, std::size_t h, std::size_t w, double fy, double fx) {
  fy = std::clamp(fy, 0.0, static_cast<double>(h - 1));
  fx = std::clamp(fx, 0.0, static_cast<double>(w - 1));
  const std::size_t y0 = static_cast<std::size_t>(fy), x0 = static_cast<std::size_t>(fx);
  const std::size_t y1 = std::min(y0 + 1, h - 1), x1 = std::min(x0 + 1, w - 1);
  const double dy = fy - static_cast<double>(y0), dx = fx - static_cast<double>(x0);
  const double top = plane[y0 * w + x0] * (1.0 - dx) + plane[y0 * w + x1] * dx;
  const double bot = plane[y1 * w + x0] * (1.0 - dx) + plane[y1 * w + x1] * dx;
  return static_cast<float>(top * (1.0 - dy) + bot * dy);
}

}  // namespace

Clip augment(const Clip& clip, const AugmentConfig& cfg, Rng& rng, AugmentTrace* trace) {
  check(!cfg.crop_scales.empty(), "augment: crop scale set is empty");
  for (double s : cfg.crop_scales)
    check(s > 0.0 && s <= 1.0, cat("augment: crop scale ", s, " outside (0, 1]"));
  check(cfg.hflip_prob >= 0.0 && cfg.hflip_prob <= 1.0, "augment: flip probability outside [0,1]");

  const std::size_t scale_index = rng.uniform_index(cfg.crop_scales.size());
  const double scale = cfg.crop_scales[scale_index];
  const std::size_t short_side = std::min(clip.height, clip.width);
  const std::size_t side = static_cast<std::size_t>(std::llround(scale * short_side));
  check(side >= 1 && side <= short_side,
        cat("augment: crop side ", side, " invalid for ", clip.height, "x", clip.width,
            " frames"));
  const std::size_t y0 = rng.uniform_index(clip.height - side + 1);
  const std::size_t x0 = rng.uniform_index(clip.width - side + 1);
  const bool flip = rng.bernoulli(cfg.hflip_prob);
  if (trace) *trace = AugmentTrace{scale_index, y0, x0, side, flip};

  Clip out;
  out.frames = clip.frames;
  out.height = cfg.out_h;
  out.width = cfg.out_w;
  out.interval = clip.interval;
  out.data.resize(3 * clip.frames * cfg.out_h * cfg.out_w);

  // full-frame crop at the output size needs no resampling
  if (side == clip.height && side == clip.width && cfg.out_h == side && cfg.out_w == side) {
    for (std::size_t c = 0; c < 3; ++c) {
      const float mean = cfg.norm.mean[c];
      const float inv_std = 1.0f / cfg.norm.stddev[c];
      for (std::size_t t = 0; t < clip.frames; ++t) {
        const float* src = clip.data.data() + (c * clip.frames + t) * side * side;
        float* dst = out.data.data() + (c * clip.frames + t) * side * side;
        for (std::size_t y = 0; y < side; ++y)
          for (std::size_t x = 0; x < side; ++x)
            dst[y * side + x] =
                (src[y * side + (flip ? side - 1 - x : x)] - mean) * inv_std;
      }
    }
    return out;
  }

  const double sy = static_cast<double>(side) / cfg.out_h;
  const double sx = static_cast<double>(side) / cfg.out_w;
  for (std::size_t c = 0; c < 3; ++c) {
    const float mean = cfg.norm.mean[c];
    const float inv_std = 1.0f / cfg.norm.stddev[c];
    for (std::size_t t = 0; t < clip.frames; ++t) {
      const float* plane = clip.data.data() + (c * clip.frames + t) * clip.height * clip.width;
      float* dst = out.data.data() + (c * clip.frames + t) * cfg.out_h * cfg.out_w;
      for (std::size_t y = 0; y < cfg.out_h; ++y) {
        const double fy = static_cast<double>(y0) + (y + 0.5) * sy - 0.5;
        for (std::size_t x = 0; x < cfg.out_w; ++x) {
          const std::size_t xe = flip ? cfg.out_w - 1 - x : x;
          const double fx = static_cast<double>(x0) + (xe + 0.5) * sx - 0.5;
          dst[y * cfg.out_w + x] = (bilinear(plane, clip.height, clip.width, fy, fx) - mean) *
                                   inv_std;
        }
      }
    }
  }
  return out;
}

ChannelStats compute_channel_stats(const std::vector<std::string>& frame_files, double fraction,
                                   std::uint64_t seed) {
  check(!frame_files.empty(), "channel stats: no frame files");
  check(fraction > 0.0 && fraction <= 1.0, "channel stats: fraction outside (0, 1]");
  double sum[3] = {0, 0, 0}, sumsq[3] = {0, 0, 0};
  std::size_t frames_sampled = 0, plane_elems = 0;
  for (std::size_t fi = 0; fi < frame_files.size(); ++fi) {
    std::ifstream is(frame_files[fi], std::ios::binary);
    check(is.good(), cat("cannot open: ", frame_files[fi]));
    const Shape shape = io::read_tensor_header(is, frame_files[fi]);
    check(shape.size() == 4 && shape[0] == 3, cat(frame_files[fi], ": expected 3xTxHxW frames"));
    const std::size_t T = shape[1], plane = shape[2] * shape[3];
    if (plane_elems == 0) plane_elems = plane;
    check(plane == plane_elems, cat(frame_files[fi], ": frame size differs within corpus"));
    Rng rng(derive_seed(seed, "channel-stats", fi));
    std::vector<float> buf(plane);
    for (std::size_t t = 0; t < T; ++t) {
      if (rng.uniform() >= fraction) continue;
      for (std::size_t c = 0; c < 3; ++c) {
        is.seekg(static_cast<std::streamoff>(4 + 8 * shape.size() + ((c * T + t) * plane) * 4),
                 std::ios::beg);
        io::read_f32_array(is, buf.data(), plane, frame_files[fi]);
        for (float v : buf) {
          sum[c] += v;
          sumsq[c] += static_cast<double>(v) * v;
        }
      }
      ++frames_sampled;
    }
  }
  if (frames_sampled == 0) {
    std::fprintf(stderr, "[avsync] channel stats: sampled subset empty, using all frames\n");
    return compute_channel_stats(frame_files, 1.0, seed);
  }
  ChannelStats stats;
  const double total = static_cast<double>(frames_sampled) * static_cast<double>(plane_elems);
  for (std::size_t c = 0; c < 3; ++c) {
    const double mu = sum[c] / total;
    const double var = std::max(0.0, sumsq[c] / total - mu * mu);
    stats.mean[c] = static_cast<float>(mu);
    stats.stddev[c] = static_cast<float>(std::max(std::sqrt(var), 1e-6));
  }
  return stats;
}

}  // namespace avsync
