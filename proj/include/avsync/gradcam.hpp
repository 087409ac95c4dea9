#pragma once

#include <string>
#include <vector>

#include "avsync/models.hpp"

namespace avsync {

struct HeatmapStack {
  std::size_t frames = 0, height = 0, width = 0;
  std::vector<float> data;  // frames x height x width, values >= 0

  float at(std::size_t t, std::size_t y, std::size_t x) const {
    return data[(t * height + y) * width + x];
  }
  float max_value() const;
};

// Gradient-weighted activation mapping against the similarity target
// -||f_v - f_a||^2: channel weights are the globally average-pooled gradients
// at the video subnet's last 3D group, the weighted activation sum is ReLU'd,
// bilinearly upsampled to the frame size, and activations below
// filter_frac * max are zeroed.
HeatmapStack gradcam_localize(TwoStreamModel<float>& model, const Ten<float>& clip_batch,
                              const Ten<float>& feature_batch, double filter_frac = 0.2);

// 8-bit binary portable graymap, values linearly mapped from [0, max].
void write_pgm(const std::string& path, const float* plane, std::size_t h, std::size_t w,
               float max_value);

}  // namespace avsync
