#include "avsync/models.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "avsync/gradcam.hpp"

namespace avsync {

float HeatmapStack::max_value() const {
  float m = 0.0f;
  for (float v : data) m = std::max(m, v);
  return m;
}

HeatmapStack gradcam_localize(TwoStreamModel<float>& model, const Ten<float>& clip_batch,
                              const Ten<float>& feature_batch, double filter_frac) {
  check(clip_batch->rank() == 5 && clip_batch->shape[0] == 1,
        "gradcam: expects a single-clip batch 1x3xtxhxw");
  Tape<float> tape;
  auto f_v = model.video.forward(tape, clip_batch, false);
  auto f_a = model.audio.forward(tape, feature_batch, false);
  auto target = ops::scale(tape, ops::squared_distance_sum(tape, f_v, f_a), -1.0f);
  tape.backward(target);

  const auto& tap = model.video.tap();
  check(tap->has_grad(), "gradcam: similarity target produced no gradient at the video tap");
  const std::size_t C = tap->shape[1], Tt = tap->shape[2], Hh = tap->shape[3],
                    Ww = tap->shape[4];
  const std::size_t S = Tt * Hh * Ww;

  std::vector<float> weights(C, 0.0f);
  for (std::size_t c = 0; c < C; ++c) {
    double acc = 0;
    const float* g = tap->grad.data() + c * S;
    for (std::size_t s = 0; s < S; ++s) acc += g[s];
    weights[c] = static_cast<float>(acc / static_cast<double>(S));
  }

  // weighted channel sum, ReLU
  std::vector<float> coarse(S, 0.0f);
  for (std::size_t c = 0; c < C; ++c) {
    const float* a = tap->values.data() + c * S;
    const float wc = weights[c];
    for (std::size_t s = 0; s < S; ++s) coarse[s] += wc * a[s];
  }
  for (auto& v : coarse) v = std::max(v, 0.0f);

  const std::size_t out_h = model.video.config().h, out_w = model.video.config().w;
  HeatmapStack heat;
  heat.frames = Tt;
  heat.height = out_h;
  heat.width = out_w;
  heat.data.assign(Tt * out_h * out_w, 0.0f);
  const double sy = static_cast<double>(Hh) / out_h, sx = static_cast<double>(Ww) / out_w;
  for (std::size_t t = 0; t < Tt; ++t) {
    const float* plane = coarse.data() + t * Hh * Ww;
    float* dst = heat.data.data() + t * out_h * out_w;
    for (std::size_t y = 0; y < out_h; ++y) {
      double fy = (y + 0.5) * sy - 0.5;
      fy = std::clamp(fy, 0.0, static_cast<double>(Hh - 1));
      const std::size_t y0 = static_cast<std::size_t>(fy);
      const std::size_t y1 = std::min(y0 + 1, Hh - 1);
      const double dy = fy - static_cast<double>(y0);
      for (std::size_t x = 0; x < out_w; ++x) {
        double fx = (x + 0.5) * sx - 0.5;
        fx = std::clamp(fx, 0.0, static_cast<double>(Ww - 1));
        const std::size_t x0 = static_cast<std::size_t>(fx);
        const std::size_t x1 = std::min(x0 + 1, Ww - 1);
        const double dx = fx - static_cast<double>(x0);
        const double top = plane[y0 * Ww + x0] * (1 - dx) + plane[y0 * Ww + x1] * dx;
        const double bot = plane[y1 * Ww + x0] * (1 - dx) + plane[y1 * Ww + x1] * dx;
        dst[y * out_w + x] = static_cast<float>(top * (1 - dy) + bot * dy);
      }
    }
  }

  const float mx = heat.max_value();
  if (mx <= 0.0f) {
    std::fprintf(stderr,
                 "[avsync] gradcam: all-zero activation map (model looks untrained); emitting "
                 "zero heatmap\n");
    return heat;
  }
  const float cutoff = static_cast<float>(filter_frac) * mx;
  for (auto& v : heat.data)
    if (v < cutoff) v = 0.0f;  // low activations are filtered
  return heat;
}

void write_pgm(const std::string& path, const float* plane, std::size_t h, std::size_t w,
               float max_value) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  check(os.good(), cat("cannot open for write: ", path));
  os << "P5\n" << w << " " << h << "\n255\n";
  const float scale = max_value > 0.0f ? 255.0f / max_value : 0.0f;
  for (std::size_t i = 0; i < h * w; ++i) {
    const float v = std::clamp(plane[i] * scale, 0.0f, 255.0f);
    const unsigned char b = static_cast<unsigned char>(std::lrintf(v));
    os.write(reinterpret_cast<const char*>(&b), 1);
  }
  check(os.good(), cat("write failed: ", path));
}

}  // namespace avsync
