#include <doctest.h>

#include <cmath>

#include "avsync/video.hpp"

using namespace avsync;

namespace {

FrameSequence make_sequence(std::size_t frames, std::size_t h, std::size_t w) {
  FrameSequence seq;
  seq.frames = frames;
  seq.height = h;
  seq.width = w;
  seq.fps = 25.0;
  seq.data.resize(3 * frames * h * w);
  Rng rng(5);
  for (auto& v : seq.data) v = static_cast<float>(rng.uniform());
  return seq;
}

}  // namespace

TEST_CASE("sample_clip: start 0, 25 frames at 25 fps spans [0, 1) seconds") {
  auto seq = make_sequence(50, 8, 8);
  auto clip = sample_clip(seq, 0, 25);
  CHECK(clip.interval.begin == 0.0);
  CHECK(clip.interval.end == 1.0);
  CHECK(clip.frames == 25);
  CHECK(clip.data.size() == 3 * 25 * 8 * 8);
}

TEST_CASE("sample_clip: out-of-range start rejected; re-slicing is identical") {
  auto seq = make_sequence(30, 4, 4);
  CHECK_THROWS_AS(sample_clip(seq, 6, 25), std::runtime_error);
  auto a = sample_clip(seq, 3, 25);
  auto b = sample_clip(seq, 3, 25);
  CHECK(a.data == b.data);
  // slice content matches the source
  CHECK(a.at(1, 0, 2, 3) == seq.at(1, 3, 2, 3));
}

TEST_CASE("augment: degenerate config reduces to normalization only") {
  auto seq = make_sequence(10, 16, 16);
  auto clip = sample_clip(seq, 0, 5);
  AugmentConfig cfg;
  cfg.crop_scales = {1.0};
  cfg.hflip_prob = 0.0;
  cfg.out_h = cfg.out_w = 16;
  cfg.norm.mean = {0.25f, 0.5f, 0.75f};
  cfg.norm.stddev = {2.0f, 2.0f, 2.0f};
  Rng rng(1);
  auto out = augment(clip, cfg, rng);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t t = 0; t < 5; ++t)
      for (std::size_t y = 0; y < 16; ++y)
        for (std::size_t x = 0; x < 16; ++x)
          CHECK(out.at(c, t, y, x) ==
                doctest::Approx((clip.at(c, t, y, x) - cfg.norm.mean[c]) / 2.0f).epsilon(1e-5));
}

TEST_CASE("augment: flipping twice restores the clip") {
  auto seq = make_sequence(6, 8, 12);
  auto clip = sample_clip(seq, 1, 4);
  auto flipped = flip_horizontal(flip_horizontal(clip));
  CHECK(flipped.data == clip.data);
}

TEST_CASE("augment: output shape is always 3 x t x out_h x out_w") {
  auto seq = make_sequence(8, 20, 30);
  auto clip = sample_clip(seq, 0, 8);
  AugmentConfig cfg;
  cfg.out_h = 12;
  cfg.out_w = 14;
  Rng rng(3);
  for (int i = 0; i < 20; ++i) {
    auto out = augment(clip, cfg, rng);
    CHECK(out.frames == 8);
    CHECK(out.height == 12);
    CHECK(out.width == 14);
    CHECK(out.data.size() == 3 * 8 * 12 * 14);
  }
}

TEST_CASE("augment: one spatial transform shared by all frames of a clip") {
  // frame t is constant t/10; any per-frame transform difference would bleed
  // other constants into a frame
  FrameSequence seq;
  seq.frames = 10;
  seq.height = seq.width = 16;
  seq.fps = 25.0;
  seq.data.resize(3 * 10 * 16 * 16);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t t = 0; t < 10; ++t)
      for (std::size_t i = 0; i < 256; ++i)
        seq.data[(c * 10 + t) * 256 + i] = static_cast<float>(t) / 10.0f;
  auto clip = sample_clip(seq, 0, 10);
  AugmentConfig cfg;
  cfg.out_h = cfg.out_w = 8;
  Rng rng(7);
  for (int draw = 0; draw < 1000; ++draw) {
    AugmentTrace trace;
    auto out = augment(clip, cfg, rng, &trace);
    for (std::size_t t = 0; t < 10; ++t) {
      const float expect = (static_cast<float>(t) / 10.0f - cfg.norm.mean[0]);
      for (std::size_t i = 0; i < 64; ++i) {
        if (out.data[t * 64 + i] != doctest::Approx(expect).epsilon(1e-6)) {
          CAPTURE(draw);
          REQUIRE(out.data[t * 64 + i] == doctest::Approx(expect).epsilon(1e-6));
        }
      }
    }
  }
}

TEST_CASE("augment: seeded rng makes the augmentation stream reproducible") {
  auto seq = make_sequence(8, 24, 24);
  auto clip = sample_clip(seq, 0, 8);
  AugmentConfig cfg;
  cfg.out_h = cfg.out_w = 16;
  Rng r1(99), r2(99);
  for (int i = 0; i < 10; ++i) {
    auto a = augment(clip, cfg, r1);
    auto b = augment(clip, cfg, r2);
    CHECK(a.data == b.data);
  }
}

TEST_CASE("augment: invalid crop scales rejected") {
  auto seq = make_sequence(4, 8, 8);
  auto clip = sample_clip(seq, 0, 4);
  AugmentConfig cfg;
  cfg.crop_scales = {1.5};
  Rng rng(1);
  CHECK_THROWS_AS(augment(clip, cfg, rng), std::runtime_error);
}
