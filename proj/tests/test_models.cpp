#include <doctest.h>

#include <cmath>

#include "avsync/gradcam.hpp"
#include "avsync/models.hpp"
#include "gradcheck.hpp"

using namespace avsync;

namespace {

template <typename T>
Ten<T> random_clip_batch(std::size_t n, std::size_t t, std::size_t h, std::size_t w,
                         std::uint64_t seed) {
  Rng rng(seed);
  auto x = make_tensor<T>({n, 3, t, h, w});
  for (auto& v : x->values) v = static_cast<T>(rng.normal());
  return x;
}

template <typename T>
Ten<T> random_feature_batch(std::size_t n, std::size_t t, std::size_t f, std::uint64_t seed) {
  Rng rng(seed);
  auto x = make_tensor<T>({n, 1, t, f});
  for (auto& v : x->values) v = static_cast<T>(rng.normal());
  return x;
}

double row_norm(const Ten<float>& t, std::size_t row) {
  double acc = 0;
  for (std::size_t i = 0; i < t->shape[1]; ++i) {
    const double v = t->values[row * t->shape[1] + i];
    acc += v * v;
  }
  return std::sqrt(acc);
}

VideoSubnetConfig micro_video_cfg() {
  VideoSubnetConfig cfg;
  cfg.x = 1;
  cfg.channels = {2, 3};
  cfg.embed_dim = 4;
  cfg.t = 4;
  cfg.h = cfg.w = 8;
  cfg.first_spatial_stride = 1;
  return cfg;
}

AudioSubnetConfig micro_audio_cfg() {
  AudioSubnetConfig cfg;
  cfg.channels = {2, 3};
  cfg.embed_dim = 4;
  cfg.frames = 8;
  cfg.filters = 6;
  return cfg;
}

}  // namespace

TEST_CASE("video subnet: desk config yields unit-norm 128-d embeddings") {
  VideoSubnet<float> net(VideoSubnetConfig{}, 7);
  Tape<float> tape;
  tape.set_recording(false);
  auto clips = random_clip_batch<float>(2, 25, 64, 64, 1);
  auto emb = net.forward(tape, clips, true);
  CHECK(emb->shape == Shape{2, 128});
  CHECK(std::fabs(row_norm(emb, 0) - 1.0) < 1e-6);
  CHECK(std::fabs(row_norm(emb, 1) - 1.0) < 1e-6);
  // two different clips map to different embeddings
  bool differ = false;
  for (std::size_t i = 0; i < 128; ++i)
    if (emb->values[i] != emb->values[128 + i]) differ = true;
  CHECK(differ);
}

TEST_CASE("video subnet: batch size only changes the leading extent") {
  VideoSubnet<float> net(VideoSubnetConfig{}, 7);
  Tape<float> tape;
  tape.set_recording(false);
  auto e2 = net.forward(tape, random_clip_batch<float>(2, 25, 64, 64, 3), false);
  auto e4 = net.forward(tape, random_clip_batch<float>(4, 25, 64, 64, 3), false);
  CHECK(e2->shape == Shape{2, 128});
  CHECK(e4->shape == Shape{4, 128});
}

TEST_CASE("video subnet: shape mismatch rejected; x = 2 or 3 keeps the embedding dim") {
  VideoSubnet<float> net3(VideoSubnetConfig{}, 7);
  Tape<float> tape;
  tape.set_recording(false);
  auto bad = random_clip_batch<float>(1, 20, 64, 64, 1);
  CHECK_THROWS_AS(net3.forward(tape, bad, false), std::runtime_error);

  VideoSubnetConfig c2;
  c2.x = 2;
  VideoSubnet<float> net2(c2, 7);
  auto clips = random_clip_batch<float>(1, 25, 64, 64, 2);
  auto a = net2.forward(tape, clips, false);
  auto b = net3.forward(tape, clips, false);
  CHECK(a->shape == b->shape);
}

TEST_CASE("video subnet: parameter count stays under 2M at desk scale") {
  VideoSubnet<float> vnet(VideoSubnetConfig{}, 7);
  AudioSubnet<float> anet(AudioSubnetConfig{}, 7);
  CHECK(vnet.parameter_count() < 2'000'000);
  CHECK(anet.parameter_count() < 2'000'000);
}

TEST_CASE("audio subnet: 1 s and 2 s features both map to unit-norm embeddings") {
  AudioSubnet<float> net(AudioSubnetConfig{}, 9);
  Tape<float> tape;
  tape.set_recording(false);
  auto e1 = net.forward(tape, random_feature_batch<float>(1, 99, 40, 4), false);
  CHECK(e1->shape == Shape{1, 128});
  CHECK(std::fabs(row_norm(e1, 0) - 1.0) < 1e-6);
  auto e2 = net.forward(tape, random_feature_batch<float>(1, 199, 40, 5), false);
  CHECK(e2->shape == Shape{1, 128});
  CHECK_THROWS_WITH_AS(net.forward(tape, random_feature_batch<float>(1, 9, 40, 6), false),
                       doctest::Contains("minimum"), std::runtime_error);
}

TEST_CASE("audio subnet: conv5 tap is deterministic and pools to the channel count") {
  AudioSubnet<float> net(AudioSubnetConfig{}, 9);
  Tape<float> tape;
  tape.set_recording(false);
  auto feats = random_feature_batch<float>(1, 99, 40, 8);
  auto v1 = net.conv5_features(tape, feats);
  auto v2 = net.conv5_features(tape, feats);
  CHECK(v1.size() == net.conv5_channels());
  CHECK(v1 == v2);
  auto v3 = net.conv5_features(tape, random_feature_batch<float>(1, 199, 40, 8));
  CHECK(v3.size() == net.conv5_channels());
}

TEST_CASE("fusion head: output arity and the audio-first concatenation order") {
  FusionHead<float> avts(FusionHeadConfig{512, 2}, 128, 3);
  FusionHead<float> multi(FusionHeadConfig{512, 8}, 128, 3);
  Tape<float> tape;
  tape.set_recording(false);
  Rng rng(12);
  auto fa = make_tensor<float>({1, 128});
  auto fv = make_tensor<float>({1, 128});
  for (auto& v : fa->values) v = static_cast<float>(rng.normal());
  for (auto& v : fv->values) v = static_cast<float>(rng.normal());
  auto l2 = avts.forward(tape, fa, fv);
  CHECK(l2->shape == Shape{1, 2});
  auto lc = multi.forward(tape, fa, fv);
  CHECK(lc->shape == Shape{1, 8});
  // swapping the inputs must change the logits: the order is fixed, audio first
  auto swapped = avts.forward(tape, fv, fa);
  bool differ = false;
  for (std::size_t i = 0; i < 2; ++i)
    if (swapped->values[i] != l2->values[i]) differ = true;
  CHECK(differ);
}

TEST_CASE("model summary: layer shapes and parameter counts are stable") {
  TwoStreamModel<float> model(VideoSubnetConfig{}, AudioSubnetConfig{}, 7);
  const std::string s = model.summary();
  CHECK(s.find("video/g1: conv3d 3->16 k3x3x3 s1x2x2 out 16x25x32x32 params 1312 bn 32 maxpool "
               "2x2x2 -> 16x12x16x16") != std::string::npos);
  CHECK(s.find("video/g3: conv3d 32->64 k3x3x3 s1x1x1 out 64x6x8x8") != std::string::npos);
  CHECK(s.find("video/g4: conv2d 64->64 k1x3x3") != std::string::npos);
  CHECK(s.find("audio/conv5: conv2d 64->128") != std::string::npos);
  CHECK(s.find("video/fc: affine 128->128 params 16512") != std::string::npos);
  CHECK(s.find("audio/gap: global average pool -> 128") != std::string::npos);
}

TEST_CASE("checkpoint: save and restore reproduce the forward pass exactly") {
  TwoStreamModel<float> model(VideoSubnetConfig{}, AudioSubnetConfig{}, 7);
  Checkpoint ckpt;
  append_named(ckpt.params, model.named_parameters());
  append_named(ckpt.params, model.named_buffers());

  TwoStreamModel<float> other(VideoSubnetConfig{}, AudioSubnetConfig{}, 99);
  restore_named(ckpt.params, other.named_parameters(), "parameter");
  restore_named(ckpt.params, other.named_buffers(), "buffer");

  Tape<float> tape;
  tape.set_recording(false);
  auto clips = random_clip_batch<float>(1, 25, 64, 64, 21);
  auto a = model.video.forward(tape, clips, false);
  auto b = other.video.forward(tape, clips, false);
  CHECK(a->values == b->values);
}

TEST_CASE("gradcheck: full two-subnet contrastive graph in double precision") {
  int done = 0;
  for (std::uint64_t seed = 0; seed < 40 && done < 10; ++seed) {
    TwoStreamModel<double> model(micro_video_cfg(), micro_audio_cfg(), 1000 + seed);
    auto clips = random_clip_batch<double>(2, 4, 8, 8, 50 + seed);
    auto feats = random_feature_batch<double>(2, 8, 6, 90 + seed);
    const std::vector<int> y{1, 0};

    // skip instances whose pair distances sit near the hinge or zero, where
    // the loss is non-differentiable
    {
      Tape<double> probe;
      probe.set_recording(false);
      auto fv = model.video.forward(probe, clips, true);
      auto fa = model.audio.forward(probe, feats, true);
      bool safe = true;
      for (std::size_t n = 0; n < 2; ++n) {
        double d2 = 0;
        for (std::size_t i = 0; i < 4; ++i) {
          const double df = fv->values[n * 4 + i] - fa->values[n * 4 + i];
          d2 += df * df;
        }
        const double d = std::sqrt(d2);
        if (d < 5e-2 || std::fabs(d - 0.99) < 5e-2) safe = false;
      }
      if (!safe) continue;
    }

    auto fwd = [&](Tape<double>& t) {
      auto fv = model.video.forward(t, clips, true);
      auto fa = model.audio.forward(t, feats, true);
      return ops::contrastive_loss(t, fv, fa, y, 0.99);
    };
    std::vector<Ten<double>> params;
    for (auto& [name, p] : model.named_parameters()) params.push_back(p);
    auto res = avsync::testing::grad_check(params, fwd);
    CAPTURE(seed);
    CHECK(res.max_rel_err < 1e-4);
    ++done;
  }
  CHECK(done == 10);
}

TEST_CASE("gradcam: non-negative heatmaps at frame resolution; zero model warns and zeroes") {
  VideoSubnetConfig vcfg = micro_video_cfg();
  vcfg.channels = {2, 3};
  TwoStreamModel<float> model(vcfg, micro_audio_cfg(), 5);
  auto clips = random_clip_batch<float>(1, 4, 8, 8, 60);
  auto feats = random_feature_batch<float>(1, 8, 6, 61);
  auto heat = gradcam_localize(model, clips, feats, 0.2);
  CHECK(heat.height == 8);
  CHECK(heat.width == 8);
  CHECK(heat.frames >= 1);
  for (float v : heat.data) CHECK(v >= 0.0f);

  for (auto& [name, p] : model.named_parameters())
    std::fill(p->values.begin(), p->values.end(), 0.0f);
  auto zero_heat = gradcam_localize(model, clips, feats, 0.2);
  for (float v : zero_heat.data) CHECK(v == 0.0f);
}
