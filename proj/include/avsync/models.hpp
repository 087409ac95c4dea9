#pragma once

#include <string>
#include <utility>
#include <vector>

#include "avsync/checkpoint.hpp"
#include "avsync/ops.hpp"
#include "avsync/rng.hpp"

namespace avsync {

struct VideoSubnetConfig {
  std::size_t x = 3;  // leading 3D (spatiotemporal) conv groups; the rest are 2D
  std::vector<std::size_t> channels{16, 32, 64, 64, 128};
  std::size_t embed_dim = 128;
  std::size_t t = 25, h = 64, w = 64;
  std::size_t first_spatial_stride = 2;
};

struct AudioSubnetConfig {
  std::vector<std::size_t> channels{16, 32, 64, 64, 128};
  std::size_t embed_dim = 128;
  std::size_t frames = 99;  // build-time feature length (1 s at the default spec)
  std::size_t filters = 40;
};

struct FusionHeadConfig {
  std::size_t hidden = 512;
  std::size_t outputs = 2;  // 2 for the sync task, C for multimodal classification
};

namespace detail {

template <typename T>
struct ConvBnBlock {
  Ten<T> w, b, gamma, beta;
  ops::BatchNormState<T> bn;
  std::vector<std::size_t> stride, pad;
  std::vector<std::size_t> pool_window, pool_stride;
  bool pooled = false;
  bool temporal3d = false;
};

template <typename T>
Ten<T> he_init(Shape shape, std::size_t fan_in, Rng& rng) {
  auto t = make_tensor<T>(std::move(shape), true);
  const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
  for (auto& v : t->values) v = static_cast<T>(rng.normal(0.0, stddev));
  return t;
}

template <typename T>
Ten<T> block_forward(Tape<T>& tape, ConvBnBlock<T>& blk, const Ten<T>& in, bool train) {
  auto y = ops::conv(tape, in, blk.w, blk.b, blk.stride, blk.pad);
  y = ops::batchnorm(tape, y, blk.gamma, blk.beta, blk.bn, train);
  return ops::relu(tape, y);
}

template <typename T>
void collect_block(const std::string& prefix, ConvBnBlock<T>& blk,
                   std::vector<std::pair<std::string, Ten<T>>>& params,
                   std::vector<std::pair<std::string, Ten<T>>>& buffers) {
  params.emplace_back(prefix + "/conv/w", blk.w);
  params.emplace_back(prefix + "/conv/b", blk.b);
  params.emplace_back(prefix + "/bn/gamma", blk.gamma);
  params.emplace_back(prefix + "/bn/beta", blk.beta);
  buffers.emplace_back(prefix + "/bn/running_mean", blk.bn.running_mean);
  buffers.emplace_back(prefix + "/bn/running_var", blk.bn.running_var);
}

inline std::string dims3(std::size_t a, std::size_t b, std::size_t c) {
  return cat(a, "x", b, "x", c);
}

}  // namespace detail

// Mixed-convolution video subnet: x leading 3D conv groups (spatiotemporal
// kernels, spatiotemporal pooling) followed by 2D groups applied per frame;
// the temporal extent collapses only at the final global average pool. No
// residual connections.
template <typename T>
class VideoSubnet {
 public:
  VideoSubnet(VideoSubnetConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
    check(cfg_.x >= 1 && cfg_.x <= cfg_.channels.size(),
          cat("video subnet: x = ", cfg_.x, " outside [1, ", cfg_.channels.size(), "]"));
    std::size_t C = 3, Tt = cfg_.t, H = cfg_.h, W = cfg_.w;
    for (std::size_t g = 0; g < cfg_.channels.size(); ++g) {
      Rng rng(derive_seed(seed, "video-group", g));
      detail::ConvBnBlock<T> blk;
      blk.temporal3d = g < cfg_.x;
      const std::size_t kt = blk.temporal3d ? 3 : 1;
      const std::size_t ss = g == 0 ? cfg_.first_spatial_stride : 1;
      const std::size_t co = cfg_.channels[g];
      blk.w = detail::he_init<T>({co, C, kt, 3, 3}, C * kt * 9, rng);
      blk.b = make_tensor<T>({co}, true);
      blk.gamma = full_like_shape<T>({co}, T(1), true);
      blk.beta = make_tensor<T>({co}, true);
      blk.bn = ops::make_batchnorm_state<T>(co);
      blk.stride = {1, ss, ss};
      blk.pad = {kt == 3 ? 1u : 0u, 1, 1};
      Tt = kernels::conv_out_extent(Tt, kt, 1, blk.pad[0]);
      H = kernels::conv_out_extent(H, 3, ss, 1);
      W = kernels::conv_out_extent(W, 3, ss, 1);
      if (g + 1 == cfg_.x) tap_group_ = g;
      const std::size_t pt = (blk.temporal3d && Tt >= 2) ? 2 : 1;
      const std::size_t ph = H >= 2 ? 2 : 1, pw = W >= 2 ? 2 : 1;
      blk.pooled = pt > 1 || ph > 1 || pw > 1;
      blk.pool_window = {pt, ph, pw};
      blk.pool_stride = blk.pool_window;
      if (blk.pooled) {
        Tt = (Tt - pt) / pt + 1;
        H = (H - ph) / ph + 1;
        W = (W - pw) / pw + 1;
      }
      C = co;
      blocks_.push_back(std::move(blk));
    }
    out_t_ = Tt;
    out_h_ = H;
    out_w_ = W;
    Rng rng(derive_seed(seed, "video-fc"));
    fc_w_ = detail::he_init<T>({C, cfg_.embed_dim}, C, rng);
    fc_b_ = make_tensor<T>({cfg_.embed_dim}, true);
  }

  // clip batch N x 3 x t x h x w -> unit-norm embeddings N x D
  Ten<T> forward(Tape<T>& tape, const Ten<T>& clips, bool train) {
    check(clips->rank() == 5 && clips->shape[1] == 3 && clips->shape[2] == cfg_.t &&
              clips->shape[3] == cfg_.h && clips->shape[4] == cfg_.w,
          cat("video subnet: input ", shape_str(clips->shape), " does not match configured 3x",
              cfg_.t, "x", cfg_.h, "x", cfg_.w));
    Ten<T> y = clips;
    for (std::size_t g = 0; g < blocks_.size(); ++g) {
      auto& blk = blocks_[g];
      y = detail::block_forward(tape, blk, y, train);
      if (g == tap_group_) tap_ = y;
      if (blk.pooled) y = ops::pool(tape, y, ops::PoolKind::Max, blk.pool_window, blk.pool_stride);
    }
    y = ops::global_avg_pool(tape, y);
    y = ops::affine(tape, y, fc_w_, fc_b_);
    return ops::l2_normalize(tape, y);
  }

  // post-ReLU activation of the last 3D group from the most recent forward
  const Ten<T>& tap() const {
    check(tap_ != nullptr, "video subnet: no forward pass recorded yet");
    return tap_;
  }

  std::vector<std::pair<std::string, Ten<T>>> named_parameters() {
    std::vector<std::pair<std::string, Ten<T>>> p, b;
    for (std::size_t g = 0; g < blocks_.size(); ++g)
      detail::collect_block(cat("video/g", g + 1), blocks_[g], p, b);
    p.emplace_back("video/fc/w", fc_w_);
    p.emplace_back("video/fc/b", fc_b_);
    return p;
  }
  std::vector<std::pair<std::string, Ten<T>>> named_buffers() {
    std::vector<std::pair<std::string, Ten<T>>> p, b;
    for (std::size_t g = 0; g < blocks_.size(); ++g)
      detail::collect_block(cat("video/g", g + 1), blocks_[g], p, b);
    return b;
  }

  std::string summary() const {
    std::string s;
    std::size_t C = 3, Tt = cfg_.t, H = cfg_.h, W = cfg_.w;
    for (std::size_t g = 0; g < blocks_.size(); ++g) {
      const auto& blk = blocks_[g];
      const std::size_t kt = blk.temporal3d ? 3 : 1;
      Tt = kernels::conv_out_extent(Tt, kt, 1, blk.pad[0]);
      H = kernels::conv_out_extent(H, 3, blk.stride[1], 1);
      W = kernels::conv_out_extent(W, 3, blk.stride[2], 1);
      s += cat("video/g", g + 1, ": conv", blk.temporal3d ? "3d " : "2d ", C, "->",
               cfg_.channels[g], " k", detail::dims3(kt, 3, 3), " s",
               detail::dims3(blk.stride[0], blk.stride[1], blk.stride[2]), " out ",
               cfg_.channels[g], "x", detail::dims3(Tt, H, W), " params ",
               blk.w->numel() + blk.b->numel(), " bn ", 2 * cfg_.channels[g]);
      if (blk.pooled) {
        Tt = (Tt - blk.pool_window[0]) / blk.pool_window[0] + 1;
        H = (H - blk.pool_window[1]) / blk.pool_window[1] + 1;
        W = (W - blk.pool_window[2]) / blk.pool_window[2] + 1;
        s += cat(" maxpool ",
                 detail::dims3(blk.pool_window[0], blk.pool_window[1], blk.pool_window[2]),
                 " -> ", cfg_.channels[g], "x", detail::dims3(Tt, H, W));
      }
      s += "\n";
      C = cfg_.channels[g];
    }
    s += cat("video/gap: global average pool -> ", C, "\n");
    s += cat("video/fc: affine ", C, "->", cfg_.embed_dim, " params ",
             fc_w_->numel() + fc_b_->numel(), "\n");
    s += "video/l2norm\n";
    return s;
  }

  std::size_t parameter_count() {
    std::size_t n = 0;
    for (auto& [name, p] : named_parameters()) n += p->numel();
    return n;
  }

  const VideoSubnetConfig& config() const { return cfg_; }
  std::size_t tap_channels() const { return cfg_.channels[tap_group_]; }

 private:
  VideoSubnetConfig cfg_;
  std::vector<detail::ConvBnBlock<T>> blocks_;
  Ten<T> fc_w_, fc_b_;
  Ten<T> tap_;
  std::size_t tap_group_ = 0;
  std::size_t out_t_ = 0, out_h_ = 0, out_w_ = 0;
};

// VGG-style audio subnet over the frames x filters log-mel map. The "conv5"
// tap is the output of the last conv block; global pooling absorbs the
// temporal extent so any frame count above min_frames() is accepted.
template <typename T>
class AudioSubnet {
 public:
  AudioSubnet(AudioSubnetConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
    std::size_t C = 1, H = cfg_.frames, W = cfg_.filters;
    min_frames_ = 1;
    for (std::size_t g = 0; g < cfg_.channels.size(); ++g) {
      Rng rng(derive_seed(seed, "audio-block", g));
      detail::ConvBnBlock<T> blk;
      const std::size_t co = cfg_.channels[g];
      blk.w = detail::he_init<T>({co, C, 3, 3}, C * 9, rng);
      blk.b = make_tensor<T>({co}, true);
      blk.gamma = full_like_shape<T>({co}, T(1), true);
      blk.beta = make_tensor<T>({co}, true);
      blk.bn = ops::make_batchnorm_state<T>(co);
      blk.stride = {1, 1};
      blk.pad = {1, 1};
      H = kernels::conv_out_extent(H, 3, 1, 1);
      W = kernels::conv_out_extent(W, 3, 1, 1);
      const std::size_t ph = H >= 2 ? 2 : 1, pw = W >= 2 ? 2 : 1;
      blk.pooled = (ph > 1 || pw > 1) && g + 1 < cfg_.channels.size();
      blk.pool_window = {ph, pw};
      blk.pool_stride = blk.pool_window;
      if (blk.pooled) {
        H = (H - ph) / ph + 1;
        W = (W - pw) / pw + 1;
        min_frames_ *= ph;
      }
      C = co;
      blocks_.push_back(std::move(blk));
    }
    Rng rng(derive_seed(seed, "audio-fc"));
    fc_w_ = detail::he_init<T>({C, cfg_.embed_dim}, C, rng);
    fc_b_ = make_tensor<T>({cfg_.embed_dim}, true);
  }

  // features batch N x 1 x T x filters -> unit-norm embeddings N x D
  Ten<T> forward(Tape<T>& tape, const Ten<T>& features, bool train) {
    check(features->rank() == 4 && features->shape[1] == 1 &&
              features->shape[3] == cfg_.filters,
          cat("audio subnet: input ", shape_str(features->shape), " does not match Nx1xTx",
              cfg_.filters));
    check(features->shape[2] >= min_frames_,
          cat("audio subnet: ", features->shape[2], " frames below the pooling-stack minimum of ",
              min_frames_));
    Ten<T> y = features;
    for (std::size_t g = 0; g < blocks_.size(); ++g) {
      auto& blk = blocks_[g];
      y = detail::block_forward(tape, blk, y, train);
      if (g + 1 == blocks_.size()) conv5_ = y;
      if (blk.pooled) y = ops::pool(tape, y, ops::PoolKind::Max, blk.pool_window, blk.pool_stride);
    }
    y = ops::global_avg_pool(tape, y);
    y = ops::affine(tape, y, fc_w_, fc_b_);
    return ops::l2_normalize(tape, y);
  }

  // conv5 activation map from the latest forward, pooled to one value per
  // channel; length is tap channel count for any valid frame count.
  std::vector<T> conv5_features(Tape<T>& tape, const Ten<T>& features) {
    forward(tape, features, false);
    const auto& tap = conv5();
    const std::size_t N = tap->shape[0], C = tap->shape[1];
    check(N == 1, "conv5_features: expects a single sample");
    const std::size_t S = tap->numel() / (N * C);
    std::vector<T> out(C);
    for (std::size_t c = 0; c < C; ++c) {
      double acc = 0;
      const T* p = tap->values.data() + c * S;
      for (std::size_t s = 0; s < S; ++s) acc += p[s];
      out[c] = static_cast<T>(acc / static_cast<double>(S));
    }
    return out;
  }

  const Ten<T>& conv5() const {
    check(conv5_ != nullptr, "audio subnet: no forward pass recorded yet");
    return conv5_;
  }

  std::vector<std::pair<std::string, Ten<T>>> named_parameters() {
    std::vector<std::pair<std::string, Ten<T>>> p, b;
    for (std::size_t g = 0; g < blocks_.size(); ++g)
      detail::collect_block(cat("audio/conv", g + 1), blocks_[g], p, b);
    p.emplace_back("audio/fc/w", fc_w_);
    p.emplace_back("audio/fc/b", fc_b_);
    return p;
  }
  std::vector<std::pair<std::string, Ten<T>>> named_buffers() {
    std::vector<std::pair<std::string, Ten<T>>> p, b;
    for (std::size_t g = 0; g < blocks_.size(); ++g)
      detail::collect_block(cat("audio/conv", g + 1), blocks_[g], p, b);
    return b;
  }

  std::string summary() const {
    std::string s;
    std::size_t C = 1, H = cfg_.frames, W = cfg_.filters;
    for (std::size_t g = 0; g < blocks_.size(); ++g) {
      const auto& blk = blocks_[g];
      s += cat("audio/conv", g + 1, ": conv2d ", C, "->", cfg_.channels[g], " k3x3 out ",
               cfg_.channels[g], "x", H, "x", W, " params ", blk.w->numel() + blk.b->numel(),
               " bn ", 2 * cfg_.channels[g]);
      if (blk.pooled) {
        H = (H - 2) / 2 + 1;
        W = (W - 2) / 2 + 1;
        s += cat(" maxpool 2x2 -> ", cfg_.channels[g], "x", H, "x", W);
      }
      s += "\n";
      C = cfg_.channels[g];
    }
    s += cat("audio/gap: global average pool -> ", C, "\n");
    s += cat("audio/fc: affine ", C, "->", cfg_.embed_dim, " params ",
             fc_w_->numel() + fc_b_->numel(), "\n");
    s += "audio/l2norm\n";
    return s;
  }

  std::size_t parameter_count() {
    std::size_t n = 0;
    for (auto& [name, p] : named_parameters()) n += p->numel();
    return n;
  }

  std::size_t min_frames() const { return min_frames_; }
  std::size_t conv5_channels() const { return cfg_.channels.back(); }
  const AudioSubnetConfig& config() const { return cfg_; }

 private:
  AudioSubnetConfig cfg_;
  std::vector<detail::ConvBnBlock<T>> blocks_;
  Ten<T> fc_w_, fc_b_;
  Ten<T> conv5_;
  std::size_t min_frames_ = 1;
};

// Two fully connected layers over the concatenated embeddings, audio first.
template <typename T>
class FusionHead {
 public:
  FusionHead(FusionHeadConfig cfg, std::size_t embed_dim, std::uint64_t seed)
      : cfg_(cfg), embed_dim_(embed_dim) {
    Rng r1(derive_seed(seed, "fusion-fc1")), r2(derive_seed(seed, "fusion-fc2"));
    w1_ = detail::he_init<T>({2 * embed_dim, cfg.hidden}, 2 * embed_dim, r1);
    b1_ = make_tensor<T>({cfg.hidden}, true);
    w2_ = detail::he_init<T>({cfg.hidden, cfg.outputs}, cfg.hidden, r2);
    b2_ = make_tensor<T>({cfg.outputs}, true);
  }

  Ten<T> forward(Tape<T>& tape, const Ten<T>& f_a, const Ten<T>& f_v) {
    check(f_a->rank() == 2 && f_a->shape[1] == embed_dim_ && f_v->shape == f_a->shape,
          cat("fusion head: embedding dims ", shape_str(f_a->shape), " / ",
              shape_str(f_v->shape), " do not match configured D = ", embed_dim_));
    auto y = ops::concat_cols(tape, f_a, f_v);  // audio first, fixed convention
    y = ops::affine(tape, y, w1_, b1_);
    y = ops::relu(tape, y);
    return ops::affine(tape, y, w2_, b2_);
  }

  std::vector<std::pair<std::string, Ten<T>>> named_parameters() {
    return {{"fusion/fc1/w", w1_}, {"fusion/fc1/b", b1_}, {"fusion/fc2/w", w2_},
            {"fusion/fc2/b", b2_}};
  }

  std::string summary() const {
    return cat("fusion/fc1: affine ", 2 * embed_dim_, "->", cfg_.hidden, " params ",
               w1_->numel() + b1_->numel(), "\nfusion/relu\nfusion/fc2: affine ", cfg_.hidden,
               "->", cfg_.outputs, " params ", w2_->numel() + b2_->numel(), "\n");
  }

  const FusionHeadConfig& config() const { return cfg_; }

 private:
  FusionHeadConfig cfg_;
  std::size_t embed_dim_;
  Ten<T> w1_, b1_, w2_, b2_;
};

template <typename T>
struct TwoStreamModel {
  VideoSubnet<T> video;
  AudioSubnet<T> audio;

  TwoStreamModel(const VideoSubnetConfig& vcfg, const AudioSubnetConfig& acfg,
                 std::uint64_t seed)
      : video(vcfg, derive_seed(seed, "video-subnet")),
        audio(acfg, derive_seed(seed, "audio-subnet")) {
    check(vcfg.embed_dim == acfg.embed_dim, "two-stream model: embedding dims must match");
  }

  std::vector<std::pair<std::string, Ten<T>>> named_parameters() {
    auto p = video.named_parameters();
    for (auto& e : audio.named_parameters()) p.push_back(e);
    return p;
  }
  std::vector<std::pair<std::string, Ten<T>>> named_buffers() {
    auto p = video.named_buffers();
    for (auto& e : audio.named_buffers()) p.push_back(e);
    return p;
  }
  std::vector<Ten<T>> parameters() {
    std::vector<Ten<T>> out;
    for (auto& [name, p] : named_parameters()) out.push_back(p);
    return out;
  }
  std::size_t parameter_count() { return video.parameter_count() + audio.parameter_count(); }
  std::string summary() { return video.summary() + audio.summary(); }
};

// ---------------------------------------------------------------------------
// checkpoint glue
// ---------------------------------------------------------------------------

template <typename T>
void append_named(std::vector<NamedTensor>& out,
                  const std::vector<std::pair<std::string, Ten<T>>>& named) {
  for (const auto& [name, t] : named) {
    NamedTensor nt;
    nt.name = name;
    nt.shape = t->shape;
    nt.data.resize(t->numel());
    for (std::size_t i = 0; i < t->numel(); ++i) nt.data[i] = static_cast<float>(t->values[i]);
    out.push_back(std::move(nt));
  }
}

template <typename T>
void restore_named(const std::vector<NamedTensor>& src,
                   const std::vector<std::pair<std::string, Ten<T>>>& named,
                   const std::string& what) {
  for (const auto& [name, t] : named) {
    const NamedTensor* found = nullptr;
    for (const auto& nt : src)
      if (nt.name == name) found = &nt;
    check(found != nullptr, cat("checkpoint: missing ", what, " tensor '", name, "'"));
    check(found->shape == t->shape,
          cat("checkpoint: '", name, "' has shape ", shape_str(found->shape),
              ", model expects ", shape_str(t->shape)));
    for (std::size_t i = 0; i < t->numel(); ++i) t->values[i] = static_cast<T>(found->data[i]);
  }
}

}  // namespace avsync
