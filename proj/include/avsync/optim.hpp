#pragma once

#include <limits>
#include <string>
#include <vector>

#include "avsync/tensor.hpp"

namespace avsync {

// Plain SGD with momentum: v <- momentum*v + g; p <- p - lr*v.
template <typename T>
class Sgd {
 public:
  Sgd(std::vector<Ten<T>> params, T learning_rate, T momentum = T(0.9))
      : params_(std::move(params)), lr_(learning_rate), momentum_(momentum) {
    check(lr_ > T(0), "sgd: learning rate must be > 0");
    check(momentum_ >= T(0) && momentum_ < T(1), "sgd: momentum must be in [0,1)");
    velocity_.reserve(params_.size());
    for (const auto& p : params_) velocity_.emplace_back(p->numel(), T(0));
  }

  void step() {
    for (std::size_t i = 0; i < params_.size(); ++i) {
      auto& p = *params_[i];
      check(p.has_grad(), cat("sgd: parameter ", i, " has no gradient; run backward first"));
      auto& v = velocity_[i];
      for (std::size_t j = 0; j < p.numel(); ++j) {
        v[j] = momentum_ * v[j] + p.grad[j];
        p.values[j] -= lr_ * v[j];
      }
    }
  }

  void zero_grad() {
    for (auto& p : params_) p->zero_grad();
  }

  T learning_rate() const { return lr_; }
  void set_learning_rate(T lr) {
    check(lr > T(0), "sgd: learning rate must be > 0");
    lr_ = lr;
  }
  T momentum() const { return momentum_; }

  const std::vector<Ten<T>>& params() const { return params_; }
  std::vector<std::vector<T>>& velocity() { return velocity_; }

 private:
  std::vector<Ten<T>> params_;
  std::vector<std::vector<T>> velocity_;
  T lr_;
  T momentum_;
};

// Scales the learning rate by `factor` once the epoch loss has failed to
// improve for more than `patience` consecutive epochs. Any improvement resets
// the stagnation counter. The learning rate never increases.
template <typename T>
class PlateauScheduler {
 public:
  explicit PlateauScheduler(int patience = 5, T factor = T(0.1))
      : patience_(patience), factor_(factor) {
    check(factor_ > T(0) && factor_ < T(1), "plateau: factor must be in (0,1)");
  }

  // Returns true when a reduction fired this epoch.
  bool update(Sgd<T>& opt, T epoch_loss) {
    if (epoch_loss < best_loss_) {
      best_loss_ = epoch_loss;
      stagnant_ = 0;
      return false;
    }
    ++stagnant_;
    if (stagnant_ > patience_) {
      opt.set_learning_rate(opt.learning_rate() * factor_);
      stagnant_ = 0;
      return true;
    }
    return false;
  }

  T best_loss() const { return best_loss_; }
  int stagnant_epochs() const { return stagnant_; }
  void restore(T best_loss, int stagnant) {
    best_loss_ = best_loss;
    stagnant_ = stagnant;
  }

 private:
  int patience_;
  T factor_;
  T best_loss_ = std::numeric_limits<T>::infinity();
  int stagnant_ = 0;
};

}  // namespace avsync
