#pragma once

// Central finite-difference gradient oracle. Runs in double precision with
// h = 1e-5 and stays independent of the backward implementations it checks:
// it only re-evaluates forward passes.

#include <cmath>
#include <functional>
#include <vector>

#include "avsync/rng.hpp"
#include "avsync/tape.hpp"
#include "avsync/tensor.hpp"

namespace avsync::testing {

struct GradCheckResult {
  double max_rel_err = 0.0;
  std::size_t checked = 0;
};

inline double rel_err(double analytic, double numeric) {
  const double denom = std::max({std::fabs(analytic), std::fabs(numeric), 1e-3});
  return std::fabs(analytic - numeric) / denom;
}

// fwd builds the graph on the given tape from the current parameter values and
// returns a scalar loss.
inline GradCheckResult grad_check(const std::vector<Ten<double>>& params,
                                  const std::function<Ten<double>(Tape<double>&)>& fwd,
                                  double h = 1e-5) {
  Tape<double> tape;
  auto loss = fwd(tape);
  tape.backward(loss);

  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (const auto& p : params) {
    p->ensure_grad();
    analytic.push_back(p->grad);
  }

  auto eval = [&]() {
    Tape<double> t;
    t.set_recording(false);
    return fwd(t)->values[0];
  };

  GradCheckResult res;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    auto& vals = params[pi]->values;
    for (std::size_t j = 0; j < vals.size(); ++j) {
      const double keep = vals[j];
      vals[j] = keep + h;
      const double lp = eval();
      vals[j] = keep - h;
      const double lm = eval();
      vals[j] = keep;
      const double numeric = (lp - lm) / (2.0 * h);
      res.max_rel_err = std::max(res.max_rel_err, rel_err(analytic[pi][j], numeric));
      ++res.checked;
    }
  }
  return res;
}

inline Ten<double> random_tensor(Shape shape, Rng& rng, bool requires_grad,
                                 double scale = 1.0) {
  auto t = make_tensor<double>(std::move(shape), requires_grad);
  for (auto& v : t->values) v = rng.normal() * scale;
  return t;
}

// Pushes values away from zero so ReLU kinks sit far from the h-neighborhood.
inline void avoid_kink(Ten<double>& t, double margin = 0.05) {
  for (auto& v : t->values) {
    if (std::fabs(v) < margin) v = v < 0 ? v - margin : v + margin;
  }
}

inline std::shared_ptr<std::vector<double>> random_weights(std::size_t n, Rng& rng) {
  auto w = std::make_shared<std::vector<double>>(n);
  for (auto& v : *w) v = rng.normal();
  return w;
}

}  // namespace avsync::testing
