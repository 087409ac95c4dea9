#pragma once

#include <cmath>
#include <cstddef>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include "avsync/common.hpp"

namespace avsync {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (auto e : s) n *= e;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::string r = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) r += "x";
    r += std::to_string(s[i]);
  }
  return r + "]";
}

// Dense row-major tensor with an optional gradient slot. Training runs in
// float; the finite-difference oracles instantiate double.
template <typename T>
struct TensorData {
  Shape shape;
  std::vector<T> values;
  std::vector<T> grad;  // empty until first touched in backward
  bool requires_grad = false;

  std::size_t numel() const { return values.size(); }
  std::size_t rank() const { return shape.size(); }

  void ensure_grad() {
    if (grad.size() != values.size()) grad.assign(values.size(), T(0));
  }
  void zero_grad() {
    if (!grad.empty()) std::fill(grad.begin(), grad.end(), T(0));
  }
  bool has_grad() const { return grad.size() == values.size() && !values.empty(); }

  bool finite() const {
    for (T v : values)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }
};

template <typename T>
using Ten = std::shared_ptr<TensorData<T>>;

template <typename T>
Ten<T> make_tensor(Shape shape, bool requires_grad = false) {
  auto t = std::make_shared<TensorData<T>>();
  t->shape = std::move(shape);
  t->values.assign(shape_numel(t->shape), T(0));
  t->requires_grad = requires_grad;
  return t;
}

template <typename T>
Ten<T> make_tensor(Shape shape, std::vector<T> values, bool requires_grad = false) {
  check(shape_numel(shape) == values.size(),
        cat("tensor: ", values.size(), " values do not fill shape ", shape_str(shape)));
  auto t = std::make_shared<TensorData<T>>();
  t->shape = std::move(shape);
  t->values = std::move(values);
  t->requires_grad = requires_grad;
  return t;
}

template <typename T>
Ten<T> full_like_shape(const Shape& shape, T value, bool requires_grad = false) {
  auto t = make_tensor<T>(shape, requires_grad);
  std::fill(t->values.begin(), t->values.end(), value);
  return t;
}

template <typename T>
Ten<T> scalar_tensor(T value) {
  return make_tensor<T>(Shape{1}, std::vector<T>{value});
}

template <typename T, typename U>
Ten<T> cast_tensor(const Ten<U>& src) {
  auto t = std::make_shared<TensorData<T>>();
  t->shape = src->shape;
  t->requires_grad = src->requires_grad;
  t->values.resize(src->values.size());
  for (std::size_t i = 0; i < src->values.size(); ++i)
    t->values[i] = static_cast<T>(src->values[i]);
  return t;
}

}  // namespace avsync
