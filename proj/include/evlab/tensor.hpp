#pragma once

#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

#include "evlab/common.hpp"
#include "evlab/rng.hpp"

namespace evlab {

/// Dense row-major N-dimensional array. Value semantics throughout; the
/// optional grad buffer, when allocated, always matches the data shape.
template <typename T>
struct TensorT {
  std::vector<std::size_t> shape;
  std::vector<T> data;
  std::vector<T> grad;  // empty means "no gradient storage"

  TensorT() = default;
  explicit TensorT(std::vector<std::size_t> s, T fill = T(0))
      : shape(std::move(s)), data(shape_numel(shape), fill) {}

  static std::size_t shape_numel(const std::vector<std::size_t>& s) {
    std::size_t n = 1;
    for (std::size_t e : s) n *= e;
    return s.empty() ? 0 : n;
  }

  std::size_t numel() const { return data.size(); }
  std::size_t rank() const { return shape.size(); }
  std::size_t dim(std::size_t i) const { return shape[i]; }

  bool has_grad() const { return !grad.empty(); }
  void alloc_grad() { grad.assign(data.size(), T(0)); }
  void zero_grad() {
    if (has_grad()) std::fill(grad.begin(), grad.end(), T(0));
  }

  // 4D accessor for [N, C, H, W] tensors; used by tests and cold paths.
  T& at4(std::size_t n, std::size_t c, std::size_t y, std::size_t x) {
    return data[((n * shape[1] + c) * shape[2] + y) * shape[3] + x];
  }
  const T& at4(std::size_t n, std::size_t c, std::size_t y, std::size_t x) const {
    return data[((n * shape[1] + c) * shape[2] + y) * shape[3] + x];
  }

  bool same_shape(const TensorT& o) const { return shape == o.shape; }

  template <typename U>
  TensorT<U> cast() const {
    TensorT<U> out;
    out.shape = shape;
    out.data.assign(data.begin(), data.end());
    if (has_grad()) out.grad.assign(grad.begin(), grad.end());
    return out;
  }
};

using Tensor = TensorT<float>;
using Tensor64 = TensorT<double>;

template <typename T>
TensorT<T> random_uniform(Rng& rng, std::vector<std::size_t> shape, double lo, double hi) {
  TensorT<T> t(std::move(shape));
  for (auto& v : t.data) v = static_cast<T>(rng.uniform(lo, hi));
  return t;
}

inline std::string shape_str(const std::vector<std::size_t>& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

}  // namespace evlab
