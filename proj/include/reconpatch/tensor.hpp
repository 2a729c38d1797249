#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <exception>
#include <functional>
#include <numeric>
#include <span>
#include <thread>
#include <vector>

#include "reconpatch/error.hpp"

namespace reconpatch {

// Dense row-major float32 tensor with an explicit shape.
struct TensorF32 {
  std::vector<std::size_t> shape;
  std::vector<float> data;

  TensorF32() = default;
  TensorF32(std::vector<std::size_t> s, std::vector<float> d) : shape(std::move(s)), data(std::move(d)) {}

  static TensorF32 zeros(std::vector<std::size_t> s) {
    TensorF32 t;
    t.shape = std::move(s);
    t.data.assign(element_count(t.shape), 0.0f);
    return t;
  }

  static std::size_t element_count(const std::vector<std::size_t>& s) {
    return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
  }

  std::size_t rank() const { return shape.size(); }
  std::size_t size() const { return data.size(); }

  // [C,H,W] accessor.
  float& at(std::size_t c, std::size_t h, std::size_t w) { return data[(c * shape[1] + h) * shape[2] + w]; }
  float at(std::size_t c, std::size_t h, std::size_t w) const { return data[(c * shape[1] + h) * shape[2] + w]; }

  bool operator==(const TensorF32&) const = default;
};

inline void validate_shape(const std::vector<std::size_t>& shape) {
  require(!shape.empty(), ErrorCode::InvalidShape, "tensor shape must have at least one dimension");
  for (std::size_t s : shape) require(s > 0, ErrorCode::InvalidShape, "tensor dimensions must be positive");
}

inline void validate_tensor(const TensorF32& t) {
  validate_shape(t.shape);
  require(t.data.size() == TensorF32::element_count(t.shape), ErrorCode::InvalidShape,
          "data length does not match shape");
}

// Row-major matrix. Rows are contiguous so each row can be handed out as a span.
template <typename T>
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<T> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, T fill = T{}) : rows(r), cols(c), data(r * c, fill) {}
  Matrix(std::size_t r, std::size_t c, std::vector<T> values) : rows(r), cols(c), data(std::move(values)) {
    require(data.size() == r * c, ErrorCode::InvalidShape, "matrix data length does not match rows*cols");
  }

  T& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  const T& operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  std::span<T> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const T> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

  template <typename U>
  Matrix<U> cast() const {
    Matrix<U> out(rows, cols);
    std::transform(data.begin(), data.end(), out.data.begin(), [](T v) { return static_cast<U>(v); });
    return out;
  }

  bool operator==(const Matrix&) const = default;
};

template <typename A, typename B>
double squared_distance(const A& a, const B& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    acc += d * d;
  }
  return acc;
}

template <typename A, typename B>
double euclidean_distance(const A& a, const B& b) {
  return std::sqrt(squared_distance(a, b));
}

// Splits [0, n) into contiguous chunks over `workers` threads. Each index is
// visited exactly once, so results written per index do not depend on the
// schedule.
template <typename F>
void parallel_for(std::size_t n, unsigned workers, F&& fn) {
  if (workers <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  const std::size_t nthreads = std::min<std::size_t>(workers, n);
  const std::size_t chunk = (n + nthreads - 1) / nthreads;
  std::vector<std::exception_ptr> errors(nthreads);
  {
    std::vector<std::jthread> pool;
    pool.reserve(nthreads);
    for (std::size_t t = 0; t < nthreads; ++t) {
      const std::size_t begin = t * chunk;
      const std::size_t end = std::min(n, begin + chunk);
      if (begin >= end) break;
      pool.emplace_back([begin, end, &fn, &err = errors[t]] {
        try {
          for (std::size_t i = begin; i < end; ++i) fn(i);
        } catch (...) {
          err = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace reconpatch
