#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "deconfuse/errors.hpp"

namespace deconfuse {

/// Batched multi-channel 1D signal: (samples K, channels C, length D),
/// row-major with the length index fastest.
struct Tensor3 {
  std::size_t samples = 0;
  std::size_t channels = 0;
  std::size_t length = 0;
  std::vector<double> v;

  Tensor3() = default;
  Tensor3(std::size_t k, std::size_t c, std::size_t d)
      : samples(k), channels(c), length(d), v(k * c * d, 0.0) {}

  std::size_t size() const { return samples * channels * length; }

  double& at(std::size_t k, std::size_t c, std::size_t d) {
    return v[(k * channels + c) * length + d];
  }
  double at(std::size_t k, std::size_t c, std::size_t d) const {
    return v[(k * channels + c) * length + d];
  }

  /// Pointer to the start of sample k, channel c.
  double* row(std::size_t k, std::size_t c) { return v.data() + (k * channels + c) * length; }
  const double* row(std::size_t k, std::size_t c) const {
    return v.data() + (k * channels + c) * length;
  }

  bool same_shape(const Tensor3& o) const {
    return samples == o.samples && channels == o.channels && length == o.length;
  }
};

/// Dense row-major matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> v;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), v(r * c, 0.0) {}

  std::size_t size() const { return rows * cols; }

  double& at(std::size_t r, std::size_t c) { return v[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return v[r * cols + c]; }

  double* row(std::size_t r) { return v.data() + r * cols; }
  const double* row(std::size_t r) const { return v.data() + r * cols; }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m.at(i, i) = 1.0;
    return m;
  }
};

/// One layer's convolutional transforms: weights (out_channels M x
/// in_channels x kernel_size P), plus stride and zero padding.
struct FilterBank {
  std::size_t out_channels = 0;
  std::size_t in_channels = 0;
  std::size_t kernel_size = 0;
  std::size_t stride = 1;
  std::size_t padding = 0;
  std::vector<double> w;

  FilterBank() = default;
  FilterBank(std::size_t m, std::size_t in, std::size_t p, std::size_t s = 1, std::size_t pad = 0)
      : out_channels(m), in_channels(in), kernel_size(p), stride(s), padding(pad),
        w(m * in * p, 0.0) {
    if (p < 1 || s < 1) throw GeometryError("filter bank needs kernel_size >= 1 and stride >= 1");
  }

  double& at(std::size_t m, std::size_t ci, std::size_t p) {
    return w[(m * in_channels + ci) * kernel_size + p];
  }
  double at(std::size_t m, std::size_t ci, std::size_t p) const {
    return w[(m * in_channels + ci) * kernel_size + p];
  }

  /// Filters-as-columns matrix [t_1 | ... | t_M], shape (in*P) x M.
  /// This is the matrix whose singular values enter the log-det penalty.
  Matrix as_matrix() const {
    Matrix t(in_channels * kernel_size, out_channels);
    for (std::size_t m = 0; m < out_channels; ++m)
      for (std::size_t ci = 0; ci < in_channels; ++ci)
        for (std::size_t p = 0; p < kernel_size; ++p)
          t.at(ci * kernel_size + p, m) = at(m, ci, p);
    return t;
  }

  void from_matrix(const Matrix& t) {
    for (std::size_t m = 0; m < out_channels; ++m)
      for (std::size_t ci = 0; ci < in_channels; ++ci)
        for (std::size_t p = 0; p < kernel_size; ++p)
          at(m, ci, p) = t.at(ci * kernel_size + p, m);
  }
};

inline bool all_finite(std::span<const double> xs) {
  for (double x : xs)
    if (!std::isfinite(x)) return false;
  return true;
}

/// floor((d + 2*pad - p) / stride) + 1, or throws if no full window fits.
inline std::size_t conv_output_length(std::size_t d, std::size_t p, std::size_t stride,
                                      std::size_t pad) {
  const std::size_t padded = d + 2 * pad;
  if (p > padded) throw GeometryError("kernel longer than padded input");
  return (padded - p) / stride + 1;
}

inline std::size_t pool_output_length(std::size_t d, std::size_t kernel, std::size_t stride) {
  if (kernel > d) throw GeometryError("pooling kernel longer than input");
  return (d - kernel) / stride + 1;
}

}  // namespace deconfuse
