#pragma once

#include <cstddef>
#include <vector>

#include "deconfuse/tensor.hpp"

namespace deconfuse {

// SELU constants (Klambauer et al. self-normalizing parametrization).
inline constexpr double kSeluAlpha = 1.6732632423543772;
inline constexpr double kSeluScale = 1.0507009873554805;

inline double selu(double x) {
  return x > 0.0 ? kSeluScale * x : kSeluScale * kSeluAlpha * (std::exp(x) - 1.0);
}

/// Derivative convention at 0: the x <= 0 branch (scale*alpha).
inline double selu_derivative(double x) {
  return x > 0.0 ? kSeluScale : kSeluScale * kSeluAlpha * std::exp(x);
}

inline double relu(double x) { return x > 0.0 ? x : 0.0; }

/// Subgradient 0 at the kink.
inline double relu_derivative(double x) { return x > 0.0 ? 1.0 : 0.0; }

namespace kernels {

/// Sliding cross-correlation summed over input channels, one output map per
/// filter. Output dims (K, M, D_out). Throws ShapeError on channel mismatch,
/// GeometryError when no window fits.
Tensor3 conv1d(const Tensor3& input, const FilterBank& bank);

/// Gradient of conv1d w.r.t. its input, gather form (deterministic at any
/// thread count).
Tensor3 conv1d_grad_input(const Tensor3& grad_out, const FilterBank& bank,
                          std::size_t input_length);

/// Gradient of conv1d w.r.t. the filter weights.
FilterBank conv1d_grad_weights(const Tensor3& input, const Tensor3& grad_out,
                               const FilterBank& bank);

/// Per-channel max over sliding windows; ties broken to the first index.
/// When argmax is non-null it receives, per output element, the flat input
/// position that won (needed for the backward pass).
Tensor3 maxpool1d(const Tensor3& input, std::size_t kernel, std::size_t stride,
                  std::vector<std::size_t>* argmax = nullptr);

Tensor3 maxpool1d_backward(const Tensor3& grad_out, const std::vector<std::size_t>& argmax,
                           std::size_t input_length);

Tensor3 selu_map(const Tensor3& input);
Tensor3 relu_map(const Tensor3& input);

/// Row k is the concatenation of all channel maps of sample k,
/// channel-major, position-minor. Output (K, C*D).
Matrix flatten(const Tensor3& features);

/// Inverse of flatten for a known (C, D) shape.
Tensor3 unflatten(const Matrix& rows, std::size_t channels, std::size_t length);

/// C = A * B, (K x I) * (I x O).
Matrix matmul(const Matrix& a, const Matrix& b);

/// A^T * B, (I x K) * (K x O) from A (K x I).
Matrix matmul_at_b(const Matrix& a, const Matrix& b);

/// A * B^T, (K x O) * (O x I) from B (I x O).
Matrix matmul_a_bt(const Matrix& a, const Matrix& b);

/// Sum of squared entries. Serial accumulation in index order.
double frobenius_sq(std::span<const double> xs);

namespace serial {

/// Naive triple-loop reference convolution (window dot products). Kept as
/// the test oracle and the benchmark baseline for the parallel kernel.
Tensor3 conv1d(const Tensor3& input, const FilterBank& bank);

Tensor3 conv1d_grad_input(const Tensor3& grad_out, const FilterBank& bank,
                          std::size_t input_length);

FilterBank conv1d_grad_weights(const Tensor3& input, const Tensor3& grad_out,
                               const FilterBank& bank);

Matrix matmul(const Matrix& a, const Matrix& b);

Tensor3 maxpool1d(const Tensor3& input, std::size_t kernel, std::size_t stride);

}  // namespace serial

}  // namespace kernels
}  // namespace deconfuse
