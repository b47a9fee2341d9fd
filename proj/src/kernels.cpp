#include "deconfuse/kernels.hpp"

#include <algorithm>
#include <cstdint>

namespace deconfuse::kernels {

namespace {

using i64 = std::int64_t;

void check_conv_shapes(const Tensor3& input, const FilterBank& bank) {
  if (input.channels != bank.in_channels)
    throw ShapeError("conv1d: input has " + std::to_string(input.channels) +
                     " channels, filter bank expects " + std::to_string(bank.in_channels));
}

}  // namespace

Tensor3 conv1d(const Tensor3& input, const FilterBank& bank) {
  check_conv_shapes(input, bank);
  const std::size_t d_out = conv_output_length(input.length, bank.kernel_size, bank.stride,
                                               bank.padding);
  Tensor3 out(input.samples, bank.out_channels, d_out);

  const i64 K = static_cast<i64>(input.samples);
  const i64 M = static_cast<i64>(bank.out_channels);
  const i64 C = static_cast<i64>(bank.in_channels);
  const i64 P = static_cast<i64>(bank.kernel_size);
  const i64 D = static_cast<i64>(input.length);
  const i64 J = static_cast<i64>(d_out);
  const i64 stride = static_cast<i64>(bank.stride);
  const i64 pad = static_cast<i64>(bank.padding);

  // Each (k, m) output row is written by exactly one thread; the reduction
  // over channels and taps runs in a fixed order, so the result is bitwise
  // identical at any thread count.
#pragma omp parallel for collapse(2) schedule(static)
  for (i64 k = 0; k < K; ++k) {
    for (i64 m = 0; m < M; ++m) {
      double* dst = out.row(static_cast<std::size_t>(k), static_cast<std::size_t>(m));
      for (i64 j = 0; j < J; ++j) {
        double acc = 0.0;
        const i64 base = j * stride - pad;
        for (i64 ci = 0; ci < C; ++ci) {
          const double* src = input.row(static_cast<std::size_t>(k), static_cast<std::size_t>(ci));
          const double* w = &bank.w[(static_cast<std::size_t>(m) * bank.in_channels +
                                     static_cast<std::size_t>(ci)) * bank.kernel_size];
          const i64 p_lo = std::max<i64>(0, -base);
          const i64 p_hi = std::min<i64>(P, D - base);
          for (i64 p = p_lo; p < p_hi; ++p) acc += w[p] * src[base + p];
        }
        dst[j] = acc;
      }
    }
  }
  return out;
}

Tensor3 conv1d_grad_input(const Tensor3& grad_out, const FilterBank& bank,
                          std::size_t input_length) {
  Tensor3 grad_in(grad_out.samples, bank.in_channels, input_length);

  const i64 K = static_cast<i64>(grad_out.samples);
  const i64 M = static_cast<i64>(bank.out_channels);
  const i64 C = static_cast<i64>(bank.in_channels);
  const i64 P = static_cast<i64>(bank.kernel_size);
  const i64 D = static_cast<i64>(input_length);
  const i64 J = static_cast<i64>(grad_out.length);
  const i64 stride = static_cast<i64>(bank.stride);
  const i64 pad = static_cast<i64>(bank.padding);

#pragma omp parallel for collapse(2) schedule(static)
  for (i64 k = 0; k < K; ++k) {
    for (i64 ci = 0; ci < C; ++ci) {
      double* dst = grad_in.row(static_cast<std::size_t>(k), static_cast<std::size_t>(ci));
      for (i64 i = 0; i < D; ++i) {
        double acc = 0.0;
        for (i64 m = 0; m < M; ++m) {
          const double* g = grad_out.row(static_cast<std::size_t>(k), static_cast<std::size_t>(m));
          const double* w = &bank.w[(static_cast<std::size_t>(m) * bank.in_channels +
                                     static_cast<std::size_t>(ci)) * bank.kernel_size];
          // input position i contributes to output j through tap p when
          // j*stride + p - pad == i
          for (i64 p = 0; p < P; ++p) {
            const i64 num = i + pad - p;
            if (num < 0 || num % stride != 0) continue;
            const i64 j = num / stride;
            if (j < 0 || j >= J) continue;
            acc += w[p] * g[j];
          }
        }
        dst[i] = acc;
      }
    }
  }
  return grad_in;
}

FilterBank conv1d_grad_weights(const Tensor3& input, const Tensor3& grad_out,
                               const FilterBank& bank) {
  FilterBank grad(bank.out_channels, bank.in_channels, bank.kernel_size, bank.stride,
                  bank.padding);

  const i64 K = static_cast<i64>(input.samples);
  const i64 M = static_cast<i64>(bank.out_channels);
  const i64 C = static_cast<i64>(bank.in_channels);
  const i64 P = static_cast<i64>(bank.kernel_size);
  const i64 D = static_cast<i64>(input.length);
  const i64 J = static_cast<i64>(grad_out.length);
  const i64 stride = static_cast<i64>(bank.stride);
  const i64 pad = static_cast<i64>(bank.padding);

#pragma omp parallel for collapse(2) schedule(static)
  for (i64 m = 0; m < M; ++m) {
    for (i64 ci = 0; ci < C; ++ci) {
      for (i64 p = 0; p < P; ++p) {
        double acc = 0.0;
        for (i64 k = 0; k < K; ++k) {
          const double* src = input.row(static_cast<std::size_t>(k), static_cast<std::size_t>(ci));
          const double* g = grad_out.row(static_cast<std::size_t>(k), static_cast<std::size_t>(m));
          for (i64 j = 0; j < J; ++j) {
            const i64 i = j * stride + p - pad;
            if (i < 0 || i >= D) continue;
            acc += src[i] * g[j];
          }
        }
        grad.at(static_cast<std::size_t>(m), static_cast<std::size_t>(ci),
                static_cast<std::size_t>(p)) = acc;
      }
    }
  }
  return grad;
}

Tensor3 maxpool1d(const Tensor3& input, std::size_t kernel, std::size_t stride,
                  std::vector<std::size_t>* argmax) {
  const std::size_t d_out = pool_output_length(input.length, kernel, stride);
  Tensor3 out(input.samples, input.channels, d_out);
  if (argmax) argmax->assign(out.size(), 0);

  const i64 K = static_cast<i64>(input.samples);
  const i64 C = static_cast<i64>(input.channels);
  const i64 J = static_cast<i64>(d_out);

#pragma omp parallel for collapse(2) schedule(static)
  for (i64 k = 0; k < K; ++k) {
    for (i64 c = 0; c < C; ++c) {
      const double* src = input.row(static_cast<std::size_t>(k), static_cast<std::size_t>(c));
      double* dst = out.row(static_cast<std::size_t>(k), static_cast<std::size_t>(c));
      for (i64 j = 0; j < J; ++j) {
        const std::size_t start = static_cast<std::size_t>(j) * stride;
        std::size_t best = start;
        double best_v = src[start];
        for (std::size_t p = 1; p < kernel; ++p) {
          if (src[start + p] > best_v) {  // strict: ties keep the first index
            best_v = src[start + p];
            best = start + p;
          }
        }
        dst[j] = best_v;
        if (argmax)
          (*argmax)[(static_cast<std::size_t>(k) * input.channels + static_cast<std::size_t>(c)) *
                        d_out + static_cast<std::size_t>(j)] = best;
      }
    }
  }
  return out;
}

Tensor3 maxpool1d_backward(const Tensor3& grad_out, const std::vector<std::size_t>& argmax,
                           std::size_t input_length) {
  Tensor3 grad_in(grad_out.samples, grad_out.channels, input_length);

  const i64 K = static_cast<i64>(grad_out.samples);
  const i64 C = static_cast<i64>(grad_out.channels);
  const std::size_t J = grad_out.length;

  // Rows (k, c) are disjoint, so the scatter below is race-free.
#pragma omp parallel for collapse(2) schedule(static)
  for (i64 k = 0; k < K; ++k) {
    for (i64 c = 0; c < C; ++c) {
      const double* g = grad_out.row(static_cast<std::size_t>(k), static_cast<std::size_t>(c));
      double* dst = grad_in.row(static_cast<std::size_t>(k), static_cast<std::size_t>(c));
      const std::size_t base =
          (static_cast<std::size_t>(k) * grad_out.channels + static_cast<std::size_t>(c)) * J;
      for (std::size_t j = 0; j < J; ++j) dst[argmax[base + j]] += g[j];
    }
  }
  return grad_in;
}

namespace {

template <double F(double)>
Tensor3 elementwise(const Tensor3& input) {
  Tensor3 out(input.samples, input.channels, input.length);
  const i64 n = static_cast<i64>(input.size());
#pragma omp parallel for schedule(static)
  for (i64 i = 0; i < n; ++i) out.v[static_cast<std::size_t>(i)] = F(input.v[static_cast<std::size_t>(i)]);
  return out;
}

}  // namespace

Tensor3 selu_map(const Tensor3& input) { return elementwise<selu>(input); }
Tensor3 relu_map(const Tensor3& input) { return elementwise<relu>(input); }

Matrix flatten(const Tensor3& features) {
  // Channel-major, position-minor matches the (k, c, d) memory layout, so
  // each row is a straight copy of one sample block.
  Matrix out(features.samples, features.channels * features.length);
  std::copy(features.v.begin(), features.v.end(), out.v.begin());
  return out;
}

Tensor3 unflatten(const Matrix& rows, std::size_t channels, std::size_t length) {
  if (rows.cols != channels * length)
    throw ShapeError("unflatten: row width " + std::to_string(rows.cols) + " != " +
                     std::to_string(channels) + "*" + std::to_string(length));
  Tensor3 out(rows.rows, channels, length);
  std::copy(rows.v.begin(), rows.v.end(), out.v.begin());
  return out;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols != b.rows)
    throw ShapeError("matmul: " + std::to_string(a.cols) + " != " + std::to_string(b.rows));
  Matrix c(a.rows, b.cols);
  const i64 R = static_cast<i64>(a.rows);
#pragma omp parallel for schedule(static)
  for (i64 r = 0; r < R; ++r) {
    double* dst = c.row(static_cast<std::size_t>(r));
    const double* ar = a.row(static_cast<std::size_t>(r));
    for (std::size_t i = 0; i < a.cols; ++i) {
      const double av = ar[i];
      const double* br = b.row(i);
      for (std::size_t o = 0; o < b.cols; ++o) dst[o] += av * br[o];
    }
  }
  return c;
}

Matrix matmul_at_b(const Matrix& a, const Matrix& b) {
  if (a.rows != b.rows)
    throw ShapeError("matmul_at_b: " + std::to_string(a.rows) + " != " + std::to_string(b.rows));
  Matrix c(a.cols, b.cols);
  const i64 I = static_cast<i64>(a.cols);
#pragma omp parallel for schedule(static)
  for (i64 i = 0; i < I; ++i) {
    double* dst = c.row(static_cast<std::size_t>(i));
    for (std::size_t k = 0; k < a.rows; ++k) {
      const double av = a.at(k, static_cast<std::size_t>(i));
      const double* br = b.row(k);
      for (std::size_t o = 0; o < b.cols; ++o) dst[o] += av * br[o];
    }
  }
  return c;
}

Matrix matmul_a_bt(const Matrix& a, const Matrix& b) {
  if (a.cols != b.cols)
    throw ShapeError("matmul_a_bt: " + std::to_string(a.cols) + " != " + std::to_string(b.cols));
  Matrix c(a.rows, b.rows);
  const i64 R = static_cast<i64>(a.rows);
#pragma omp parallel for schedule(static)
  for (i64 r = 0; r < R; ++r) {
    const double* ar = a.row(static_cast<std::size_t>(r));
    double* dst = c.row(static_cast<std::size_t>(r));
    for (std::size_t i = 0; i < b.rows; ++i) {
      const double* br = b.row(i);
      double acc = 0.0;
      for (std::size_t o = 0; o < b.cols; ++o) acc += ar[o] * br[o];
      dst[i] = acc;
    }
  }
  return c;
}

double frobenius_sq(std::span<const double> xs) {
  double acc = 0.0;
  for (double x : xs) acc += x * x;
  return acc;
}

namespace serial {

Tensor3 conv1d(const Tensor3& input, const FilterBank& bank) {
  check_conv_shapes(input, bank);
  const std::size_t d_out = conv_output_length(input.length, bank.kernel_size, bank.stride,
                                               bank.padding);
  Tensor3 out(input.samples, bank.out_channels, d_out);
  for (std::size_t k = 0; k < input.samples; ++k)
    for (std::size_t m = 0; m < bank.out_channels; ++m)
      for (std::size_t j = 0; j < d_out; ++j) {
        double acc = 0.0;
        for (std::size_t ci = 0; ci < bank.in_channels; ++ci)
          for (std::size_t p = 0; p < bank.kernel_size; ++p) {
            const std::int64_t i = static_cast<std::int64_t>(j * bank.stride + p) -
                                   static_cast<std::int64_t>(bank.padding);
            const double x = (i < 0 || i >= static_cast<std::int64_t>(input.length))
                                 ? 0.0
                                 : input.at(k, ci, static_cast<std::size_t>(i));
            acc += bank.at(m, ci, p) * x;
          }
        out.at(k, m, j) = acc;
      }
  return out;
}

Tensor3 conv1d_grad_input(const Tensor3& grad_out, const FilterBank& bank,
                          std::size_t input_length) {
  Tensor3 grad_in(grad_out.samples, bank.in_channels, input_length);
  for (std::size_t k = 0; k < grad_out.samples; ++k)
    for (std::size_t m = 0; m < bank.out_channels; ++m)
      for (std::size_t j = 0; j < grad_out.length; ++j)
        for (std::size_t ci = 0; ci < bank.in_channels; ++ci)
          for (std::size_t p = 0; p < bank.kernel_size; ++p) {
            const std::int64_t i = static_cast<std::int64_t>(j * bank.stride + p) -
                                   static_cast<std::int64_t>(bank.padding);
            if (i < 0 || i >= static_cast<std::int64_t>(input_length)) continue;
            grad_in.at(k, ci, static_cast<std::size_t>(i)) += bank.at(m, ci, p) * grad_out.at(k, m, j);
          }
  return grad_in;
}

FilterBank conv1d_grad_weights(const Tensor3& input, const Tensor3& grad_out,
                               const FilterBank& bank) {
  FilterBank grad(bank.out_channels, bank.in_channels, bank.kernel_size, bank.stride,
                  bank.padding);
  for (std::size_t k = 0; k < input.samples; ++k)
    for (std::size_t m = 0; m < bank.out_channels; ++m)
      for (std::size_t j = 0; j < grad_out.length; ++j)
        for (std::size_t ci = 0; ci < bank.in_channels; ++ci)
          for (std::size_t p = 0; p < bank.kernel_size; ++p) {
            const std::int64_t i = static_cast<std::int64_t>(j * bank.stride + p) -
                                   static_cast<std::int64_t>(bank.padding);
            if (i < 0 || i >= static_cast<std::int64_t>(input.length)) continue;
            grad.at(m, ci, p) += input.at(k, ci, static_cast<std::size_t>(i)) * grad_out.at(k, m, j);
          }
  return grad;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols != b.rows) throw ShapeError("matmul: inner dims differ");
  Matrix c(a.rows, b.cols);
  for (std::size_t r = 0; r < a.rows; ++r)
    for (std::size_t o = 0; o < b.cols; ++o) {
      double acc = 0.0;
      for (std::size_t i = 0; i < a.cols; ++i) acc += a.at(r, i) * b.at(i, o);
      c.at(r, o) = acc;
    }
  return c;
}

Tensor3 maxpool1d(const Tensor3& input, std::size_t kernel, std::size_t stride) {
  const std::size_t d_out = pool_output_length(input.length, kernel, stride);
  Tensor3 out(input.samples, input.channels, d_out);
  for (std::size_t k = 0; k < input.samples; ++k)
    for (std::size_t c = 0; c < input.channels; ++c)
      for (std::size_t j = 0; j < d_out; ++j) {
        double best = input.at(k, c, j * stride);
        for (std::size_t p = 1; p < kernel; ++p)
          best = std::max(best, input.at(k, c, j * stride + p));
        out.at(k, c, j) = best;
      }
  return out;
}

}  // namespace serial

}  // namespace deconfuse::kernels
