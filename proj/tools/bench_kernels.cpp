// Times the OpenMP kernels against their serial reference twins and checks
// they agree. Run with OMP_NUM_THREADS set to see the scaling.

#include <chrono>
#include <cmath>
#include <cstdio>

#include "deconfuse/kernels.hpp"
#include "deconfuse/rng.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

using namespace deconfuse;

namespace {

template <typename Fn>
double time_ms(Fn&& fn, int repeats) {
  fn();  // warm up
  const auto start = std::chrono::steady_clock::now();
  for (int i = 0; i < repeats; ++i) fn();
  const auto stop = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(stop - start).count() / repeats;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

void row(const char* name, double parallel_ms, double serial_ms, double diff) {
  std::printf("%-24s %10.3f ms %10.3f ms %8.2fx   max|diff| %.3e\n", name, parallel_ms,
              serial_ms, serial_ms / parallel_ms, diff);
}

}  // namespace

int main() {
#ifdef _OPENMP
  std::printf("OpenMP threads: %d\n", omp_get_max_threads());
#else
  std::printf("OpenMP disabled at build time (serial kernels)\n");
#endif
  std::printf("%-24s %13s %13s %9s\n", "kernel", "parallel", "serial", "speedup");

  Rng rng(1);
  const int repeats = 5;

  // conv1d forward + gradients
  Tensor3 input(64, 4, 256);
  for (double& v : input.v) v = rng.normal();
  FilterBank bank(16, 4, 7, 1, 3);
  for (double& w : bank.w) w = rng.normal();

  const Tensor3 conv_par = kernels::conv1d(input, bank);
  const Tensor3 conv_ser = kernels::serial::conv1d(input, bank);
  row("conv1d",
      time_ms([&] { kernels::conv1d(input, bank); }, repeats),
      time_ms([&] { kernels::serial::conv1d(input, bank); }, repeats),
      max_abs_diff(conv_par.v, conv_ser.v));

  Tensor3 grad_out(conv_par.samples, conv_par.channels, conv_par.length);
  for (double& v : grad_out.v) v = rng.normal();

  const Tensor3 gi_par = kernels::conv1d_grad_input(grad_out, bank, input.length);
  const Tensor3 gi_ser = kernels::serial::conv1d_grad_input(grad_out, bank, input.length);
  row("conv1d_grad_input",
      time_ms([&] { kernels::conv1d_grad_input(grad_out, bank, input.length); }, repeats),
      time_ms([&] { kernels::serial::conv1d_grad_input(grad_out, bank, input.length); }, repeats),
      max_abs_diff(gi_par.v, gi_ser.v));

  const FilterBank gw_par = kernels::conv1d_grad_weights(input, grad_out, bank);
  const FilterBank gw_ser = kernels::serial::conv1d_grad_weights(input, grad_out, bank);
  row("conv1d_grad_weights",
      time_ms([&] { kernels::conv1d_grad_weights(input, grad_out, bank); }, repeats),
      time_ms([&] { kernels::serial::conv1d_grad_weights(input, grad_out, bank); }, repeats),
      max_abs_diff(gw_par.w, gw_ser.w));

  // fusion-sized matmul
  Matrix a(512, 400);
  Matrix b(400, 200);
  for (double& v : a.v) v = rng.normal();
  for (double& v : b.v) v = rng.normal();
  const Matrix mm_par = kernels::matmul(a, b);
  const Matrix mm_ser = kernels::serial::matmul(a, b);
  row("matmul",
      time_ms([&] { kernels::matmul(a, b); }, repeats),
      time_ms([&] { kernels::serial::matmul(a, b); }, repeats),
      max_abs_diff(mm_par.v, mm_ser.v));

  // pooling
  const Tensor3 mp_par = kernels::maxpool1d(input, 2, 2);
  const Tensor3 mp_ser = kernels::serial::maxpool1d(input, 2, 2);
  row("maxpool1d",
      time_ms([&] { kernels::maxpool1d(input, 2, 2); }, repeats),
      time_ms([&] { kernels::serial::maxpool1d(input, 2, 2); }, repeats),
      max_abs_diff(mp_par.v, mp_ser.v));

  return 0;
}
