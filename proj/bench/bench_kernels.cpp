// Times the OpenMP kernels against the serial reference implementations and
// checks that both produce the same numbers.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "advseg/kernels.hpp"
#include "advseg/reference.hpp"
#include "advseg/rng.hpp"

using advseg::Rng;
using advseg::kernels::Conv2dDims;
using clock_type = std::chrono::steady_clock;

namespace {

std::vector<double> random_vec(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

template <typename F>
double time_ms(F&& fn, int reps) {
  const auto t0 = clock_type::now();
  for (int i = 0; i < reps; ++i) fn();
  const auto t1 = clock_type::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

void bench_conv(int n, int c, int hw, int f, int stride, int reps, Rng& rng) {
  Conv2dDims d;
  d.n = n;
  d.c = c;
  d.h = d.w = hw;
  d.f = f;
  d.kh = d.kw = 3;
  d.stride = stride;
  d.pad = 1;
  d.ho = (d.h + 2 - 3) / stride + 1;
  d.wo = (d.w + 2 - 3) / stride + 1;

  const auto in = random_vec(static_cast<std::size_t>(n) * c * hw * hw, rng);
  const auto w = random_vec(static_cast<std::size_t>(f) * c * 9, rng);
  const auto b = random_vec(static_cast<std::size_t>(f), rng);
  std::vector<double> out_par(static_cast<std::size_t>(n) * f * d.ho * d.wo);
  std::vector<double> out_ref(out_par.size());

  const double t_par = time_ms(
      [&] {
        advseg::kernels::conv2d_forward(in.data(), w.data(), b.data(), d,
                                        out_par.data());
      },
      reps);
  const double t_ref = time_ms(
      [&] {
        advseg::ref::conv2d_forward(in.data(), w.data(), b.data(), d,
                                    out_ref.data());
      },
      reps);
  std::printf(
      "conv2d fwd  %dx%dx%dx%d f=%-3d s=%d   omp %8.3f ms   serial %8.3f ms  "
      " x%.2f   max|d|=%.2e\n",
      n, c, hw, hw, f, stride, t_par, t_ref, t_ref / t_par,
      max_abs_diff(out_par, out_ref));

  // backward
  const auto g_out = random_vec(out_par.size(), rng);
  std::vector<double> gi_par(in.size()), gw_par(w.size()), gb_par(b.size());
  std::vector<double> gi_ref(in.size()), gw_ref(w.size()), gb_ref(b.size());
  const double tb_par = time_ms(
      [&] {
        std::fill(gi_par.begin(), gi_par.end(), 0.0);
        std::fill(gw_par.begin(), gw_par.end(), 0.0);
        std::fill(gb_par.begin(), gb_par.end(), 0.0);
        advseg::kernels::conv2d_backward(in.data(), w.data(), g_out.data(), d,
                                         gi_par.data(), gw_par.data(),
                                         gb_par.data());
      },
      reps);
  const double tb_ref = time_ms(
      [&] {
        std::fill(gi_ref.begin(), gi_ref.end(), 0.0);
        std::fill(gw_ref.begin(), gw_ref.end(), 0.0);
        std::fill(gb_ref.begin(), gb_ref.end(), 0.0);
        advseg::ref::conv2d_backward(in.data(), w.data(), g_out.data(), d,
                                     gi_ref.data(), gw_ref.data(),
                                     gb_ref.data());
      },
      reps);
  const double worst = std::max({max_abs_diff(gi_par, gi_ref),
                                 max_abs_diff(gw_par, gw_ref),
                                 max_abs_diff(gb_par, gb_ref)});
  std::printf(
      "conv2d bwd  %dx%dx%dx%d f=%-3d s=%d   omp %8.3f ms   serial %8.3f ms  "
      " x%.2f   max|d|=%.2e\n",
      n, c, hw, hw, f, stride, tb_par, tb_ref, tb_ref / tb_par, worst);
}

void bench_dense(int n, int k, int m, int reps, Rng& rng) {
  const auto in = random_vec(static_cast<std::size_t>(n) * k, rng);
  const auto w = random_vec(static_cast<std::size_t>(k) * m, rng);
  const auto b = random_vec(static_cast<std::size_t>(m), rng);
  std::vector<double> out_par(static_cast<std::size_t>(n) * m), out_ref(out_par.size());
  const double t_par = time_ms(
      [&] {
        advseg::kernels::dense_forward(in.data(), w.data(), b.data(), n, k, m,
                                       out_par.data());
      },
      reps);
  const double t_ref = time_ms(
      [&] {
        advseg::ref::dense_forward(in.data(), w.data(), b.data(), n, k, m,
                                   out_ref.data());
      },
      reps);
  std::printf(
      "dense       %dx%d * %dx%d          omp %8.3f ms   serial %8.3f ms   "
      "x%.2f   max|d|=%.2e\n",
      n, k, k, m, t_par, t_ref, t_ref / t_par, max_abs_diff(out_par, out_ref));
}

void bench_dilate(int hw, int rho, int reps, Rng& rng) {
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(hw) * hw);
  for (auto& v : mask) v = rng.uniform() < 0.05 ? 1 : 0;
  std::vector<std::uint8_t> out_par(mask.size()), out_ref(mask.size());
  const double t_par = time_ms(
      [&] {
        advseg::kernels::dilate(mask.data(), hw, hw, rho, true, out_par.data());
      },
      reps);
  const double t_ref = time_ms(
      [&] { advseg::ref::dilate(mask.data(), hw, hw, rho, true, out_ref.data()); },
      1);
  int diff = 0;
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (out_par[i] != out_ref[i]) ++diff;
  std::printf(
      "dilate      %dx%d rho=%d             omp %8.3f ms   serial %8.3f ms   "
      "x%.2f   mismatches=%d\n",
      hw, hw, rho, t_par, t_ref, t_ref / t_par, diff);
}

}  // namespace

int main() {
#ifdef _OPENMP
  std::printf("openmp threads: %d\n", omp_get_max_threads());
#else
  std::printf("built without openmp; both columns are serial\n");
#endif
  Rng rng(42);
  bench_conv(3, 16, 64, 32, 1, 5, rng);
  bench_conv(3, 32, 32, 64, 2, 5, rng);
  bench_conv(8, 3, 128, 16, 2, 3, rng);
  bench_dense(3, 4096, 512, 20, rng);
  bench_dilate(512, 3, 10, rng);
  return 0;
}
