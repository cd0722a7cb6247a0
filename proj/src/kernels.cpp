#include "thermoscan/kernels.hpp"

#include <omp.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>

namespace thermoscan::kernels {
namespace {

std::atomic<Exec> g_exec{Exec::parallel};
std::atomic<int> g_threads{0};

int thread_count() {
  const int t = g_threads.load();
  return t > 0 ? t : omp_get_max_threads();
}

inline double distance2(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double d = a[j] - b[j];
    s += d * d;
  }
  return s;
}

struct ColumnStats {
  std::vector<double> centred;  // column-major, d x n
  std::vector<double> norms;
};

ColumnStats centre_columns(const Matrix& data) {
  const std::size_t n = data.rows(), d = data.cols();
  ColumnStats cs;
  cs.centred.resize(n * d);
  cs.norms.resize(d);
  for (std::size_t j = 0; j < d; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += data(i, j);
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double v = data(i, j) - mean;
      cs.centred[j * n + i] = v;
      ss += v * v;
    }
    cs.norms[j] = std::sqrt(ss);
  }
  return cs;
}

inline double pair_correlation(const ColumnStats& cs, std::size_t n, std::size_t a, std::size_t b) {
  const double na = cs.norms[a], nb = cs.norms[b];
  if (na == 0.0 || nb == 0.0) return std::numeric_limits<double>::quiet_NaN();
  if (a == b) return 1.0;
  double s = 0.0;
  const double* x = cs.centred.data() + a * n;
  const double* y = cs.centred.data() + b * n;
  for (std::size_t i = 0; i < n; ++i) s += x[i] * y[i];
  const double r = s / (na * nb);
  return std::clamp(r, -1.0, 1.0);
}

inline double heat_cell(const HeatStepInput& in, std::span<const double> t, std::span<double> t_next,
                        std::size_t i, std::size_t j) {
  const std::size_t nx = in.nx;
  const std::size_t c = j * nx + i;
  const double tc = t[c];
  double flux = in.source[c] - in.sink[c] * tc;
  if (i + 1 < nx) flux += in.g_east[c] * (t[c + 1] - tc);
  if (i > 0) flux += in.g_east[c - 1] * (t[c - 1] - tc);
  if (j + 1 < in.ny) flux += in.g_south[c] * (t[c + nx] - tc);
  if (j > 0) flux += in.g_south[c - nx] * (t[c - nx] - tc);
  const double next = tc + in.dt / in.rho_c[c] * flux;
  t_next[c] = next;
  return std::abs(next - tc);
}

inline double conv_output(const ConvShape& s, std::span<const double> input, std::span<const double> weights,
                          std::span<const double> bias, std::size_t b, std::size_t o, std::size_t y,
                          std::size_t x) {
  const auto half = static_cast<std::ptrdiff_t>(s.k / 2);
  double acc = bias[o];
  for (std::size_t ci = 0; ci < s.cin; ++ci) {
    const double* plane = input.data() + (b * s.cin + ci) * s.h * s.w;
    const double* kern = weights.data() + (o * s.cin + ci) * s.k * s.k;
    for (std::size_t ky = 0; ky < s.k; ++ky) {
      const auto sy = static_cast<std::ptrdiff_t>(y) + static_cast<std::ptrdiff_t>(ky) - half;
      if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(s.h)) continue;
      for (std::size_t kx = 0; kx < s.k; ++kx) {
        const auto sx = static_cast<std::ptrdiff_t>(x) + static_cast<std::ptrdiff_t>(kx) - half;
        if (sx < 0 || sx >= static_cast<std::ptrdiff_t>(s.w)) continue;
        acc += kern[ky * s.k + kx] * plane[static_cast<std::size_t>(sy) * s.w + static_cast<std::size_t>(sx)];
      }
    }
  }
  return acc;
}

}  // namespace

Exec default_exec() { return g_exec.load(); }
void set_default_exec(Exec exec) { g_exec.store(exec); }
void set_max_threads(int threads) { g_threads.store(threads); }
int max_threads() { return thread_count(); }

void squared_distances_serial(const Matrix& points, std::span<const double> query, std::span<double> out) {
  for (std::size_t i = 0; i < points.rows(); ++i) out[i] = distance2(points.row(i), query);
}

void squared_distances_parallel(const Matrix& points, std::span<const double> query, std::span<double> out) {
  const auto n = static_cast<std::ptrdiff_t>(points.rows());
#pragma omp parallel for schedule(static) num_threads(thread_count()) if (n > 2048)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    out[static_cast<std::size_t>(i)] = distance2(points.row(static_cast<std::size_t>(i)), query);
  }
}

void squared_distances(const Matrix& points, std::span<const double> query, std::span<double> out, Exec exec) {
  if (query.size() != points.cols() || out.size() != points.rows()) {
    throw DataError("squared_distances: shape mismatch");
  }
  exec == Exec::serial ? squared_distances_serial(points, query, out)
                       : squared_distances_parallel(points, query, out);
}

Matrix pearson_serial(const Matrix& data) {
  const std::size_t n = data.rows(), d = data.cols();
  const auto cs = centre_columns(data);
  Matrix r(d, d);
  for (std::size_t a = 0; a < d; ++a) {
    for (std::size_t b = a; b < d; ++b) {
      const double v = pair_correlation(cs, n, a, b);
      r(a, b) = v;
      r(b, a) = v;
    }
  }
  return r;
}

Matrix pearson_parallel(const Matrix& data) {
  const std::size_t n = data.rows(), d = data.cols();
  const auto cs = centre_columns(data);
  Matrix r(d, d);
  const auto dd = static_cast<std::ptrdiff_t>(d);
#pragma omp parallel for schedule(dynamic) num_threads(thread_count())
  for (std::ptrdiff_t sa = 0; sa < dd; ++sa) {
    const auto a = static_cast<std::size_t>(sa);
    for (std::size_t b = a; b < d; ++b) {
      const double v = pair_correlation(cs, n, a, b);
      r(a, b) = v;
      r(b, a) = v;
    }
  }
  return r;
}

Matrix pearson(const Matrix& data, Exec exec) {
  if (data.rows() < 2) throw DataError("pearson needs at least 2 rows");
  return exec == Exec::serial ? pearson_serial(data) : pearson_parallel(data);
}

double heat_step_serial(const HeatStepInput& in, std::span<const double> t, std::span<double> t_next) {
  double max_change = 0.0;
  for (std::size_t j = 0; j < in.ny; ++j) {
    for (std::size_t i = 0; i < in.nx; ++i) max_change = std::max(max_change, heat_cell(in, t, t_next, i, j));
  }
  return max_change;
}

double heat_step_parallel(const HeatStepInput& in, std::span<const double> t, std::span<double> t_next) {
  double max_change = 0.0;
  const auto ny = static_cast<std::ptrdiff_t>(in.ny);
#pragma omp parallel for schedule(static) reduction(max : max_change) num_threads(thread_count()) \
    if (in.nx * in.ny > 4096)
  for (std::ptrdiff_t sj = 0; sj < ny; ++sj) {
    const auto j = static_cast<std::size_t>(sj);
    for (std::size_t i = 0; i < in.nx; ++i) max_change = std::max(max_change, heat_cell(in, t, t_next, i, j));
  }
  return max_change;
}

double heat_step(const HeatStepInput& in, std::span<const double> t, std::span<double> t_next, Exec exec) {
  return exec == Exec::serial ? heat_step_serial(in, t, t_next) : heat_step_parallel(in, t, t_next);
}

void conv2d_forward_serial(const ConvShape& s, std::span<const double> input, std::span<const double> weights,
                           std::span<const double> bias, std::span<double> out) {
  for (std::size_t b = 0; b < s.n; ++b)
    for (std::size_t o = 0; o < s.cout; ++o)
      for (std::size_t y = 0; y < s.h; ++y)
        for (std::size_t x = 0; x < s.w; ++x)
          out[((b * s.cout + o) * s.h + y) * s.w + x] = conv_output(s, input, weights, bias, b, o, y, x);
}

void conv2d_forward_parallel(const ConvShape& s, std::span<const double> input, std::span<const double> weights,
                             std::span<const double> bias, std::span<double> out) {
  const auto planes = static_cast<std::ptrdiff_t>(s.n * s.cout);
#pragma omp parallel for schedule(static) num_threads(thread_count()) if (s.n * s.cout * s.h * s.w > 4096)
  for (std::ptrdiff_t p = 0; p < planes; ++p) {
    const auto b = static_cast<std::size_t>(p) / s.cout;
    const auto o = static_cast<std::size_t>(p) % s.cout;
    for (std::size_t y = 0; y < s.h; ++y)
      for (std::size_t x = 0; x < s.w; ++x)
        out[((b * s.cout + o) * s.h + y) * s.w + x] = conv_output(s, input, weights, bias, b, o, y, x);
  }
}

void conv2d_forward(const ConvShape& s, std::span<const double> input, std::span<const double> weights,
                    std::span<const double> bias, std::span<double> out, Exec exec) {
  if (s.k % 2 == 0) throw ConfigError("conv2d kernel size must be odd");
  if (input.size() != s.n * s.cin * s.h * s.w || weights.size() != s.cout * s.cin * s.k * s.k ||
      bias.size() != s.cout || out.size() != s.n * s.cout * s.h * s.w) {
    throw DataError("conv2d_forward: buffer sizes do not match shape");
  }
  exec == Exec::serial ? conv2d_forward_serial(s, input, weights, bias, out)
                       : conv2d_forward_parallel(s, input, weights, bias, out);
}

}  // namespace thermoscan::kernels
