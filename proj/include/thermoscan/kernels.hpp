#pragma once

// Data-parallel inner loops. Each kernel has a serial reference version and an
// OpenMP version; both evaluate every output element with the same arithmetic
// in the same order, so their results are bit-identical. Tests compare them
// exactly and bench/ times them against each other.

#include <cstddef>
#include <span>
#include <vector>

#include "thermoscan/common.hpp"

namespace thermoscan::kernels {

enum class Exec { serial, parallel };

/// Process-wide default used by the library's call sites.
Exec default_exec();
void set_default_exec(Exec exec);
/// Upper bound on OpenMP threads for parallel kernels (0 = runtime default).
void set_max_threads(int threads);
int max_threads();

// out[i] = ||points.row(i) - query||^2
void squared_distances_serial(const Matrix& points, std::span<const double> query, std::span<double> out);
void squared_distances_parallel(const Matrix& points, std::span<const double> query, std::span<double> out);
void squared_distances(const Matrix& points, std::span<const double> query, std::span<double> out,
                       Exec exec = default_exec());

/// Pearson correlation of every column pair of `data` (n x d). Entries for
/// constant columns are NaN; the diagonal is 1 for non-constant columns.
Matrix pearson_serial(const Matrix& data);
Matrix pearson_parallel(const Matrix& data);
Matrix pearson(const Matrix& data, Exec exec = default_exec());

/// One explicit step of the 2D heat equation with linear sinks, on a
/// cell-centred nx-by-ny grid stored row-major by depth (index j*nx + i).
///   T'[c] = T[c] + dt / (rho_c[c]) * (sum_faces G_f (T_nb - T[c]) + a[c] - b[c] * T[c])
/// Face conductances already include the geometry (W/(m^3 K) per unit cell).
/// Returns max |T' - T|.
struct HeatStepInput {
  std::size_t nx = 0;
  std::size_t ny = 0;
  double dt = 0.0;
  std::span<const double> rho_c;   // volumetric heat capacity per cell
  std::span<const double> g_east;  // conductance to (i+1, j); 0 at the lateral wall
  std::span<const double> g_south; // conductance to (i, j+1); 0 at the last row
  std::span<const double> source;  // a[c]: constant source incl. boundary terms
  std::span<const double> sink;    // b[c]: coefficient of T[c] in the sink terms
};
double heat_step_serial(const HeatStepInput& in, std::span<const double> t, std::span<double> t_next);
double heat_step_parallel(const HeatStepInput& in, std::span<const double> t, std::span<double> t_next);
double heat_step(const HeatStepInput& in, std::span<const double> t, std::span<double> t_next,
                 Exec exec = default_exec());

/// 'Same'-padded 2D convolution, stride 1, odd square kernel.
/// input [n][cin][h][w], weights [cout][cin][k][k], bias [cout] -> out [n][cout][h][w].
struct ConvShape {
  std::size_t n = 0, cin = 0, h = 0, w = 0, cout = 0, k = 0;
};
void conv2d_forward_serial(const ConvShape& s, std::span<const double> input, std::span<const double> weights,
                           std::span<const double> bias, std::span<double> out);
void conv2d_forward_parallel(const ConvShape& s, std::span<const double> input, std::span<const double> weights,
                             std::span<const double> bias, std::span<double> out);
void conv2d_forward(const ConvShape& s, std::span<const double> input, std::span<const double> weights,
                    std::span<const double> bias, std::span<double> out, Exec exec = default_exec());

}  // namespace thermoscan::kernels
