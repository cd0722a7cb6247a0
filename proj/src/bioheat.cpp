#include "thermoscan/bioheat.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>
#include <numeric>

#include <spdlog/spdlog.h>

#include "thermoscan/kernels.hpp"

namespace thermoscan::bioheat {

void TissueLayer::validate() const {
  if (!(thickness > 0)) throw ConfigError("layer '" + name + "': thickness must be positive");
  if (c < 0 || k <= 0 || rho < 0 || w_b < 0 || q < 0) {
    throw ConfigError("layer '" + name + "': properties must be non-negative (k positive)");
  }
  if (c * rho <= 0) throw ConfigError("layer '" + name + "': heat capacity must be positive");
}

std::vector<TissueLayer> breast_layers() {
  return {
      {"epidermis", 0.0001, 3589, 0.235, 1200, 0.0, 0.0},
      {"papillary_dermis", 0.0007, 3300, 0.445, 1200, 0.00018, 368.1},
      {"reticular_dermis", 0.0008, 3300, 0.445, 1200, 0.00126, 368.1},
      {"fat", 0.005, 2674, 0.21, 930, 0.00008, 400},
      {"gland", 0.0434, 3770, 0.48, 1050, 0.00054, 700},
      {"muscle", 0.015, 3800, 0.48, 1100, 0.0027, 700},
  };
}

TissueLayer tumor_tissue() { return {"tumor", 0.010, 3852, 0.48, 1050, 0.0063, 5000}; }

SimGrid build_grid(const std::vector<TissueLayer>& layers, const std::optional<TumorSpec>& tumor,
                   const BloodParams& blood, double resolution, double width, const BoundaryConditions& bc) {
  if (!(resolution > 0)) throw ConfigError("grid resolution must be positive");
  if (!(width > 0)) throw ConfigError("domain width must be positive");
  if (layers.empty()) throw ConfigError("no tissue layers");
  if (!(blood.rho_b > 0 && blood.c_b > 0)) throw ConfigError("blood properties must be positive");
  if (bc.surface == BoundaryConditions::Surface::convective && !(bc.h > 0)) {
    throw ConfigError("convective coefficient must be positive");
  }
  for (const auto& l : layers) l.validate();

  SimGrid g;
  const double depth = std::accumulate(layers.begin(), layers.end(), 0.0,
                                       [](double s, const TissueLayer& l) { return s + l.thickness; });
  g.ny = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(depth / resolution)));
  g.nx = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(width / resolution)));
  g.dy = depth / static_cast<double>(g.ny);
  g.dx = width / static_cast<double>(g.nx);
  g.materials = layers;
  g.blood = blood;
  g.bc = bc;
  g.material.assign(g.nx * g.ny, 0);
  g.t.assign(g.nx * g.ny, bc.t_core);

  std::vector<double> bottom(layers.size());
  double acc = 0.0;
  for (std::size_t k = 0; k < layers.size(); ++k) bottom[k] = acc += layers[k].thickness;
  std::vector<std::size_t> cells(layers.size(), 0);
  for (std::size_t j = 0; j < g.ny; ++j) {
    const double yc = (static_cast<double>(j) + 0.5) * g.dy;
    std::size_t k = 0;
    while (k + 1 < layers.size() && yc > bottom[k]) ++k;
    ++cells[k];
    for (std::size_t i = 0; i < g.nx; ++i) g.material[j * g.nx + i] = static_cast<int>(k);
  }
  for (std::size_t k = 0; k < layers.size(); ++k) {
    if (cells[k] == 0) {
      spdlog::warn("layer '{}' ({} mm) is thinner than the grid resolution and was merged into its neighbours",
                   layers[k].name, layers[k].thickness * 1e3);
    }
  }

  if (tumor) {
    const double r = tumor->diameter / 2;
    if (!(r > 0)) throw ConfigError("tumour diameter must be positive");
    if (tumor->center_depth - r < 0 || tumor->center_depth + r > depth || tumor->center_lateral - r < 0 ||
        tumor->center_lateral + r > width) {
      throw ConfigError("tumour extends outside the domain");
    }
    tumor->properties.validate();
    const int idx = static_cast<int>(g.materials.size());
    g.materials.push_back(tumor->properties);
    for (std::size_t j = 0; j < g.ny; ++j)
      for (std::size_t i = 0; i < g.nx; ++i) {
        const double xc = (static_cast<double>(i) + 0.5) * g.dx - tumor->center_lateral;
        const double yc = (static_cast<double>(j) + 0.5) * g.dy - tumor->center_depth;
        if (xc * xc + yc * yc <= r * r) g.material[j * g.nx + i] = idx;
      }
  }
  return g;
}

namespace {

double harmonic(double a, double b) { return 2 * a * b / (a + b); }

/// Linear system pieces shared by the stepper and the residual.
struct Assembly {
  std::vector<double> rho_c, g_east, g_south, source, sink;
};

Assembly assemble(const SimGrid& g) {
  const std::size_t n = g.nx * g.ny;
  Assembly a;
  a.rho_c.resize(n);
  a.g_east.assign(n, 0.0);
  a.g_south.assign(n, 0.0);
  a.source.assign(n, 0.0);
  a.sink.assign(n, 0.0);
  auto mat = [&](std::size_t c) -> const TissueLayer& { return g.materials[static_cast<std::size_t>(g.material[c])]; };
  const double perf = g.blood.rho_b * g.blood.c_b;
  for (std::size_t j = 0; j < g.ny; ++j) {
    for (std::size_t i = 0; i < g.nx; ++i) {
      const std::size_t c = j * g.nx + i;
      const auto& m = mat(c);
      a.rho_c[c] = m.rho * m.c;
      if (i + 1 < g.nx) a.g_east[c] = harmonic(m.k, mat(c + 1).k) / (g.dx * g.dx);
      if (j + 1 < g.ny) a.g_south[c] = harmonic(m.k, mat(c + g.nx).k) / (g.dy * g.dy);
      a.sink[c] = perf * m.w_b;
      a.source[c] = perf * m.w_b * g.blood.t_b + m.q;
      if (j == 0) {
        // Half cell of tissue in series with the film coefficient.
        double u = 2 * m.k / g.dy;
        double t_out = g.bc.t_surface;
        if (g.bc.surface == BoundaryConditions::Surface::convective) {
          u = 1.0 / (g.dy / (2 * m.k) + 1.0 / g.bc.h);
          t_out = g.bc.t_amb;
        }
        a.sink[c] += u / g.dy;
        a.source[c] += u / g.dy * t_out;
      }
      if (j + 1 == g.ny) {
        const double u = 2 * m.k / g.dy;
        a.sink[c] += u / g.dy;
        a.source[c] += u / g.dy * g.bc.t_core;
      }
    }
  }
  return a;
}

}  // namespace

double stable_dt(const SimGrid& g) {
  double min_rc = INFINITY, max_k = 0.0;
  for (int idx : g.material) {
    const auto& m = g.materials[static_cast<std::size_t>(idx)];
    min_rc = std::min(min_rc, m.rho * m.c);
    max_k = std::max(max_k, m.k);
  }
  const double h = std::min(g.dx, g.dy);
  double dt = min_rc * h * h / (4 * max_k);
  // Boundary and perfusion terms can push a cell's coefficient past the
  // interior bound; keep every update a convex combination.
  const auto a = assemble(g);
  for (std::size_t j = 0; j < g.ny; ++j)
    for (std::size_t i = 0; i < g.nx; ++i) {
      const std::size_t c = j * g.nx + i;
      double diag = a.sink[c] + a.g_east[c] + a.g_south[c];
      if (i > 0) diag += a.g_east[c - 1];
      if (j > 0) diag += a.g_south[c - g.nx];
      if (diag > 0) dt = std::min(dt, a.rho_c[c] / diag);
    }
  return dt;
}

SolveReport solve_steady(SimGrid& g, double tol, long max_iters) {
  if (!(tol > 0)) throw ConfigError("solver tolerance must be positive");
  const auto a = assemble(g);
  SolveReport rep;
  rep.dt = stable_dt(g);
  kernels::HeatStepInput in{g.nx, g.ny, rep.dt, a.rho_c, a.g_east, a.g_south, a.source, a.sink};
  std::vector<double> next(g.t.size());
  for (long it = 0; it < max_iters; ++it) {
    rep.last_change = kernels::heat_step(in, g.t, next);
    g.t.swap(next);
    rep.iterations = it + 1;
    if (!std::isfinite(rep.last_change)) throw SolverError("bioheat solver diverged");
    if (rep.last_change < tol) return rep;
  }
  throw SolverError("bioheat solver did not converge in " + std::to_string(max_iters) +
                    " steps (last max |dT| = " + std::to_string(rep.last_change) + ")");
}

std::vector<double> residual(const SimGrid& g) {
  const auto a = assemble(g);
  std::vector<double> r(g.t.size());
  for (std::size_t j = 0; j < g.ny; ++j)
    for (std::size_t i = 0; i < g.nx; ++i) {
      const std::size_t c = j * g.nx + i;
      double flow = a.source[c] - a.sink[c] * g.t[c];
      if (i + 1 < g.nx) flow += a.g_east[c] * (g.t[c + 1] - g.t[c]);
      if (i > 0) flow += a.g_east[c - 1] * (g.t[c - 1] - g.t[c]);
      if (j + 1 < g.ny) flow += a.g_south[c] * (g.t[c + g.nx] - g.t[c]);
      if (j > 0) flow += a.g_south[c - g.nx] * (g.t[c - g.nx] - g.t[c]);
      r[c] = flow;
    }
  return r;
}

std::vector<double> surface_temperature(const SimGrid& g) {
  std::vector<double> out(g.nx);
  for (std::size_t i = 0; i < g.nx; ++i) {
    const auto& m = g.materials[static_cast<std::size_t>(g.material[i])];
    const double t0 = g.t[i];
    if (g.bc.surface == BoundaryConditions::Surface::dirichlet) {
      out[i] = g.bc.t_surface;
    } else {
      const double u = 1.0 / (g.dy / (2 * m.k) + 1.0 / g.bc.h);
      out[i] = t0 - u * (t0 - g.bc.t_amb) * g.dy / (2 * m.k);
    }
  }
  return out;
}

// --- synthetic thermograms ---------------------------------------------------------

void SyntheticOptions::validate() const {
  if (n_healthy < 1 || n_tumor < 1) throw ConfigError("synthetic set needs at least one patient per class");
  if (!(depth_lo <= depth_hi && diameter_lo <= diameter_hi && lateral_lo <= lateral_hi && ambient_lo <= ambient_hi)) {
    throw ConfigError("synthetic ranges must satisfy lo <= hi");
  }
  if (!(diameter_lo > 0) || lateral_lo < 0 || lateral_hi > 1) throw ConfigError("synthetic tumour ranges out of bounds");
  if (out_h < 1 || out_w < 1 || images_per_patient < 1) throw ConfigError("synthetic image size/count must be >= 1");
  if (noise_sigma < 0 || blur_sigma < 0) throw ConfigError("noise and blur must be non-negative");
}

nlohmann::json SyntheticCase::to_json() const {
  nlohmann::json j = {{"patient_id", patient_id}, {"tumor", tumor}, {"ambient_c", ambient}, {"solver_iterations", iterations},
                      {"surface_c", surface}};
  if (tumor) {
    j["tumor_diameter_m"] = tumor_spec.diameter;
    j["tumor_depth_m"] = tumor_spec.center_depth;
    j["tumor_lateral_m"] = tumor_spec.center_lateral;
  }
  return j;
}

Matrix extrude_profile(const std::vector<double>& profile, std::size_t out_h, std::size_t out_w, double blur_sigma,
                       double noise_sigma, Rng& rng) {
  if (profile.empty()) throw DataError("empty surface profile");
  Thermogram row;
  row.matrix = Matrix(1, profile.size(), profile);
  const auto line = resize_bilinear(row, 1, out_w).matrix;
  Matrix img(out_h, out_w);
  for (std::size_t r = 0; r < out_h; ++r)
    for (std::size_t c = 0; c < out_w; ++c) img(r, c) = line(0, c);
  for (auto& v : img.data()) v += noise_sigma * standard_normal(rng);
  if (blur_sigma > 0) {
    const int radius = static_cast<int>(std::ceil(3 * blur_sigma));
    std::vector<double> kern(static_cast<std::size_t>(2 * radius + 1));
    for (int d = -radius; d <= radius; ++d) kern[static_cast<std::size_t>(d + radius)] = std::exp(-0.5 * d * d / (blur_sigma * blur_sigma));
    // Separable blur with clamped edges; weights renormalised per pixel.
    auto pass = [&](const Matrix& src, bool horizontal) {
      Matrix dst(src.rows(), src.cols());
      const auto H = static_cast<int>(src.rows()), W = static_cast<int>(src.cols());
      for (int r = 0; r < H; ++r)
        for (int c = 0; c < W; ++c) {
          double s = 0.0, wsum = 0.0;
          for (int d = -radius; d <= radius; ++d) {
            const int rr = horizontal ? r : std::clamp(r + d, 0, H - 1);
            const int cc = horizontal ? std::clamp(c + d, 0, W - 1) : c;
            const double wgt = kern[static_cast<std::size_t>(d + radius)];
            s += wgt * src(static_cast<std::size_t>(rr), static_cast<std::size_t>(cc));
            wsum += wgt;
          }
          dst(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) = s / wsum;
        }
      return dst;
    };
    img = pass(pass(img, true), false);
  }
  return img;
}

SyntheticSet generate_synthetic_set(const SyntheticOptions& o) {
  o.validate();
  const int n = o.n_healthy + o.n_tumor;
  SyntheticSet set;
  set.records.resize(static_cast<std::size_t>(n));
  set.cases.resize(static_cast<std::size_t>(n));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));
  const auto layers = breast_layers();

#pragma omp parallel for schedule(dynamic)
  for (int p = 0; p < n; ++p) {
    try {
      const auto up = static_cast<std::size_t>(p);
      auto rng = make_rng(o.seed, {0xB10u, up});
      auto lerp = [&](double lo, double hi) { return lo + uniform01(rng) * (hi - lo); };
      SyntheticCase sc;
      sc.tumor = p >= o.n_healthy;
      char id[32];
      std::snprintf(id, sizeof id, "%s_%03d", sc.tumor ? "tumor" : "healthy", sc.tumor ? p - o.n_healthy : p);
      sc.patient_id = id;
      sc.ambient = lerp(o.ambient_lo, o.ambient_hi);
      sc.tumor_spec.diameter = lerp(o.diameter_lo, o.diameter_hi);
      sc.tumor_spec.center_depth = lerp(o.depth_lo, o.depth_hi);
      sc.tumor_spec.center_lateral = lerp(o.lateral_lo, o.lateral_hi) * o.width;
      BoundaryConditions bc;
      bc.t_amb = sc.ambient;
      std::optional<TumorSpec> tumor;
      if (sc.tumor) tumor = sc.tumor_spec;
      auto grid = build_grid(layers, tumor, BloodParams{}, o.resolution, o.width, bc);
      sc.iterations = solve_steady(grid, o.tol).iterations;
      sc.surface = surface_temperature(grid);

      PatientRecord rec;
      rec.patient_id = sc.patient_id;
      rec.label = sc.tumor ? 1 : 0;
      for (int k = 0; k < o.images_per_patient; ++k) {
        auto img_rng = make_rng(o.seed, {0xB11u, up, static_cast<std::uint64_t>(k)});
        Thermogram t;
        t.matrix = extrude_profile(sc.surface, o.out_h, o.out_w, o.blur_sigma, o.noise_sigma, img_rng);
        t.patient_id = rec.patient_id;
        t.label = rec.label;
        rec.thermograms.push_back(std::move(t));
      }
      set.records[up] = std::move(rec);
      set.cases[up] = std::move(sc);
    } catch (...) {
      errors[static_cast<std::size_t>(p)] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return set;
}

void write_synthetic_set(const std::filesystem::path& root, const SyntheticSet& set, const SyntheticOptions& o) {
  save_thermal_directory(root, set.records);
  for (std::size_t p = 0; p < set.records.size(); ++p) {
    const auto& rec = set.records[p];
    const auto dir = root / (rec.label == 1 ? "sick" : "healthy") / rec.patient_id;
    nlohmann::json j = set.cases[p].to_json();
    j["seed"] = o.seed;
    j["resolution_m"] = o.resolution;
    j["width_m"] = o.width;
    j["image_size"] = {o.out_h, o.out_w};
    j["noise_sigma_c"] = o.noise_sigma;
    j["blur_sigma_px"] = o.blur_sigma;
    std::ofstream f(dir / "sim.json");
    if (!f) throw DataError("cannot write " + (dir / "sim.json").string());
    f << j.dump(2) << '\n';
  }
}

}  // namespace thermoscan::bioheat
