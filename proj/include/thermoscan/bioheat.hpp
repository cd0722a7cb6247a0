#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "thermoscan/thermal.hpp"

namespace thermoscan::bioheat {

/// One tissue layer. SI units: m, J/(kg K), W/(m K), kg/m^3, 1/s, W/m^3.
struct TissueLayer {
  std::string name;
  double thickness = 0.0;
  double c = 0.0;
  double k = 0.0;
  double rho = 0.0;
  double w_b = 0.0;
  double q = 0.0;

  void validate() const;
};

/// Epidermis, papillary dermis, reticular dermis, fat, gland, muscle (skin first).
std::vector<TissueLayer> breast_layers();
/// Tumour tissue properties (thickness unused).
TissueLayer tumor_tissue();

struct TumorSpec {
  double diameter = 0.010;
  double center_depth = 0.015;   // below the skin surface
  double center_lateral = 0.040; // from the left wall
  TissueLayer properties = tumor_tissue();
};

struct BloodParams {
  double rho_b = 1060.0;
  double c_b = 3840.0;
  double t_b = 37.0;
};

struct BoundaryConditions {
  double t_core = 37.0;  // Dirichlet at the chest-wall face
  enum class Surface { convective, dirichlet } surface = Surface::convective;
  double h = 13.5;       // W/(m^2 K)
  double t_amb = 21.0;
  double t_surface = 30.0;  // used by the Dirichlet surface
};

/// Cell-centred grid: j = 0 is the skin row, j = ny-1 touches the chest wall;
/// i runs laterally between adiabatic walls. Field index j * nx + i.
struct SimGrid {
  double dx = 0.0, dy = 0.0;
  std::size_t nx = 0, ny = 0;
  std::vector<double> t;
  std::vector<int> material;
  std::vector<TissueLayer> materials;
  BloodParams blood;
  BoundaryConditions bc;

  double& at(std::size_t i, std::size_t j) { return t[j * nx + i]; }
  double at(std::size_t i, std::size_t j) const { return t[j * nx + i]; }
  double depth() const { return dy * static_cast<double>(ny); }
  double width() const { return dx * static_cast<double>(nx); }
};

/// Stratified material map with an optional circular tumour. Layers thinner
/// than a cell receive no cells (merged into neighbours with a warning).
/// The domain depth is the sum of the layer thicknesses.
SimGrid build_grid(const std::vector<TissueLayer>& layers, const std::optional<TumorSpec>& tumor,
                   const BloodParams& blood, double resolution, double width, const BoundaryConditions& bc);

struct SolveReport {
  long iterations = 0;
  double last_change = 0.0;  // max |dT| of the final step
  double dt = 0.0;
};

/// Explicit FTCS marching of the Pennes equation to steady state: stops once
/// the largest per-step change drops below tol. Throws SolverError otherwise.
SolveReport solve_steady(SimGrid& grid, double tol = 1e-6, long max_iters = 5'000'000);

/// Stable explicit step: min(rho c) min(dx,dy)^2 / (4 max k), further limited
/// so that no cell's update coefficient exceeds one.
double stable_dt(const SimGrid& grid);

/// Steady-state residual (W/m^3) per cell: net conductive inflow + sources.
std::vector<double> residual(const SimGrid& grid);

/// Skin-surface temperature per lateral cell (face value, not cell centre).
std::vector<double> surface_temperature(const SimGrid& grid);

struct SyntheticOptions {
  int n_healthy = 5;
  int n_tumor = 5;
  double depth_lo = 0.008, depth_hi = 0.020;
  double diameter_lo = 0.008, diameter_hi = 0.012;
  double lateral_lo = 0.3, lateral_hi = 0.7;  // fraction of the width
  double ambient_lo = 20.0, ambient_hi = 22.0;
  double resolution = 0.001;
  double width = 0.06;
  std::size_t out_h = 32, out_w = 32;
  int images_per_patient = 4;
  double noise_sigma = 0.02;  // degC per pixel
  double blur_sigma = 1.0;    // pixels
  double tol = 1e-5;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Parameters behind one synthetic patient.
struct SyntheticCase {
  std::string patient_id;
  bool tumor = false;
  TumorSpec tumor_spec;
  double ambient = 21.0;
  std::vector<double> surface;  // solver surface profile, degC
  long iterations = 0;

  nlohmann::json to_json() const;
};

struct SyntheticSet {
  std::vector<PatientRecord> records;
  std::vector<SyntheticCase> cases;
};

/// Healthy patients first, then tumour patients; patients solve in parallel.
SyntheticSet generate_synthetic_set(const SyntheticOptions& options);

/// Pseudo-thermogram from a surface profile: resampled to out_w, repeated
/// over out_h rows, Gaussian-blurred and given per-pixel noise.
Matrix extrude_profile(const std::vector<double>& profile, std::size_t out_h, std::size_t out_w, double blur_sigma,
                       double noise_sigma, Rng& rng);

/// Writes the thermal directory layout plus sim.json per patient.
void write_synthetic_set(const std::filesystem::path& root, const SyntheticSet& set, const SyntheticOptions& options);

}  // namespace thermoscan::bioheat
