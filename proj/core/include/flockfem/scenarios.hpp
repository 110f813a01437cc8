#pragma once

// Built-in experiments: the two-flock preset, the manufactured solution with
// its forcing, nodal-file initial data, the convergence sweep and the
// three-model comparison.

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "flockfem/convolution.hpp"
#include "flockfem/diagnostics.hpp"
#include "flockfem/state.hpp"
#include "flockfem/stepper.hpp"

namespace flockfem {

// ---------------------------------------------------------------- two flocks

/// Smooth bump amplitude * exp(-1 / (1 - (10 (x - center))^2)) on
/// |x - center| < 0.1, zero elsewhere. x is taken modulo 1.
double bump(double x, double center, double amplitude);

/// Small flock (amplitude 1/2 at 0.25) plus large flock (50 at 0.75).
double two_flock_density(double x);

/// (1/(12 pi)) (cos(10 pi (x - 0.15)) - 1) on (0.15, 0.35), zero elsewhere.
double two_flock_velocity(double x);
double two_flock_velocity_dx(double x);

/// How the s-model weight is initialised.
enum class WeightInit { Unit, MotschTadmor };

std::string to_string(WeightInit w);
WeightInit parse_weight_init(const std::string& name);

/// Initial state for one variant: CS gets w = 1, MT gets the derived
/// 1 / rho_phi, the s-model gets whichever `weight_init` selects.
SimState two_flock_state(const KernelTable& table, Variant variant,
                         WeightInit weight_init = WeightInit::MotschTadmor);

// ------------------------------------------------------------- manufactured

/// rho = 1 + sin t, w = sin t + (2 + sin 2 pi x) / (2 pi),
/// u = sin t + sin(2 pi x) / (2 pi).
struct ManufacturedSolution {
  static double rho(double t, double x);
  static double rho_t(double t, double x);
  static double rho_x(double t, double x);
  static double w(double t, double x);
  static double w_t(double t, double x);
  static double w_x(double t, double x);
  static double u(double t, double x);
  static double u_t(double t, double x);
  static double u_x(double t, double x);

  static RefFunction rho_ref(double t);
  static RefFunction w_ref(double t);
  static RefFunction u_ref(double t);
};

/// Nodal interpolation of the manufactured fields at time t.
SimState manufactured_state(MeshPtr mesh, double t);

enum class ForcingMode { None, ClosedForm, Residual };

std::string to_string(ForcingMode m);
ForcingMode parse_forcing_mode(const std::string& name);

/// ClosedForm returns hand-derived formulas and is only consistent with the
/// constant kernel; it throws ConfigError for any other kernel. Residual
/// applies the left-hand side of the s-model to the exact solution, with the
/// convolutions taken by quadrature through `table`, so it matches any kernel.
/// The returned forcing keeps `table` alive.
Forcing manufactured_forcing(ForcingMode mode, KernelTablePtr table);

// --------------------------------------------------------------- nodal file

/// Nodal values on the P3 nodes: columns node_index, rho, w, u, one row per
/// node, a header line is optional. u is read as a P3 field and interpolated
/// onto the P2 space.
SimState load_nodal_state(MeshPtr mesh, const std::filesystem::path& path);

// ----------------------------------------------------------------- scenario

enum class InitialSource { TwoFlock, Manufactured, NodalFile };

std::string to_string(InitialSource s);

struct ScenarioSpec {
  std::string name = "two_flock";
  int num_elements = 100;
  int quad_order = 6;
  StepConfig step;
  KernelSpec kernel = KernelSpec::rational_sqrt();
  InitialSource source = InitialSource::TwoFlock;
  std::filesystem::path initial_file;
  std::vector<Variant> variants{Variant::CuckerSmale};
  WeightInit weight_init = WeightInit::MotschTadmor;
  ForcingMode forcing = ForcingMode::None;
  int sample_every = 1;
};

/// A scenario made concrete for one variant.
struct ResolvedRun {
  MeshPtr mesh;
  KernelTablePtr table;
  SimState initial;
  StepConfig cfg;
};

/// Builds mesh and kernel table once; reuse `table` across variants when
/// given.
ResolvedRun resolve(const ScenarioSpec& spec, Variant variant,
                    KernelTablePtr table = nullptr);

// -------------------------------------------------------- convergence sweep

struct SweepConfig {
  int level_min = 2;
  int level_max = 6;
  double T = 0.5;
  double cfl_ratio = 0.25;
  int quad_order = 6;
  KernelSpec kernel = KernelSpec::constant();
  ForcingMode forcing = ForcingMode::ClosedForm;
  /// Monitor thresholds and solver tolerance are taken from here.
  StepConfig base;
};

struct SweepRow {
  int level = 0;
  double h = 0.0;
  double k = 0.0;
  double E0 = 0.0;
  double E1 = 0.0;
  std::optional<RunFailure> failure;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  double slope_E0 = 0.0;  // least squares of log E against log h
  double slope_E1 = 0.0;
};

/// E0 and E1 of a numerical state against the manufactured solution at its
/// time: sums of squared L2 and H1-seminorm errors of rho, w and u.
std::pair<double, double> manufactured_errors(const SimState& state);

/// Least-squares slope of log y against log x.
double loglog_slope(std::span<const double> x, std::span<const double> y);

SweepResult convergence_sweep(const SweepConfig& cfg);

// ---------------------------------------------------------------- comparison

/// Mean of |u| over the window [a, b] by quadrature.
double window_mean_abs(const FEFunction& u, double a, double b);

/// Density centroid on [a, b].
double window_centroid(const FEFunction& rho, double a, double b);

inline constexpr double kSmallFlockLeft = 0.15;
inline constexpr double kSmallFlockRight = 0.35;

struct VariantRun {
  Variant variant = Variant::CuckerSmale;
  SimState initial;
  RunResult result;
};

struct PairDifference {
  double t = 0.0;
  Variant a = Variant::CuckerSmale;
  Variant b = Variant::CuckerSmale;
  double sup_u = 0.0;
  double l2_u = 0.0;
  double rel_sup_u = 0.0;  // sup |u_a - u_b| / sup |u_b|
  double sup_rho = 0.0;
  double l2_rho = 0.0;
};

struct SmallFlockMetric {
  double t = 0.0;
  Variant variant = Variant::CuckerSmale;
  double mean_abs_u = 0.0;
  double displacement = 0.0;  // centroid shift on [0, 0.5] since t = 0
};

struct Comparison {
  std::vector<VariantRun> runs;
  std::vector<PairDifference> differences;
  std::vector<SmallFlockMetric> small_flock;
};

/// Differences of two states on the same mesh, sampled densely.
PairDifference state_difference(const SimState& a, const SimState& b,
                                int per_element = 10);

/// Runs every variant of `spec` on one mesh and kernel table. Pairs are
/// compared at the common sample times of surviving runs.
Comparison compare_models(const ScenarioSpec& spec);

}  // namespace flockfem
