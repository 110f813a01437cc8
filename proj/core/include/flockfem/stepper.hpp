#pragma once

// Semi-implicit backward Euler stepping of the weighted alignment system.
// Every step solves three decoupled linear problems, each implicit only in
// its own unknown with all coefficients frozen at step n:
//
//   (1/k)<rho', v> - <rho' u, v_x>               = (1/k)<rho, v> + <f1, v>
//   (1/k)<w', v>   + <w'_x u_F, v>               = (1/k)<w, v>   + <f2, v>
//   (1/k)<u', q>   + <u' u_x, q> + <W u' rho_phi, q>
//                                  = (1/k)<u, q> + <W (u rho)_phi, q> + <f3, q>
//
// with u_F = (u rho)_phi / rho_phi and W the effective weight of the variant.

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "flockfem/convolution.hpp"
#include "flockfem/diagnostics.hpp"
#include "flockfem/linalg.hpp"
#include "flockfem/state.hpp"

namespace flockfem {

using SpaceTimeFunction = std::function<double(double t, double x)>;

/// Right-hand sides of the three equations; empty members mean zero.
struct Forcing {
  SpaceTimeFunction f1;
  SpaceTimeFunction f2;
  SpaceTimeFunction f3;
};

struct StepConfig {
  double k = 0.05;
  double T = 2.0;
  Variant variant = Variant::CuckerSmale;
  std::optional<Forcing> forcing;
  double cfl_ratio_max = 0.25;
  bool cfl_strict = false;
  double rho_phi_floor = 1e-10;
  double dxu_cap = 1e6;
  /// Relative residual ||Ax - b|| / (||A|| ||x|| + ||b||) accepted after a
  /// direct solve.
  double solver_tol = 1e-10;
  int dense_per_element = 10;
};

/// Throws ConfigError for k <= 0, T < k or non-finite values.
void validate(const StepConfig& cfg);

/// k / h compared against cfl_ratio_max. Throws CflViolation in strict mode;
/// otherwise returns false when the guard is exceeded.
bool check_cfl(const StepConfig& cfg, const PeriodicMesh& mesh);

/// round(T / k). Throws ConfigError unless T / k is an integer up to
/// round-off.
int num_steps(const StepConfig& cfg);

/// Bilinear form sum_q W_q [c0 v_j v_i + c1 v_j (v_i)_x + c2 (v_j)_x v_i]
/// on one space; empty coefficient spans are treated as zero.
CyclicBandMatrix assemble_matrix(const PeriodicMesh& mesh, Space space,
                                 std::span<const double> c0,
                                 std::span<const double> c1,
                                 std::span<const double> c2);

/// Load vector sum_q W_q g v_i.
std::vector<double> assemble_load(const PeriodicMesh& mesh, Space space,
                                  std::span<const double> g);

/// Direct solve followed by the residual check of cfg.solver_tol.
std::vector<double> solve_checked(const CyclicBandMatrix& a,
                                  std::span<const double> b, double solver_tol);

FEFunction step_rho(const SimState& state, const KernelTable& table,
                    const StepConfig& cfg);
FEFunction step_w(const SimState& state, const KernelTable& table,
                  const StepConfig& cfg);
/// w_eff: effective weight sampled at the quadrature points.
FEFunction step_u(const SimState& state, const KernelTable& table,
                  const StepConfig& cfg, std::span<const double> w_eff);

/// The weight that multiplies the alignment force for cfg.variant, sampled
/// at the quadrature points (w for CS / s-model, 1 / rho_phi for MT).
QuadSamples effective_weight(const SimState& state, const KernelTable& table,
                             const StepConfig& cfg);

/// P3 interpolant of 1 / rho_phi: the derived weight stored for MT runs and
/// the Motsch-Tadmor initialisation of the s-model.
FEFunction motsch_tadmor_weight(const FEFunction& rho, const KernelTable& table,
                                double rho_phi_floor = 1e-10);

struct Monitors {
  double rho_min = 0.0;
  double rho_min_x = 0.0;
  double rho_phi_min = 0.0;
  double rho_phi_min_x = 0.0;
  double dxu_max = 0.0;
  double dxu_max_x = 0.0;
};

Monitors measure_monitors(const SimState& state, const KernelTable& table,
                          const StepConfig& cfg);

/// One time step. Checks the monitors on the incoming state and throws
/// BlowUpSuspected if one trips; CflViolation in strict mode.
SimState advance(const SimState& state, const KernelTable& table,
                 const StepConfig& cfg, Monitors* monitors = nullptr);

struct RunFailure {
  std::string kind;
  std::string message;
  double t = 0.0;
};

struct RunResult {
  std::vector<SimState> snapshots;
  std::vector<DiagnosticsRecord> records;
  std::optional<RunFailure> failure;
  bool cfl_exceeded = false;
  int steps_taken = 0;
};

/// Steps from initial.t to T, storing a snapshot and a diagnostics record
/// every sample_every steps, including step 0 and the final step. On a
/// runtime error returns the partial trajectory with failure set.
RunResult run(const SimState& initial, const KernelTable& table,
              const StepConfig& cfg, int sample_every = 1);

}  // namespace flockfem
