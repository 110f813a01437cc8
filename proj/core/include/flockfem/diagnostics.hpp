#pragma once

// Measurable counterparts of the analytical statements about the alignment
// system: the e-quantity and its threshold, bulk budgets (mass, momentum,
// energy, V2, amplitude), relative entropy with the Csiszar-Kullback
// sandwich, the limiting-profile entropy bound, the small-data conditions
// and the alignment decay rate.
//
// All sup/inf quantities use dense interior sampling (per_element points per
// element, default 10) plus nodal values where those are available.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "flockfem/convolution.hpp"
#include "flockfem/state.hpp"

namespace flockfem {

struct DiagnosticsRecord {
  double t = 0.0;
  double mass = 0.0;
  double momentum = 0.0;
  double energy = 0.0;
  double v2 = 0.0;
  double amplitude = 0.0;
  double e_min = 0.0;
  double e_max = 0.0;
  double rho_min = 0.0;
  double rho_phi_min = 0.0;
  std::optional<double> entropy;  // empty when rho <= 0 somewhere
  double l1_dev = 0.0;
  double dxu_max = 0.0;
};

struct EField {
  std::vector<double> x;
  std::vector<double> e;
  double min = 0.0;
  double max = 0.0;
  double argmin = 0.0;
};

/// e = u_x + w * rho_phi at dense interior samples.
EField e_field(const SimState& state, const KernelTable& table,
               int per_element = 10);

enum class Verdict { GlobalExistencePredicted, BlowUpPredicted };

std::string to_string(Verdict v);

struct ThresholdVerdict {
  double e0_min = 0.0;
  double e0_max = 0.0;
  double argmin = 0.0;
  Verdict verdict = Verdict::GlobalExistencePredicted;
};

/// Global existence is predicted iff min e0 >= 0. Informational only.
ThresholdVerdict classify_threshold(const SimState& initial,
                                    const KernelTable& table,
                                    int per_element = 10);

DiagnosticsRecord bulk_stats(const SimState& state, const KernelTable& table,
                             int per_element = 10);

/// Additive tolerance of the Csiszar-Kullback check.
inline constexpr double kCkTolerance = 1e-10;

struct RelativeEntropy {
  bool defined = false;  // false when rho <= 0 at some quadrature point
  double rho_bar = 0.0;
  double H = 0.0;
  double l1_dev = 0.0;
  double ck_lower = 0.0;  // ||rho - rho_bar||_1^2 / 2
  double ck_upper = 0.0;  // ||rho - rho_bar||_2^2
  bool holds = false;     // ck_lower <= rho_bar H <= ck_upper (+- tolerance)
};

/// H = int rho log(rho / rho_bar) on the unit torus, rho_bar = mass.
RelativeEntropy relative_entropy(const FEFunction& rho);

struct EntropyBound {
  bool defined = true;  // false when rho <= 0 at some sample
  double q_tilde = 0.0;
  double w_minus = 0.0;
  double w_plus = 0.0;
  bool feasible = false;
  double bound = 0.0;  // NaN when infeasible
};

/// Q = max |(u_x + w (rho_phi - rho Phi)) / rho| and the resulting bound on
/// limsup ||rho - rho_bar||_1 when Q < w_plus * Phi. c_param is the
/// kernel-support constant (not available numerically; defaults to 1).
EntropyBound entropy_bound(const SimState& state, const KernelTable& table,
                           double c_param = 1.0, int per_element = 10);

struct SmallDataReport {
  double A0 = 0.0;
  double u0_inf = 0.0;
  double mass = 0.0;
  double w_minus = 0.0;
  double w_plus = 0.0;
  double dxw0_inf = 0.0;
  double eta = 0.0;
  double epsilon_max = 0.0;
  double epsilon = 0.0;  // witness tried
  bool satisfied = false;
  std::string reason;
};

SmallDataReport small_data_report(const SimState& initial,
                                  const KernelTable& table,
                                  int per_element = 10);

struct DecayFit {
  double fitted_rate = 0.0;
  double theoretical_rate = 0.0;
  int samples = 0;
};

/// Least-squares slope of -log A against t over t in [t_a, t_b]. The
/// theoretical rate is w_minus * mass * c1. Throws DegenerateSeries when
/// fewer than three samples fall in the window or A <= 0 there.
DecayFit fit_decay_rate(std::span<const double> t, std::span<const double> A,
                        double t_a, double t_b, double w_minus, double mass,
                        double c1);

/// max over dense samples and nodes.
double field_max(const FEFunction& f, int per_element = 10);
double field_min(const FEFunction& f, int per_element = 10);

}  // namespace flockfem
