#include "flockfem/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/core.h>

#include "flockfem/errors.hpp"

namespace flockfem {

std::string to_string(Verdict v) {
  return v == Verdict::GlobalExistencePredicted ? "global_existence_predicted"
                                                : "blow_up_predicted";
}

double field_max(const FEFunction& f, int per_element) {
  double m = -std::numeric_limits<double>::infinity();
  for (double v : f.at_dense(per_element)) m = std::max(m, v);
  for (double v : f.coefficients()) m = std::max(m, v);
  return m;
}

double field_min(const FEFunction& f, int per_element) {
  double m = std::numeric_limits<double>::infinity();
  for (double v : f.at_dense(per_element)) m = std::min(m, v);
  for (double v : f.coefficients()) m = std::min(m, v);
  return m;
}

namespace {

std::vector<double> rho_phi_dense(const FEFunction& rho, const KernelTable& table,
                                  int per_element) {
  return table.convolve_at_offsets(rho.at_quad(0), dense_offsets(per_element));
}

// sup |f'| including one-sided values at the element ends.
double derivative_sup(const FEFunction& f, int per_element) {
  double m = 0.0;
  for (double v : f.at_dense(per_element, 1)) m = std::max(m, std::abs(v));
  for (int e = 0; e < f.mesh().num_elements(); ++e) {
    m = std::max(m, std::abs(f.evaluate_local(e, 0.0, 1)));
    m = std::max(m, std::abs(f.evaluate_local(e, 1.0, 1)));
  }
  return m;
}

}  // namespace

EField e_field(const SimState& state, const KernelTable& table, int per_element) {
  EField out;
  out.x = dense_sample_points(state.u.mesh(), per_element);
  const std::vector<double> dxu = state.u.at_dense(per_element, 1);
  const std::vector<double> w = state.w.at_dense(per_element, 0);
  const std::vector<double> rp = rho_phi_dense(state.rho, table, per_element);
  out.e.resize(out.x.size());
  out.min = std::numeric_limits<double>::infinity();
  out.max = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < out.x.size(); ++i) {
    out.e[i] = dxu[i] + w[i] * rp[i];
    if (out.e[i] < out.min) {
      out.min = out.e[i];
      out.argmin = out.x[i];
    }
    out.max = std::max(out.max, out.e[i]);
  }
  return out;
}

ThresholdVerdict classify_threshold(const SimState& initial,
                                    const KernelTable& table, int per_element) {
  const EField e = e_field(initial, table, per_element);
  ThresholdVerdict v;
  v.e0_min = e.min;
  v.e0_max = e.max;
  v.argmin = e.argmin;
  v.verdict = e.min >= 0.0 ? Verdict::GlobalExistencePredicted
                           : Verdict::BlowUpPredicted;
  return v;
}

RelativeEntropy relative_entropy(const FEFunction& rho) {
  const PeriodicMesh& mesh = rho.mesh();
  const QuadSamples r = rho.at_quad(0);
  RelativeEntropy out;
  out.rho_bar = integrate(mesh, r);  // |torus| = 1
  const double rb = out.rho_bar;
  const auto w = mesh.quad_weights();
  double l1 = 0.0;
  double l2sq = 0.0;
  double h = 0.0;
  bool positive = rb > 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    const double d = r[i] - rb;
    l1 += w[i] * std::abs(d);
    l2sq += w[i] * d * d;
    if (r[i] <= 0.0) {
      positive = false;
      continue;
    }
    // rho log(rho/rb) - (rho - rb) >= 0 pointwise and integrates to H.
    h += w[i] * (r[i] * std::log(r[i] / rb) - d);
  }
  out.l1_dev = l1;
  out.ck_lower = 0.5 * l1 * l1;
  out.ck_upper = l2sq;
  out.defined = positive;
  if (positive) {
    out.H = h;
    const double scaled = rb * h;
    out.holds = out.ck_lower <= scaled + kCkTolerance &&
                scaled <= out.ck_upper + kCkTolerance;
  }
  return out;
}

DiagnosticsRecord bulk_stats(const SimState& state, const KernelTable& table,
                             int per_element) {
  const PeriodicMesh& mesh = state.rho.mesh();
  const QuadSamples r = state.rho.at_quad(0);
  const QuadSamples u = state.u.at_quad(0);
  const auto w = mesh.quad_weights();
  DiagnosticsRecord d;
  d.t = state.t;
  for (std::size_t i = 0; i < r.size(); ++i) {
    d.mass += w[i] * r[i];
    d.momentum += w[i] * r[i] * u[i];
    d.energy += 0.5 * w[i] * r[i] * u[i] * u[i];
  }
  d.v2 = d.energy - d.momentum * d.momentum / (2.0 * d.mass);
  d.amplitude = field_max(state.u, per_element) - field_min(state.u, per_element);
  const EField e = e_field(state, table, per_element);
  d.e_min = e.min;
  d.e_max = e.max;
  d.rho_min = field_min(state.rho, per_element);
  const std::vector<double> rp = rho_phi_dense(state.rho, table, per_element);
  d.rho_phi_min = *std::min_element(rp.begin(), rp.end());
  const RelativeEntropy re = relative_entropy(state.rho);
  if (re.defined) d.entropy = re.H;
  d.l1_dev = re.l1_dev;
  double dxu = 0.0;
  for (double v : state.u.at_dense(per_element, 1)) dxu = std::max(dxu, std::abs(v));
  d.dxu_max = dxu;
  return d;
}

EntropyBound entropy_bound(const SimState& state, const KernelTable& table,
                           double c_param, int per_element) {
  const std::vector<double> rho = state.rho.at_dense(per_element);
  const std::vector<double> dxu = state.u.at_dense(per_element, 1);
  const std::vector<double> w = state.w.at_dense(per_element);
  const std::vector<double> rp = rho_phi_dense(state.rho, table, per_element);
  const KernelConstants& kc = table.constants();

  EntropyBound b;
  b.w_minus = field_min(state.w, per_element);
  b.w_plus = field_max(state.w, per_element);
  double q = 0.0;
  for (std::size_t i = 0; i < rho.size(); ++i) {
    if (!(rho[i] > 0.0)) {
      b.defined = false;
      b.feasible = false;
      b.bound = std::numeric_limits<double>::quiet_NaN();
      return b;
    }
    const double e_tilde = dxu[i] + w[i] * (rp[i] - rho[i] * kc.integral);
    q = std::max(q, std::abs(e_tilde / rho[i]));
  }
  b.q_tilde = q;
  const double margin = b.w_plus * kc.integral - q;
  b.feasible = margin > 0.0;
  if (b.feasible) {
    const double mass = integrate(state.rho.mesh(), state.rho.at_quad(0));
    b.bound = (q + kc.sup * (b.w_plus - b.w_minus)) * mass * b.w_plus * kc.sup /
              (c_param * margin);
  } else {
    b.bound = std::numeric_limits<double>::quiet_NaN();
  }
  return b;
}

SmallDataReport small_data_report(const SimState& initial,
                                  const KernelTable& table, int per_element) {
  const KernelConstants& kc = table.constants();
  SmallDataReport r;
  const double u_max = field_max(initial.u, per_element);
  const double u_min = field_min(initial.u, per_element);
  r.A0 = u_max - u_min;
  r.u0_inf = std::max(std::abs(u_max), std::abs(u_min));
  r.mass = integrate(initial.rho.mesh(), initial.rho.at_quad(0));
  r.w_minus = field_min(initial.w, per_element);
  r.w_plus = field_max(initial.w, per_element);
  r.dxw0_inf = derivative_sup(initial.w, per_element);

  if (!(kc.lower_bound > 0.0)) {
    r.reason = "kernel lower bound c1 is not positive";
    return r;
  }
  if (!(r.w_minus > 0.0) || !(r.mass > 0.0)) {
    r.reason = "minimum weight or mass is not positive";
    return r;
  }
  const double c1 = kc.lower_bound;
  r.eta = r.dxw0_inf *
          std::exp(2.0 * kc.sup * kc.lipschitz * r.A0 / (r.mass * r.w_minus * c1 * c1 * c1));
  r.epsilon_max = c1 * r.w_minus * r.mass /
                  (2.0 + r.eta * r.mass * kc.sup + r.w_plus * r.mass * kc.lipschitz);
  r.epsilon = r.epsilon_max * (1.0 - 1e-9);
  const bool amp_ok = r.A0 < r.epsilon * r.epsilon;
  const bool sup_ok = r.u0_inf < r.epsilon;
  r.satisfied = amp_ok && sup_ok;
  if (r.satisfied) {
    r.reason = fmt::format("witness epsilon = {:.6e}", r.epsilon);
  } else if (!amp_ok) {
    r.reason = fmt::format("A0 = {:.6e} >= epsilon^2 = {:.6e}", r.A0,
                           r.epsilon * r.epsilon);
  } else {
    r.reason = fmt::format("||u0||_inf = {:.6e} >= epsilon = {:.6e}", r.u0_inf,
                           r.epsilon);
  }
  return r;
}

DecayFit fit_decay_rate(std::span<const double> t, std::span<const double> A,
                        double t_a, double t_b, double w_minus, double mass,
                        double c1) {
  if (t.size() != A.size())
    throw DegenerateSeries("fit_decay_rate: t and A lengths differ");
  double st = 0.0;
  double sy = 0.0;
  double stt = 0.0;
  double sty = 0.0;
  int n = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] < t_a || t[i] > t_b) continue;
    if (!(A[i] > 0.0))
      throw DegenerateSeries(fmt::format("amplitude {} at t = {} is not positive",
                                         A[i], t[i]));
    const double y = -std::log(A[i]);
    st += t[i];
    sy += y;
    stt += t[i] * t[i];
    sty += t[i] * y;
    ++n;
  }
  if (n < 3)
    throw DegenerateSeries(fmt::format("only {} samples in [{}, {}]", n, t_a, t_b));
  const double denom = n * stt - st * st;
  if (!(denom > 0.0)) throw DegenerateSeries("fit window has zero time extent");
  DecayFit fit;
  fit.fitted_rate = (n * sty - st * sy) / denom;
  fit.theoretical_rate = w_minus * mass * c1;
  fit.samples = n;
  return fit;
}

}  // namespace flockfem
