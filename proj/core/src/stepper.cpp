#include "flockfem/stepper.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/core.h>

#include "flockfem/errors.hpp"

namespace flockfem {

std::string to_string(Variant v) {
  switch (v) {
    case Variant::CuckerSmale: return "cucker_smale";
    case Variant::MotschTadmor: return "motsch_tadmor";
    case Variant::SModel: return "s_model";
  }
  return "unknown";
}

Variant parse_variant(const std::string& name) {
  if (name == "cucker_smale") return Variant::CuckerSmale;
  if (name == "motsch_tadmor") return Variant::MotschTadmor;
  if (name == "s_model") return Variant::SModel;
  throw ConfigError(fmt::format(
      "unknown variant '{}' (expected cucker_smale, motsch_tadmor or s_model)", name));
}

void validate(const StepConfig& cfg) {
  if (!std::isfinite(cfg.k) || cfg.k <= 0.0)
    throw ConfigError(fmt::format("time step k must be positive (got {})", cfg.k));
  if (!std::isfinite(cfg.T) || cfg.T < cfg.k * (1.0 - 1e-12))
    throw ConfigError(fmt::format("final time T = {} must be at least k = {}",
                                  cfg.T, cfg.k));
  if (!(cfg.cfl_ratio_max > 0.0))
    throw ConfigError("cfl_ratio_max must be positive");
  if (!(cfg.rho_phi_floor >= 0.0)) throw ConfigError("rho_phi_floor must be >= 0");
  if (!(cfg.dxu_cap > 0.0)) throw ConfigError("dxu_cap must be positive");
  if (!(cfg.solver_tol > 0.0)) throw ConfigError("solver_tol must be positive");
  if (cfg.dense_per_element < 1) throw ConfigError("dense_per_element must be >= 1");
}

bool check_cfl(const StepConfig& cfg, const PeriodicMesh& mesh) {
  const double ratio = cfg.k / mesh.h();
  if (ratio <= cfg.cfl_ratio_max * (1.0 + 1e-12)) return true;
  if (cfg.cfl_strict)
    throw CflViolation(fmt::format("k / h = {:.6g} exceeds the CFL guard {:.6g}",
                                   ratio, cfg.cfl_ratio_max),
                       cfg.k, mesh.h());
  return false;
}

int num_steps(const StepConfig& cfg) {
  validate(cfg);
  const double ratio = cfg.T / cfg.k;
  const double n = std::round(ratio);
  if (std::abs(ratio - n) > 1e-9 * std::max(1.0, ratio))
    throw ConfigError(fmt::format(
        "T / k = {:.17g} is not an integer; T must be a discrete time", ratio));
  return static_cast<int>(n);
}

CyclicBandMatrix assemble_matrix(const PeriodicMesh& mesh, Space space,
                                 std::span<const double> c0,
                                 std::span<const double> c1,
                                 std::span<const double> c2) {
  const int m = order_of(space) + 1;
  const int nq = mesh.quad_order();
  const auto w = mesh.quad_weights();
  CyclicBandMatrix a(mesh.num_dofs(space), order_of(space));
  std::vector<double> local(m * m);
  for (int e = 0; e < mesh.num_elements(); ++e) {
    std::fill(local.begin(), local.end(), 0.0);
    for (int q = 0; q < nq; ++q) {
      const int g = e * nq + q;
      const double a0 = c0.empty() ? 0.0 : w[g] * c0[g];
      const double a1 = c1.empty() ? 0.0 : w[g] * c1[g];
      const double a2 = c2.empty() ? 0.0 : w[g] * c2[g];
      for (int i = 0; i < m; ++i) {
        const double vi = mesh.basis_at_quad(space, q, i);
        const double dvi = mesh.basis_dx_at_quad(space, q, i);
        for (int j = 0; j < m; ++j) {
          const double vj = mesh.basis_at_quad(space, q, j);
          const double dvj = mesh.basis_dx_at_quad(space, q, j);
          local[i * m + j] += a0 * vj * vi + a1 * vj * dvi + a2 * dvj * vi;
        }
      }
    }
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j)
        a.at(mesh.dof(space, e, i), mesh.dof(space, e, j)) += local[i * m + j];
  }
  return a;
}

std::vector<double> assemble_load(const PeriodicMesh& mesh, Space space,
                                  std::span<const double> g) {
  const int m = order_of(space) + 1;
  const int nq = mesh.quad_order();
  const auto w = mesh.quad_weights();
  std::vector<double> b(mesh.num_dofs(space), 0.0);
  for (int e = 0; e < mesh.num_elements(); ++e) {
    for (int i = 0; i < m; ++i) {
      double s = 0.0;
      for (int q = 0; q < nq; ++q)
        s += w[e * nq + q] * g[e * nq + q] * mesh.basis_at_quad(space, q, i);
      b[mesh.dof(space, e, i)] += s;
    }
  }
  return b;
}

std::vector<double> solve_checked(const CyclicBandMatrix& a,
                                  std::span<const double> b, double solver_tol) {
  std::vector<double> x = solve(a, b);
  const std::vector<double> ax = a.multiply(x);
  double res = 0.0;
  double xn = 0.0;
  double bn = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i]))
      throw SolverFailure(fmt::format("non-finite solution entry at dof {}", i));
    res = std::max(res, std::abs(ax[i] - b[i]));
    xn = std::max(xn, std::abs(x[i]));
    bn = std::max(bn, std::abs(b[i]));
  }
  const double scale = a.norm_inf() * xn + bn;
  if (scale > 0.0 && res / scale > solver_tol)
    throw SolverFailure(fmt::format("relative residual {:.3e} exceeds {:.1e}",
                                    res / scale, solver_tol));
  return x;
}

namespace {

// Step-n coefficients sampled at the quadrature points.
struct Frozen {
  QuadSamples rho;
  QuadSamples u;
  QuadSamples dxu;
  QuadSamples w;
  QuadSamples rho_phi;
  QuadSamples urho_phi;
};

Frozen freeze(const SimState& s, const KernelTable& table) {
  Frozen f;
  f.rho = s.rho.at_quad(0);
  f.u = s.u.at_quad(0);
  f.dxu = s.u.at_quad(1);
  f.w = s.w.at_quad(0);
  f.rho_phi = table.convolve_at_quad(f.rho);
  QuadSamples ur(f.rho.size());
  for (std::size_t i = 0; i < ur.size(); ++i) ur[i] = f.u[i] * f.rho[i];
  f.urho_phi = table.convolve_at_quad(ur);
  return f;
}

void check_floor(const QuadSamples& rho_phi, const PeriodicMesh& mesh,
                 double floor) {
  const auto it = std::min_element(rho_phi.begin(), rho_phi.end());
  if (!(*it >= floor)) {
    const double x = mesh.quad_points()[it - rho_phi.begin()];
    throw FloorViolation(fmt::format("rho_phi = {:.6e} below floor {:.1e} at x = {:.6f}",
                                     *it, floor, x),
                         *it, x);
  }
}

QuadSamples sample_forcing(const SpaceTimeFunction& f, double t,
                           const PeriodicMesh& mesh) {
  QuadSamples out(mesh.num_quad_points(), 0.0);
  if (!f) return out;
  const auto x = mesh.quad_points();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(t, x[i]);
  return out;
}

const SpaceTimeFunction* forcing_term(const StepConfig& cfg, int which) {
  if (!cfg.forcing) return nullptr;
  const Forcing& f = *cfg.forcing;
  const SpaceTimeFunction& g = which == 1 ? f.f1 : which == 2 ? f.f2 : f.f3;
  return g ? &g : nullptr;
}

// Forcing is evaluated at the new time level t + k.
QuadSamples rhs_samples(const QuadSamples& old_values, double k,
                        const StepConfig& cfg, int which, double t_new,
                        const PeriodicMesh& mesh) {
  QuadSamples g(old_values.size());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = old_values[i] / k;
  if (const SpaceTimeFunction* f = forcing_term(cfg, which)) {
    const QuadSamples fs = sample_forcing(*f, t_new, mesh);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += fs[i];
  }
  return g;
}

FEFunction solve_rho(const SimState& s, const Frozen& fz, const StepConfig& cfg) {
  const PeriodicMesh& mesh = s.rho.mesh();
  const QuadSamples mass_coeff(fz.rho.size(), 1.0 / cfg.k);
  QuadSamples transport(fz.u.size());
  for (std::size_t i = 0; i < transport.size(); ++i) transport[i] = -fz.u[i];
  const CyclicBandMatrix a = assemble_matrix(mesh, Space::P3, mass_coeff, transport, {});
  const std::vector<double> b = assemble_load(
      mesh, Space::P3, rhs_samples(fz.rho, cfg.k, cfg, 1, s.t + cfg.k, mesh));
  return FEFunction(s.rho.mesh_ptr(), Space::P3, solve_checked(a, b, cfg.solver_tol));
}

FEFunction solve_w(const SimState& s, const Frozen& fz, const StepConfig& cfg) {
  const PeriodicMesh& mesh = s.w.mesh();
  check_floor(fz.rho_phi, mesh, cfg.rho_phi_floor);
  QuadSamples u_f(fz.rho.size());
  for (std::size_t i = 0; i < u_f.size(); ++i) u_f[i] = fz.urho_phi[i] / fz.rho_phi[i];
  const QuadSamples mass_coeff(fz.rho.size(), 1.0 / cfg.k);
  const CyclicBandMatrix a = assemble_matrix(mesh, Space::P3, mass_coeff, {}, u_f);
  const std::vector<double> b = assemble_load(
      mesh, Space::P3, rhs_samples(fz.w, cfg.k, cfg, 2, s.t + cfg.k, mesh));
  return FEFunction(s.w.mesh_ptr(), Space::P3, solve_checked(a, b, cfg.solver_tol));
}

FEFunction solve_u(const SimState& s, const Frozen& fz, const StepConfig& cfg,
                   std::span<const double> w_eff) {
  const PeriodicMesh& mesh = s.u.mesh();
  QuadSamples c0(fz.u.size());
  QuadSamples old(fz.u.size());
  for (std::size_t i = 0; i < c0.size(); ++i) {
    c0[i] = 1.0 / cfg.k + fz.dxu[i] + w_eff[i] * fz.rho_phi[i];
    old[i] = fz.u[i] + cfg.k * w_eff[i] * fz.urho_phi[i];
  }
  const CyclicBandMatrix a = assemble_matrix(mesh, Space::P2, c0, {}, {});
  const std::vector<double> b = assemble_load(
      mesh, Space::P2, rhs_samples(old, cfg.k, cfg, 3, s.t + cfg.k, mesh));
  return FEFunction(s.u.mesh_ptr(), Space::P2, solve_checked(a, b, cfg.solver_tol));
}

QuadSamples weight_for(const Frozen& fz, const StepConfig& cfg,
                       const PeriodicMesh& mesh) {
  if (cfg.variant != Variant::MotschTadmor) return fz.w;
  check_floor(fz.rho_phi, mesh, cfg.rho_phi_floor);
  QuadSamples w(fz.rho_phi.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = 1.0 / fz.rho_phi[i];
  return w;
}

}  // namespace

FEFunction step_rho(const SimState& state, const KernelTable& table,
                    const StepConfig& cfg) {
  return solve_rho(state, freeze(state, table), cfg);
}

FEFunction step_w(const SimState& state, const KernelTable& table,
                  const StepConfig& cfg) {
  return solve_w(state, freeze(state, table), cfg);
}

FEFunction step_u(const SimState& state, const KernelTable& table,
                  const StepConfig& cfg, std::span<const double> w_eff) {
  if (static_cast<int>(w_eff.size()) != state.u.mesh().num_quad_points())
    throw ConfigError("step_u: effective weight must be sampled at quadrature points");
  return solve_u(state, freeze(state, table), cfg, w_eff);
}

QuadSamples effective_weight(const SimState& state, const KernelTable& table,
                             const StepConfig& cfg) {
  return weight_for(freeze(state, table), cfg, state.rho.mesh());
}

FEFunction motsch_tadmor_weight(const FEFunction& rho, const KernelTable& table,
                                double rho_phi_floor) {
  const std::vector<double> offsets{0.0, 1.0 / 3.0, 2.0 / 3.0};
  const std::vector<double> rp = table.convolve_at_offsets(rho.at_quad(0), offsets);
  const PeriodicMesh& mesh = rho.mesh();
  std::vector<double> c(rp.size());
  for (std::size_t i = 0; i < rp.size(); ++i) {
    if (!(rp[i] >= rho_phi_floor) || rp[i] <= 0.0) {
      const double x = mesh.node_position(Space::P3, static_cast<int>(i));
      throw FloorViolation(fmt::format("rho_phi = {:.6e} at node x = {:.6f}", rp[i], x),
                           rp[i], x);
    }
    c[i] = 1.0 / rp[i];
  }
  return FEFunction(rho.mesh_ptr(), Space::P3, std::move(c));
}

Monitors measure_monitors(const SimState& state, const KernelTable& table,
                          const StepConfig& cfg) {
  const int per = cfg.dense_per_element;
  const std::vector<double> x = dense_sample_points(state.rho.mesh(), per);
  Monitors m;
  const std::vector<double> rho = state.rho.at_dense(per);
  const std::vector<double> dxu = state.u.at_dense(per, 1);
  const std::vector<double> rp =
      table.convolve_at_offsets(state.rho.at_quad(0), dense_offsets(per));
  m.rho_min = std::numeric_limits<double>::infinity();
  m.rho_phi_min = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (rho[i] < m.rho_min) {
      m.rho_min = rho[i];
      m.rho_min_x = x[i];
    }
    if (rp[i] < m.rho_phi_min) {
      m.rho_phi_min = rp[i];
      m.rho_phi_min_x = x[i];
    }
    if (std::abs(dxu[i]) > m.dxu_max) {
      m.dxu_max = std::abs(dxu[i]);
      m.dxu_max_x = x[i];
    }
  }
  return m;
}

SimState advance(const SimState& state, const KernelTable& table,
                 const StepConfig& cfg, Monitors* monitors) {
  validate(cfg);
  check_cfl(cfg, state.rho.mesh());

  const Monitors m = measure_monitors(state, table, cfg);
  if (monitors) *monitors = m;
  if (!(m.rho_phi_min >= cfg.rho_phi_floor))
    throw BlowUpSuspected(
        fmt::format("rho_phi_min = {:.6e} below floor {:.1e} at x = {:.6f}",
                    m.rho_phi_min, cfg.rho_phi_floor, m.rho_phi_min_x),
        "rho_phi_min", m.rho_phi_min, m.rho_phi_min_x);
  if (!(m.dxu_max <= cfg.dxu_cap))
    throw BlowUpSuspected(fmt::format("|du/dx| = {:.6e} above cap {:.1e} at x = {:.6f}",
                                      m.dxu_max, cfg.dxu_cap, m.dxu_max_x),
                          "dxu_max", m.dxu_max, m.dxu_max_x);

  const Frozen fz = freeze(state, table);
  const PeriodicMesh& mesh = state.rho.mesh();
  FEFunction rho = solve_rho(state, fz, cfg);
  FEFunction w = state.w;
  if (cfg.variant == Variant::SModel) w = solve_w(state, fz, cfg);
  const QuadSamples w_eff = weight_for(fz, cfg, mesh);
  FEFunction u = solve_u(state, fz, cfg, w_eff);
  if (cfg.variant == Variant::MotschTadmor)
    w = motsch_tadmor_weight(rho, table, cfg.rho_phi_floor);
  return SimState{std::move(rho), std::move(w), std::move(u), state.t + cfg.k};
}

RunResult run(const SimState& initial, const KernelTable& table,
              const StepConfig& cfg, int sample_every) {
  if (sample_every < 1) throw ConfigError("sample_every must be >= 1");
  const int steps = num_steps(cfg);
  RunResult result;
  result.cfl_exceeded = !check_cfl(cfg, initial.rho.mesh());

  const double t0 = initial.t;
  SimState state = initial;
  auto record = [&](const SimState& s) {
    result.snapshots.push_back(s);
    result.records.push_back(bulk_stats(s, table, cfg.dense_per_element));
  };
  record(state);
  for (int n = 1; n <= steps; ++n) {
    try {
      state = advance(state, table, cfg);
      // Times are n * k from the start, not accumulated sums.
      state.t = t0 + n * cfg.k;
    } catch (const BlowUpSuspected& e) {
      result.failure = RunFailure{"BlowUpSuspected", e.what(), state.t};
    } catch (const FloorViolation& e) {
      result.failure = RunFailure{"FloorViolation", e.what(), state.t};
    } catch (const SolverFailure& e) {
      result.failure = RunFailure{"SolverFailure", e.what(), state.t};
    }
    if (result.failure) break;
    result.steps_taken = n;
    if (n % sample_every == 0 || n == steps) record(state);
  }
  return result;
}

}  // namespace flockfem
