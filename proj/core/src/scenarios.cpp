#include "flockfem/scenarios.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include <fmt/core.h>

#include "flockfem/errors.hpp"

namespace flockfem {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

double wrap(double x) { return x - std::floor(x); }

}  // namespace

double bump(double x, double center, double amplitude) {
  double d = wrap(x) - center;
  d -= std::round(d);
  const double s = 10.0 * d;
  if (std::abs(s) >= 1.0) return 0.0;
  return amplitude * std::exp(-1.0 / (1.0 - s * s));
}

double two_flock_density(double x) {
  return bump(x, 0.25, 0.5) + bump(x, 0.75, 50.0);
}

double two_flock_velocity(double x) {
  const double y = wrap(x);
  if (y <= 0.15 || y >= 0.35) return 0.0;
  return (std::cos(10.0 * kPi * (y - 0.15)) - 1.0) / (12.0 * kPi);
}

double two_flock_velocity_dx(double x) {
  const double y = wrap(x);
  if (y <= 0.15 || y >= 0.35) return 0.0;
  return -(5.0 / 6.0) * std::sin(10.0 * kPi * (y - 0.15));
}

std::string to_string(WeightInit w) {
  return w == WeightInit::Unit ? "unit" : "motsch_tadmor";
}

WeightInit parse_weight_init(const std::string& name) {
  if (name == "unit") return WeightInit::Unit;
  if (name == "motsch_tadmor") return WeightInit::MotschTadmor;
  throw ConfigError(
      fmt::format("unknown weight_init '{}' (expected unit or motsch_tadmor)", name));
}

SimState two_flock_state(const KernelTable& table, Variant variant,
                         WeightInit weight_init) {
  const MeshPtr& mesh = table.mesh_ptr();
  FEFunction rho = interpolate(mesh, Space::P3, two_flock_density);
  FEFunction u = interpolate(mesh, Space::P2, two_flock_velocity);
  const bool derived = variant == Variant::MotschTadmor ||
                       (variant == Variant::SModel &&
                        weight_init == WeightInit::MotschTadmor);
  FEFunction w = derived ? motsch_tadmor_weight(rho, table)
                         : FEFunction::constant(mesh, Space::P3, 1.0);
  return SimState{std::move(rho), std::move(w), std::move(u), 0.0};
}

// ------------------------------------------------------------- manufactured

double ManufacturedSolution::rho(double t, double) { return 1.0 + std::sin(t); }
double ManufacturedSolution::rho_t(double t, double) { return std::cos(t); }
double ManufacturedSolution::rho_x(double, double) { return 0.0; }

double ManufacturedSolution::w(double t, double x) {
  return std::sin(t) + (2.0 + std::sin(kTwoPi * x)) / kTwoPi;
}
double ManufacturedSolution::w_t(double t, double) { return std::cos(t); }
double ManufacturedSolution::w_x(double, double x) { return std::cos(kTwoPi * x); }

double ManufacturedSolution::u(double t, double x) {
  return std::sin(t) + std::sin(kTwoPi * x) / kTwoPi;
}
double ManufacturedSolution::u_t(double t, double) { return std::cos(t); }
double ManufacturedSolution::u_x(double, double x) { return std::cos(kTwoPi * x); }

RefFunction ManufacturedSolution::rho_ref(double t) {
  return {[t](double x) { return rho(t, x); }, [t](double x) { return rho_x(t, x); }};
}
RefFunction ManufacturedSolution::w_ref(double t) {
  return {[t](double x) { return w(t, x); }, [t](double x) { return w_x(t, x); }};
}
RefFunction ManufacturedSolution::u_ref(double t) {
  return {[t](double x) { return u(t, x); }, [t](double x) { return u_x(t, x); }};
}

SimState manufactured_state(MeshPtr mesh, double t) {
  using MS = ManufacturedSolution;
  FEFunction rho = interpolate(mesh, Space::P3, [t](double x) { return MS::rho(t, x); });
  FEFunction w = interpolate(mesh, Space::P3, [t](double x) { return MS::w(t, x); });
  FEFunction u = interpolate(mesh, Space::P2, [t](double x) { return MS::u(t, x); });
  return SimState{std::move(rho), std::move(w), std::move(u), t};
}

std::string to_string(ForcingMode m) {
  switch (m) {
    case ForcingMode::None: return "none";
    case ForcingMode::ClosedForm: return "closed_form";
    case ForcingMode::Residual: return "residual";
  }
  return "unknown";
}

ForcingMode parse_forcing_mode(const std::string& name) {
  if (name == "none") return ForcingMode::None;
  if (name == "closed_form") return ForcingMode::ClosedForm;
  if (name == "residual") return ForcingMode::Residual;
  throw ConfigError(fmt::format(
      "unknown forcing '{}' (expected none, closed_form or residual)", name));
}

namespace {

double forcing_f1(double t, double x) {
  using MS = ManufacturedSolution;
  return MS::rho_t(t, x) + MS::u_x(t, x) * MS::rho(t, x) + MS::u(t, x) * MS::rho_x(t, x);
}

// rho_phi and (u rho)_phi of the exact fields at x, by mesh quadrature.
std::pair<double, double> exact_convolutions(const KernelTable& table, double t,
                                             double x) {
  using MS = ManufacturedSolution;
  const auto y = table.mesh().quad_points();
  const auto wq = table.mesh().quad_weights();
  double rp = 0.0;
  double urp = 0.0;
  for (std::size_t b = 0; b < y.size(); ++b) {
    const double r = MS::rho(t, y[b]);
    const double p = wq[b] * table.phi(x - y[b]);
    rp += p * r;
    urp += p * r * MS::u(t, y[b]);
  }
  return {rp, urp};
}

}  // namespace

Forcing manufactured_forcing(ForcingMode mode, KernelTablePtr table) {
  using MS = ManufacturedSolution;
  if (!table) throw ConfigError("manufactured_forcing: kernel table is required");
  switch (mode) {
    case ForcingMode::None:
      return Forcing{};
    case ForcingMode::ClosedForm: {
      if (table->spec().kind != KernelKind::Constant)
        throw ConfigError(fmt::format(
            "closed_form forcing is only consistent with the constant kernel "
            "(its convolutions assume phi integrates to 1 with no first "
            "harmonic); kernel '{}' needs forcing 'residual'",
            table->spec().name));
      Forcing f;
      f.f1 = [](double t, double x) {
        return std::cos(t) + std::sin(t) * std::cos(kTwoPi * x) + std::cos(kTwoPi * x);
      };
      f.f2 = [](double t, double x) {
        return std::cos(t) + std::sin(t) * std::cos(kTwoPi * x);
      };
      f.f3 = [](double t, double x) {
        const double s = std::sin(kTwoPi * x);
        return std::cos(t) + std::sin(t) * std::cos(kTwoPi * x) +
               std::sin(2.0 * kTwoPi * x) / (4.0 * kPi) +
               (std::sin(t) + 1.0 / kPi + s / kTwoPi) *
                   (s / kTwoPi + std::sin(t) * s / kTwoPi);
      };
      return f;
    }
    case ForcingMode::Residual: {
      Forcing f;
      f.f1 = forcing_f1;
      f.f2 = [table](double t, double x) {
        const auto [rp, urp] = exact_convolutions(*table, t, x);
        return MS::w_t(t, x) + (urp / rp) * MS::w_x(t, x);
      };
      f.f3 = [table](double t, double x) {
        const auto [rp, urp] = exact_convolutions(*table, t, x);
        const double u = MS::u(t, x);
        return MS::u_t(t, x) + u * MS::u_x(t, x) - MS::w(t, x) * (urp - u * rp);
      };
      return f;
    }
  }
  return Forcing{};
}

// --------------------------------------------------------------- nodal file

SimState load_nodal_state(MeshPtr mesh, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot open initial data file '{}'", path.string()));
  const int n = mesh->num_dofs(Space::P3);
  std::vector<double> rho(n), w(n), u(n);
  std::vector<bool> seen(n, false);
  std::string line;
  int line_no = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    std::replace(line.begin(), line.end(), ',', ' ');
    const auto pos = line.find_first_not_of(" \t\r");
    if (pos == std::string::npos || line[pos] == '#') continue;
    std::istringstream row(line);
    double idx = 0.0;
    double r = 0.0, ww = 0.0, uu = 0.0;
    if (!(row >> idx >> r >> ww >> uu)) {
      if (first) {
        first = false;
        continue;  // header
      }
      throw ConfigError(fmt::format("{}:{}: expected node_index, rho, w, u",
                                    path.string(), line_no));
    }
    first = false;
    const int i = static_cast<int>(idx);
    if (idx != i || i < 0 || i >= n)
      throw ConfigError(fmt::format("{}:{}: node_index {} outside [0, {})",
                                    path.string(), line_no, idx, n));
    if (seen[i])
      throw ConfigError(fmt::format("{}:{}: duplicate node_index {}", path.string(),
                                    line_no, i));
    if (!std::isfinite(r) || !std::isfinite(ww) || !std::isfinite(uu))
      throw ConfigError(fmt::format("{}:{}: non-finite value", path.string(), line_no));
    seen[i] = true;
    rho[i] = r;
    w[i] = ww;
    u[i] = uu;
  }
  const auto missing = std::find(seen.begin(), seen.end(), false);
  if (missing != seen.end())
    throw ConfigError(fmt::format("{}: node {} missing ({} P3 nodes expected)",
                                  path.string(), missing - seen.begin(), n));
  const FEFunction u3(mesh, Space::P3, std::move(u));
  FEFunction u2 = interpolate(mesh, Space::P2, [&u3](double x) { return u3(x); });
  return SimState{FEFunction(mesh, Space::P3, std::move(rho)),
                  FEFunction(mesh, Space::P3, std::move(w)), std::move(u2), 0.0};
}

// ----------------------------------------------------------------- scenario

std::string to_string(InitialSource s) {
  switch (s) {
    case InitialSource::TwoFlock: return "two_flock";
    case InitialSource::Manufactured: return "manufactured";
    case InitialSource::NodalFile: return "nodal_file";
  }
  return "unknown";
}

namespace {

SimState initial_state(const ScenarioSpec& spec, Variant variant,
                       const KernelTable& table) {
  const MeshPtr& mesh = table.mesh_ptr();
  switch (spec.source) {
    case InitialSource::TwoFlock:
      return two_flock_state(table, variant, spec.weight_init);
    case InitialSource::Manufactured:
      return manufactured_state(mesh, 0.0);
    case InitialSource::NodalFile:
      break;
  }
  return load_nodal_state(mesh, spec.initial_file);
}

}  // namespace

ResolvedRun resolve(const ScenarioSpec& spec, Variant variant, KernelTablePtr table) {
  if (!table)
    table = build_kernel_table(build_mesh(spec.num_elements, spec.quad_order), spec.kernel);
  SimState initial = initial_state(spec, variant, *table);
  if (spec.source != InitialSource::TwoFlock && variant == Variant::MotschTadmor)
    initial.w = motsch_tadmor_weight(initial.rho, *table, spec.step.rho_phi_floor);
  StepConfig cfg = spec.step;
  cfg.variant = variant;
  cfg.forcing.reset();
  if (spec.forcing != ForcingMode::None)
    cfg.forcing = manufactured_forcing(spec.forcing, table);
  return ResolvedRun{table->mesh_ptr(), table, std::move(initial), std::move(cfg)};
}

// -------------------------------------------------------- convergence sweep

std::pair<double, double> manufactured_errors(const SimState& s) {
  using MS = ManufacturedSolution;
  double e0 = 0.0;
  double e1 = 0.0;
  const std::pair<const FEFunction*, RefFunction> fields[] = {
      {&s.rho, MS::rho_ref(s.t)}, {&s.w, MS::w_ref(s.t)}, {&s.u, MS::u_ref(s.t)}};
  for (const auto& [f, ref] : fields) {
    const double l2 = error_norm(*f, ref, Norm::L2);
    const double h1 = error_norm(*f, ref, Norm::H1Semi);
    e0 += l2 * l2;
    e1 += h1 * h1;
  }
  return {e0, e1};
}

double loglog_slope(std::span<const double> x, std::span<const double> y) {
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  int n = 0;
  for (std::size_t i = 0; i < x.size() && i < y.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) continue;
    const double lx = std::log(x[i]);
    const double ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++n;
  }
  const double denom = n * sxx - sx * sx;
  if (n < 2 || !(denom > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  return (n * sxy - sx * sy) / denom;
}

SweepResult convergence_sweep(const SweepConfig& cfg) {
  if (cfg.level_min < 1 || cfg.level_max < cfg.level_min || cfg.level_max > 12)
    throw ConfigError(fmt::format("levels [{}, {}] must satisfy 1 <= min <= max <= 12",
                                  cfg.level_min, cfg.level_max));
  if (!(cfg.cfl_ratio > 0.0)) throw ConfigError("cfl_ratio must be positive");
  SweepResult out;
  std::vector<double> hs, e0s, e1s;
  for (int level = cfg.level_min; level <= cfg.level_max; ++level) {
    SweepRow row;
    row.level = level;
    const int m = 1 << level;
    row.h = 1.0 / m;
    row.k = row.h * cfg.cfl_ratio;
    const MeshPtr mesh = build_mesh(m, cfg.quad_order);
    const KernelTablePtr table = build_kernel_table(mesh, cfg.kernel);
    StepConfig step = cfg.base;
    step.k = row.k;
    step.T = cfg.T;
    step.variant = Variant::SModel;
    step.forcing.reset();
    if (cfg.forcing != ForcingMode::None)
      step.forcing = manufactured_forcing(cfg.forcing, table);
    const int steps = num_steps(step);
    const RunResult res = run(manufactured_state(mesh, 0.0), *table, step, steps);
    if (res.failure) {
      row.failure = res.failure;
      row.E0 = row.E1 = std::numeric_limits<double>::quiet_NaN();
    } else {
      std::tie(row.E0, row.E1) = manufactured_errors(res.snapshots.back());
      hs.push_back(row.h);
      e0s.push_back(row.E0);
      e1s.push_back(row.E1);
    }
    out.rows.push_back(std::move(row));
  }
  out.slope_E0 = loglog_slope(hs, e0s);
  out.slope_E1 = loglog_slope(hs, e1s);
  return out;
}

// ---------------------------------------------------------------- comparison

double window_mean_abs(const FEFunction& u, double a, double b) {
  const QuadSamples v = u.at_quad(0);
  const auto x = u.mesh().quad_points();
  const auto w = u.mesh().quad_weights();
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (x[i] < a || x[i] > b) continue;
    num += w[i] * std::abs(v[i]);
    den += w[i];
  }
  return den > 0.0 ? num / den : 0.0;
}

double window_centroid(const FEFunction& rho, double a, double b) {
  const QuadSamples v = rho.at_quad(0);
  const auto x = rho.mesh().quad_points();
  const auto w = rho.mesh().quad_weights();
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (x[i] < a || x[i] > b) continue;
    num += w[i] * v[i] * x[i];
    den += w[i] * v[i];
  }
  return den != 0.0 ? num / den : std::numeric_limits<double>::quiet_NaN();
}

PairDifference state_difference(const SimState& a, const SimState& b, int per_element) {
  PairDifference d;
  d.t = a.t;
  const std::vector<double> ua = a.u.at_dense(per_element);
  const std::vector<double> ub = b.u.at_dense(per_element);
  const std::vector<double> ra = a.rho.at_dense(per_element);
  const std::vector<double> rb = b.rho.at_dense(per_element);
  double ub_sup = 0.0;
  for (std::size_t i = 0; i < ua.size(); ++i) {
    d.sup_u = std::max(d.sup_u, std::abs(ua[i] - ub[i]));
    d.sup_rho = std::max(d.sup_rho, std::abs(ra[i] - rb[i]));
    ub_sup = std::max(ub_sup, std::abs(ub[i]));
  }
  d.rel_sup_u = ub_sup > 0.0 ? d.sup_u / ub_sup : (d.sup_u > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);

  const QuadSamples qa = a.u.at_quad(0), qb = b.u.at_quad(0);
  const QuadSamples pa = a.rho.at_quad(0), pb = b.rho.at_quad(0);
  const auto w = a.u.mesh().quad_weights();
  for (std::size_t i = 0; i < qa.size(); ++i) {
    d.l2_u += w[i] * (qa[i] - qb[i]) * (qa[i] - qb[i]);
    d.l2_rho += w[i] * (pa[i] - pb[i]) * (pa[i] - pb[i]);
  }
  d.l2_u = std::sqrt(d.l2_u);
  d.l2_rho = std::sqrt(d.l2_rho);
  return d;
}

Comparison compare_models(const ScenarioSpec& spec) {
  if (spec.variants.empty()) throw ConfigError("compare needs at least one variant");
  const MeshPtr mesh = build_mesh(spec.num_elements, spec.quad_order);
  const KernelTablePtr table = build_kernel_table(mesh, spec.kernel);
  Comparison out;
  for (Variant v : spec.variants) {
    ResolvedRun r = resolve(spec, v, table);
    VariantRun vr{v, r.initial, run(r.initial, *table, r.cfg, spec.sample_every)};
    out.runs.push_back(std::move(vr));
  }

  for (const VariantRun& vr : out.runs) {
    const auto& snaps = vr.result.snapshots;
    const double c0 = window_centroid(snaps.front().rho, 0.0, 0.5);
    for (const SimState& s : snaps)
      out.small_flock.push_back(
          {s.t, vr.variant, window_mean_abs(s.u, kSmallFlockLeft, kSmallFlockRight),
           window_centroid(s.rho, 0.0, 0.5) - c0});
  }

  for (std::size_t i = 0; i < out.runs.size(); ++i) {
    for (std::size_t j = i + 1; j < out.runs.size(); ++j) {
      const auto& sa = out.runs[i].result.snapshots;
      const auto& sb = out.runs[j].result.snapshots;
      const std::size_t n = std::min(sa.size(), sb.size());
      for (std::size_t s = 0; s < n; ++s) {
        PairDifference d = state_difference(sa[s], sb[s], spec.step.dense_per_element);
        d.a = out.runs[i].variant;
        d.b = out.runs[j].variant;
        out.differences.push_back(d);
      }
    }
  }
  return out;
}

}  // namespace flockfem
