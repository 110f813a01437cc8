#include "flockfem/app.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/core.h>

#include "flockfem/errors.hpp"
#include "json.hpp"

namespace flockfem {

using json = nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

json kernel_json(const KernelTable& table) {
  const KernelConstants& c = table.constants();
  return {{"name", table.spec().name},
          {"kind", to_string(table.spec().kind)},
          {"integral", c.integral},
          {"l1_norm", c.integral},
          {"sup", c.sup},
          {"lipschitz", c.lipschitz},
          {"lower_bound_c1", c.lower_bound}};
}

json design_json(const RunConfig& cfg) {
  const StepConfig& s = cfg.scenario.step;
  return {{"bump_exponent", "-1/(1-(10(x-c))^2)"},
          {"motsch_tadmor_kernel", "phi_h"},
          {"forcing_time_level", "t_next"},
          {"entropy_domain_measure", 1.0},
          {"dense_per_element", s.dense_per_element},
          {"cfl_mode", s.cfl_strict ? "strict" : "permissive"},
          {"linear_solver", "cyclic_banded_lu"},
          {"quadrature", fmt::format("gauss_legendre_{}", cfg.scenario.quad_order)},
          {"kernel_interpolant", "P3"},
          {"pair_table", "circulant"}};
}

json meta_json(const RunConfig& cfg, const KernelTable& table) {
  return {{"version", kVersion},
          {"command", to_string(cfg.command)},
          {"config", json::parse(cfg.resolved_json)},
          {"config_hash", cfg.config_hash},
          {"kernel_constants", kernel_json(table)},
          {"design", design_json(cfg)}};
}

json failure_json(const std::optional<RunFailure>& f) {
  if (!f) return nullptr;
  return {{"kind", f->kind}, {"message", f->message}, {"t", f->t}};
}

json record_json(const DiagnosticsRecord& r) {
  return {{"t", r.t},
          {"mass", r.mass},
          {"momentum", r.momentum},
          {"energy", r.energy},
          {"v2", r.v2},
          {"amplitude", r.amplitude},
          {"e_min", r.e_min},
          {"e_max", r.e_max},
          {"rho_min", r.rho_min},
          {"rho_phi_min", r.rho_phi_min},
          {"entropy_H", r.entropy ? json(*r.entropy) : json(nullptr)},
          {"l1_dev", r.l1_dev},
          {"dxu_max", r.dxu_max}};
}

json threshold_json(const ThresholdVerdict& v) {
  return {{"e0_min", v.e0_min},
          {"e0_max", v.e0_max},
          {"argmin", v.argmin},
          {"verdict", to_string(v.verdict)}};
}

void write_json(const std::filesystem::path& path, const json& j) {
  write_file(path, j.dump(2) + "\n");
}

void warn_cfl(const ResolvedRun& r, std::ostream& log) {
  if (!check_cfl(r.cfg, *r.mesh))
    log << fmt::format("warning: k / h = {:.6g} exceeds the CFL guard {:.6g}; continuing "
                       "(set cfl_strict to make this an error)\n",
                       r.cfg.k / r.mesh->h(), r.cfg.cfl_ratio_max);
}

json summary_of_run(const ResolvedRun& r, const RunResult& res) {
  json s;
  s["variant"] = to_string(r.cfg.variant);
  s["steps_total"] = num_steps(r.cfg);
  s["steps_taken"] = res.steps_taken;
  s["cfl_exceeded"] = res.cfl_exceeded;
  s["failure"] = failure_json(res.failure);
  s["initial"] = record_json(res.records.front());
  s["final"] = record_json(res.records.back());
  const double m0 = res.records.front().mass;
  const double p0 = res.records.front().momentum;
  double mass_drift = 0.0;
  for (const DiagnosticsRecord& d : res.records)
    mass_drift = std::max(mass_drift, std::abs(d.mass - m0));
  s["max_mass_drift"] = mass_drift;
  s["momentum_drift"] = std::abs(res.records.back().momentum - p0);

  std::vector<double> t, a;
  for (const DiagnosticsRecord& d : res.records) {
    t.push_back(d.t);
    a.push_back(d.amplitude);
  }
  try {
    const DecayFit fit =
        fit_decay_rate(t, a, t.front(), t.back(), field_min(r.initial.w),
                       m0, r.table->constants().lower_bound);
    s["decay_fit"] = {{"fitted_rate", fit.fitted_rate},
                      {"theoretical_rate", fit.theoretical_rate},
                      {"samples", fit.samples}};
  } catch (const DegenerateSeries& e) {
    s["decay_fit"] = {{"error", e.what()}};
  }
  return s;
}

int simulate(const RunConfig& cfg, std::ostream& log) {
  const ScenarioSpec& spec = cfg.scenario;
  const ResolvedRun r = resolve(spec, spec.variants.front());
  warn_cfl(r, log);
  const RunResult res = run(r.initial, *r.table, r.cfg, spec.sample_every);
  const CsvTrailer trailer{cfg.config_hash, res.failure};
  const auto& dir = cfg.output_dir;
  write_file(dir / "timeseries.csv", timeseries_csv(res.records, trailer));
  write_file(dir / "snapshots.csv",
             snapshots_csv(res.snapshots, *r.table, r.cfg.dense_per_element, trailer));
  write_json(dir / "run_meta.json", meta_json(cfg, *r.table));

  json summary = summary_of_run(r, res);
  summary["config_hash"] = cfg.config_hash;
  summary["threshold"] =
      threshold_json(classify_threshold(r.initial, *r.table, r.cfg.dense_per_element));
  write_json(dir / "summary.json", summary);

  log << fmt::format("{}: {} of {} steps, final amplitude {:.6g}\n",
                     to_string(r.cfg.variant), res.steps_taken, num_steps(r.cfg),
                     res.records.back().amplitude);
  if (res.failure) {
    log << fmt::format("error: {} at t = {}: {}\n", res.failure->kind, res.failure->t,
                       res.failure->message);
    return kExitRuntime;
  }
  return kExitOk;
}

int compare(const RunConfig& cfg, std::ostream& log) {
  const ScenarioSpec& spec = cfg.scenario;
  const Comparison cmp = compare_models(spec);
  const auto& dir = cfg.output_dir;
  const KernelTablePtr table =
      resolve(spec, spec.variants.front()).table;  // constants only
  bool failed = false;
  json runs = json::array();
  for (const VariantRun& vr : cmp.runs) {
    const std::string name = to_string(vr.variant);
    const CsvTrailer trailer{cfg.config_hash, vr.result.failure};
    write_file(dir / fmt::format("timeseries_{}.csv", name),
               timeseries_csv(vr.result.records, trailer));
    write_file(dir / fmt::format("snapshots_{}.csv", name),
               snapshots_csv(vr.result.snapshots, *table, spec.step.dense_per_element,
                             trailer));
    ResolvedRun r{table->mesh_ptr(), table, vr.initial, spec.step};
    r.cfg.variant = vr.variant;
    runs.push_back(summary_of_run(r, vr.result));
    if (vr.result.failure) {
      failed = true;
      log << fmt::format("error: {} failed: {}\n", name, vr.result.failure->message);
    }
  }
  std::optional<RunFailure> any;
  for (const VariantRun& vr : cmp.runs)
    if (vr.result.failure && !any) any = vr.result.failure;
  const CsvTrailer trailer{cfg.config_hash, any};
  write_file(dir / "differences.csv", differences_csv(cmp.differences, trailer));
  write_file(dir / "small_flock.csv", small_flock_csv(cmp.small_flock, trailer));
  write_json(dir / "run_meta.json", meta_json(cfg, *table));

  json pairs = json::array();
  for (std::size_t i = 0; i < cmp.differences.size(); ++i) {
    const PairDifference& d = cmp.differences[i];
    const bool new_pair = pairs.empty() || pairs.back()["a"] != to_string(d.a) ||
                          pairs.back()["b"] != to_string(d.b);
    if (new_pair)
      pairs.push_back({{"a", to_string(d.a)},
                       {"b", to_string(d.b)},
                       {"max_sup_u", 0.0},
                       {"max_rel_sup_u", 0.0},
                       {"max_sup_rho", 0.0}});
    json& p = pairs.back();
    p["max_sup_u"] = std::max(p["max_sup_u"].get<double>(), d.sup_u);
    p["max_rel_sup_u"] = std::max(p["max_rel_sup_u"].get<double>(), d.rel_sup_u);
    p["max_sup_rho"] = std::max(p["max_sup_rho"].get<double>(), d.sup_rho);
  }
  json small = json::object();
  for (const SmallFlockMetric& m : cmp.small_flock)
    small[to_string(m.variant)] = {{"t", m.t},
                                   {"mean_abs_u", m.mean_abs_u},
                                   {"displacement", m.displacement}};
  write_json(dir / "summary.json", {{"config_hash", cfg.config_hash},
                                    {"runs", runs},
                                    {"pairs", pairs},
                                    {"small_flock_final", small}});
  for (const auto& [name, m] : small.items())
    log << fmt::format("{}: mean |u| on small flock at t = {:.6g}: {:.6g}\n", name,
                       m["t"].get<double>(), m["mean_abs_u"].get<double>());
  return failed ? kExitRuntime : kExitOk;
}

int converge(const RunConfig& cfg, std::ostream& log) {
  const SweepResult sweep = convergence_sweep(cfg.sweep);
  const auto& dir = cfg.output_dir;
  std::optional<RunFailure> any;
  json rows = json::array();
  for (const SweepRow& r : sweep.rows) {
    if (r.failure && !any) any = r.failure;
    rows.push_back({{"level", r.level},
                    {"h", r.h},
                    {"k", r.k},
                    {"E0", r.E0},
                    {"E1", r.E1},
                    {"failure", failure_json(r.failure)}});
  }
  write_file(dir / "convergence.csv",
             convergence_csv(sweep.rows, CsvTrailer{cfg.config_hash, any}));
  const MeshPtr finest = build_mesh(1 << cfg.sweep.level_max, cfg.sweep.quad_order);
  write_json(dir / "run_meta.json",
             meta_json(cfg, *build_kernel_table(finest, cfg.sweep.kernel)));
  write_json(dir / "summary.json", {{"config_hash", cfg.config_hash},
                                    {"rows", rows},
                                    {"slope_E0", sweep.slope_E0},
                                    {"slope_E1", sweep.slope_E1}});
  log << fmt::format("levels {}..{}: slope E0 = {:.4f}, slope E1 = {:.4f}\n",
                     cfg.sweep.level_min, cfg.sweep.level_max, sweep.slope_E0,
                     sweep.slope_E1);
  return any ? kExitRuntime : kExitOk;
}

int check(const RunConfig& cfg, std::ostream& log) {
  const ScenarioSpec& spec = cfg.scenario;
  const ResolvedRun r = resolve(spec, spec.variants.front());
  const int per = r.cfg.dense_per_element;
  const ThresholdVerdict tv = classify_threshold(r.initial, *r.table, per);
  const SmallDataReport sd = small_data_report(r.initial, *r.table, per);
  const EntropyBound eb = entropy_bound(r.initial, *r.table, cfg.entropy_c_param, per);
  const json out = {
      {"config_hash", cfg.config_hash},
      {"variant", to_string(r.cfg.variant)},
      {"kernel_constants", kernel_json(*r.table)},
      {"threshold", threshold_json(tv)},
      {"small_data",
       {{"A0", sd.A0},
        {"u0_inf", sd.u0_inf},
        {"mass", sd.mass},
        {"w_minus", sd.w_minus},
        {"w_plus", sd.w_plus},
        {"dxw0_inf", sd.dxw0_inf},
        {"eta", sd.eta},
        {"epsilon_max", sd.epsilon_max},
        {"epsilon", sd.epsilon},
        {"satisfied", sd.satisfied},
        {"reason", sd.reason}}},
      {"entropy_bound",
       {{"defined", eb.defined},
        {"q_tilde", eb.q_tilde},
        {"w_minus", eb.w_minus},
        {"w_plus", eb.w_plus},
        {"feasible", eb.feasible},
        {"bound", eb.bound},
        {"c_param", cfg.entropy_c_param}}}};
  write_json(cfg.output_dir / "check.json", out);
  write_json(cfg.output_dir / "run_meta.json", meta_json(cfg, *r.table));
  log << fmt::format("threshold: {} (e0_min = {:.6g} at x = {:.4f})\n",
                     to_string(tv.verdict), tv.e0_min, tv.argmin);
  log << fmt::format("small data: {} ({})\n", sd.satisfied ? "satisfied" : "not satisfied",
                     sd.reason);
  return kExitOk;
}

}  // namespace

int execute(const RunConfig& cfg, std::ostream& log) {
  const OutputLock lock(cfg.output_dir);
  switch (cfg.command) {
    case Command::Simulate: return simulate(cfg, log);
    case Command::Compare: return compare(cfg, log);
    case Command::Converge: return converge(cfg, log);
    case Command::Check: return check(cfg, log);
  }
  return kExitRuntime;
}

int run_cli(Command command, const std::filesystem::path& config_path,
            const std::optional<std::filesystem::path>& output_dir, std::ostream& log) {
  try {
    RunConfig cfg = parse_config(config_path, command);
    if (output_dir) cfg.output_dir = *output_dir;
    return execute(cfg, log);
  } catch (const ConfigError& e) {
    log << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const CflViolation& e) {
    log << "CFL violation: " << e.what() << '\n';
    return kExitCfl;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

}  // namespace flockfem
