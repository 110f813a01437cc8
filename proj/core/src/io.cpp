#include "flockfem/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <sstream>

#include <fmt/core.h>

#include "flockfem/errors.hpp"
#include "json.hpp"

namespace flockfem {

using json = nlohmann::json;

std::string to_string(Command c) {
  switch (c) {
    case Command::Simulate: return "simulate";
    case Command::Compare: return "compare";
    case Command::Converge: return "converge";
    case Command::Check: return "check";
  }
  return "unknown";
}

Command parse_command(const std::string& name) {
  if (name == "simulate") return Command::Simulate;
  if (name == "compare") return Command::Compare;
  if (name == "converge") return Command::Converge;
  if (name == "check") return Command::Check;
  throw ConfigError(fmt::format(
      "unknown command '{}' (expected simulate, compare, converge or check)", name));
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hash_hex(std::uint64_t h) { return fmt::format("{:016x}", h); }

std::string format_number(double v) { return fmt::format("{:.17g}", v); }

namespace {

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(fmt::format("cannot open '{}'", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void reject_unknown(const json& obj, std::initializer_list<std::string_view> allowed,
                    const std::string& where) {
  for (const auto& [key, value] : obj.items()) {
    bool ok = false;
    for (std::string_view a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError(fmt::format("unknown key '{}' in {}", key, where));
  }
}

std::string field(const std::string& where, std::string_view key) {
  return fmt::format("{}.{}", where, key);
}

std::optional<double> opt_number(const json& obj, std::string_view key,
                                 const std::string& where) {
  const auto it = obj.find(key);
  if (it == obj.end()) return std::nullopt;
  if (!it->is_number())
    throw ConfigError(fmt::format("{} must be a number", field(where, key)));
  const double v = it->get<double>();
  if (!std::isfinite(v))
    throw ConfigError(fmt::format("{} must be finite", field(where, key)));
  return v;
}

std::optional<int> opt_int(const json& obj, std::string_view key,
                           const std::string& where) {
  const auto it = obj.find(key);
  if (it == obj.end()) return std::nullopt;
  if (!it->is_number_integer())
    throw ConfigError(fmt::format("{} must be an integer", field(where, key)));
  return it->get<int>();
}

std::optional<bool> opt_bool(const json& obj, std::string_view key,
                             const std::string& where) {
  const auto it = obj.find(key);
  if (it == obj.end()) return std::nullopt;
  if (!it->is_boolean())
    throw ConfigError(fmt::format("{} must be true or false", field(where, key)));
  return it->get<bool>();
}

std::optional<std::string> opt_string(const json& obj, std::string_view key,
                                      const std::string& where) {
  const auto it = obj.find(key);
  if (it == obj.end()) return std::nullopt;
  if (!it->is_string())
    throw ConfigError(fmt::format("{} must be a string", field(where, key)));
  return it->get<std::string>();
}

// Wraps a parse step so domain errors name the offending field.
template <class F>
auto named(const std::string& name, F&& f) {
  try {
    return f();
  } catch (const ConfigError& e) {
    throw ConfigError(fmt::format("{}: {}", name, e.what()));
  }
}

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

}  // namespace

RunConfig parse_config(const std::filesystem::path& path, Command command) {
  return parse_config_text(read_text(path), command, path.parent_path());
}

RunConfig parse_config_text(std::string_view text, Command command,
                            const std::filesystem::path& base_dir) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(fmt::format("malformed JSON: {}", e.what()));
  }
  require(root.is_object(), "config root must be a JSON object");
  reject_unknown(root, {"command", "scenario", "output_dir"}, "config");

  RunConfig cfg;
  cfg.command = command;
  if (auto c = opt_string(root, "command", "config")) {
    const Command declared = named("config.command", [&] { return parse_command(*c); });
    require(declared == command,
            fmt::format("config.command is '{}' but the '{}' command was invoked", *c,
                        to_string(command)));
  }
  if (auto d = opt_string(root, "output_dir", "config")) {
    std::filesystem::path p(*d);
    cfg.output_dir = p.is_absolute() || base_dir.empty() ? p : base_dir / p;
  }

  json sc = json::object();
  if (auto it = root.find("scenario"); it != root.end()) {
    require(it->is_object(), "config.scenario must be an object");
    sc = *it;
  }
  const std::string where = "scenario";
  reject_unknown(sc,
                 {"name", "preset", "initial_data_file", "variant", "variants",
                  "num_elements", "quad_order", "k", "T", "kernel", "kernel_file",
                  "weight_init", "forcing", "sample_every", "cfl_ratio_max",
                  "cfl_strict", "rho_phi_floor", "dxu_cap", "solver_tol",
                  "dense_per_element", "entropy_c_param", "levels", "cfl_ratio"},
                 where);

  ScenarioSpec& s = cfg.scenario;
  StepConfig& step = s.step;
  json echo = json::object();

  // Initial data source.
  const auto preset = opt_string(sc, "preset", where);
  const auto init_file = opt_string(sc, "initial_data_file", where);
  require(!(preset && init_file),
          "scenario.preset and scenario.initial_data_file are mutually exclusive");
  if (init_file) {
    s.source = InitialSource::NodalFile;
    std::filesystem::path p(*init_file);
    s.initial_file = p.is_absolute() || base_dir.empty() ? p : base_dir / p;
    echo["initial_data_file"] = *init_file;
    echo["initial_data_fnv1a"] = hash_hex(fnv1a64(read_text(s.initial_file)));
  } else {
    const std::string name =
        preset.value_or(command == Command::Converge ? "manufactured" : "two_flock");
    if (name == "two_flock") {
      s.source = InitialSource::TwoFlock;
    } else if (name == "manufactured") {
      s.source = InitialSource::Manufactured;
    } else {
      throw ConfigError(fmt::format(
          "scenario.preset '{}' unknown (expected two_flock or manufactured)", name));
    }
    echo["preset"] = name;
  }
  const bool manufactured = s.source == InitialSource::Manufactured;
  if (command == Command::Converge)
    require(manufactured, "converge requires scenario.preset = manufactured");
  s.name = opt_string(sc, "name", where).value_or(to_string(s.source));
  echo["name"] = s.name;

  // Kernel.
  const std::string kernel =
      opt_string(sc, "kernel", where).value_or(manufactured ? "constant" : "rational_sqrt");
  const auto kernel_file = opt_string(sc, "kernel_file", where);
  if (kernel == "rational_sqrt") {
    s.kernel = KernelSpec::rational_sqrt();
  } else if (kernel == "constant") {
    s.kernel = KernelSpec::constant();
  } else if (kernel == "table") {
    require(kernel_file.has_value(), "scenario.kernel = table needs scenario.kernel_file");
    std::filesystem::path p(*kernel_file);
    p = p.is_absolute() || base_dir.empty() ? p : base_dir / p;
    s.kernel = named("scenario.kernel_file", [&] { return KernelSpec::from_csv(p); });
    echo["kernel_file"] = *kernel_file;
    echo["kernel_file_fnv1a"] = hash_hex(fnv1a64(read_text(p)));
  } else {
    throw ConfigError(fmt::format(
        "scenario.kernel '{}' unknown (expected rational_sqrt, constant or table)", kernel));
  }
  require(kernel == "table" || !kernel_file,
          "scenario.kernel_file is only used with kernel = table");
  echo["kernel"] = kernel;

  // Mesh and time step.
  s.quad_order = opt_int(sc, "quad_order", where).value_or(6);
  require(s.quad_order >= 4 && s.quad_order <= 20,
          "scenario.quad_order must lie in [4, 20]");
  echo["quad_order"] = s.quad_order;

  step.cfl_ratio_max = opt_number(sc, "cfl_ratio_max", where).value_or(0.25);
  step.cfl_strict = opt_bool(sc, "cfl_strict", where).value_or(false);
  step.rho_phi_floor = opt_number(sc, "rho_phi_floor", where).value_or(1e-10);
  step.dxu_cap = opt_number(sc, "dxu_cap", where).value_or(1e6);
  step.solver_tol = opt_number(sc, "solver_tol", where).value_or(1e-10);
  step.dense_per_element = opt_int(sc, "dense_per_element", where).value_or(10);
  require(step.cfl_ratio_max > 0.0, "scenario.cfl_ratio_max must be positive");
  require(step.rho_phi_floor >= 0.0, "scenario.rho_phi_floor must be >= 0");
  require(step.dxu_cap > 0.0, "scenario.dxu_cap must be positive");
  require(step.solver_tol > 0.0, "scenario.solver_tol must be positive");
  require(step.dense_per_element >= 1 && step.dense_per_element <= 1000,
          "scenario.dense_per_element must lie in [1, 1000]");
  echo["cfl_ratio_max"] = step.cfl_ratio_max;
  echo["cfl_strict"] = step.cfl_strict;
  echo["rho_phi_floor"] = step.rho_phi_floor;
  echo["dxu_cap"] = step.dxu_cap;
  echo["solver_tol"] = step.solver_tol;
  echo["dense_per_element"] = step.dense_per_element;

  cfg.entropy_c_param = opt_number(sc, "entropy_c_param", where).value_or(1.0);
  require(cfg.entropy_c_param > 0.0, "scenario.entropy_c_param must be positive");
  echo["entropy_c_param"] = cfg.entropy_c_param;

  // Forcing.
  const ForcingMode default_forcing =
      manufactured ? (kernel == "constant" ? ForcingMode::ClosedForm : ForcingMode::Residual)
                   : ForcingMode::None;
  s.forcing = default_forcing;
  if (auto f = opt_string(sc, "forcing", where))
    s.forcing = named("scenario.forcing", [&] { return parse_forcing_mode(*f); });
  require(manufactured || s.forcing == ForcingMode::None,
          "scenario.forcing is only available with preset = manufactured");
  require(s.forcing != ForcingMode::ClosedForm || kernel == "constant",
          "scenario.forcing = closed_form requires kernel = constant; use residual");
  echo["forcing"] = to_string(s.forcing);

  if (command == Command::Converge) {
    for (const char* key : {"num_elements", "k", "variant", "variants", "weight_init",
                            "sample_every", "initial_data_file"})
      require(!sc.contains(key), fmt::format("scenario.{} is not used by converge", key));
    SweepConfig& sw = cfg.sweep;
    if (auto it = sc.find("levels"); it != sc.end()) {
      require(it->is_array() && it->size() == 2 && (*it)[0].is_number_integer() &&
                  (*it)[1].is_number_integer(),
              "scenario.levels must be [min_level, max_level]");
      sw.level_min = (*it)[0].get<int>();
      sw.level_max = (*it)[1].get<int>();
    }
    require(sw.level_min >= 1 && sw.level_max >= sw.level_min && sw.level_max <= 12,
            "scenario.levels must satisfy 1 <= min <= max <= 12");
    sw.T = opt_number(sc, "T", where).value_or(0.5);
    sw.cfl_ratio = opt_number(sc, "cfl_ratio", where).value_or(0.25);
    require(sw.cfl_ratio > 0.0, "scenario.cfl_ratio must be positive");
    sw.quad_order = s.quad_order;
    sw.kernel = s.kernel;
    sw.forcing = s.forcing;
    sw.base = step;
    for (int level = sw.level_min; level <= sw.level_max; ++level) {
      StepConfig probe = step;
      probe.k = sw.cfl_ratio / (1 << level);
      probe.T = sw.T;
      named(fmt::format("level {}", level), [&] { return num_steps(probe); });
    }
    if (step.cfl_strict && sw.cfl_ratio > step.cfl_ratio_max * (1.0 + 1e-12))
      throw CflViolation(fmt::format("scenario.cfl_ratio = {} exceeds cfl_ratio_max = {}",
                                     sw.cfl_ratio, step.cfl_ratio_max),
                         sw.cfl_ratio, 1.0);
    echo["levels"] = {sw.level_min, sw.level_max};
    echo["T"] = sw.T;
    echo["cfl_ratio"] = sw.cfl_ratio;
  } else {
    require(!sc.contains("levels") && !sc.contains("cfl_ratio"),
            "scenario.levels and scenario.cfl_ratio are only used by converge");
    s.num_elements = opt_int(sc, "num_elements", where).value_or(manufactured ? 16 : 100);
    require(s.num_elements >= 2 && s.num_elements <= 100000,
            "scenario.num_elements must lie in [2, 100000]");
    const double h = 1.0 / s.num_elements;
    step.k = opt_number(sc, "k", where).value_or(manufactured ? h / 4.0 : 0.05);
    step.T = opt_number(sc, "T", where).value_or(manufactured ? 0.5 : 2.0);
    named("scenario", [&] { return num_steps(step); });
    echo["num_elements"] = s.num_elements;
    echo["k"] = step.k;
    echo["T"] = step.T;

    std::vector<Variant> variants;
    const auto one = opt_string(sc, "variant", where);
    const auto many = sc.find("variants");
    require(!(one && many != sc.end()), "use scenario.variant or scenario.variants, not both");
    if (one) {
      variants.push_back(named("scenario.variant", [&] { return parse_variant(*one); }));
    } else if (many != sc.end()) {
      require(many->is_array() && !many->empty(),
              "scenario.variants must be a non-empty array");
      for (const json& v : *many) {
        require(v.is_string(), "scenario.variants entries must be strings");
        const Variant parsed =
            named("scenario.variants", [&] { return parse_variant(v.get<std::string>()); });
        for (Variant seen : variants)
          require(seen != parsed, fmt::format("scenario.variants lists '{}' twice",
                                              to_string(parsed)));
        variants.push_back(parsed);
      }
    } else if (command == Command::Compare) {
      variants = {Variant::CuckerSmale, Variant::SModel, Variant::MotschTadmor};
    } else {
      variants = {manufactured ? Variant::SModel : Variant::CuckerSmale};
    }
    require(command == Command::Compare || variants.size() == 1,
            fmt::format("{} runs a single variant", to_string(command)));
    s.variants = variants;
    json names = json::array();
    for (Variant v : variants) names.push_back(to_string(v));
    echo["variants"] = names;

    s.weight_init = WeightInit::MotschTadmor;
    if (auto w = opt_string(sc, "weight_init", where))
      s.weight_init = named("scenario.weight_init", [&] { return parse_weight_init(*w); });
    echo["weight_init"] = to_string(s.weight_init);

    s.sample_every = opt_int(sc, "sample_every", where).value_or(1);
    require(s.sample_every >= 1, "scenario.sample_every must be >= 1");
    echo["sample_every"] = s.sample_every;

    if (command != Command::Check && step.cfl_strict &&
        step.k > step.cfl_ratio_max * h * (1.0 + 1e-12))
      throw CflViolation(fmt::format("k = {} exceeds cfl_ratio_max * h = {} * {}", step.k,
                                     step.cfl_ratio_max, h),
                         step.k, h);
  }

  json resolved = {{"command", to_string(command)}, {"scenario", echo}};
  cfg.resolved_json = resolved.dump();
  cfg.config_hash = hash_hex(fnv1a64(cfg.resolved_json));
  return cfg;
}

// ------------------------------------------------------------------- output

OutputLock::OutputLock(const std::filesystem::path& dir) : file_(dir / ".lock") {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec)
    throw Error(fmt::format("cannot create output directory '{}': {}", dir.string(),
                            ec.message()));
  std::FILE* f = std::fopen(file_.string().c_str(), "wx");
  if (!f)
    throw Error(fmt::format("output directory '{}' is locked by another run ({} exists)",
                            dir.string(), file_.string()));
  std::fclose(f);
}

OutputLock::~OutputLock() {
  std::error_code ec;
  std::filesystem::remove(file_, ec);
}

namespace {

void append_trailer(std::string& out, const CsvTrailer& trailer) {
  if (trailer.failure)
    out += fmt::format("# failure: {} at t={}: {}\n", trailer.failure->kind,
                       format_number(trailer.failure->t), trailer.failure->message);
  out += fmt::format("# config_hash={}\n", trailer.config_hash);
}

void append_row(std::string& out, std::initializer_list<double> values) {
  bool first = true;
  for (double v : values) {
    if (!first) out += ',';
    out += format_number(v);
    first = false;
  }
  out += '\n';
}

}  // namespace

std::string timeseries_csv(std::span<const DiagnosticsRecord> records,
                           const CsvTrailer& trailer) {
  std::string out(kTimeseriesHeader);
  out += '\n';
  for (const DiagnosticsRecord& r : records) {
    out += fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{}\n", format_number(r.t),
                       format_number(r.mass), format_number(r.momentum),
                       format_number(r.energy), format_number(r.v2),
                       format_number(r.amplitude), format_number(r.e_min),
                       format_number(r.e_max), format_number(r.rho_min),
                       format_number(r.rho_phi_min),
                       r.entropy ? format_number(*r.entropy) : std::string(),
                       format_number(r.l1_dev), format_number(r.dxu_max));
  }
  append_trailer(out, trailer);
  return out;
}

std::string snapshots_csv(std::span<const SimState> snapshots, const KernelTable& table,
                          int per_element, const CsvTrailer& trailer) {
  std::string out(kSnapshotsHeader);
  out += '\n';
  for (const SimState& s : snapshots) {
    const EField e = e_field(s, table, per_element);
    const std::vector<double> rho = s.rho.at_dense(per_element);
    const std::vector<double> w = s.w.at_dense(per_element);
    const std::vector<double> u = s.u.at_dense(per_element);
    for (std::size_t i = 0; i < e.x.size(); ++i)
      append_row(out, {s.t, e.x[i], rho[i], w[i], u[i], e.e[i]});
  }
  append_trailer(out, trailer);
  return out;
}

std::string convergence_csv(std::span<const SweepRow> rows, const CsvTrailer& trailer) {
  std::string out(kConvergenceHeader);
  out += '\n';
  for (const SweepRow& r : rows) {
    out += fmt::format("{},{},{},{},{}\n", r.level, format_number(r.h), format_number(r.k),
                       format_number(r.E0), format_number(r.E1));
    if (r.failure)
      out += fmt::format("# failure: level {} {} at t={}: {}\n", r.level, r.failure->kind,
                         format_number(r.failure->t), r.failure->message);
  }
  append_trailer(out, trailer);
  return out;
}

std::string differences_csv(std::span<const PairDifference> rows,
                            const CsvTrailer& trailer) {
  std::string out(kDifferencesHeader);
  out += '\n';
  for (const PairDifference& d : rows)
    out += fmt::format("{},{},{},{},{},{},{},{}\n", format_number(d.t), to_string(d.a),
                       to_string(d.b), format_number(d.sup_u), format_number(d.l2_u),
                       format_number(d.rel_sup_u), format_number(d.sup_rho),
                       format_number(d.l2_rho));
  append_trailer(out, trailer);
  return out;
}

std::string small_flock_csv(std::span<const SmallFlockMetric> rows,
                            const CsvTrailer& trailer) {
  std::string out(kSmallFlockHeader);
  out += '\n';
  for (const SmallFlockMetric& m : rows)
    out += fmt::format("{},{},{},{}\n", format_number(m.t), to_string(m.variant),
                       format_number(m.mean_abs_u), format_number(m.displacement));
  append_trailer(out, trailer);
  return out;
}

void write_file(const std::filesystem::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(fmt::format("cannot write '{}'", path.string()));
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw Error(fmt::format("write to '{}' failed", path.string()));
}

}  // namespace flockfem
