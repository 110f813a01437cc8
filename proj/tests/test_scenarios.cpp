#include <cmath>
#include <filesystem>
#include <fstream>
#include <vector>

#include <fmt/core.h>

#include "doctest.h"
#include "flockfem/errors.hpp"
#include "flockfem/scenarios.hpp"
#include "oracles.hpp"

using namespace flockfem;
namespace fs = std::filesystem;

namespace {

constexpr double tp = 2 * oracle::pi;

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / "flockfem_test_scenarios";
  fs::create_directories(p);
  return p / name;
}

}  // namespace

TEST_CASE("two-flock initial data") {
  CHECK(two_flock_density(0.25) == doctest::Approx(0.5 * std::exp(-1.0)).epsilon(1e-15));
  CHECK(two_flock_density(0.75) == doctest::Approx(50 * std::exp(-1.0)).epsilon(1e-15));
  CHECK(two_flock_density(0.5) == 0.0);
  CHECK(two_flock_density(0.35) == 0.0);
  CHECK(two_flock_density(1.25) == two_flock_density(0.25));
  CHECK(two_flock_velocity(0.25) == doctest::Approx(-1 / (6 * oracle::pi)).epsilon(1e-15));
  CHECK(two_flock_velocity(0.1) == 0.0);
  CHECK(two_flock_velocity(0.7) == 0.0);
  // Derivative against a centred difference.
  for (double x : {0.17, 0.22, 0.3, 0.34}) {
    const double d = 1e-6;
    const double fd = (two_flock_velocity(x + d) - two_flock_velocity(x - d)) / (2 * d);
    CHECK(two_flock_velocity_dx(x) == doctest::Approx(fd).epsilon(1e-7));
  }
}

TEST_CASE("two-flock mass against adaptive quadrature") {
  const double unit =
      oracle::integrate([](double s) { return std::exp(-1 / (1 - s * s)); }, -1 + 1e-15, 1 - 1e-15);
  CHECK(unit == doctest::Approx(0.443994).epsilon(1e-6));
  const double exact = 0.1 * 50.5 * unit;

  const MeshPtr m = build_mesh(100);
  const auto table = build_kernel_table(m, KernelSpec::rational_sqrt());
  const SimState s = two_flock_state(*table, Variant::CuckerSmale);
  const double mass = integrate(*m, s.rho.at_quad(0));
  CHECK(mass == doctest::Approx(exact).epsilon(2e-4));
  for (double c : s.w.coefficients()) CHECK(c == 1.0);
  CHECK(s.t == 0.0);

  const SimState mt = two_flock_state(*table, Variant::MotschTadmor);
  const FEFunction expected = motsch_tadmor_weight(s.rho, *table);
  for (std::size_t i = 0; i < mt.w.size(); ++i)
    CHECK(mt.w.coefficients()[i] == expected.coefficients()[i]);
  const SimState unit_s = two_flock_state(*table, Variant::SModel, WeightInit::Unit);
  for (double c : unit_s.w.coefficients()) CHECK(c == 1.0);
}

TEST_CASE("enum names roundtrip") {
  for (WeightInit w : {WeightInit::Unit, WeightInit::MotschTadmor})
    CHECK(parse_weight_init(to_string(w)) == w);
  for (ForcingMode f : {ForcingMode::None, ForcingMode::ClosedForm, ForcingMode::Residual})
    CHECK(parse_forcing_mode(to_string(f)) == f);
  CHECK_THROWS_AS(parse_weight_init("random"), ConfigError);
  CHECK_THROWS_AS(parse_forcing_mode("exact"), ConfigError);
}

TEST_CASE("manufactured derivatives match finite differences") {
  using MS = ManufacturedSolution;
  const double d = 1e-6;
  for (double t : {0.0, 0.3, 1.1})
    for (double x : {0.1, 0.45, 0.8}) {
      CHECK(MS::rho_t(t, x) == doctest::Approx((MS::rho(t + d, x) - MS::rho(t - d, x)) / (2 * d)).epsilon(1e-6));
      CHECK(std::abs(MS::rho_x(t, x)) <= 1e-15);
      CHECK(MS::w_t(t, x) == doctest::Approx((MS::w(t + d, x) - MS::w(t - d, x)) / (2 * d)).epsilon(1e-6));
      CHECK(MS::w_x(t, x) == doctest::Approx((MS::w(t, x + d) - MS::w(t, x - d)) / (2 * d)).epsilon(1e-6));
      CHECK(MS::u_t(t, x) == doctest::Approx((MS::u(t + d, x) - MS::u(t - d, x)) / (2 * d)).epsilon(1e-6));
      CHECK(MS::u_x(t, x) == doctest::Approx((MS::u(t, x + d) - MS::u(t, x - d)) / (2 * d)).epsilon(1e-6));
    }
}

TEST_CASE("closed-form forcing agrees with the residual for the constant kernel") {
  const MeshPtr m = build_mesh(16);
  const auto table = build_kernel_table(m, KernelSpec::constant());
  const Forcing a = manufactured_forcing(ForcingMode::ClosedForm, table);
  const Forcing b = manufactured_forcing(ForcingMode::Residual, table);
  double d1 = 0.0, d2 = 0.0, d3 = 0.0;
  for (int i = 0; i < 50; ++i)
    for (int j = 0; j < 50; ++j) {
      const double t = 0.04 * i;
      const double x = j / 50.0;
      d1 = std::max(d1, std::abs(a.f1(t, x) - b.f1(t, x)));
      d2 = std::max(d2, std::abs(a.f2(t, x) - b.f2(t, x)));
      d3 = std::max(d3, std::abs(a.f3(t, x) - b.f3(t, x)));
    }
  CHECK(d1 <= 1e-12);
  CHECK(d2 <= 1e-8);
  CHECK(d3 <= 1e-8);

  const auto rs = build_kernel_table(m, KernelSpec::rational_sqrt());
  CHECK_THROWS_AS(manufactured_forcing(ForcingMode::ClosedForm, rs), ConfigError);
  CHECK_NOTHROW(manufactured_forcing(ForcingMode::Residual, rs));
}

TEST_CASE("residual forcing with a nonconstant kernel matches an independent residual") {
  using MS = ManufacturedSolution;
  const MeshPtr m = build_mesh(32);
  const auto table = build_kernel_table(m, KernelSpec::rational_sqrt());
  const Forcing f = manufactured_forcing(ForcingMode::Residual, table);
  const double t = 0.4;
  const double x = 0.3;
  // Convolutions of the exact fields with the exact periodized kernel.
  const double rp = oracle::integrate(
      [&](double y) { return oracle::rational_sqrt(x - y) * MS::rho(t, y); }, 0.0, 1.0);
  const double urp = oracle::integrate(
      [&](double y) { return oracle::rational_sqrt(x - y) * MS::rho(t, y) * MS::u(t, y); }, 0.0, 1.0);
  const double f3 = MS::u_t(t, x) + MS::u(t, x) * MS::u_x(t, x) -
                    MS::w(t, x) * (urp - MS::u(t, x) * rp);
  const double f2 = MS::w_t(t, x) + urp / rp * MS::w_x(t, x);
  // Kernel interpolation and its kink limit the agreement.
  CHECK(f.f2(t, x) == doctest::Approx(f2).epsilon(1e-5));
  CHECK(f.f3(t, x) == doctest::Approx(f3).epsilon(1e-5));
}

TEST_CASE("manufactured interpolation error is small") {
  const SimState s = manufactured_state(build_mesh(16), 0.3);
  CHECK(s.t == 0.3);
  const auto [e0, e1] = manufactured_errors(s);
  CHECK(e0 < 1e-6);
  CHECK(e1 > e0);
  CHECK(e1 < 1e-2);
}

TEST_CASE("loglog slope") {
  const std::vector<double> x{0.5, 0.25, 0.125, 0.0625};
  std::vector<double> y;
  for (double v : x) y.push_back(7 * v * v * v);
  CHECK(loglog_slope(x, y) == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("default convergence sweep") {
  const SweepResult r = convergence_sweep(SweepConfig{});
  REQUIRE(r.rows.size() == 5);
  for (std::size_t i = 0; i < r.rows.size(); ++i) {
    const SweepRow& row = r.rows[i];
    CHECK(row.level == static_cast<int>(i) + 2);
    CHECK(row.h == std::ldexp(1.0, -row.level));
    CHECK(row.k == doctest::Approx(row.h / 4).epsilon(1e-15));
    CHECK_FALSE(row.failure);
    if (i > 0) {
      CHECK(row.E0 < r.rows[i - 1].E0);
      CHECK(row.E1 < r.rows[i - 1].E1);
    }
  }
  CHECK(r.slope_E0 > 1.5);
  CHECK(r.slope_E1 > 1.5);
}

TEST_CASE("window metrics") {
  const MeshPtr m = build_mesh(20);
  const FEFunction u = FEFunction::constant(m, Space::P2, -2.0);
  CHECK(window_mean_abs(u, 0.15, 0.35) == doctest::Approx(2.0).epsilon(1e-12));
  const FEFunction rho = FEFunction::constant(m, Space::P3, 1.0);
  CHECK(window_centroid(rho, 0.0, 0.5) == doctest::Approx(0.25).epsilon(1e-12));
  const FEFunction lin =
      interpolate(m, Space::P2, [](double x) { return x < 0.5 ? x : 1 - x; });
  CHECK(window_mean_abs(lin, 0.0, 0.5) == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("comparison of a state with itself is zero") {
  const SimState s = manufactured_state(build_mesh(10), 0.0);
  const PairDifference d = state_difference(s, s);
  CHECK(d.sup_u == 0.0);
  CHECK(d.l2_u == 0.0);
  CHECK(d.rel_sup_u == 0.0);
  CHECK(d.sup_rho == 0.0);
}

TEST_CASE("model comparison on a coarse two-flock run") {
  ScenarioSpec spec;
  spec.num_elements = 40;
  spec.step.k = 0.05;
  spec.step.T = 0.5;
  spec.variants = {Variant::CuckerSmale, Variant::SModel, Variant::MotschTadmor};
  spec.sample_every = 5;
  const Comparison c = compare_models(spec);
  REQUIRE(c.runs.size() == 3);
  for (const VariantRun& r : c.runs) {
    CHECK_FALSE(r.result.failure);
    CHECK(r.result.records.size() == 3);
  }
  CHECK(c.differences.size() == 3 * 3);
  CHECK(c.small_flock.size() == 3 * 3);
  for (const SmallFlockMetric& s : c.small_flock)
    if (s.t == 0.0) CHECK(s.displacement == 0.0);
  for (const PairDifference& d : c.differences) {
    if (d.t == 0.0) {
      CHECK(d.sup_rho == 0.0);
      CHECK(d.sup_u == 0.0);
    }
    if (d.a == Variant::SModel && d.b == Variant::MotschTadmor) CHECK(d.rel_sup_u < 0.05);
  }
}

TEST_CASE("resolve builds per-variant runs") {
  ScenarioSpec spec;
  spec.name = "manufactured";
  spec.source = InitialSource::Manufactured;
  spec.num_elements = 8;
  spec.kernel = KernelSpec::constant();
  spec.forcing = ForcingMode::ClosedForm;
  spec.step.k = 1.0 / 32;
  spec.step.T = 0.25;
  const ResolvedRun r = resolve(spec, Variant::SModel);
  CHECK(r.cfg.variant == Variant::SModel);
  CHECK(r.cfg.forcing.has_value());
  CHECK(r.mesh->num_elements() == 8);
  const ResolvedRun mt = resolve(spec, Variant::MotschTadmor, r.table);
  CHECK(mt.table == r.table);
  // Constant kernel: rho_phi = 1 at t = 0, so the derived weight is 1.
  for (double c : mt.initial.w.coefficients()) CHECK(c == doctest::Approx(1.0).epsilon(1e-13));
}

TEST_CASE("nodal file roundtrip and errors") {
  const MeshPtr m = build_mesh(6);
  const SimState s = manufactured_state(m, 0.2);
  const FEFunction u3 =
      interpolate(m, Space::P3, [](double x) { return ManufacturedSolution::u(0.2, x); });
  const fs::path p = scratch("nodal.csv");
  {
    std::ofstream out(p);
    out << "# manufactured at t = 0.2\nnode_index,rho,w,u\n";
    for (std::size_t i = 0; i < s.rho.size(); ++i)
      out << fmt::format("{},{:.17g},{:.17g},{:.17g}\n", i, s.rho.coefficients()[i],
                         s.w.coefficients()[i], u3.coefficients()[i]);
  }
  const SimState r = load_nodal_state(m, p);
  for (std::size_t i = 0; i < s.rho.size(); ++i) {
    CHECK(r.rho.coefficients()[i] == s.rho.coefficients()[i]);
    CHECK(r.w.coefficients()[i] == s.w.coefficients()[i]);
  }
  for (double x : {0.0, 0.1, 0.33, 0.9})
    CHECK(r.u(x) == doctest::Approx(ManufacturedSolution::u(0.2, x)).epsilon(1e-3));

  const fs::path dup = scratch("dup.csv");
  {
    std::ofstream out(dup);
    for (int i = 0; i < 18; ++i) out << (i == 5 ? 4 : i) << ",1,1,0\n";
  }
  CHECK_THROWS_AS(load_nodal_state(m, dup), ConfigError);
  const fs::path missing = scratch("missing.csv");
  {
    std::ofstream out(missing);
    for (int i = 0; i < 17; ++i) out << i << ",1,1,0\n";
  }
  CHECK_THROWS_AS(load_nodal_state(m, missing), ConfigError);
  CHECK_THROWS_AS(load_nodal_state(m, scratch("absent.csv")), ConfigError);
}
