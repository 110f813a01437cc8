#include "flockfem/convolution.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

// The Boost 1.74 pchip header calls isnan unqualified.
using std::isnan;
#include <boost/math/interpolators/pchip.hpp>
#include <fmt/core.h>

#include "flockfem/errors.hpp"

namespace flockfem {

KernelSpec KernelSpec::rational_sqrt() {
  return {KernelKind::RationalSqrt, "rational_sqrt",
          [](double d) { return 1.0 / std::sqrt(1.0 + d * d); }};
}

KernelSpec KernelSpec::constant() {
  return {KernelKind::Constant, "constant", [](double) { return 1.0; }};
}

KernelSpec KernelSpec::from_table(std::vector<double> distances,
                                  std::vector<double> values) {
  if (distances.size() != values.size())
    throw ConfigError("kernel table: column lengths differ");
  if (distances.size() < 4)
    throw ConfigError("kernel table: need at least 4 rows");
  for (std::size_t i = 0; i < distances.size(); ++i) {
    if (!std::isfinite(distances[i]) || !std::isfinite(values[i]))
      throw ConfigError(fmt::format("kernel table: non-finite entry in row {}", i));
    if (values[i] < 0.0)
      throw ConfigError(fmt::format(
          "kernel table: negative value {} at distance {}", values[i], distances[i]));
    if (i > 0 && !(distances[i] > distances[i - 1]))
      throw ConfigError(fmt::format(
          "kernel table: distances not strictly increasing at row {}", i));
    if (i > 0 && values[i] > values[i - 1])
      throw ConfigError(fmt::format(
          "kernel table: kernel increases with distance at row {}", i));
  }
  if (distances.front() != 0.0 || distances.back() != 0.5)
    throw ConfigError("kernel table: distances must span exactly [0, 0.5]");
  using Pchip = boost::math::interpolators::pchip<std::vector<double>>;
  auto spline = std::make_shared<Pchip>(std::move(distances), std::move(values));
  return {KernelKind::CustomTable, "custom_table",
          [spline](double d) { return std::max(0.0, (*spline)(d)); }};
}

KernelSpec KernelSpec::from_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot open kernel table '{}'", path.string()));
  std::vector<double> d;
  std::vector<double> v;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream row(line);
    double a = 0.0;
    double b = 0.0;
    if (!(row >> a >> b)) {
      if (d.empty() && line_no == 1) continue;  // header
      throw ConfigError(fmt::format("{}:{}: expected 'distance,value'",
                                    path.string(), line_no));
    }
    d.push_back(a);
    v.push_back(b);
  }
  return from_table(std::move(d), std::move(v));
}

std::string to_string(KernelKind kind) {
  switch (kind) {
    case KernelKind::RationalSqrt: return "rational_sqrt";
    case KernelKind::Constant: return "constant";
    case KernelKind::CustomTable: return "custom_table";
  }
  return "unknown";
}

double torus_distance(double d) noexcept {
  const double y = d - std::floor(d);
  return std::min(y, 1.0 - y);
}

namespace {

KernelConstants measure(const FEFunction& phi_h) {
  const PeriodicMesh& mesh = phi_h.mesh();
  KernelConstants c;
  c.integral = integrate(mesh, phi_h.at_quad(0));
  c.sup = -std::numeric_limits<double>::infinity();
  c.lower_bound = std::numeric_limits<double>::infinity();
  // Nodes plus 20 interior points per element; derivatives are one-sided at
  // element ends because phi_h' may jump there.
  std::vector<double> xi = dense_offsets(20);
  xi.insert(xi.begin(), 0.0);
  xi.push_back(1.0);
  for (int e = 0; e < mesh.num_elements(); ++e) {
    for (double s : xi) {
      const double v = phi_h.evaluate_local(e, s, 0);
      c.sup = std::max(c.sup, v);
      c.lower_bound = std::min(c.lower_bound, v);
      c.lipschitz = std::max(c.lipschitz, std::abs(phi_h.evaluate_local(e, s, 1)));
    }
  }
  return c;
}

FEFunction interpolate_kernel(const MeshPtr& mesh, const KernelSpec& spec) {
  if (!spec.profile) throw ConfigError("kernel spec without profile");
  const auto& profile = spec.profile;
  FEFunction phi = interpolate(mesh, Space::P3,
                               [&](double x) { return profile(torus_distance(x)); });
  for (double c : phi.coefficients())
    if (c < 0.0)
      throw ConfigError(fmt::format("kernel '{}' is negative ({})", spec.name, c));
  return phi;
}

}  // namespace

KernelTable::KernelTable(MeshPtr mesh, const KernelSpec& spec)
    : mesh_(std::move(mesh)), spec_(spec),
      phi_h_(interpolate_kernel(mesh_, spec)), constants_(measure(phi_h_)) {
  const auto& xi = mesh_->reference_quadrature().points;
  quad_table_ = circulant(xi);
}

std::vector<double> KernelTable::circulant(std::span<const double> offsets) const {
  const int m = mesh_->num_elements();
  const int nq = mesh_->quad_order();
  const int ns = static_cast<int>(offsets.size());
  const auto& xi = mesh_->reference_quadrature().points;
  std::vector<double> t(static_cast<std::size_t>(m) * ns * nq);
  for (int shift = 0; shift < m; ++shift)
    for (int s = 0; s < ns; ++s)
      for (int b = 0; b < nq; ++b)
        t[(static_cast<std::size_t>(shift) * ns + s) * nq + b] =
            phi_h_.evaluate((shift + offsets[s] - xi[b]) / m);
  return t;
}

double KernelTable::pair(int a, int b) const noexcept {
  const int m = mesh_->num_elements();
  const int nq = mesh_->quad_order();
  const int shift = ((a / nq - b / nq) % m + m) % m;
  return quad_table_[(static_cast<std::size_t>(shift) * nq + a % nq) * nq + b % nq];
}

std::vector<double> KernelTable::contract(std::span<const double> f_quad,
                                          std::span<const double> table,
                                          int ns) const {
  const int m = mesh_->num_elements();
  const int nq = mesh_->quad_order();
  const auto w = mesh_->quad_weights();
  std::vector<double> fw(f_quad.size());
  for (std::size_t i = 0; i < fw.size(); ++i) fw[i] = w[i] * f_quad[i];

  std::vector<double> out(static_cast<std::size_t>(m) * ns, 0.0);
  for (int e = 0; e < m; ++e) {
    for (int s = 0; s < ns; ++s) {
      double acc = 0.0;
      for (int shift = 0; shift < m; ++shift) {
        const int src = (e - shift + m) % m;
        const double* row = &table[(static_cast<std::size_t>(shift) * ns + s) * nq];
        const double* f = &fw[static_cast<std::size_t>(src) * nq];
        for (int b = 0; b < nq; ++b) acc += row[b] * f[b];
      }
      out[static_cast<std::size_t>(e) * ns + s] = acc;
    }
  }
  return out;
}

QuadSamples KernelTable::convolve_at_quad(std::span<const double> f_quad) const {
  return contract(f_quad, quad_table_, mesh_->quad_order());
}

std::vector<double> KernelTable::convolve_at_offsets(
    std::span<const double> f_quad, std::span<const double> offsets) const {
  const std::vector<double> table = circulant(offsets);
  return contract(f_quad, table, static_cast<int>(offsets.size()));
}

std::vector<double> KernelTable::convolve_at_points(
    std::span<const double> f_quad, std::span<const double> points) const {
  const auto y = mesh_->quad_points();
  const auto w = mesh_->quad_weights();
  std::vector<double> out(points.size(), 0.0);
  for (std::size_t i = 0; i < points.size(); ++i) {
    double acc = 0.0;
    for (std::size_t b = 0; b < y.size(); ++b)
      acc += w[b] * f_quad[b] * phi_h_.evaluate(points[i] - y[b]);
    out[i] = acc;
  }
  return out;
}

KernelTablePtr build_kernel_table(MeshPtr mesh, const KernelSpec& spec) {
  return std::make_shared<const KernelTable>(std::move(mesh), spec);
}

QuadSamples convolve(const FEFunction& f, const KernelTable& table) {
  return table.convolve_at_quad(f.at_quad(0));
}

namespace {

QuadSamples product(const QuadSamples& a, const QuadSamples& b) {
  QuadSamples p(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) p[i] = a[i] * b[i];
  return p;
}

std::vector<double> divide_checked(const std::vector<double>& num,
                                   const std::vector<double>& den,
                                   std::span<const double> locations,
                                   double floor) {
  std::vector<double> out(num.size());
  std::size_t worst = 0;
  for (std::size_t i = 0; i < den.size(); ++i)
    if (den[i] < den[worst]) worst = i;
  if (!(den[worst] >= floor))
    throw FloorViolation(
        fmt::format("rho_phi = {:.6e} below floor {:.1e} at x = {:.6f}",
                    den[worst], floor, locations[worst]),
        den[worst], locations[worst]);
  for (std::size_t i = 0; i < num.size(); ++i) out[i] = num[i] / den[i];
  return out;
}

}  // namespace

QuadSamples favre_velocity(const FEFunction& u, const FEFunction& rho,
                           const KernelTable& table, double rho_phi_floor) {
  const QuadSamples rq = rho.at_quad(0);
  const QuadSamples num = table.convolve_at_quad(product(u.at_quad(0), rq));
  const QuadSamples den = table.convolve_at_quad(rq);
  return divide_checked(num, den, table.mesh().quad_points(), rho_phi_floor);
}

std::vector<double> favre_velocity(const FEFunction& u, const FEFunction& rho,
                                   const KernelTable& table,
                                   std::span<const double> points,
                                   double rho_phi_floor) {
  const QuadSamples rq = rho.at_quad(0);
  const std::vector<double> num =
      table.convolve_at_points(product(u.at_quad(0), rq), points);
  const std::vector<double> den = table.convolve_at_points(rq, points);
  return divide_checked(num, den, points, rho_phi_floor);
}

}  // namespace flockfem
