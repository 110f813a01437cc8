#include "flockfem/fem.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <fmt/core.h>

#include "flockfem/errors.hpp"

namespace flockfem {

Quadrature gauss_legendre(int num_points) {
  if (num_points < 1) throw ConfigError("gauss_legendre: need at least one point");
  const int n = num_points;
  Quadrature rule;
  rule.points.resize(n);
  rule.weights.resize(n);
  // Newton iteration on P_n from the Chebyshev-like initial guess, then map
  // [-1, 1] -> [0, 1].
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0;
      double p1 = 0.0;
      for (int j = 1; j <= n; ++j) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j - 1.0) * z * p1 - (j - 1.0) * p2) / j;
      }
      dp = n * (z * p0 - p1) / (z * z - 1.0);
      const double dz = p0 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    const double w = 2.0 / ((1.0 - z * z) * dp * dp);
    rule.points[i] = 0.5 * (1.0 - z);
    rule.points[n - 1 - i] = 0.5 * (1.0 + z);
    rule.weights[i] = 0.5 * w;
    rule.weights[n - 1 - i] = 0.5 * w;
  }
  if (n % 2 == 1) rule.points[n / 2] = 0.5;
  return rule;
}

LocalBasis::LocalBasis(int order) : order_(order) {
  if (order != 2 && order != 3)
    throw ConfigError(fmt::format("LocalBasis: unsupported order {}", order));
  const int m = order + 1;
  nodes_.resize(m);
  for (int j = 0; j < m; ++j) nodes_[j] = static_cast<double>(j) / order;
  nodes_.back() = 1.0;

  // psi_k = prod_{j != k} (s - j) / (k - j) with s = order * xi. The nodes
  // are integers in s, so every coefficient below is computed exactly.
  coeffs_.assign(m * m, 0.0);
  for (int k = 0; k < m; ++k) {
    std::vector<double> poly{1.0};
    double denom = 1.0;
    for (int j = 0; j < m; ++j) {
      if (j == k) continue;
      std::vector<double> next(poly.size() + 1, 0.0);
      for (std::size_t p = 0; p < poly.size(); ++p) {
        next[p + 1] += poly[p];
        next[p] -= j * poly[p];
      }
      poly = std::move(next);
      denom *= k - j;
    }
    double scale = 1.0;
    for (int p = 0; p < m; ++p, scale *= order) coeffs_[k * m + p] = poly[p] * scale / denom;
  }
}

double LocalBasis::value(int k, double xi) const {
  double v = 0.0;
  for (int p = order_; p >= 0; --p) v = v * xi + coeff(k, p);
  return v;
}

double LocalBasis::derivative(int k, double xi) const {
  double v = 0.0;
  for (int p = order_; p >= 1; --p) v = v * xi + p * coeff(k, p);
  return v;
}

LocalBasis build_local_basis(int order) { return LocalBasis(order); }

PeriodicMesh::PeriodicMesh(int num_elements, int quad_order)
    : num_elements_(num_elements), quad_order_(quad_order),
      h_(1.0 / num_elements), quad_(gauss_legendre(quad_order)), p2_(2), p3_(3) {
  p2_table_ = tabulate(p2_);
  p3_table_ = tabulate(p3_);
  quad_x_.resize(num_quad_points());
  quad_w_.resize(num_quad_points());
  for (int e = 0; e < num_elements_; ++e) {
    for (int q = 0; q < quad_order_; ++q) {
      quad_x_[e * quad_order_ + q] =
          (static_cast<double>(e) + quad_.points[q]) / num_elements_;
      quad_w_[e * quad_order_ + q] = quad_.weights[q] * h_;
    }
  }
}

PeriodicMesh::BasisTable PeriodicMesh::tabulate(const LocalBasis& basis) const {
  BasisTable t;
  const int m = basis.size();
  t.value.resize(quad_order_ * m);
  t.dx.resize(quad_order_ * m);
  for (int q = 0; q < quad_order_; ++q) {
    for (int k = 0; k < m; ++k) {
      t.value[q * m + k] = basis.value(k, quad_.points[q]);
      t.dx[q * m + k] = basis.derivative(k, quad_.points[q]) * num_elements_;
    }
  }
  return t;
}

std::pair<int, double> PeriodicMesh::locate(double x) const noexcept {
  double y = x - std::floor(x);
  if (y >= 1.0) y = 0.0;
  const double s = y * num_elements_;
  int e = static_cast<int>(std::floor(s));
  if (e >= num_elements_) e = num_elements_ - 1;
  if (e < 0) e = 0;
  return {e, s - e};
}

MeshPtr build_mesh(int num_elements, int quad_order) {
  if (num_elements < 2)
    throw ConfigError(fmt::format(
        "num_elements must be at least 2 (got {})", num_elements));
  if (quad_order < 4)
    throw ConfigError(fmt::format(
        "quad_order must be at least 4 to integrate the assembled products "
        "(got {})", quad_order));
  return std::make_shared<const PeriodicMesh>(num_elements, quad_order);
}

FEFunction::FEFunction(MeshPtr mesh, Space space, std::vector<double> coefficients)
    : mesh_(std::move(mesh)), space_(space), coeffs_(std::move(coefficients)) {
  if (!mesh_) throw ConfigError("FEFunction: null mesh");
  if (static_cast<int>(coeffs_.size()) != mesh_->num_dofs(space_))
    throw ConfigError(fmt::format(
        "FEFunction: {} coefficients given, space needs {}", coeffs_.size(),
        mesh_->num_dofs(space_)));
}

FEFunction FEFunction::constant(MeshPtr mesh, Space space, double value) {
  const int n = mesh->num_dofs(space);
  return FEFunction(std::move(mesh), space, std::vector<double>(n, value));
}

double FEFunction::evaluate_local(int element, double xi, int deriv) const {
  const LocalBasis& basis = mesh_->basis(space_);
  double v = 0.0;
  for (int k = 0; k < basis.size(); ++k) {
    const double c = coeffs_[mesh_->dof(space_, element, k)];
    v += c * (deriv == 0 ? basis.value(k, xi) : basis.derivative(k, xi));
  }
  return deriv == 0 ? v : v * mesh_->num_elements();
}

double FEFunction::evaluate(double x, int deriv) const {
  const auto [e, xi] = mesh_->locate(x);
  return evaluate_local(e, xi, deriv);
}

QuadSamples FEFunction::at_quad(int deriv) const {
  const PeriodicMesh& mesh = *mesh_;
  const int nq = mesh.quad_order();
  const int m = order_of(space_) + 1;
  QuadSamples out(mesh.num_quad_points(), 0.0);
  for (int e = 0; e < mesh.num_elements(); ++e) {
    for (int q = 0; q < nq; ++q) {
      double v = 0.0;
      for (int k = 0; k < m; ++k) {
        const double c = coeffs_[mesh.dof(space_, e, k)];
        v += c * (deriv == 0 ? mesh.basis_at_quad(space_, q, k)
                             : mesh.basis_dx_at_quad(space_, q, k));
      }
      out[e * nq + q] = v;
    }
  }
  return out;
}

std::vector<double> FEFunction::at_dense(int per_element, int deriv) const {
  const std::vector<double> offsets = dense_offsets(per_element);
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(mesh_->num_elements()) * per_element);
  for (int e = 0; e < mesh_->num_elements(); ++e)
    for (double xi : offsets) out.push_back(evaluate_local(e, xi, deriv));
  return out;
}

FEFunction interpolate(MeshPtr mesh, Space space, const PointFunction& f) {
  const int n = mesh->num_dofs(space);
  std::vector<double> c(n);
  for (int i = 0; i < n; ++i) {
    const double x = mesh->node_position(space, i);
    c[i] = f(x);
    if (!std::isfinite(c[i]))
      throw ConfigError(fmt::format(
          "interpolate: non-finite value {} at node {} (x = {:.17g})", c[i], i, x));
  }
  return FEFunction(std::move(mesh), space, std::move(c));
}

std::vector<double> dense_offsets(int per_element) {
  std::vector<double> xi(per_element);
  for (int j = 0; j < per_element; ++j) xi[j] = (j + 0.5) / per_element;
  return xi;
}

std::vector<double> dense_sample_points(const PeriodicMesh& mesh,
                                        int per_element) {
  const std::vector<double> offsets = dense_offsets(per_element);
  std::vector<double> x;
  x.reserve(static_cast<std::size_t>(mesh.num_elements()) * per_element);
  for (int e = 0; e < mesh.num_elements(); ++e)
    for (double xi : offsets) x.push_back((e + xi) * mesh.h());
  return x;
}

double integrate(const PeriodicMesh& mesh, std::span<const double> values) {
  const auto w = mesh.quad_weights();
  double s = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) s += w[i] * values[i];
  return s;
}

double error_norm(const FEFunction& f, const RefFunction& ref, Norm which,
                  int dense_per_element) {
  const PeriodicMesh& mesh = f.mesh();
  if (which == Norm::Linf) {
    const std::vector<double> x = dense_sample_points(mesh, dense_per_element);
    const std::vector<double> v = f.at_dense(dense_per_element, 0);
    double err = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i)
      err = std::max(err, std::abs(v[i] - ref.value(x[i])));
    return err;
  }
  const auto xq = mesh.quad_points();
  const bool grad = which == Norm::H1Semi;
  const QuadSamples v = f.at_quad(grad ? 1 : 0);
  const PointFunction& r = grad ? ref.derivative : ref.value;
  if (!r) throw ConfigError("error_norm: reference derivative missing");
  QuadSamples d(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double diff = v[i] - r(xq[i]);
    d[i] = which == Norm::L1 ? std::abs(diff) : diff * diff;
  }
  const double s = integrate(mesh, d);
  return which == Norm::L1 ? s : std::sqrt(s);
}

}  // namespace flockfem
