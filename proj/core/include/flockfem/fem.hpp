#pragma once

// Periodic 1D finite elements: Gauss-Legendre quadrature, Lagrange bases of
// order 2 and 3, the uniform periodic mesh and continuous piecewise
// polynomial functions living on it.

#include <array>
#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace flockfem {

/// Continuous piecewise-polynomial space. The enumerator value is the
/// polynomial order.
enum class Space { P2 = 2, P3 = 3 };

constexpr int order_of(Space s) noexcept { return static_cast<int>(s); }

/// Gauss-Legendre rule mapped to the reference element [0, 1].
struct Quadrature {
  std::vector<double> points;
  std::vector<double> weights;  // sums to 1

  std::size_t size() const noexcept { return points.size(); }
};

Quadrature gauss_legendre(int num_points);

/// Lagrange basis on the reference element [0, 1] with equispaced nodes.
/// Row k of the coefficient matrix holds the monomial coefficients of psi_k,
/// obtained by inverting the Vandermonde matrix at the nodes.
class LocalBasis {
 public:
  explicit LocalBasis(int order);

  int order() const noexcept { return order_; }
  int size() const noexcept { return order_ + 1; }
  std::span<const double> nodes() const noexcept { return nodes_; }

  /// Coefficient of xi^power in psi_k.
  double coeff(int k, int power) const { return coeffs_[k * size() + power]; }

  double value(int k, double xi) const;
  /// d psi_k / d xi
  double derivative(int k, double xi) const;

 private:
  int order_;
  std::vector<double> nodes_;
  std::vector<double> coeffs_;
};

LocalBasis build_local_basis(int order);

/// Uniform partition of the unit torus [0, 1) into num_elements elements.
/// Owns the quadrature rule and the basis tables at the quadrature points.
class PeriodicMesh {
 public:
  PeriodicMesh(int num_elements, int quad_order);

  int num_elements() const noexcept { return num_elements_; }
  double h() const noexcept { return h_; }
  int quad_order() const noexcept { return quad_order_; }
  const Quadrature& reference_quadrature() const noexcept { return quad_; }

  double element_left(int e) const noexcept {
    return static_cast<double>(e) / num_elements_;
  }

  /// Quadrature points of all elements, element-major (index e*Q + q).
  int num_quad_points() const noexcept { return num_elements_ * quad_order_; }
  std::span<const double> quad_points() const noexcept { return quad_x_; }
  /// Physical weights h * w_q, same layout as quad_points().
  std::span<const double> quad_weights() const noexcept { return quad_w_; }

  const LocalBasis& basis(Space s) const noexcept {
    return s == Space::P3 ? p3_ : p2_;
  }

  int num_dofs(Space s) const noexcept { return order_of(s) * num_elements_; }
  int dof(Space s, int element, int local) const noexcept {
    const int n = num_dofs(s);
    return (order_of(s) * element + local) % n;
  }
  double node_position(Space s, int dof) const noexcept {
    return static_cast<double>(dof) / num_dofs(s);
  }

  /// psi_k(xi_q) and d psi_k/dx (x = physical coordinate) at reference
  /// quadrature point q.
  double basis_at_quad(Space s, int q, int k) const noexcept {
    return table(s).value[q * (order_of(s) + 1) + k];
  }
  double basis_dx_at_quad(Space s, int q, int k) const noexcept {
    return table(s).dx[q * (order_of(s) + 1) + k];
  }

  /// Wraps x into [0, 1) and returns the containing element and the local
  /// coordinate in [0, 1].
  std::pair<int, double> locate(double x) const noexcept;

 private:
  struct BasisTable {
    std::vector<double> value;
    std::vector<double> dx;
  };
  const BasisTable& table(Space s) const noexcept {
    return s == Space::P3 ? p3_table_ : p2_table_;
  }
  BasisTable tabulate(const LocalBasis& basis) const;

  int num_elements_;
  int quad_order_;
  double h_;
  Quadrature quad_;
  LocalBasis p2_;
  LocalBasis p3_;
  BasisTable p2_table_;
  BasisTable p3_table_;
  std::vector<double> quad_x_;
  std::vector<double> quad_w_;
};

using MeshPtr = std::shared_ptr<const PeriodicMesh>;

/// Rejects num_elements < 2 and quad_order < 4 with ConfigError.
MeshPtr build_mesh(int num_elements, int quad_order = 6);

/// Values of some field at every quadrature point of a mesh (element-major).
using QuadSamples = std::vector<double>;

/// Nodal representation of a continuous piecewise P2/P3 function. The node
/// at x = 1 is identified with x = 0, so there are order * num_elements
/// coefficients.
class FEFunction {
 public:
  FEFunction(MeshPtr mesh, Space space, std::vector<double> coefficients);

  static FEFunction constant(MeshPtr mesh, Space space, double value);

  Space space() const noexcept { return space_; }
  const PeriodicMesh& mesh() const noexcept { return *mesh_; }
  const MeshPtr& mesh_ptr() const noexcept { return mesh_; }
  std::span<const double> coefficients() const noexcept { return coeffs_; }
  std::size_t size() const noexcept { return coeffs_.size(); }

  /// deriv = 0: value, deriv = 1: derivative taken inside the element that
  /// contains x (right-sided at element boundaries).
  double evaluate(double x, int deriv = 0) const;
  double evaluate_local(int element, double xi, int deriv = 0) const;
  double operator()(double x) const { return evaluate(x, 0); }

  QuadSamples at_quad(int deriv = 0) const;

  /// Samples at `per_element` equispaced interior points of every element;
  /// see dense_sample_points().
  std::vector<double> at_dense(int per_element, int deriv = 0) const;

 private:
  MeshPtr mesh_;
  Space space_;
  std::vector<double> coeffs_;
};

using PointFunction = std::function<double(double)>;

/// Nodal interpolant. Throws ConfigError naming the node if f is not finite
/// there.
FEFunction interpolate(MeshPtr mesh, Space space, const PointFunction& f);

inline double evaluate(const FEFunction& f, double x, int deriv = 0) {
  return f.evaluate(x, deriv);
}

/// Interior sampling offsets (j + 1/2) / per_element used for sup-norms.
std::vector<double> dense_offsets(int per_element);
std::vector<double> dense_sample_points(const PeriodicMesh& mesh,
                                        int per_element);

enum class Norm { L2, H1Semi, L1, Linf };

/// Reference function with its derivative (derivative only used for H1Semi).
struct RefFunction {
  PointFunction value;
  PointFunction derivative;
};

/// ||f - ref|| in the requested norm. L2/H1Semi/L1 use the mesh quadrature,
/// Linf uses `dense_per_element` interior samples per element.
double error_norm(const FEFunction& f, const RefFunction& ref, Norm which,
                  int dense_per_element = 10);

/// Sum of w * values over the mesh quadrature.
double integrate(const PeriodicMesh& mesh, std::span<const double> values);

}  // namespace flockfem
