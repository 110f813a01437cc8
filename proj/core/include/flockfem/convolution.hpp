#pragma once

// Convolutions on the unit torus with the interpolated communication kernel
// phi_h, and the Favre-filtered velocity u_F = (u rho)_phi / rho_phi.

#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "flockfem/fem.hpp"

namespace flockfem {

enum class KernelKind { RationalSqrt, Constant, CustomTable };

/// Radial kernel profile phi(d) for torus distances d in [0, 1/2].
struct KernelSpec {
  KernelKind kind = KernelKind::RationalSqrt;
  std::string name;
  std::function<double(double)> profile;

  /// phi(d) = 1 / sqrt(1 + d^2)
  static KernelSpec rational_sqrt();
  /// phi == 1
  static KernelSpec constant();
  /// Monotone cubic (PCHIP) interpolation of (distance, value) samples.
  /// Distances must be strictly increasing and cover [0, 1/2]; values must
  /// be nonnegative.
  static KernelSpec from_table(std::vector<double> distances,
                               std::vector<double> values);
  /// Two-column CSV "distance,value", optional header line.
  static KernelSpec from_csv(const std::filesystem::path& path);
};

std::string to_string(KernelKind kind);

/// Distance to the nearest integer, in [0, 1/2].
double torus_distance(double d) noexcept;

/// Norms of phi_h used by the alignment and small-data estimates.
struct KernelConstants {
  double integral = 0.0;     // Phi = ||phi_h||_{L1(T)}
  double sup = 0.0;          // ||phi_h||_inf
  double lipschitz = 0.0;    // ||phi_h'||_inf
  double lower_bound = 0.0;  // c1 = min phi_h
};

/// phi_h = P3 interpolant of x -> phi(torus_distance(x)) together with its
/// values at every (quadrature point, quadrature point) pair. On a uniform
/// periodic mesh the pair value only depends on the element offset and the
/// two local quadrature indices, so the table is stored in that circulant
/// form (num_elements * Q * Q entries).
class KernelTable {
 public:
  KernelTable(MeshPtr mesh, const KernelSpec& spec);

  const PeriodicMesh& mesh() const noexcept { return *mesh_; }
  const MeshPtr& mesh_ptr() const noexcept { return mesh_; }
  const KernelSpec& spec() const noexcept { return spec_; }
  const FEFunction& phi_h() const noexcept { return phi_h_; }
  const KernelConstants& constants() const noexcept { return constants_; }

  /// phi_h at an arbitrary (wrapped) difference.
  double phi(double difference) const { return phi_h_.evaluate(difference); }

  /// Table entry phi_h(x_a - x_b) for global quadrature indices a, b.
  double pair(int a, int b) const noexcept;

  /// (f)_phi at every quadrature point, from quadrature samples of f.
  QuadSamples convolve_at_quad(std::span<const double> f_quad) const;

  /// (f)_phi at the points e*h + xi*h for every element e and every local
  /// offset xi (element-major output).
  std::vector<double> convolve_at_offsets(std::span<const double> f_quad,
                                          std::span<const double> offsets) const;

  /// (f)_phi at arbitrary points.
  std::vector<double> convolve_at_points(std::span<const double> f_quad,
                                         std::span<const double> points) const;

 private:
  std::vector<double> circulant(std::span<const double> offsets) const;
  std::vector<double> contract(std::span<const double> f_quad,
                               std::span<const double> table,
                               int num_offsets) const;

  MeshPtr mesh_;
  KernelSpec spec_;
  FEFunction phi_h_;
  KernelConstants constants_;
  std::vector<double> quad_table_;  // [shift][q_target][q_source]
};

using KernelTablePtr = std::shared_ptr<const KernelTable>;

/// Throws ConfigError for an invalid spec (negative custom entries, ...).
KernelTablePtr build_kernel_table(MeshPtr mesh, const KernelSpec& spec);

/// f_phi at the quadrature points for an FE function f.
QuadSamples convolve(const FEFunction& f, const KernelTable& table);

/// Favre velocity at the quadrature points. The product u*rho is formed
/// pointwise at the quadrature points before convolving. Throws
/// FloorViolation when rho_phi < rho_phi_floor anywhere.
QuadSamples favre_velocity(const FEFunction& u, const FEFunction& rho,
                           const KernelTable& table,
                           double rho_phi_floor = 1e-10);

/// Favre velocity at arbitrary points.
std::vector<double> favre_velocity(const FEFunction& u, const FEFunction& rho,
                                   const KernelTable& table,
                                   std::span<const double> points,
                                   double rho_phi_floor = 1e-10);

}  // namespace flockfem
