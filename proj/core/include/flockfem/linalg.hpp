#pragma once

// Direct solvers: small dense LU with partial pivoting, and a cyclic banded
// matrix (periodic FE operators) solved by banded LU on the leading block
// plus a dense Schur complement for the wrap-around corner.

#include <span>
#include <vector>

namespace flockfem {

/// Relative pivot threshold: a pivot below this times ||A||_inf is treated
/// as singular.
inline constexpr double kSingularPivotRatio = 1e-14;

/// LU factorisation with partial pivoting of a dense row-major n x n matrix.
class DenseLU {
 public:
  /// Throws SolverFailure when a pivot falls below pivot_floor. A negative
  /// pivot_floor selects kSingularPivotRatio * ||A||_inf.
  DenseLU(std::vector<double> a, int n, double pivot_floor = -1.0);

  int size() const noexcept { return n_; }
  std::vector<double> solve(std::span<const double> b) const;

 private:
  int n_;
  std::vector<double> lu_;
  std::vector<int> perm_;
};

/// Square matrix whose nonzeros satisfy cyclic |i - j| <= half_bandwidth.
class CyclicBandMatrix {
 public:
  CyclicBandMatrix(int n, int half_bandwidth);

  int size() const noexcept { return n_; }
  int half_bandwidth() const noexcept { return p_; }

  /// Entry (i, j); j is interpreted modulo n and must lie within the band.
  double& at(int i, int j);
  double operator()(int i, int j) const;

  double norm_inf() const;
  std::vector<double> multiply(std::span<const double> x) const;
  std::vector<double> to_dense() const;

 private:
  int offset_slot(int i, int j) const;

  int n_;
  int p_;
  std::vector<double> band_;  // row i, slot (offset + p)
};

/// Solves A x = b. Throws SolverFailure on a singular pivot.
std::vector<double> solve(const CyclicBandMatrix& a, std::span<const double> b);

}  // namespace flockfem
