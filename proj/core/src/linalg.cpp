#include "flockfem/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include <fmt/core.h>

#include "flockfem/errors.hpp"

namespace flockfem {

namespace {

double dense_norm_inf(const std::vector<double>& a, int n) {
  double norm = 0.0;
  for (int i = 0; i < n; ++i) {
    double row = 0.0;
    for (int j = 0; j < n; ++j) row += std::abs(a[i * n + j]);
    norm = std::max(norm, row);
  }
  return norm;
}

// Banded LU with partial pivoting (no wrap-around). Row i stores columns
// [i - kl, i + kl + ku] so that row interchanges have room for fill-in.
class BandLU {
 public:
  BandLU(int n, int kl, int ku) : n_(n), kl_(kl), ku_(kl + ku),
      width_(2 * kl + ku + 1), data_(static_cast<std::size_t>(n) * width_, 0.0),
      piv_(n) {}

  double& at(int i, int j) { return data_[i * width_ + (j - i + kl_)]; }
  double at(int i, int j) const { return data_[i * width_ + (j - i + kl_)]; }

  void factor(double pivot_floor) {
    for (int k = 0; k < n_; ++k) {
      const int last_row = std::min(n_ - 1, k + kl_);
      const int last_col = std::min(n_ - 1, k + ku_);
      int r = k;
      for (int i = k + 1; i <= last_row; ++i)
        if (std::abs(at(i, k)) > std::abs(at(r, k))) r = i;
      piv_[k] = r;
      if (!(std::abs(at(r, k)) >= pivot_floor))
        throw SolverFailure(fmt::format(
            "singular pivot {:.3e} at row {} (floor {:.3e})", at(r, k), k,
            pivot_floor));
      if (r != k)
        for (int j = k; j <= last_col; ++j) std::swap(at(k, j), at(r, j));
      const double pivot = at(k, k);
      for (int i = k + 1; i <= last_row; ++i) {
        const double l = at(i, k) / pivot;
        at(i, k) = l;
        if (l == 0.0) continue;
        for (int j = k + 1; j <= last_col; ++j) at(i, j) -= l * at(k, j);
      }
    }
  }

  void solve_in_place(std::span<double> b) const {
    for (int k = 0; k < n_; ++k) {
      if (piv_[k] != k) std::swap(b[k], b[piv_[k]]);
      const int last_row = std::min(n_ - 1, k + kl_);
      for (int i = k + 1; i <= last_row; ++i) b[i] -= at(i, k) * b[k];
    }
    for (int k = n_ - 1; k >= 0; --k) {
      const int last_col = std::min(n_ - 1, k + ku_);
      double s = b[k];
      for (int j = k + 1; j <= last_col; ++j) s -= at(k, j) * b[j];
      b[k] = s / at(k, k);
    }
  }

 private:
  int n_;
  int kl_;
  int ku_;
  int width_;
  std::vector<double> data_;
  std::vector<int> piv_;
};

}  // namespace

DenseLU::DenseLU(std::vector<double> a, int n, double pivot_floor)
    : n_(n), lu_(std::move(a)), perm_(n) {
  if (pivot_floor < 0.0) pivot_floor = kSingularPivotRatio * dense_norm_inf(lu_, n);
  for (int i = 0; i < n; ++i) perm_[i] = i;
  for (int k = 0; k < n; ++k) {
    int r = k;
    for (int i = k + 1; i < n; ++i)
      if (std::abs(lu_[i * n + k]) > std::abs(lu_[r * n + k])) r = i;
    if (!(std::abs(lu_[r * n + k]) >= pivot_floor) || lu_[r * n + k] == 0.0)
      throw SolverFailure(fmt::format("singular pivot {:.3e} at row {}",
                                      lu_[r * n + k], k));
    if (r != k) {
      for (int j = 0; j < n; ++j) std::swap(lu_[k * n + j], lu_[r * n + j]);
      std::swap(perm_[k], perm_[r]);
    }
    for (int i = k + 1; i < n; ++i) {
      const double l = lu_[i * n + k] / lu_[k * n + k];
      lu_[i * n + k] = l;
      for (int j = k + 1; j < n; ++j) lu_[i * n + j] -= l * lu_[k * n + j];
    }
  }
}

std::vector<double> DenseLU::solve(std::span<const double> b) const {
  std::vector<double> x(n_);
  for (int i = 0; i < n_; ++i) x[i] = b[perm_[i]];
  for (int i = 0; i < n_; ++i)
    for (int j = 0; j < i; ++j) x[i] -= lu_[i * n_ + j] * x[j];
  for (int i = n_ - 1; i >= 0; --i) {
    for (int j = i + 1; j < n_; ++j) x[i] -= lu_[i * n_ + j] * x[j];
    x[i] /= lu_[i * n_ + i];
  }
  return x;
}

CyclicBandMatrix::CyclicBandMatrix(int n, int half_bandwidth)
    : n_(n), p_(half_bandwidth),
      band_(static_cast<std::size_t>(n) * (2 * half_bandwidth + 1), 0.0) {
  if (n <= 0 || half_bandwidth < 0)
    throw ConfigError("CyclicBandMatrix: invalid dimensions");
}

// Offsets are canonicalised so that aliasing offsets (possible when
// n <= 2p) always map to the same slot.
int CyclicBandMatrix::offset_slot(int i, int j) const {
  int d = ((j - i) % n_ + n_) % n_;
  if (d > p_) d -= n_;
  if (d < -p_)
    throw ConfigError(fmt::format(
        "CyclicBandMatrix: entry ({}, {}) outside half-bandwidth {}", i, j, p_));
  return i * (2 * p_ + 1) + d + p_;
}

double& CyclicBandMatrix::at(int i, int j) { return band_[offset_slot(i, j)]; }

double CyclicBandMatrix::operator()(int i, int j) const {
  int d = ((j - i) % n_ + n_) % n_;
  if (d > p_) d -= n_;
  if (d < -p_) return 0.0;
  return band_[i * (2 * p_ + 1) + d + p_];
}

double CyclicBandMatrix::norm_inf() const {
  double norm = 0.0;
  const int w = 2 * p_ + 1;
  for (int i = 0; i < n_; ++i) {
    double row = 0.0;
    for (int s = 0; s < w; ++s) row += std::abs(band_[i * w + s]);
    norm = std::max(norm, row);
  }
  return norm;
}

std::vector<double> CyclicBandMatrix::multiply(std::span<const double> x) const {
  std::vector<double> y(n_, 0.0);
  const int w = 2 * p_ + 1;
  for (int i = 0; i < n_; ++i) {
    double s = 0.0;
    for (int d = -p_; d <= p_; ++d) {
      if (2 * p_ >= n_) {
        // Aliased offsets: only canonical ones carry data.
        int c = ((d % n_) + n_) % n_;
        if (c > p_) c -= n_;
        if (c != d) continue;
      }
      const int j = ((i + d) % n_ + n_) % n_;
      s += band_[i * w + d + p_] * x[j];
    }
    y[i] = s;
  }
  return y;
}

std::vector<double> CyclicBandMatrix::to_dense() const {
  std::vector<double> a(static_cast<std::size_t>(n_) * n_, 0.0);
  for (int i = 0; i < n_; ++i)
    for (int j = 0; j < n_; ++j) a[i * n_ + j] = (*this)(i, j);
  return a;
}

std::vector<double> solve(const CyclicBandMatrix& a, std::span<const double> b) {
  const int n = a.size();
  const int p = a.half_bandwidth();
  if (static_cast<int>(b.size()) != n)
    throw ConfigError("solve: right-hand side size mismatch");
  const double pivot_floor = kSingularPivotRatio * a.norm_inf();

  if (n <= 4 * p + 1) {
    DenseLU lu(a.to_dense(), n, pivot_floor);
    return lu.solve(b);
  }

  // Partition with the last p unknowns as border:
  //   [B C] [x1]   [b1]
  //   [D E] [x2] = [b2]
  // B is strictly banded (no wrap) because n - p > 3p.
  const int nb = n - p;
  BandLU band(nb, p, p);
  for (int i = 0; i < nb; ++i)
    for (int j = std::max(0, i - p); j <= std::min(nb - 1, i + p); ++j)
      band.at(i, j) = a(i, j);
  band.factor(pivot_floor);

  // X = B^{-1} C, one column per border unknown.
  std::vector<std::vector<double>> x_cols(p, std::vector<double>(nb));
  for (int c = 0; c < p; ++c) {
    for (int i = 0; i < nb; ++i) x_cols[c][i] = a(i, nb + c);
    band.solve_in_place(x_cols[c]);
  }
  std::vector<double> y(b.begin(), b.begin() + nb);
  band.solve_in_place(y);

  // Schur complement S = E - D X and reduced rhs b2 - D y.
  std::vector<double> s(static_cast<std::size_t>(p) * p);
  std::vector<double> rhs(p);
  for (int r = 0; r < p; ++r) {
    const int row = nb + r;
    for (int c = 0; c < p; ++c) {
      double v = a(row, nb + c);
      for (int i = 0; i < nb; ++i) {
        const double d = a(row, i);
        if (d != 0.0) v -= d * x_cols[c][i];
      }
      s[r * p + c] = v;
    }
    double v = b[row];
    for (int i = 0; i < nb; ++i) {
      const double d = a(row, i);
      if (d != 0.0) v -= d * y[i];
    }
    rhs[r] = v;
  }
  DenseLU schur(std::move(s), p, pivot_floor);
  const std::vector<double> x2 = schur.solve(rhs);

  std::vector<double> x(n);
  for (int i = 0; i < nb; ++i) {
    double v = y[i];
    for (int c = 0; c < p; ++c) v -= x_cols[c][i] * x2[c];
    x[i] = v;
  }
  for (int c = 0; c < p; ++c) x[nb + c] = x2[c];
  return x;
}

}  // namespace flockfem
