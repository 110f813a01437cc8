#include <cmath>
#include <random>

#include "doctest.h"
#include "flockfem/errors.hpp"
#include "flockfem/linalg.hpp"
#include "oracles.hpp"

using namespace flockfem;

namespace {

CyclicBandMatrix random_band(int n, int p, double diag_boost, std::mt19937& gen) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  CyclicBandMatrix a(n, p);
  for (int i = 0; i < n; ++i)
    for (int d = -p; d <= p; ++d) a.at(i, ((i + d) % n + n) % n) = u(gen);
  for (int i = 0; i < n; ++i) a.at(i, i) += diag_boost;
  return a;
}

Eigen::MatrixXd dense(const CyclicBandMatrix& a) {
  const std::vector<double> d = a.to_dense();
  Eigen::MatrixXd m(a.size(), a.size());
  for (int i = 0; i < a.size(); ++i)
    for (int j = 0; j < a.size(); ++j) m(i, j) = d[i * a.size() + j];
  return m;
}

}  // namespace

TEST_CASE("banded solve agrees with Eigen across sizes and bandwidths") {
  std::mt19937 gen(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int p : {1, 2, 3}) {
    for (int n : {3, 5, 8, 13, 14, 15, 30, 61, 300}) {
      if (n < 2 * p + 1) continue;
      for (double boost : {0.0, 4.0}) {
        const CyclicBandMatrix a = random_band(n, p, boost, gen);
        std::vector<double> b(n);
        for (double& v : b) v = u(gen);
        const Eigen::MatrixXd m = dense(a);
        const Eigen::VectorXd ref =
            m.fullPivLu().solve(Eigen::Map<const Eigen::VectorXd>(b.data(), n));
        const std::vector<double> x = solve(a, b);
        const double cond = m.norm() * m.inverse().norm();
        double err = 0.0;
        for (int i = 0; i < n; ++i) err = std::max(err, std::abs(x[i] - ref(i)));
        CHECK_MESSAGE(err <= 1e-13 * std::max(1.0, cond) * ref.cwiseAbs().maxCoeff(),
                      "n=" << n << " p=" << p << " err=" << err << " cond=" << cond);
      }
    }
  }
}

TEST_CASE("multiply matches the dense product") {
  std::mt19937 gen(5);
  const CyclicBandMatrix a = random_band(12, 3, 0.0, gen);
  std::vector<double> x(12);
  for (int i = 0; i < 12; ++i) x[i] = std::sin(i + 1.0);
  const std::vector<double> y = a.multiply(x);
  const Eigen::VectorXd ref = dense(a) * Eigen::Map<const Eigen::VectorXd>(x.data(), 12);
  for (int i = 0; i < 12; ++i) CHECK(y[i] == doctest::Approx(ref(i)).epsilon(1e-14));
}

TEST_CASE("band storage wraps the periodic corner entries") {
  CyclicBandMatrix a(10, 2);
  a.at(0, 9) = 1.5;
  a.at(9, 0) = -2.0;
  a.at(1, 9) = 3.0;
  CHECK(a(0, 9) == 1.5);
  CHECK(a(9, 0) == -2.0);
  CHECK(a(1, 9) == 3.0);
  CHECK(a(0, 5) == 0.0);
  CHECK_THROWS(a.at(0, 5));
}

TEST_CASE("singular systems are reported") {
  CyclicBandMatrix a(20, 1);
  // Circulant second difference: constant vector is in the kernel.
  for (int i = 0; i < 20; ++i) {
    a.at(i, i) = 2.0;
    a.at(i, (i + 1) % 20) = -1.0;
    a.at(i, (i + 19) % 20) = -1.0;
  }
  std::vector<double> b(20, 0.0);
  b[3] = 1.0;
  CHECK_THROWS_AS(solve(a, b), SolverFailure);

  CyclicBandMatrix z(4, 1);
  CHECK_THROWS_AS(solve(z, std::vector<double>(4, 1.0)), SolverFailure);
}

TEST_CASE("dense LU solves a pivoting-sensitive system") {
  // Zero leading entry forces a row swap.
  const std::vector<double> a = {0.0, 1.0, 1.0, 1.0};
  const DenseLU lu(a, 2);
  const std::vector<double> x = lu.solve(std::vector<double>{2.0, 3.0});
  CHECK(x[0] == doctest::Approx(1.0));
  CHECK(x[1] == doctest::Approx(2.0));
}
