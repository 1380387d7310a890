#include <random>

#include "doctest.h"
#include "sgmm/linalg.hpp"

using namespace sgmm;

TEST_CASE("linalg: pseudo inverse recovers the true inverse on SPD input") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix b =
        Matrix::NullaryExpr(5, 5, [&](Index, Index) { return normal(rng); });
    Matrix a = b * b.transpose() + 0.5 * Matrix::Identity(5, 5);
    const Matrix inv = pseudo_inverse_sym(a);
    CHECK((a * inv - Matrix::Identity(5, 5)).norm() < 1e-10);
    CHECK((inv - inv.transpose()).norm() < 1e-12);
  }
}

TEST_CASE("linalg: pseudo inverse satisfies the Moore-Penrose identities on "
          "singular input") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 20; ++trial) {
    // rank 2 in dimension 4
    const Matrix b =
        Matrix::NullaryExpr(4, 2, [&](Index, Index) { return normal(rng); });
    Matrix a = b * b.transpose();
    symmetrize(a);
    const Matrix p = pseudo_inverse_sym(a);
    CHECK((a * p * a - a).norm() < 1e-9 * a.norm());
    CHECK((p * a * p - p).norm() < 1e-9 * p.norm());
    CHECK(((a * p) - (a * p).transpose()).norm() < 1e-9);
  }
}

TEST_CASE("linalg: pseudo inverse of zero is zero") {
  const Matrix z = Matrix::Zero(3, 3);
  CHECK(pseudo_inverse_sym(z).norm() == 0.0);
}

TEST_CASE("linalg: symmetrize averages off-diagonal pairs") {
  Matrix a(2, 2);
  a << 1.0, 4.0, 2.0, 5.0;
  symmetrize(a);
  CHECK(a(0, 0) == 1.0);
  CHECK(a(1, 1) == 5.0);
  CHECK(a(0, 1) == 3.0);
  CHECK(a(1, 0) == 3.0);
}

TEST_CASE("linalg: relative operator norm difference") {
  Matrix a = Matrix::Identity(3, 3);
  Matrix b = a;
  CHECK(rel_opnorm_diff(a, b) == 0.0);
  b(0, 0) = 1.0 + 1e-6;
  const double d = rel_opnorm_diff(a, b);
  CHECK(d == doctest::Approx(1e-6).epsilon(1e-3));
  CHECK(rel_opnorm_diff(Matrix::Zero(2, 2), Matrix::Zero(2, 2)) == 0.0);
}
