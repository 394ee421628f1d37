#include <doctest.h>

#include "fakeseg/rng.hpp"
#include "fakeseg/ssf.hpp"
#include "oracles.hpp"

using namespace fakeseg;

namespace {

Matrix<double> random_matrix(Pcg32& rng, Eigen::Index r, Eigen::Index c) {
  Matrix<double> m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m;
}

SsfParams<double> random_params(Pcg32& rng, Eigen::Index d) {
  SsfParams<double> p{RowVector<double>(d), RowVector<double>(d)};
  for (Eigen::Index j = 0; j < d; ++j) {
    p.gamma(j) = rng.normal();
    p.beta(j) = rng.normal();
  }
  return p;
}

}  // namespace

TEST_CASE("ssf forward") {
  Pcg32 rng(1);
  const auto x = random_matrix(rng, 4, 6);
  CHECK(ssf_forward(x, SsfParams<double>::identity(6)) == x);
  const SsfParams<double> p{RowVector<double>::Constant(3, 2.0), RowVector<double>::Ones(3)};
  CHECK(ssf_forward(Matrix<double>::Zero(2, 3), p) == Matrix<double>::Ones(2, 3));
  const auto q = random_params(rng, 6);
  const auto y = ssf_forward(x, q);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) CHECK(y(i, j) == q.gamma(j) * x(i, j) + q.beta(j));
  }
  CHECK_THROWS_AS(ssf_forward(x, SsfParams<double>::identity(5)), ShapeError);
}

TEST_CASE("ssf backward closed forms") {
  Pcg32 rng(2);
  const auto x = random_matrix(rng, 5, 3);
  const auto p = random_params(rng, 3);
  const auto g = ssf_backward(x, p, Matrix<double>::Ones(5, 3));
  CHECK(g.beta == RowVector<double>::Constant(3, 5.0));
  const SsfParams<double> zero{RowVector<double>::Zero(3), RowVector<double>::Zero(3)};
  CHECK(ssf_backward(x, zero, random_matrix(rng, 5, 3)).x == Matrix<double>::Zero(5, 3));
  CHECK_THROWS_AS(ssf_backward(x, p, Matrix<double>::Ones(4, 3)), ShapeError);
}

TEST_CASE("ssf gradients match finite differences") {
  Pcg32 rng(3);
  auto x = random_matrix(rng, 4, 5);
  auto p = random_params(rng, 5);
  const auto w = random_matrix(rng, 4, 5);  // loss = sum(w .* y)^2 / 2 keeps it non-linear
  // roundoff of the differenced loss (~50) at h = 1e-6 is near 1e-8
  auto loss = [&] {
    const double s = (ssf_forward(x, p).array() * w.array()).sum();
    return 0.5 * s * s;
  };
  const double s = (ssf_forward(x, p).array() * w.array()).sum();
  const Matrix<double> upstream = s * w;
  const auto g = ssf_backward(x, p, upstream);
  for (int k = 0; k < 10; ++k) {
    const auto i = static_cast<Eigen::Index>(rng.below(4));
    const auto j = static_cast<Eigen::Index>(rng.below(5));
    CHECK(oracle::rel_err(g.x(i, j), oracle::central_difference(loss, &x(i, j), 1e-6), 1e-8) < 1e-6);
    CHECK(oracle::rel_err(g.gamma(j), oracle::central_difference(loss, &p.gamma(j), 1e-6), 1e-8) < 1e-6);
    CHECK(oracle::rel_err(g.beta(j), oracle::central_difference(loss, &p.beta(j), 1e-6), 1e-8) < 1e-6);
  }
}

TEST_CASE("ssf is linear in x") {
  Pcg32 rng(4);
  const auto a = random_matrix(rng, 3, 4);
  const auto b = random_matrix(rng, 3, 4);
  SsfParams<double> p = random_params(rng, 4);
  p.beta.setZero();
  const Matrix<double> lhs = ssf_forward(Matrix<double>(2.0 * a + b), p);
  const Matrix<double> rhs = 2.0 * ssf_forward(a, p) + ssf_forward(b, p);
  CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-12);
}
