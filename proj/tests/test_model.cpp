#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "ncmac/errors.hpp"
#include "ncmac/linalg.hpp"
#include "ncmac/model.hpp"

using namespace ncmac;
using testing::e;

TEST_CASE("signal covariance") {
  CHECK(signal_covariance(CMatrix::Zero(2, 1)).isApprox(CMatrix::Identity(2, 2)));
  CMatrix d = CMatrix::Zero(2, 2);
  d(0, 0) = 3;
  d(1, 1) = 1;
  CHECK((signal_covariance(e(2, 0, std::sqrt(2.0))) - d).norm() < 1e-14);

  Rng rng(3);
  const CMatrix x = rng.complex_gaussian(4, 2);
  const CMatrix A = signal_covariance(x);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      cd v = i == j ? 1.0 : 0.0;
      for (int m = 0; m < 2; ++m) v += x(i, m) * std::conj(x(j, m));
      CHECK(std::abs(A(i, j) - v) < 1e-12);
    }
}

TEST_CASE("log likelihood") {
  const double lnpi = std::log(M_PI);
  CHECK(log_likelihood(CMatrix::Zero(2, 3), CMatrix::Zero(2, 1)) == doctest::Approx(-3 * 2 * lnpi));
  CHECK(log_likelihood(CMatrix::Zero(2, 1), e(2, 0, std::sqrt(2.0))) == doctest::Approx(-std::log(3.0) - 2 * lnpi));

  Rng rng(5);
  for (int t = 0; t < 10; ++t) {
    const CMatrix x = rng.complex_gaussian(4, 2), Y = rng.complex_gaussian(4, 3);
    const CMatrix A = signal_covariance(x);
    const double direct = -(Y.adjoint() * A.inverse() * Y).trace().real() - 3 * std::log(A.determinant().real()) -
                          3 * 4 * lnpi;
    CHECK(std::abs(log_likelihood(Y, x) - direct) < 1e-9);
  }
}

TEST_CASE("ml detector") {
  Rng rng(7);
  JointConstellation one = testing::make_constellation(3, {{e(3, 0, 2.0)}});
  CHECK(ml_detect(rng.complex_gaussian(3, 2), one) == JointIndex{0});

  JointConstellation orth = testing::make_constellation(2, {{e(2, 0, std::sqrt(2.0)), e(2, 1, std::sqrt(2.0))}});
  CHECK(ml_detect(e(2, 0, std::sqrt(2.0)), orth) == JointIndex{0});

  // strong noiseless output identifies the transmitted joint symbol
  JointConstellation c = testing::random_constellation(4, {1, 1}, {4, 2}, 1.0, rng);
  MlDetector det(c, 2);
  for (std::size_t i = 0; i < c.size(); ++i) {
    const CMatrix Y = c.joint_symbol(i) * (1e3 * rng.complex_gaussian(2, 2)).transpose();
    std::size_t best = 0;
    double bl = -INFINITY;
    for (std::size_t j = 0; j < c.size(); ++j) {
      const double l = log_likelihood(Y, c.joint_symbol(j));
      if (l > bl) bl = l, best = j;
    }
    CHECK(det.detect_flat(Y) == best);
    CHECK(best == i);
    CHECK(det.log_likelihood(Y, i) == doctest::Approx(log_likelihood(Y, c.joint_symbol(i))).epsilon(1e-10));
  }
}

TEST_CASE("joint indexing") {
  Rng rng(1);
  JointConstellation c = testing::random_constellation(4, {1, 2}, {3, 2}, 1.0, rng);
  CHECK(c.size() == 6);
  CHECK(c.unflatten(3) == JointIndex{1, 1});
  for (std::size_t f = 0; f < c.size(); ++f) CHECK(c.flatten(c.unflatten(f)) == f);
  const CMatrix x = c.joint_symbol(JointIndex{2, 1});
  CHECK(x.cols() == 3);
  CHECK(x.leftCols(1).isApprox(c.users[0].symbols[2]));
  CHECK(x.rightCols(2).isApprox(c.users[1].symbols[1]));
}

TEST_CASE("constellation validation") {
  Rng rng(2);
  JointConstellation c = testing::random_constellation(3, {1, 1}, {2, 2}, 2.0, rng);
  CHECK_NOTHROW(c.validate());
  c.users[1].symbols[0] *= 1.1;
  CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("user 2"), InvalidInput);
}

TEST_CASE("identifiability") {
  Rng rng(11);
  const CMatrix x = std::sqrt(2.0) * random_orthonormal(4, 2, rng);
  const CMatrix V = random_unitary(2, rng);
  JointConstellation c = testing::make_constellation(4, {{x, x * V}});
  const auto bad = check_identifiability(c, 1e-9);
  REQUIRE(bad.size() == 1);
  CHECK(bad[0] == std::pair<std::size_t, std::size_t>{0, 1});

  JointConstellation orth = testing::make_constellation(2, {{e(2, 0, 1.0), e(2, 1, 1.0)}});
  CHECK(check_identifiability(orth, 1e-9).empty());
  CHECK(check_identifiability(testing::random_constellation(4, {1, 1}, {4, 4}, 1.0, rng), 1e-9).empty());
}

TEST_CASE("channel output sampling") {
  {
    Rng rng(13);
    double s = 0.0;
    const int draws = 100000;
    for (int t = 0; t < draws; ++t) s += std::norm(sample_channel_output(CMatrix::Zero(1, 1), 1, rng)(0, 0));
    CHECK(std::abs(s / draws - 1.0) < 3.0 / std::sqrt(draws));
  }
  {
    Rng a(17), b(17);
    const CMatrix x = e(3, 1, 2.0);
    CHECK(sample_channel_output(x, 2, a) == sample_channel_output(x, 2, b));
  }
  {
    Rng rng(19);
    const CMatrix x = e(2, 0, 1.0);
    const int draws = 100000, N = 1;
    CMatrix acc = CMatrix::Zero(2, 2);
    for (int t = 0; t < draws; ++t) {
      const CMatrix Y = sample_channel_output(x, N, rng);
      acc += Y * Y.adjoint();
    }
    acc /= double(draws) * N;
    const CMatrix A = signal_covariance(x);
    // entry variances are at most A(0,0)^2 = 4
    CHECK((acc - A).cwiseAbs().maxCoeff() < 3 * 2.0 / std::sqrt(draws) * 1.5);
  }
}

TEST_CASE("transmit correlation") {
  Rng rng(23);
  JointConstellation c = testing::random_constellation(3, {1, 2}, {2, 2}, 1.0, rng);
  CorrelationModel id{CorrelationModel::Kind::TxPerUser, {CMatrix::Identity(1, 1), CMatrix::Identity(2, 2)}};
  const auto same = apply_tx_correlation(c, id);
  for (int k = 0; k < 2; ++k)
    for (int n = 0; n < 2; ++n) CHECK(same.constellation.users[k].symbols[n].isApprox(c.users[k].symbols[n]));

  JointConstellation single = testing::random_constellation(3, {1}, {3}, 1.0, rng);
  CorrelationModel four{CorrelationModel::Kind::TxPerUser, {4.0 * CMatrix::Identity(1, 1)}};
  const auto doubled = apply_tx_correlation(single, four);
  for (int n = 0; n < 3; ++n)
    CHECK((doubled.constellation.users[0].symbols[n] - 2.0 * single.users[0].symbols[n]).norm() < 1e-12);

  CorrelationModel rnd{CorrelationModel::Kind::TxPerUser, {testing::random_pd(1, rng), testing::random_pd(2, rng)}};
  const auto t = apply_tx_correlation(c, rnd);
  for (int k = 0; k < 2; ++k) {
    const CMatrix& psi = rnd.matrices[k];
    for (int n = 0; n < 2; ++n) {
      const CMatrix& x = c.users[k].symbols[n];
      const CMatrix& y = t.constellation.users[k].symbols[n];
      const CMatrix lhs = x * psi * x.adjoint();
      const CMatrix rhs = signal_covariance(y) - CMatrix::Identity(3, 3);
      CHECK((lhs - rhs).norm() < 1e-10);
    }
  }
}

TEST_CASE("receive whitening") {
  Rng rng(29);
  const CMatrix Y = rng.complex_gaussian(3, 2);
  CorrelationModel id{CorrelationModel::Kind::Rx, {CMatrix::Identity(2, 2)}};
  CHECK(whiten_rx_correlation(Y, id).isApprox(Y));
  CorrelationModel nine{CorrelationModel::Kind::Rx, {9.0 * CMatrix::Identity(2, 2)}};
  CHECK((whiten_rx_correlation(Y, nine) - Y / 3.0).norm() < 1e-12);

  const CMatrix psi = testing::random_pd(2, rng);
  CorrelationModel m{CorrelationModel::Kind::Rx, {psi}};
  const CMatrix coloured = Y * hermitian_power(psi, 0.5);
  CHECK((whiten_rx_correlation(coloured, m) - Y).norm() < 1e-9);
}
