#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "cvxrobust/error.hpp"
#include "cvxrobust/polynet.hpp"
#include "cvxrobust/polytrain.hpp"
#include "test_util.hpp"

using namespace cvxrobust;
using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::Vector3d;
using Eigen::VectorXd;

namespace {

// Continuous least squares of max(u, 0) on [-L, L] from its moments.
Vector3d continuous_relu_fit(double L) {
  const auto mono = [&](int k) { return k % 2 == 1 ? 0.0 : 2.0 * std::pow(L, k + 1) / (k + 1); };
  Eigen::Matrix3d G;
  Vector3d rhs;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) G(i, j) = mono(4 - i - j);
    rhs[i] = std::pow(L, 4 - i) / (4 - i);  // int_0^L u^(2-i) u du
  }
  return G.ldlt().solve(rhs);  // (a, b, c)
}

// Random PSD block of side d+1 rescaled so that trace(Z1) = Z4.
MatrixXd balanced_block(Index d, Index rank, std::mt19937_64& rng) {
  const MatrixXd G = testutil::gaussian(d + 1, rank, rng);
  MatrixXd Z = G * G.transpose();
  const double t = std::sqrt(Z.topLeftCorner(d, d).trace() / Z(d, d));
  Z.row(d) *= t;
  Z.col(d) *= t;
  return Z;
}

}  // namespace

TEST(Activation, FitOnMinusFiveFive) {
  const ActivationCoeffs c = fit_relu_poly(-5.0, 5.0, 20001);
  const Vector3d ref = continuous_relu_fit(5.0);
  EXPECT_NEAR(ref[0], 0.09375, 1e-12);
  EXPECT_NEAR(ref[1], 0.5, 1e-12);
  EXPECT_NEAR(ref[2], 0.46875, 1e-12);
  EXPECT_NEAR(c.a, ref[0], 0.005);
  EXPECT_NEAR(c.b, ref[1], 0.005);
  EXPECT_NEAR(c.c, ref[2], 0.005);
  EXPECT_NEAR(std::round(c.a * 100.0) / 100.0, 0.09, 1e-12);
  EXPECT_NEAR(std::round(c.b * 100.0) / 100.0, 0.50, 1e-12);
  EXPECT_NEAR(std::round(c.c * 100.0) / 100.0, 0.47, 1e-12);
}

TEST(Activation, SymmetricIntervalGivesHalfSlope) {
  for (const int pts : {3, 11, 1001}) EXPECT_NEAR(fit_relu_poly(-1.0, 1.0, pts).b, 0.5, 1e-12);
}

TEST(Activation, ExactQuadraticRecovered) {
  const auto c = fit_quadratic(-2.0, 3.0, 7, [](double u) { return 0.3 * u * u - u + 2.0; });
  EXPECT_NEAR(c.a, 0.3, 1e-10);
  EXPECT_NEAR(c.b, -1.0, 1e-10);
  EXPECT_NEAR(c.c, 2.0, 1e-10);
}

TEST(Activation, Errors) {
  EXPECT_THROW(fit_relu_poly(1.0, 5.0, 10), DomainError);
  EXPECT_THROW(fit_relu_poly(-1.0, 1.0, 2), DomainError);
  ActivationCoeffs c;
  c.a = 0.0;
  EXPECT_THROW(c.validate(), DomainError);
  const auto back = coeffs_from_json(to_json(ActivationCoeffs{}));
  EXPECT_EQ(back.a, 0.09);
  EXPECT_EQ(back.c, 0.47);
}

TEST(Quadratic, ZeroAndUnitForms) {
  QuadraticClassifier clf;
  clf.Q = MatrixXd::Zero(3, 3);
  clf.g = VectorXd::Zero(3);
  EXPECT_EQ(evaluate(clf, VectorXd{{1.0, -2.0, 3.0}}), 0.0);
  clf.Q = MatrixXd::Identity(3, 3);
  clf.coeffs = {1.0, 0.5, 0.5};
  EXPECT_DOUBLE_EQ(evaluate(clf, VectorXd::Unit(3, 0)), 1.0);
  const VectorXd x{{0.3, -1.0, 2.0}};
  EXPECT_TRUE(gradient(clf, x).isApprox(2.0 * x));
  clf.g = VectorXd{{1.0, 2.0, 3.0}};
  EXPECT_TRUE(gradient(clf, VectorXd::Zero(3)).isApprox(0.5 * clf.g));
  EXPECT_THROW(evaluate(clf, VectorXd::Zero(2)), DomainError);
}

TEST(Quadratic, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 10; ++trial) {
    QuadraticClassifier clf;
    clf.Q = testutil::random_symmetric(4, rng);
    clf.g = testutil::gaussian(4, 1, rng);
    clf.h = 0.7;
    const VectorXd x = testutil::gaussian(4, 1, rng);
    const VectorXd grad = gradient(clf, x);
    for (Index j = 0; j < 4; ++j) {
      const double step = 1e-5;
      VectorXd hi = x, lo = x;
      hi[j] += step;
      lo[j] -= step;
      EXPECT_NEAR(grad[j], (evaluate(clf, hi) - evaluate(clf, lo)) / (2.0 * step), 1e-6);
    }
  }
}

TEST(Decomposition, SingleNeuronFixedPoint) {
  const VectorXd u = VectorXd{{3.0, -4.0}} / 5.0;
  const double alpha = 2.5;
  VectorXd p(3);
  p << u, 1.0;
  const MatrixXd Z = alpha * p * p.transpose();
  const auto neurons = neural_decomposition(Z);
  ASSERT_EQ(neurons.size(), 1u);
  EXPECT_LE((neurons[0].u - u).norm(), 1e-8);
  EXPECT_NEAR(neurons[0].alpha, alpha, 1e-8);
}

TEST(Decomposition, ZeroBlockIsEmpty) { EXPECT_TRUE(neural_decomposition(MatrixXd::Zero(4, 4)).empty()); }

TEST(Decomposition, RandomBlocksReconstructAndBalance) {
  std::mt19937_64 rng(32);
  for (int trial = 0; trial < 20; ++trial) {
    const Index d = 2 + trial % 5;
    const MatrixXd Z = balanced_block(d, 1 + trial % (d + 1), rng);
    const auto factors = balanced_factors(Z);
    EXPECT_LE(static_cast<Index>(factors.size()), d + 1);
    MatrixXd R = MatrixXd::Zero(d + 1, d + 1);
    for (const auto& f : factors) {
      VectorXd p(d + 1);
      p << f.r, f.s;
      R += p * p.transpose();
      EXPECT_GE(f.s, 0.0);
      EXPECT_LE(std::abs(f.r.norm() - f.s), 1e-7);
    }
    EXPECT_LE((R - Z).norm(), 1e-6) << "trial " << trial;
  }
}

TEST(Decomposition, TraceMismatchRejected) {
  MatrixXd Z = MatrixXd::Identity(3, 3);
  EXPECT_THROW(neural_decomposition(Z), DomainError);
}

TEST(Decomposition, NetworkMatchesQuadraticForm) {
  std::mt19937_64 rng(33);
  const Index d = 5;
  SdpBlocks blocks{balanced_block(d, 3, rng), balanced_block(d, 2, rng)};
  const ActivationCoeffs coeffs;
  const QuadraticClassifier clf = blocks.classifier(coeffs);
  const TwoLayerNetwork net = decompose_blocks(blocks.Z, blocks.Zp, coeffs);
  EXPECT_LE(static_cast<Index>(net.neurons.size()), 2 * (d + 1));
  for (const auto& nr : net.neurons) EXPECT_NEAR(nr.u.norm(), 1.0, 1e-8);
  const QuadraticClassifier back = to_quadratic(net);
  EXPECT_LE((back.Q - clf.Q).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_LE((back.g - clf.g).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_NEAR(back.h, clf.h, 1e-8);
  for (int t = 0; t < 20; ++t) {
    const VectorXd x = testutil::gaussian(d, 1, rng);
    EXPECT_NEAR(net.forward(x), evaluate(clf, x), 1e-8 * (1.0 + std::abs(evaluate(clf, x))));
    EXPECT_LE((net.input_gradient(x) - gradient(clf, x)).norm(), 1e-8 * (1.0 + gradient(clf, x).norm()));
  }
}

TEST(Serialization, ClassifierAndNetworkRoundTrip) {
  std::mt19937_64 rng(34);
  QuadraticClassifier clf;
  clf.Q = testutil::random_symmetric(3, rng);
  clf.g = testutil::gaussian(3, 1, rng);
  clf.h = -0.25;
  const QuadraticClassifier c2 = classifier_from_json(to_json(clf));
  EXPECT_TRUE(c2.Q == clf.Q);
  EXPECT_TRUE(c2.g == clf.g);
  EXPECT_EQ(c2.h, clf.h);

  TwoLayerNetwork net;
  net.activation = Activation::relu;
  net.input_dim = 3;
  net.neurons.push_back({VectorXd{{1.0, 0.0, 0.5}}, -2.0});
  const TwoLayerNetwork n2 = network_from_json(to_json(net));
  ASSERT_EQ(n2.neurons.size(), 1u);
  EXPECT_TRUE(n2.neurons[0].u == net.neurons[0].u);
  EXPECT_EQ(n2.activation, Activation::relu);
  EXPECT_THROW(classifier_from_json(to_json(net)), DomainError);
}
