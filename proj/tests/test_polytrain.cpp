#include <cmath>
#include <limits>
#include <random>

#include <gtest/gtest.h>

#include "cvxrobust/error.hpp"
#include "cvxrobust/polytrain.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace cvxrobust;
using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

double min_eigenvalue(const MatrixXd& M) { return Eigen::SelfAdjointEigenSolver<MatrixXd>(M).eigenvalues().minCoeff(); }

Dataset blobs(Index n, Index d, double sep, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  MatrixXd X = testutil::gaussian(n, d, rng);
  VectorXd y(n);
  for (Index k = 0; k < n; ++k) {
    y[k] = k % 2 == 0 ? 1.0 : -1.0;
    X(k, 0) += sep * y[k];
  }
  return Dataset(X, y);
}

TrainConfig config(double beta, double r) {
  TrainConfig c;
  c.beta = beta;
  c.radius = r;
  return c;
}

}  // namespace

TEST(StandardSdp, SinglePointMatchesGridOracle) {
  const Dataset data(MatrixXd{{1.0}}, VectorXd{{1.0}});
  const double beta = 0.2;
  const auto res = train_poly(data, config(beta, 0.0));
  const ActivationCoeffs k;
  // d = 1: h = Q and the cheapest blocks for (Q, g) cost beta max(|Q|, |g|)
  double best = std::numeric_limits<double>::infinity();
  for (int i = -1500; i <= 1500; ++i) {
    for (int j = -1500; j <= 1500; ++j) {
      const double Q = i / 1000.0, g = j / 1000.0;
      const double f = (k.a + k.c) * Q + k.b * g;
      best = std::min(best, std::max(0.0, 1.0 - f) + beta * std::max(std::abs(Q), std::abs(g)));
    }
  }
  EXPECT_NEAR(res.model.objective, best, 1e-3);
  EXPECT_GE(evaluate(res.model.classifier, VectorXd{{1.0}}), 1.0 - res.model.hinge_loss - 1e-6);
}

TEST(StandardSdp, HeavyRegularizationGivesZeroModel) {
  const Dataset data = blobs(6, 2, 1.0, 1);
  const auto res = train_poly(data, config(1e6, 0.0));
  EXPECT_NEAR(res.model.objective, 1.0, 1e-4);
  EXPECT_LE(res.model.blocks.Z.cwiseAbs().maxCoeff() + res.model.blocks.Zp.cwiseAbs().maxCoeff(), 1e-5);
}

TEST(StandardSdp, SeparablePairHasZeroHinge) {
  const Dataset data(MatrixXd{{1.0}, {-1.0}}, VectorXd{{1.0, -1.0}});
  // explicit witness: g = 2 gives margins b g |x| = 1 on both points
  const auto res = train_poly(data, config(0.01, 0.0));
  EXPECT_LE(res.model.hinge_loss, 1e-4);
  for (Index k = 0; k < 2; ++k) {
    EXPECT_GE(data.y()[k] * evaluate(res.model.classifier, data.X().row(k).transpose()), 1.0 - 1e-4);
  }
}

TEST(StandardSdp, ExtractionIsLinearInBlocks) {
  const Dataset data = blobs(10, 3, 1.0, 2);
  const auto res = train_poly(data, config(0.01, 0.0));
  const auto& m = res.model;
  EXPECT_TRUE(m.classifier.Q == m.blocks.Z1() - m.blocks.Z1p());
  EXPECT_TRUE(m.classifier.g == m.blocks.Z2() - m.blocks.Z2p());
  EXPECT_EQ(m.classifier.h, m.blocks.Z4() - m.blocks.Z4p());
  EXPECT_GE(m.z_min_eigenvalue, -1e-7);
  EXPECT_GE(m.zp_min_eigenvalue, -1e-7);
  EXPECT_NEAR(m.blocks.Z1().trace(), m.blocks.Z4(), 1e-6);
  EXPECT_FALSE(m.certificate.has_value());
}

TEST(StandardSdp, NotWorseThanRandomNeuronSets) {
  const Dataset data = blobs(4, 2, 0.5, 3);
  const double beta = 0.05;
  const auto res = train_poly(data, config(beta, 0.0));
  std::mt19937_64 rng(4);
  std::normal_distribution<double> normal;
  const ActivationCoeffs k;
  const Index m = 2 * (data.d() + 1);
  for (int t = 0; t < 1000; ++t) {
    double obj = 0.0;
    VectorXd f = VectorXd::Zero(data.n());
    for (Index j = 0; j < m; ++j) {
      VectorXd u = testutil::gaussian(data.d(), 1, rng);
      u.normalize();
      const double alpha = normal(rng);
      obj += beta * std::abs(alpha);
      for (Index i = 0; i < data.n(); ++i) f[i] += k(u.dot(data.X().row(i))) * alpha;
    }
    for (Index i = 0; i < data.n(); ++i) obj += std::max(0.0, 1.0 - data.y()[i] * f[i]) / data.n();
    EXPECT_LE(res.model.objective, obj + 1e-6);
  }
}

TEST(SProcedure, ZeroWeightsForceZeroMultiplier) {
  const LmiStencil st = s_procedure_lmi(0.5, VectorXd{{1.0, 2.0}}, 1.0, ActivationCoeffs{});
  const MatrixXd Q = MatrixXd::Zero(2, 2);
  const VectorXd g = VectorXd::Zero(2);
  EXPECT_LE(st.assemble(Q, g, 0.0, 0.0, 0.0).cwiseAbs().maxCoeff(), 0.0);
  for (const double lambda : {1e-3, 1.0, 10.0}) EXPECT_LT(min_eigenvalue(st.assemble(Q, g, 0.0, 0.0, lambda)), 0.0);
}

TEST(SProcedure, CongruentToHandWrittenLmi) {
  std::mt19937_64 rng(7);
  const ActivationCoeffs k;
  for (int trial = 0; trial < 5; ++trial) {
    const Index d = 3;
    const VectorXd x = testutil::gaussian(d, 1, rng);
    const double y = trial % 2 == 0 ? 1.0 : -1.0, r = 0.7, delta = 0.3, lambda = 1.1;
    const MatrixXd Q = testutil::random_symmetric(d, rng);
    const VectorXd g = testutil::gaussian(d, 1, rng);
    const double h = 0.4;
    MatrixXd M = MatrixXd::Zero(d + 1, d + 1);
    M.topLeftCorner(d, d) = lambda * MatrixXd::Identity(d, d) + y * k.a * Q;
    M.topRightCorner(d, 1) = y * (k.b * g / 2.0 + k.a * Q * x);
    M.bottomLeftCorner(1, d) = M.topRightCorner(d, 1).transpose();
    M(d, d) = -lambda * r * r + y * (k.a * x.dot(Q * x) + k.b * g.dot(x) + k.c * h) - delta;
    MatrixXd A = MatrixXd::Identity(d + 1, d + 1);
    A.topRightCorner(d, 1) = -x;
    const MatrixXd ref = A.transpose() * M * A;
    const MatrixXd got = s_procedure_lmi(r, x, y, k).assemble(Q, g, h, delta, lambda);
    EXPECT_LE((got - ref).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(SProcedure, LabelFlipNegatesDataTermOnly) {
  const ActivationCoeffs k;
  const VectorXd x{{0.5, -1.0}};
  const MatrixXd Q{{1.0, 0.2}, {0.2, -0.5}};
  const VectorXd g{{0.3, 0.1}};
  const MatrixXd plus = s_procedure_lmi(1.0, x, 1.0, k).assemble(Q, g, 0.7, 0.0, 2.0);
  const MatrixXd minus = s_procedure_lmi(1.0, x, -1.0, k).assemble(Q, g, 0.7, 0.0, 2.0);
  MatrixXd data = MatrixXd::Zero(3, 3);
  data.topLeftCorner(2, 2) = k.a * Q;
  data.topRightCorner(2, 1) = k.b * g / 2.0;
  data.bottomLeftCorner(1, 2) = (k.b * g / 2.0).transpose();
  data(2, 2) = k.c * 0.7;
  EXPECT_LE((plus - minus - 2.0 * data).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LE((plus + minus - 2.0 * s_procedure_lmi(1.0, x, 1.0, k).assemble(MatrixXd::Zero(2, 2), VectorXd::Zero(2),
                                                                           0.0, 0.0, 2.0))
                .cwiseAbs()
                .maxCoeff(),
            1e-14);
}

TEST(RobustSdp, WellSeparatedPairIsCertified) {
  const Dataset data(MatrixXd{{3.0, 0.0}, {-3.0, 0.0}}, VectorXd{{1.0, -1.0}});
  const auto res = train_poly(data, config(0.001, 0.2));
  ASSERT_TRUE(res.model.certificate.has_value());
  EXPECT_LE(res.model.hinge_loss, 1e-3);
  for (Index i = 0; i < 2; ++i) EXPECT_GE(res.model.certificate->delta[i], 1.0 - 1e-3);
}

TEST(RobustSdp, OverlappingBallsKeepPositiveHinge) {
  const Dataset data(MatrixXd{{1.0}, {-1.0}}, VectorXd{{1.0, -1.0}});
  const auto res = train_poly(data, config(0.01, 1.5));
  EXPECT_GT(res.model.hinge_loss, 0.1);
}

TEST(RobustSdp, CertificatesAreSoundAndConsistent) {
  const Dataset data = blobs(12, 2, 1.5, 5);
  const double r = 0.5;
  const auto res = train_poly(data, config(0.01, r));
  ASSERT_TRUE(res.model.certificate.has_value());
  const auto& cert = *res.model.certificate;
  const auto& clf = res.model.classifier;
  EXPECT_GE(cert.lambda.minCoeff(), -1e-5);
  std::mt19937_64 rng(6);
  for (Index i = 0; i < data.n(); ++i) {
    const VectorXd x = data.X().row(i).transpose();
    const double y = data.y()[i];
    const MatrixXd S = s_procedure_lmi(r, x, y, clf.coeffs).assemble(clf.Q, clf.g, clf.h, cert.delta[i], cert.lambda[i]);
    EXPECT_GE(min_eigenvalue(S), -1e-5);
    double worst = std::numeric_limits<double>::infinity();
    for (int t = 0; t < 2000; ++t) {
      const VectorXd D = oracle::sample_ball(2, r, Norm::l2, rng);
      worst = std::min(worst, y * evaluate(clf, x + D));
      worst = std::min(worst, y * evaluate(clf, x + D.normalized() * r));
    }
    EXPECT_GE(worst, cert.delta[i] - 1e-4) << "row " << i;
  }
}

// Margins above 1 carry no loss, so only the clipped margins are pinned down.
TEST(RobustSdp, MeanMarginShrinksWithRadius) {
  const Dataset data = blobs(12, 2, 1.5, 8);
  double previous_margin = std::numeric_limits<double>::infinity();
  double previous_objective = 0.0;
  for (const double r : {0.1, 0.4, 0.8}) {
    const auto res = train_poly(data, config(0.01, r));
    const double mean = res.model.certificate->delta.cwiseMin(1.0).mean();
    EXPECT_LE(mean, previous_margin + 1e-6) << "r = " << r;
    EXPECT_GE(res.model.objective, previous_objective - 1e-6) << "r = " << r;
    previous_margin = mean;
    previous_objective = res.model.objective;
  }
}

TEST(PolySdp, Errors) {
  const Dataset data = blobs(4, 2, 1.0, 9);
  EXPECT_THROW(build_standard_sdp(data, 0.0), DomainError);
  EXPECT_THROW(build_robust_sdp(data, 0.01, 0.0), DomainError);
  EXPECT_THROW(train_poly(data, config(0.01, -1.0)), DomainError);
  EXPECT_THROW(s_procedure_lmi(0.0, VectorXd::Zero(2), 1.0, ActivationCoeffs{}), DomainError);
  EXPECT_THROW(s_procedure_lmi(1.0, VectorXd::Zero(2), 0.5, ActivationCoeffs{}), DomainError);
}

TEST(PolySdp, SolveFailureCarriesResiduals) {
  const Dataset data = blobs(8, 2, 1.0, 10);
  TrainConfig c = config(0.01, 0.0);
  c.solver.method = conic::Method::admm;
  c.solver.max_iters = 5;
  c.solver.check_interval = 1;
  try {
    train_poly(data, c);
    FAIL() << "expected SolveFailure";
  } catch (const SolveFailure& e) {
    EXPECT_EQ(e.solution().status, conic::SolveStatus::max_iters);
    EXPECT_GT(e.solution().primal_residual + e.solution().dual_residual, 0.0);
  }
}

// ---- decision distance ------------------------------------------------

TEST(DecisionDistance, LinearCaseMatchesHyperplaneFormula) {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 10; ++t) {
    QuadraticClassifier clf;
    clf.Q = MatrixXd::Zero(3, 3);
    clf.g = testutil::gaussian(3, 1, rng);
    clf.h = 0.3;
    const VectorXd x = testutil::gaussian(3, 1, rng);
    const double f = evaluate(clf, x);
    const double y = f >= 0.0 ? 1.0 : -1.0;
    const double ref = std::abs(clf.coeffs.b * clf.g.dot(x) + clf.coeffs.c * clf.h) / (clf.coeffs.b * clf.g.norm());
    const auto res = decision_distance(clf, x, y);
    EXPECT_FALSE(res.unbounded);
    EXPECT_NEAR(res.distance, ref, 1e-5);
  }
}

TEST(DecisionDistance, BoundaryPointIsZero) {
  QuadraticClassifier clf;
  clf.Q = MatrixXd{{1.0, 0.0}, {0.0, -1.0}};
  clf.g = VectorXd::Zero(2);
  clf.h = 0.0;
  const auto res = decision_distance(clf, VectorXd{{1.0, 1.0}}, 1.0);
  EXPECT_NEAR(res.distance, 0.0, 1e-5);
}

TEST(DecisionDistance, RandomPlanarClassifiersMatchGridOracle) {
  std::mt19937_64 rng(12);
  int checked = 0;
  for (int t = 0; t < 40 && checked < 15; ++t) {
    QuadraticClassifier clf;
    clf.Q = testutil::random_symmetric(2, rng);
    clf.g = testutil::gaussian(2, 1, rng);
    clf.h = std::normal_distribution<double>()(rng);
    const VectorXd x = testutil::gaussian(2, 1, rng);
    const double f = evaluate(clf, x);
    if (std::abs(f) < 1e-3) continue;
    const double y = f > 0.0 ? 1.0 : -1.0;
    const auto res = decision_distance(clf, x, y);
    const double ref = oracle::boundary_distance_2d(clf, x);
    if (!std::isfinite(ref)) {
      EXPECT_TRUE(res.unbounded);
      continue;
    }
    ++checked;
    EXPECT_NEAR(res.distance, ref, 1e-3 * std::max(1.0, ref)) << "trial " << t;
    // invariance under joint positive rescaling
    QuadraticClassifier scaled = clf;
    scaled.Q *= 3.5;
    scaled.g *= 3.5;
    scaled.h *= 3.5;
    EXPECT_NEAR(decision_distance(scaled, x, y).distance, res.distance, 1e-6 * std::max(1.0, ref));
  }
  EXPECT_GE(checked, 10);
}

TEST(DecisionDistance, SingleSignedAndErrors) {
  QuadraticClassifier clf;
  clf.Q = MatrixXd::Identity(2, 2);
  clf.g = VectorXd::Zero(2);
  clf.h = 1.0;
  const auto res = decision_distance(clf, VectorXd{{0.5, 0.5}}, 1.0);
  EXPECT_TRUE(res.unbounded);
  EXPECT_TRUE(std::isinf(res.distance));
  EXPECT_THROW(decision_distance(clf, VectorXd{{0.5, 0.5}}, -1.0), DomainError);
  EXPECT_THROW(decision_distance(clf, VectorXd::Zero(3), 1.0), DomainError);
  const auto all = decision_distances(clf, MatrixXd{{0.0, 1.0}}, VectorXd{{-1.0}});
  EXPECT_TRUE(std::isnan(all[0].distance));
}

TEST(DecisionDistance, SmallEllipseAwayFromProbes) {
  // f = a (||z - m||^2 - rho^2): zero set is a circle of radius rho around m
  const ActivationCoeffs k;
  const VectorXd m{{5.0, 5.0}};
  const double rho = 0.3;
  QuadraticClassifier clf;
  clf.Q = MatrixXd::Identity(2, 2);
  clf.g = -2.0 * k.a / k.b * m;
  clf.h = k.a * (m.squaredNorm() - rho * rho) / k.c;
  DistanceOptions opt;
  opt.random_probes = 0;
  const auto res = decision_distance(clf, VectorXd::Zero(2), 1.0, opt);
  EXPECT_FALSE(res.unbounded);
  EXPECT_NEAR(res.distance, m.norm() - rho, 1e-6);
  clf.h += 2.0 * k.a * rho * rho / k.c;
  EXPECT_TRUE(decision_distance(clf, VectorXd::Zero(2), 1.0, opt).unbounded);
}

TEST(DecisionDistance, ConicFormAgrees) {
  QuadraticClassifier clf;
  clf.Q = MatrixXd{{0.5, 0.1}, {0.1, -0.3}};
  clf.g = VectorXd{{1.0, -0.5}};
  clf.h = -0.2;
  const VectorXd x{{1.5, 0.2}};
  const double y = evaluate(clf, x) > 0.0 ? 1.0 : -1.0;
  const auto res = decision_distance(clf, x, y);
  const auto prog = build_decision_distance_sdp(clf, x, y);
  conic::SolverSettings st;
  st.method = conic::Method::interior_point;
  st.tol = 1e-9;
  const auto sol = conic::solve(prog, st);
  ASSERT_EQ(sol.status, conic::SolveStatus::optimal);
  EXPECT_NEAR(prog.slice(sol.x, "s")[0], res.s, 1e-5 * std::max(1.0, res.s));
}
