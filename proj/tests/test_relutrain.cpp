#include <cmath>
#include <limits>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "cvxrobust/error.hpp"
#include "cvxrobust/relutrain.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace cvxrobust;
using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

struct Instance {
  MatrixXd X;
  VectorXd y;
  SignPatternSet patterns;
};

Instance planar(Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Instance out;
  out.X = testutil::gaussian(n, 2, rng);
  out.y.resize(n);
  for (Index k = 0; k < n; ++k) out.y[k] = normal(rng) > 0.0 ? 1.0 : -1.0;
  out.y[0] = 1.0;
  out.y[1] = -1.0;
  out.patterns = enumerate_sign_patterns_2d(out.X);
  return out;
}

PenaltyConfig long_run(int epochs) {
  PenaltyConfig c;
  c.epochs = epochs;
  c.constant_epochs = epochs / 2;
  c.final_step_ratio = 1e-4;
  return c;
}

std::set<std::string> bitstrings(const SignPatternSet& s) {
  std::set<std::string> out;
  for (Index i = 0; i < s.count(); ++i) out.insert(s.bitstring(i));
  return out;
}

GatedLinearModel random_model(const SignPatternSet& patterns, Index d, double r, Norm p, std::mt19937_64& rng) {
  GatedLinearModel m = zero_model(patterns, d, 0.1, r, p);
  m.V = testutil::gaussian(d, patterns.count(), rng);
  m.W = testutil::gaussian(d, patterns.count(), rng);
  return m;
}

}  // namespace

// ---- norms ---------------------------------------------------------------

TEST(Norms, DualsAndParsing) {
  EXPECT_EQ(dual(Norm::l1), Norm::linf);
  EXPECT_EQ(dual(Norm::l2), Norm::l2);
  EXPECT_EQ(dual(Norm::linf), Norm::l1);
  EXPECT_EQ(norm_from_string("inf"), Norm::linf);
  EXPECT_EQ(norm_from_string("l1"), Norm::l1);
  EXPECT_EQ(norm_from_string("2"), Norm::l2);
  EXPECT_STREQ(to_string(Norm::linf), "inf");
  EXPECT_THROW(norm_from_string("3"), DomainError);
  const VectorXd v{{3.0, -4.0}};
  EXPECT_EQ(norm(v, Norm::l1), 7.0);
  EXPECT_EQ(norm(v, Norm::l2), 5.0);
  EXPECT_EQ(norm(v, Norm::linf), 4.0);
}

TEST(LinearMinOverBall, ClosedForms) {
  EXPECT_EQ(linear_min_over_ball(VectorXd{{1.0, 2.0}}, 0.7, 0.0, Norm::l2), 0.7);
  EXPECT_DOUBLE_EQ(linear_min_over_ball(VectorXd{{3.0, 4.0}}, 0.0, 1.0, Norm::l2), -5.0);
  EXPECT_THROW(linear_min_over_ball(VectorXd{{1.0}}, 0.0, -1.0, Norm::l2), DomainError);
}

TEST(LinearMinOverBall, MatchesSampledBall) {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> unif(0.1, 2.0);
  for (const Norm p : {Norm::l1, Norm::l2, Norm::linf}) {
    for (int t = 0; t < 3; ++t) {
      const Index d = 3;
      const VectorXd c = testutil::gaussian(d, 1, rng);
      const double b = unif(rng), r = unif(rng);
      double best = std::numeric_limits<double>::infinity();
      for (const VectorXd& e : oracle::ball_vertices(d, r, p, rng, 0)) best = std::min(best, c.dot(e) + b);
      for (int s = 0; s < 100000; ++s) {
        const VectorXd e = oracle::sample_ball(d, r, p, rng);
        const double n = norm(e, p);
        best = std::min(best, c.dot(e) + b);
        if (n > 0.0) best = std::min(best, (r / n) * c.dot(e) + b);  // same direction on the sphere
      }
      const double got = linear_min_over_ball(c, b, r, p);
      EXPECT_LE(got, best + 1e-12);
      EXPECT_NEAR(got, best, 1e-3 * (1.0 + std::abs(best))) << to_string(p);
    }
  }
}

// ---- sign patterns -------------------------------------------------------

TEST(SignPatterns, SingleRowHasAtMostTwo) {
  const auto s = sample_sign_patterns(MatrixXd{{1.0, -2.0, 0.5}}, 200, 3);
  EXPECT_LE(s.count(), 2);
  EXPECT_EQ(s.draws, 200);
  EXPECT_NO_THROW(s.validate());
}

TEST(SignPatterns, SamplingConvergesToArrangement) {
  std::mt19937_64 rng(42);
  const MatrixXd X = testutil::gaussian(4, 2, rng);
  const auto exact = bitstrings(enumerate_sign_patterns_2d(X));
  EXPECT_EQ(exact.size(), 8u);  // 2n sectors for n generic lines through the origin
  const auto few = bitstrings(sample_sign_patterns(X, 3, 1));
  const auto many = bitstrings(sample_sign_patterns(X, 5000, 1));
  for (const auto& b : few) EXPECT_TRUE(exact.contains(b));
  EXPECT_EQ(many, exact);
}

TEST(SignPatterns, DeterministicAndSerializable) {
  std::mt19937_64 rng(43);
  const MatrixXd X = testutil::gaussian(30, 5, rng);
  const auto a = sample_sign_patterns(X, 100, 9);
  const auto b = sample_sign_patterns(X, 100, 9);
  EXPECT_TRUE(a.D == b.D);
  const auto c = patterns_from_json(to_json(a));
  EXPECT_TRUE(c.D == a.D);
  EXPECT_EQ(c.seed, 9u);
  EXPECT_THROW(sample_sign_patterns(X, 0, 1), DomainError);
  EXPECT_THROW(enumerate_sign_patterns_2d(X), DomainError);
}

// ---- gated model ---------------------------------------------------------

TEST(WorstCase, EqualsLinearMinimumOnConstructedModels) {
  std::mt19937_64 rng(44);
  const auto inst = planar(6, 44);
  for (const Norm p : {Norm::l1, Norm::l2, Norm::linf}) {
    const GatedLinearModel m = random_model(inst.patterns, 2, 0.3, p, rng);
    const MatrixXd Theta = gated_theta(m);
    const VectorXd out = gated_outputs(m, inst.X);
    for (Index k = 0; k < 6; ++k) {
      const VectorXd x = inst.X.row(k).transpose();
      const double y = inst.y[k];
      const VectorXd theta = Theta.row(k).transpose();
      EXPECT_NEAR(out[k], x.dot(theta), 1e-12);
      EXPECT_NEAR(worst_case_output(m, x, y, k), linear_min_over_ball(y * theta, y * x.dot(theta), 0.3, p), 1e-10);
    }
  }
}

TEST(WorstCase, DegenerateCases) {
  std::mt19937_64 rng(45);
  const auto inst = planar(5, 45);
  GatedLinearModel m = random_model(inst.patterns, 2, 0.0, Norm::l2, rng);
  const VectorXd out = gated_outputs(m, inst.X);
  for (Index k = 0; k < 5; ++k) {
    EXPECT_NEAR(worst_case_output(m, inst.X.row(k).transpose(), inst.y[k], k), inst.y[k] * out[k], 1e-12);
  }
  const GatedLinearModel z = zero_model(inst.patterns, 2, 0.1, 0.5, Norm::l1);
  EXPECT_EQ(worst_case_output(z, inst.X.row(0).transpose(), 1.0, 0), 0.0);
  EXPECT_THROW(worst_case_output(z, inst.X.row(0).transpose(), 1.0, 5), DomainError);
}

TEST(RecoverWeights, ClosedFormsAndForward) {
  SignPatternSet s;
  s.D = MatrixXd::Ones(1, 1);
  GatedLinearModel m = zero_model(s, 2, 0.1, 0.0, Norm::l2);
  EXPECT_TRUE(recover_weights(m).neurons.empty());
  EXPECT_EQ(relu_forward(recover_weights(m), VectorXd{{1.0, 1.0}}), 0.0);
  m.V.col(0) = VectorXd{{4.0, 0.0}};
  const auto net = recover_weights(m);
  ASSERT_EQ(net.neurons.size(), 1u);
  EXPECT_TRUE(net.neurons[0].u.isApprox(VectorXd{{2.0, 0.0}}));
  EXPECT_DOUBLE_EQ(net.neurons[0].alpha, 2.0);

  TwoLayerNetwork one;
  one.input_dim = 3;
  one.neurons.push_back({VectorXd::Unit(3, 0), 1.0});
  EXPECT_EQ(relu_forward(one, VectorXd{{-3.0, 5.0, 1.0}}), 0.0);
  one.activation = Activation::polynomial;
  EXPECT_THROW(relu_forward(one, VectorXd::Zero(3)), DomainError);
}

TEST(RecoverWeights, ForwardMatchesNaiveLoops) {
  std::mt19937_64 rng(46);
  std::normal_distribution<double> normal;
  TwoLayerNetwork net;
  net.input_dim = 7;
  for (int j = 0; j < 13; ++j) net.neurons.push_back({testutil::gaussian(7, 1, rng), normal(rng)});
  for (int t = 0; t < 20; ++t) {
    const VectorXd x = testutil::gaussian(7, 1, rng);
    double ref = 0.0;
    for (const auto& nr : net.neurons) {
      double z = 0.0;
      for (Index i = 0; i < 7; ++i) z += nr.u[i] * x[i];
      if (z > 0.0) ref += z * nr.alpha;
    }
    EXPECT_NEAR(relu_forward(net, x), ref, 1e-12 * (1.0 + std::abs(ref)));
  }
}

TEST(RecoverWeights, ExactModelNetworkMatchesGatedOutputs) {
  const auto inst = planar(8, 47);
  const auto ex = oracle::solve_relu_exact(inst.X, inst.y, inst.patterns.D, 0.1, 0.0, Norm::l1);
  ASSERT_EQ(ex.status, conic::SolveStatus::optimal);
  GatedLinearModel m = zero_model(inst.patterns, 2, 0.1, 0.0, Norm::l1);
  m.V = ex.V;
  m.W = ex.W;
  const auto net = recover_weights(m);
  const VectorXd gated = gated_outputs(m, inst.X);
  for (Index k = 0; k < 8; ++k) EXPECT_NEAR(relu_forward(net, inst.X.row(k).transpose()), gated[k], 1e-5);
}

TEST(Objective, ConvexAlongSegments) {
  std::mt19937_64 rng(48);
  std::uniform_real_distribution<double> unif(0.05, 0.95);
  const auto inst = planar(8, 48);
  for (const double r : {0.0, 0.3}) {
    for (int t = 0; t < 20; ++t) {
      const GatedLinearModel a = random_model(inst.patterns, 2, r, Norm::l1, rng);
      const GatedLinearModel b = random_model(inst.patterns, 2, r, Norm::l1, rng);
      const double s = unif(rng);
      GatedLinearModel mid = a;
      mid.V = s * a.V + (1.0 - s) * b.V;
      mid.W = s * a.W + (1.0 - s) * b.W;
      const double fa = evaluate_objective(a, inst.X, inst.y, 100.0).penalized();
      const double fb = evaluate_objective(b, inst.X, inst.y, 100.0).penalized();
      const double fm = evaluate_objective(mid, inst.X, inst.y, 100.0).penalized();
      EXPECT_LE(fm, s * fa + (1.0 - s) * fb + 1e-9 * (1.0 + std::abs(fa) + std::abs(fb)));
    }
  }
}

TEST(Objective, ResidualOfConstructedViolation) {
  SignPatternSet s;
  s.D = MatrixXd{{1.0}, {0.0}};
  GatedLinearModel m = zero_model(s, 1, 0.1, 0.0, Norm::l2);
  m.V(0, 0) = 4.0;  // rows x = 1 and x = 0.5: the second should be <= 0
  const MatrixXd X{{1.0}, {0.5}};
  const auto res = constraint_residual(m, X);
  EXPECT_DOUBLE_EQ(res.max_violation, 2.0);
  EXPECT_DOUBLE_EQ(res.scale, 4.0);
  EXPECT_DOUBLE_EQ(res.relative(), 0.5);
  m.V(0, 0) = 0.1;
  EXPECT_DOUBLE_EQ(constraint_residual(m, X).relative(), 0.05);
  const auto parts = evaluate_objective(m, X, VectorXd{{1.0, -1.0}}, 10.0);
  EXPECT_DOUBLE_EQ(parts.penalty, 10.0 * 0.05 * 0.05);
  EXPECT_DOUBLE_EQ(parts.regularizer, 0.1 * 0.1 / 2.0);
}

// ---- training --------------------------------------------------------------

TEST(Training, ZeroEpochsReturnsZeroModel) {
  const auto inst = planar(6, 49);
  PenaltyConfig c;
  c.epochs = 0;
  const auto res = train_convex_relu(inst.X, inst.y, inst.patterns, 0.1, 0.0, Norm::l1, c);
  EXPECT_TRUE(res.model.V.isZero(0.0));
  EXPECT_TRUE(res.model.W.isZero(0.0));
  EXPECT_EQ(res.residual.max_violation, 0.0);
  EXPECT_TRUE(res.feasible);
  EXPECT_DOUBLE_EQ(evaluate_objective(res.model, inst.X, inst.y, c.rho).objective(), 1.0);
}

TEST(Training, MatchesExactOptimumOnTinyInstance) {
  const auto inst = planar(4, 50);
  const double beta = 0.1;
  const auto ex = oracle::solve_relu_exact(inst.X, inst.y, inst.patterns.D, beta, 0.0, Norm::l1);
  ASSERT_EQ(ex.status, conic::SolveStatus::optimal);
  const auto res = train_convex_relu(inst.X, inst.y, inst.patterns, beta, 0.0, Norm::l1, long_run(40000));
  EXPECT_TRUE(res.feasible);
  const double got = evaluate_objective(res.model, inst.X, inst.y, res.rho).objective();
  EXPECT_NEAR(got, ex.objective, 1e-3);
}

TEST(Training, ObjectiveGrowsWithRadius) {
  const auto inst = planar(6, 51);
  double previous = 0.0;
  for (const double r : {0.0, 0.1, 0.5}) {
    const auto res = train_convex_relu(inst.X, inst.y, inst.patterns, 0.1, r, Norm::l1, long_run(30000));
    const double obj = evaluate_objective(res.model, inst.X, inst.y, res.rho).objective();
    EXPECT_GE(obj, previous - 1e-3) << "r = " << r;
    EXPECT_TRUE(res.feasible) << "r = " << r << " rel " << res.residual.relative() << " rho " << res.rho;
    previous = obj;
  }
}

TEST(Training, RobustRunMatchesExactOptimum) {
  const auto inst = planar(6, 52);
  for (const Norm p : {Norm::l1, Norm::l2, Norm::linf}) {
    const auto ex = oracle::solve_relu_exact(inst.X, inst.y, inst.patterns.D, 0.1, 0.2, p);
    ASSERT_EQ(ex.status, conic::SolveStatus::optimal);
    PenaltyConfig c = long_run(40000);
    c.feasibility_tol = 1e-4;
    const auto res = train_convex_relu(inst.X, inst.y, inst.patterns, 0.1, 0.2, p, c);
    const double got = evaluate_objective(res.model, inst.X, inst.y, res.rho).objective();
    EXPECT_NEAR(got, ex.objective, 2e-3) << to_string(p) << " rel " << res.residual.relative() << " rho " << res.rho;
  }
}

TEST(Training, TraceIsMonotoneAndDeterministic) {
  const auto inst = planar(8, 53);
  PenaltyConfig c = long_run(2000);
  c.batch_size = 3;
  c.seed = 7;
  const auto a = train_convex_relu(inst.X, inst.y, inst.patterns, 0.1, 0.1, Norm::l2, c);
  const auto b = train_convex_relu(inst.X, inst.y, inst.patterns, 0.1, 0.1, Norm::l2, c);
  ASSERT_EQ(a.trace.size(), b.trace.size());
  EXPECT_TRUE(a.model.V == b.model.V);
  for (std::size_t i = 1; i < a.trace.size(); ++i) {
    const auto& prev = a.trace[i - 1];
    const auto& cur = a.trace[i];
    if (cur.rho == prev.rho) EXPECT_LE(cur.objective + cur.penalty, prev.objective + prev.penalty + 1e-12);
    EXPECT_EQ(cur.iterate_objective, b.trace[i].iterate_objective);
  }
  EXPECT_LT(a.trace.back().objective, 1.0);
}

TEST(Training, EscalatesRhoWhenInfeasible) {
  const auto inst = planar(8, 54);
  PenaltyConfig c;
  c.epochs = 20;
  c.constant_epochs = 20;
  c.feasibility_tol = 1e-15;
  c.rho = 1.0;
  c.max_rho = 100.0;
  const auto res = train_convex_relu(inst.X, inst.y, inst.patterns, 0.01, 0.0, Norm::l1, c);
  if (!res.feasible) EXPECT_EQ(res.rho, 100.0);
  std::set<double> rhos;
  for (const auto& row : res.trace) rhos.insert(row.rho);
  EXPECT_EQ(rhos.size(), res.feasible ? rhos.size() : 3u);
  EXPECT_EQ(res.trace.back().epoch, static_cast<int>(res.trace.size()));
}

TEST(Training, ExactPatternSubsetNeverHelps) {
  const auto inst = planar(6, 55);
  const auto full = oracle::solve_relu_exact(inst.X, inst.y, inst.patterns.D, 0.1, 0.0, Norm::l2);
  const MatrixXd half = inst.patterns.D.leftCols(inst.patterns.count() / 2);
  const auto part = oracle::solve_relu_exact(inst.X, inst.y, half, 0.1, 0.0, Norm::l2);
  ASSERT_EQ(full.status, conic::SolveStatus::optimal);
  ASSERT_EQ(part.status, conic::SolveStatus::optimal);
  EXPECT_LE(full.objective, part.objective + 1e-7);
}

TEST(Training, InputValidation) {
  const auto inst = planar(6, 56);
  EXPECT_THROW(train_convex_relu(inst.X, inst.y, inst.patterns, 0.0, 0.0, Norm::l1), DomainError);
  EXPECT_THROW(train_convex_relu(inst.X, inst.y, inst.patterns, 0.1, -1.0, Norm::l1), DomainError);
  VectorXd bad = inst.y;
  bad[0] = 0.5;
  EXPECT_THROW(train_convex_relu(inst.X, bad, inst.patterns, 0.1, 0.0, Norm::l1), DomainError);
  EXPECT_THROW(train_convex_relu(inst.X.topRows(5), inst.y.head(5), inst.patterns, 0.1, 0.0, Norm::l1), DomainError);
  PenaltyConfig c;
  c.momentum = 1.0;
  EXPECT_THROW(c.validate(), DomainError);
  c = {};
  c.prox_sweeps = 0;
  EXPECT_THROW(c.validate(), DomainError);
  c = {};
  c.max_rho = 1.0;
  EXPECT_THROW(c.validate(), DomainError);
}

TEST(Training, DivergenceKeepsLastFiniteIterate) {
  const auto inst = planar(6, 57);
  PenaltyConfig c;
  c.epochs = 50;
  c.step_size = 1e306;
  try {
    train_convex_relu(inst.X, inst.y, inst.patterns, 0.1, 0.0, Norm::l1, c);
    SUCCEED();  // the prox may keep huge steps finite
  } catch (const DivergenceError& e) {
    EXPECT_TRUE(e.last_finite().V.allFinite());
  }
}

TEST(Serialization, GatedModelRoundTrip) {
  std::mt19937_64 rng(58);
  const auto inst = planar(5, 58);
  const GatedLinearModel m = random_model(inst.patterns, 2, 0.25, Norm::linf, rng);
  const GatedLinearModel back = gated_model_from_json(to_json(m));
  EXPECT_TRUE(back.V == m.V);
  EXPECT_TRUE(back.W == m.W);
  EXPECT_EQ(back.p, Norm::linf);
  EXPECT_EQ(back.radius, 0.25);
  EXPECT_TRUE(back.patterns.D == m.patterns.D);

  testutil::TempDir dir;
  std::vector<TraceRow> trace(2);
  trace[1].epoch = 1;
  write_trace_csv(trace, dir / "t.csv");
  const std::string text = testutil::read_file(dir / "t.csv");
  EXPECT_EQ(text.substr(0, text.find('\n')), "epoch,rho,step,objective,hinge,regularizer,penalty,max_violation,iterate_objective");
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 3);
}
