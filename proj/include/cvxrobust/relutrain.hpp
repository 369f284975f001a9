#pragma once

// Convex training of two-layer ReLU networks through the gated linear model
//
//   yhat_k = sum_i D_i(k) x_k'(v_i - w_i),   (2 D_i - I) X v_i >= r ||v_i||_q  (same for w_i)
//
// with hinge loss on the worst-case margin over an l_p ball of radius r.
// The constraints are handled by a quadratic penalty and a first-order
// method started from the feasible point v = w = 0.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "cvxrobust/error.hpp"
#include "cvxrobust/polynet.hpp"

namespace cvxrobust {

/// Norm order of the perturbation ball; the weights are measured in its dual.
enum class Norm { l1, l2, linf };

Norm dual(Norm p);
double norm(const Eigen::Ref<const Eigen::VectorXd>& v, Norm p);
const char* to_string(Norm p);         // "1", "2", "inf"
Norm norm_from_string(const std::string& s);  // accepts 1, 2, inf, l1, l2, linf

/// min over ||x||_p <= r of c'x + b, i.e. b - r ||c||_q. Throws DomainError for r < 0.
double linear_min_over_ball(const Eigen::Ref<const Eigen::VectorXd>& c, double b, double r, Norm p);

// ---- sign patterns -----------------------------------------------------

struct SignPatternSet {
  Eigen::MatrixXd D;  // n x P, column i is diag(D_i), entries 0 or 1
  std::uint64_t seed = 0;
  Eigen::Index draws = 0;  // directions sampled before dedup

  Eigen::Index n() const { return D.rows(); }
  Eigen::Index count() const { return D.cols(); }
  std::string bitstring(Eigen::Index i) const;
  void validate() const;  // 0/1 entries, distinct columns
};

/// Draws `target` standard normal directions u, keeps the distinct patterns
/// 1[Xu >= 0] in order of first appearance.
SignPatternSet sample_sign_patterns(const Eigen::MatrixXd& X, Eigen::Index target, std::uint64_t seed);

/// Every pattern 1[Xu >= 0] over u in R^2, by sweeping the arrangement of
/// lines x_k'u = 0 (sector interiors and the rays between them). Requires d == 2.
SignPatternSet enumerate_sign_patterns_2d(const Eigen::MatrixXd& X);

// ---- gated linear model -------------------------------------------------

struct GatedLinearModel {
  SignPatternSet patterns;
  Eigen::MatrixXd V;  // d x P
  Eigen::MatrixXd W;  // d x P
  Norm p = Norm::l1;  // perturbation ball
  double radius = 0.0;
  double beta = 0.0;

  Eigen::Index dim() const { return V.rows(); }
  void validate() const;
};

GatedLinearModel zero_model(const SignPatternSet& patterns, Eigen::Index d, double beta, double radius, Norm p);

/// theta_k = sum_i D_i(k) (v_i - w_i), one row per training example.
Eigen::MatrixXd gated_theta(const GatedLinearModel& model);

/// Gated outputs x_k' theta_k on the training rows the patterns were built from.
Eigen::VectorXd gated_outputs(const GatedLinearModel& model, const Eigen::MatrixXd& X);

/// y_k x_k' theta_k - r ||theta_k||_q. Throws DomainError when k is out of range.
double worst_case_output(const GatedLinearModel& model, const Eigen::Ref<const Eigen::VectorXd>& x_k, double y_k,
                         Eigen::Index k);

struct ConstraintResidual {
  double max_violation = 0.0;  // max over i, k of (r ||v_i||_q - (2D_i(k) - 1) x_k'v_i)_+, same for w
  double scale = 0.0;          // max |x_k'v_i|, |x_k'w_i|
  // against the output scale, floored at the unit hinge margin
  double relative() const { return max_violation / std::max(scale, 1.0); }
};

ConstraintResidual constraint_residual(const GatedLinearModel& model, const Eigen::MatrixXd& X);

struct ObjectiveParts {
  double hinge = 0.0;        // (1/n) sum (1 - y_k x_k'theta_k + r ||theta_k||_q)_+
  double regularizer = 0.0;  // beta/2 sum ||v_i|| + ||w_i||
  double penalty = 0.0;      // rho sum ||(r ||v_i||_q - (2D_i - I) X v_i)_+||^2 + same for w
  double max_violation = 0.0;
  double objective() const { return hinge + regularizer; }
  double penalized() const { return hinge + regularizer + penalty; }
};

ObjectiveParts evaluate_objective(const GatedLinearModel& model, const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                  double rho);

// ---- training ----------------------------------------------------------

struct PenaltyConfig {
  double rho = 100.0;
  double max_rho = 1e5;
  double step_size = 0.0;  // 0 picks n / lambda_max(X'X)
  double momentum = 0.9;
  int epochs = 2000;
  int constant_epochs = 1000;  // then the step decays geometrically
  double final_step_ratio = 1e-3;  // step at the last epoch relative to the first
  Eigen::Index batch_size = 0;     // 0 means full batch
  int prox_sweeps = 10;            // cap on row sweeps per penalty prox
  double feasibility_tol = 1e-3;   // on the relative constraint residual
  std::uint64_t seed = 0;          // minibatch order

  void validate() const;
};

struct TraceRow {
  int epoch = 0;
  double rho = 0.0;
  double step = 0.0;
  double objective = 0.0;  // of the best iterate so far
  double hinge = 0.0;
  double regularizer = 0.0;
  double penalty = 0.0;
  double max_violation = 0.0;
  double iterate_objective = 0.0;  // penalized objective of the current iterate
};

struct ReluTrainResult {
  GatedLinearModel model;  // best penalized iterate of the last penalty round
  std::vector<TraceRow> trace;
  ConstraintResidual residual;
  double rho = 0.0;
  bool feasible = false;  // residual.relative() <= feasibility_tol
};

/// The objective turned non-finite. Carries the last finite iterate.
class DivergenceError : public NumericalError {
 public:
  DivergenceError(const std::string& what, GatedLinearModel last)
      : NumericalError(what), last_(std::move(last)) {}
  const GatedLinearModel& last_finite() const { return last_; }

 private:
  GatedLinearModel last_;
};

/// Minimizes hinge + regularizer + penalty from zero, keeping the best
/// penalized iterate. Each step is an inertial subgradient step on hinge
/// plus regularizer followed by an approximate prox of the penalty (sweeps
/// of exact row steps), so the step size is not limited by rho. When the residual
/// ends above tolerance, rho grows tenfold (up to max_rho) and training
/// restarts from the best iterate; a still infeasible model is returned with
/// feasible = false.
ReluTrainResult train_convex_relu(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const SignPatternSet& patterns,
                                  double beta, double radius, Norm p, const PenaltyConfig& config = {});

/// Neurons (v/sqrt||v||, sqrt||v||) and (w/sqrt||w||, -sqrt||w||) for weights
/// with ||.||_2 > prune_ratio * the largest weight norm.
TwoLayerNetwork recover_weights(const GatedLinearModel& model, double prune_ratio = 1e-6);

/// sum_j (u_j'x)_+ alpha_j. Throws DomainError on a non-ReLU network or a size mismatch.
double relu_forward(const TwoLayerNetwork& net, const Eigen::Ref<const Eigen::VectorXd>& x);

nlohmann::json to_json(const SignPatternSet& patterns);
SignPatternSet patterns_from_json(const nlohmann::json& j);
nlohmann::json to_json(const GatedLinearModel& model);
GatedLinearModel gated_model_from_json(const nlohmann::json& j);

void write_trace_csv(const std::vector<TraceRow>& trace, const std::filesystem::path& path);

}  // namespace cvxrobust
