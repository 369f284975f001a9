#pragma once

// Convex training of two-layer polynomial-activation networks as SDPs over
// the PSD blocks Z = [[Z1, Z2], [Z2', Z4]] and Z' (same shape), with
//   Q = Z1 - Z1',  g = Z2 - Z2',  h = Z4 - Z4',  tr(Z1) = Z4,  tr(Z1') = Z4'
// and regularizer beta (Z4 + Z4'). The robust program replaces the hinge on
// y_i f(x_i) by a hinge on a margin delta_i certified over the l2 ball of
// radius r through one S-procedure LMI per example.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "cvxrobust/conic.hpp"
#include "cvxrobust/dataset.hpp"
#include "cvxrobust/error.hpp"
#include "cvxrobust/polynet.hpp"

namespace cvxrobust {

struct SdpBlocks {
  Eigen::MatrixXd Z;   // (d+1) x (d+1)
  Eigen::MatrixXd Zp;  // (d+1) x (d+1)

  Eigen::Index dim() const { return Z.rows() - 1; }
  Eigen::MatrixXd Z1() const { return Z.topLeftCorner(dim(), dim()); }
  Eigen::VectorXd Z2() const { return Z.col(dim()).head(dim()); }
  double Z4() const { return Z(dim(), dim()); }
  Eigen::MatrixXd Z1p() const { return Zp.topLeftCorner(dim(), dim()); }
  Eigen::VectorXd Z2p() const { return Zp.col(dim()).head(dim()); }
  double Z4p() const { return Zp(dim(), dim()); }

  QuadraticClassifier classifier(const ActivationCoeffs& coeffs) const;
};

struct RobustCertificate {
  double radius = 0.0;
  Eigen::VectorXd lambda;
  Eigen::VectorXd delta;
  Eigen::VectorXd lmi_min_eigenvalue;  // of S(r, delta_i, lambda_i, x_i, Q, g, h)
};

/// Interior point at 1e-8: the training SDPs are small enough to factor
/// densely and the certificates are checked against sampled attacks.
conic::SolverSettings poly_solver_defaults();

struct TrainConfig {
  double beta = 0.01;
  double radius = 0.0;  // 0 selects the standard program
  ActivationCoeffs coeffs;
  conic::SolverSettings solver = poly_solver_defaults();
};

/// Index layout of the unknowns an S-procedure LMI is affine in:
/// lower triangle of Q (svec order, unscaled), g, h, delta, lambda.
struct LmiUnknowns {
  Eigen::Index d = 0;

  Eigen::Index q(Eigen::Index i, Eigen::Index j) const { return conic::svec_index(d, i, j); }
  Eigen::Index g(Eigen::Index i) const { return conic::svec_length(d) + i; }
  Eigen::Index h() const { return conic::svec_length(d) + d; }
  Eigen::Index delta() const { return h() + 1; }
  Eigen::Index lambda() const { return h() + 2; }
  Eigen::Index count() const { return h() + 3; }
};

/// The (d+1) x (d+1) LMI
///   lambda diag(I, -r^2) + y [[aQ, b g/2 + aQx], [., a x'Qx + b g'x + c h - delta/y]]  >= 0
/// which holds iff y f(x + D) >= delta for every ||D||_2 <= r (given lambda >= 0).
/// The stencil stores its congruence by T^{-1}, T = [[I, x], [0, 1]]:
///   y [[aQ, b g/2], [b g'/2, c h]] + lambda [[I, -x], [-x', ||x||^2 - r^2]] - delta e e'  >= 0
/// where every entry of Q, g and h appears once.
struct LmiStencil {
  Eigen::Index side = 0;
  LmiUnknowns unknowns;
  std::vector<conic::AffineExpr> entries;  // lower triangle, column-major, over unknown indices

  Eigen::MatrixXd assemble(const Eigen::MatrixXd& Q, const Eigen::VectorXd& g, double h, double delta,
                           double lambda) const;
};

LmiStencil s_procedure_lmi(double r, const Eigen::Ref<const Eigen::VectorXd>& x, double y,
                           const ActivationCoeffs& coeffs);

/// A training SDP plus what extraction needs to interpret its solution.
struct PolySdp {
  conic::ConicProgram program;
  Eigen::Index d = 0;
  Eigen::Index n = 0;
  double beta = 0.0;
  std::optional<double> radius;
  ActivationCoeffs coeffs;
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
};

PolySdp build_standard_sdp(const Dataset& data, double beta, const ActivationCoeffs& coeffs = {});
PolySdp build_robust_sdp(const Dataset& data, double beta, double r, const ActivationCoeffs& coeffs = {});

/// Solver status was not usable; carries the residuals.
class SolveFailure : public NumericalError {
 public:
  SolveFailure(const std::string& what, conic::ConicSolution sol)
      : NumericalError(what), solution_(std::move(sol)) {}
  const conic::ConicSolution& solution() const { return solution_; }

 private:
  conic::ConicSolution solution_;
};

struct ExtractedModel {
  QuadraticClassifier classifier;
  SdpBlocks blocks;
  std::optional<RobustCertificate> certificate;
  double hinge_loss = 0.0;  // mean (1 - y f(x))_+ or mean (1 - delta)_+
  double objective = 0.0;
  double z_min_eigenvalue = 0.0;
  double zp_min_eigenvalue = 0.0;
  std::vector<std::string> warnings;
};

/// Accepts status optimal, or max_iters with residuals within 10x `tol`
/// (with a warning). Anything else throws SolveFailure.
ExtractedModel extract_classifier(const conic::ConicSolution& sol, const PolySdp& sdp, double tol);

struct PolyTrainResult {
  ExtractedModel model;
  conic::ConicSolution solution;
};

PolyTrainResult train_poly(const Dataset& data, const TrainConfig& config);

// ---- distance to the decision boundary ------------------------------------

struct DistanceOptions {
  const Eigen::MatrixXd* reference_points = nullptr;  // rows probed for a sign change
  int random_probes = 100;
  std::uint64_t seed = 0;
};

struct DistanceResult {
  double distance = 0.0;  // sqrt(s*), +inf when the classifier is single-signed
  double s = 0.0;
  double lambda = 0.0;
  bool unbounded = false;
  std::string diagnostic;
};

/// Solves  max s  s.t.  lambda >= 0,
///   lambda y [[aQ, b g/2], [b g'/2, c h]] - [[-I, x], [x', s - ||x||^2]] >= 0.
/// The two-variable SDP is solved through its Schur complement in the
/// eigenbasis of Q, which reduces it to a concave maximization over lambda.
/// Throws DomainError when y f(x) < 0.
DistanceResult decision_distance(const QuadraticClassifier& clf, const Eigen::Ref<const Eigen::VectorXd>& x,
                                 double y, const DistanceOptions& options = {});

/// The same SDP as a ConicProgram (variables "s" and "lambda").
conic::ConicProgram build_decision_distance_sdp(const QuadraticClassifier& clf,
                                                const Eigen::Ref<const Eigen::VectorXd>& x, double y);

/// Distances for every row; rows with y f(x) < 0 get NaN.
std::vector<DistanceResult> decision_distances(const QuadraticClassifier& clf, const Eigen::MatrixXd& X,
                                               const Eigen::VectorXd& y, const DistanceOptions& options = {});

nlohmann::json to_json(const SdpBlocks& blocks);
nlohmann::json to_json(const RobustCertificate& cert);

}  // namespace cvxrobust
