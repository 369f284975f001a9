#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

namespace cvxrobust {

/// sigma(u) = a u^2 + b u + c. The defaults are the least-squares ReLU fit
/// over [-5, 5] rounded to two digits.
struct ActivationCoeffs {
  double a = 0.09;
  double b = 0.50;
  double c = 0.47;

  double operator()(double u) const { return (a * u + b) * u + c; }
  void validate() const;  // a != 0, all finite
};

/// Least-squares quadratic fit of max(u, 0) on `grid_points` uniform samples
/// of [lo, hi]. Requires lo < 0 < hi and grid_points >= 3.
ActivationCoeffs fit_relu_poly(double lo, double hi, int grid_points);

/// Same fit for an arbitrary target sampled on the grid.
ActivationCoeffs fit_quadratic(double lo, double hi, int grid_points,
                               const std::function<double(double)>& target);

/// f(x) = a x'Qx + b g'x + c h
struct QuadraticClassifier {
  Eigen::MatrixXd Q;
  Eigen::VectorXd g;
  double h = 0.0;
  ActivationCoeffs coeffs;

  Eigen::Index dim() const { return g.size(); }
  void validate() const;
};

double evaluate(const QuadraticClassifier& clf, const Eigen::Ref<const Eigen::VectorXd>& x);

/// 2a Qx + b g
Eigen::VectorXd gradient(const QuadraticClassifier& clf, const Eigen::Ref<const Eigen::VectorXd>& x);

enum class Activation { polynomial, relu };

struct Neuron {
  Eigen::VectorXd u;
  double alpha = 0.0;
};

/// f(x) = sum_j sigma(u_j'x) alpha_j
struct TwoLayerNetwork {
  std::vector<Neuron> neurons;
  Activation activation = Activation::relu;
  ActivationCoeffs coeffs;  // used when activation == polynomial
  Eigen::Index input_dim = 0;

  double forward(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  Eigen::VectorXd input_gradient(const Eigen::Ref<const Eigen::VectorXd>& x) const;
};

/// Balanced rank-one factors p_j = (r_j, s_j) of Z = [[Z1, Z2], [Z2', Z4]]
/// with sum p_j p_j' = Z, ||r_j|| = s_j >= 0.
struct RankOneFactor {
  Eigen::VectorXd r;
  double s = 0.0;
};

std::vector<RankOneFactor> balanced_factors(const Eigen::MatrixXd& Z, double trace_tol = 1e-6);

/// Neurons (u_j = r_j / ||r_j||, alpha_j = s_j^2) from the balanced factors of Z.
std::vector<Neuron> neural_decomposition(const Eigen::MatrixXd& Z, double trace_tol = 1e-6);

/// Polynomial network from the two PSD blocks: Z gives positive second-layer
/// weights, Zp negative ones.
TwoLayerNetwork decompose_blocks(const Eigen::MatrixXd& Z, const Eigen::MatrixXd& Zp,
                                 const ActivationCoeffs& coeffs, double trace_tol = 1e-6);

/// Q = sum alpha u u', g = sum alpha u, h = sum alpha.
QuadraticClassifier to_quadratic(const TwoLayerNetwork& net);

nlohmann::json to_json(const ActivationCoeffs& c);
ActivationCoeffs coeffs_from_json(const nlohmann::json& j);
nlohmann::json to_json(const QuadraticClassifier& clf, const nlohmann::json& provenance = {});
QuadraticClassifier classifier_from_json(const nlohmann::json& j);
nlohmann::json to_json(const TwoLayerNetwork& net, const nlohmann::json& provenance = {});
TwoLayerNetwork network_from_json(const nlohmann::json& j);

}  // namespace cvxrobust
