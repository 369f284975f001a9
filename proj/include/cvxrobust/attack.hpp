#pragma once

// FGSM evaluation and sampled worst-case oracles for the trained models.

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "cvxrobust/dataset.hpp"
#include "cvxrobust/polynet.hpp"
#include "cvxrobust/relutrain.hpp"

namespace cvxrobust {

using AttackModel = std::variant<QuadraticClassifier, TwoLayerNetwork>;

double predict(const AttackModel& model, const Eigen::Ref<const Eigen::VectorXd>& x);
Eigen::VectorXd input_gradient(const AttackModel& model, const Eigen::Ref<const Eigen::VectorXd>& x);
Eigen::Index input_dim(const AttackModel& model);

/// x + eps sign(-y grad f(x)), with sign(0) = 0. ReLU networks use the
/// subgradient with inactive units at exactly zero preactivation.
Eigen::VectorXd fgsm(const AttackModel& model, const Eigen::Ref<const Eigen::VectorXd>& x, double y, double eps);

struct AttackReport {
  std::string model_id;
  std::string attack = "fgsm";
  std::string norm = "inf";
  std::string units = "standardized";
  Eigen::Index examples = 0;
  std::vector<double> eps;
  std::vector<double> accuracy;
};

/// Fraction of rows with sign(f(fgsm(x, y, eps))) == y for every eps. A zero
/// score counts as wrong.
AttackReport robust_accuracy(const AttackModel& model, const Dataset& data, const std::vector<double>& eps_grid,
                             const std::string& model_id = "");

nlohmann::json to_json(const AttackReport& report);
void write_csv(const AttackReport& report, const std::filesystem::path& path);

/// A point on the unit l_p sphere: generalized Gaussian (p = 1, 2) or uniform
/// cube (p = inf) draws, rescaled to norm one.
Eigen::VectorXd sample_unit_sphere(Eigen::Index d, Norm p, std::mt19937_64& rng);

/// min of y f(x + D) over the segments from x to n_samples random points of
/// the radius-r sphere, plus the segment to the FGSM-style point that moves
/// against the gradient. Each segment is minimized exactly (f is quadratic
/// or piecewise linear along a line), so the value is an upper bound on the
/// infimum over the ball that can only decrease as r or n_samples grows.
double empirical_worst_case(const AttackModel& model, const Eigen::Ref<const Eigen::VectorXd>& x, double y, double r,
                            Norm p, std::int64_t n_samples, std::uint64_t seed);

}  // namespace cvxrobust
