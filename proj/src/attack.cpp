#include "cvxrobust/attack.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <span>

#include "cvxrobust/error.hpp"
#include "cvxrobust/kernels.hpp"
#include "cvxrobust/rng.hpp"

namespace cvxrobust {

using Eigen::Index;
using Eigen::VectorXd;

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void check_dim(const AttackModel& model, Index size) {
  if (size != input_dim(model)) {
    throw DomainError("attack: input has dimension " + std::to_string(size) + ", model expects " +
                      std::to_string(input_dim(model)));
  }
}

// min over t in [0, 1] of A t^2 + B t + C
double quadratic_segment_min(double A, double B, double C) {
  double best = std::min(C, A + B + C);
  if (A > 0.0) {
    const double t = -B / (2.0 * A);
    if (t > 0.0 && t < 1.0) best = std::min(best, (A * t + B) * t + C);
  }
  return best;
}

// min over t in [0, 1] of y f(x + t d)
double segment_min(const AttackModel& model, const VectorXd& x, const VectorXd& d, double y) {
  return std::visit(
      overloaded{
          [&](const QuadraticClassifier& clf) {
            const double a = clf.coeffs.a, b = clf.coeffs.b;
            const VectorXd Qd = clf.Q * d;
            const double A = a * d.dot(Qd);
            const double B = 2.0 * a * x.dot(Qd) + b * clf.g.dot(d);
            const double C = evaluate(clf, x);
            return quadratic_segment_min(y * A, y * B, y * C);
          },
          [&](const TwoLayerNetwork& net) {
            if (net.activation == Activation::polynomial) {
              double A = 0.0, B = 0.0, C = 0.0;
              const auto& s = net.coeffs;
              for (const auto& nr : net.neurons) {
                const double z0 = nr.u.dot(x), z1 = nr.u.dot(d);
                A += nr.alpha * s.a * z1 * z1;
                B += nr.alpha * (2.0 * s.a * z0 * z1 + s.b * z1);
                C += nr.alpha * s(z0);
              }
              return quadratic_segment_min(y * A, y * B, y * C);
            }
            // piecewise linear: the minimum sits at an end or a kink
            std::vector<double> ts{0.0, 1.0};
            for (const auto& nr : net.neurons) {
              const double z0 = nr.u.dot(x), z1 = nr.u.dot(d);
              if (z1 != 0.0) {
                const double t = -z0 / z1;
                if (t > 0.0 && t < 1.0) ts.push_back(t);
              }
            }
            double best = std::numeric_limits<double>::infinity();
            for (const double t : ts) best = std::min(best, y * net.forward(x + t * d));
            return best;
          },
      },
      model);
}

}  // namespace

double predict(const AttackModel& model, const Eigen::Ref<const VectorXd>& x) {
  check_dim(model, x.size());
  return std::visit(overloaded{[&](const QuadraticClassifier& clf) { return evaluate(clf, x); },
                               [&](const TwoLayerNetwork& net) { return net.forward(x); }},
                    model);
}

VectorXd input_gradient(const AttackModel& model, const Eigen::Ref<const VectorXd>& x) {
  check_dim(model, x.size());
  return std::visit(overloaded{[&](const QuadraticClassifier& clf) { return gradient(clf, x); },
                               [&](const TwoLayerNetwork& net) { return net.input_gradient(x); }},
                    model);
}

Index input_dim(const AttackModel& model) {
  return std::visit(overloaded{[](const QuadraticClassifier& clf) { return clf.dim(); },
                               [](const TwoLayerNetwork& net) { return net.input_dim; }},
                    model);
}

VectorXd fgsm(const AttackModel& model, const Eigen::Ref<const VectorXd>& x, double y, double eps) {
  if (!(eps >= 0.0) || !std::isfinite(eps)) throw DomainError("fgsm: eps must be finite and >= 0");
  const VectorXd dir = -y * input_gradient(model, x);
  VectorXd out(x.size());
  const auto n = static_cast<std::size_t>(x.size());
  kernels::sign_step({x.data(), n}, {dir.data(), n}, eps, {out.data(), n});
  return out;
}

AttackReport robust_accuracy(const AttackModel& model, const Dataset& data, const std::vector<double>& eps_grid,
                             const std::string& model_id) {
  for (const double e : eps_grid) {
    if (!(e >= 0.0) || !std::isfinite(e)) throw DomainError("robust_accuracy: eps values must be finite and >= 0");
  }
  if (data.n() > 0) check_dim(model, data.d());
  AttackReport rep;
  rep.model_id = model_id;
  rep.examples = data.n();
  rep.eps = eps_grid;
  const Index n = data.n();
  const auto ne = static_cast<Index>(eps_grid.size());
  Eigen::Matrix<long, Eigen::Dynamic, Eigen::Dynamic> hit = Eigen::Matrix<long, Eigen::Dynamic, Eigen::Dynamic>::Zero(n, ne);
#pragma omp parallel for schedule(dynamic, 8)
  for (Index k = 0; k < n; ++k) {
    const VectorXd x = data.X().row(k).transpose();
    const double y = data.y()[k];
    for (Index e = 0; e < ne; ++e) {
      const double eps = eps_grid[static_cast<std::size_t>(e)];
      const double f = eps == 0.0 ? predict(model, x) : predict(model, fgsm(model, x, y, eps));
      hit(k, e) = y * f > 0.0 ? 1 : 0;
    }
  }
  for (Index e = 0; e < ne; ++e) {
    rep.accuracy.push_back(n > 0 ? static_cast<double>(hit.col(e).sum()) / static_cast<double>(n) : 0.0);
  }
  return rep;
}

nlohmann::json to_json(const AttackReport& report) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < report.eps.size(); ++i) {
    rows.push_back({{"eps", report.eps[i]}, {"accuracy", report.accuracy[i]}});
  }
  return {{"type", "attack_report"}, {"model_id", report.model_id}, {"attack", report.attack},
          {"norm", report.norm},     {"units", report.units},       {"examples", report.examples},
          {"results", rows}};
}

void write_csv(const AttackReport& report, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.precision(17);
  out << "eps,accuracy\n";
  for (std::size_t i = 0; i < report.eps.size(); ++i) out << report.eps[i] << ',' << report.accuracy[i] << '\n';
}

VectorXd sample_unit_sphere(Index d, Norm p, std::mt19937_64& rng) {
  if (d < 1) throw DomainError("sample_unit_sphere: dimension must be >= 1");
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  std::exponential_distribution<double> expo(1.0);
  VectorXd g(d);
  for (;;) {
    for (Index j = 0; j < d; ++j) {
      switch (p) {
        case Norm::l1:
          g[j] = unif(rng) < 0.0 ? -expo(rng) : expo(rng);
          break;
        case Norm::l2:
          g[j] = normal(rng);
          break;
        case Norm::linf:
          g[j] = unif(rng);
          break;
      }
    }
    const double nrm = norm(g, p);
    if (nrm > 0.0) return g / nrm;
  }
}

double empirical_worst_case(const AttackModel& model, const Eigen::Ref<const VectorXd>& x, double y, double r, Norm p,
                            std::int64_t n_samples, std::uint64_t seed) {
  if (n_samples < 1) throw DomainError("empirical_worst_case: n_samples must be >= 1");
  if (!(r >= 0.0) || !std::isfinite(r)) throw DomainError("empirical_worst_case: radius must be finite and >= 0");
  check_dim(model, x.size());
  const VectorXd x0 = x;
  double best = y * predict(model, x0);
  if (r == 0.0) return best;

  // the direction a first-order attack would take, pushed to the sphere
  const VectorXd grad = -y * input_gradient(model, x0);
  VectorXd corner = VectorXd::Zero(x0.size());
  switch (p) {
    case Norm::linf:
      for (Index j = 0; j < grad.size(); ++j) corner[j] = grad[j] > 0.0 ? 1.0 : (grad[j] < 0.0 ? -1.0 : 0.0);
      break;
    case Norm::l2:
      if (grad.norm() > 0.0) corner = grad / grad.norm();
      break;
    case Norm::l1: {
      Index arg = 0;
      if (grad.cwiseAbs().maxCoeff(&arg) > 0.0) corner[arg] = grad[arg] > 0.0 ? 1.0 : -1.0;
      break;
    }
  }
  best = std::min(best, segment_min(model, x0, r * corner, y));

  std::mt19937_64 rng(derive_seed(seed, "worst-case"));
  for (std::int64_t s = 0; s < n_samples; ++s) {
    best = std::min(best, segment_min(model, x0, r * sample_unit_sphere(x0.size(), p, rng), y));
  }
  return best;
}

}  // namespace cvxrobust
