#include "cvxrobust/relutrain.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <unordered_set>

#include <Eigen/Eigenvalues>

#include "cvxrobust/kernels.hpp"
#include "cvxrobust/rng.hpp"

namespace cvxrobust {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

std::span<const double> span_of(const Eigen::Ref<const VectorXd>& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

// A subgradient of ||v||_q, zero at v = 0.
void add_norm_subgradient(const Eigen::Ref<const VectorXd>& v, Norm q, double scale, Eigen::Ref<VectorXd> out) {
  switch (q) {
    case Norm::l1:
      for (Index j = 0; j < v.size(); ++j) {
        if (v[j] > 0.0) out[j] += scale;
        if (v[j] < 0.0) out[j] -= scale;
      }
      return;
    case Norm::l2: {
      const double nv = v.norm();
      if (nv > 0.0) out += (scale / nv) * v;
      return;
    }
    case Norm::linf: {
      Index arg = 0;
      const double m = v.cwiseAbs().maxCoeff(&arg);
      if (m > 0.0) out[arg] += v[arg] > 0.0 ? scale : -scale;
      return;
    }
  }
}

VectorXd column_norms(const MatrixXd& M, Norm q) {
  VectorXd out(M.cols());
  for (Index i = 0; i < M.cols(); ++i) out[i] = norm(M.col(i), q);
  return out;
}

nlohmann::json matrix_json(const MatrixXd& M) {
  nlohmann::json cols = nlohmann::json::array();
  for (Index i = 0; i < M.cols(); ++i) cols.push_back(std::vector<double>(M.col(i).data(), M.col(i).data() + M.rows()));
  return cols;
}

MatrixXd matrix_from(const nlohmann::json& cols, Index rows) {
  MatrixXd M(rows, static_cast<Index>(cols.size()));
  for (Index i = 0; i < M.cols(); ++i) {
    const auto v = cols.at(static_cast<std::size_t>(i)).get<std::vector<double>>();
    if (static_cast<Index>(v.size()) != rows) throw DomainError("json: weight vector has the wrong length");
    M.col(i) = Eigen::Map<const VectorXd>(v.data(), rows);
  }
  return M;
}

}  // namespace

// ---- norms ------------------------------------------------------------

Norm dual(Norm p) {
  switch (p) {
    case Norm::l1:
      return Norm::linf;
    case Norm::l2:
      return Norm::l2;
    case Norm::linf:
      return Norm::l1;
  }
  return Norm::l2;
}

double norm(const Eigen::Ref<const VectorXd>& v, Norm p) {
  switch (p) {
    case Norm::l1:
      return kernels::norm1(span_of(v));
    case Norm::l2:
      return v.norm();
    case Norm::linf:
      return kernels::norm_inf(span_of(v));
  }
  return 0.0;
}

const char* to_string(Norm p) {
  switch (p) {
    case Norm::l1:
      return "1";
    case Norm::l2:
      return "2";
    case Norm::linf:
      return "inf";
  }
  return "?";
}

Norm norm_from_string(const std::string& s) {
  if (s == "1" || s == "l1") return Norm::l1;
  if (s == "2" || s == "l2") return Norm::l2;
  if (s == "inf" || s == "linf" || s == "Inf" || s == "infinity") return Norm::linf;
  throw DomainError("unknown norm '" + s + "' (expected 1, 2 or inf)");
}

double linear_min_over_ball(const Eigen::Ref<const VectorXd>& c, double b, double r, Norm p) {
  if (!(r >= 0.0) || !std::isfinite(r)) throw DomainError("linear_min_over_ball: radius must be finite and >= 0");
  if (r == 0.0) return b;
  return b - r * norm(c, dual(p));
}

// ---- sign patterns -----------------------------------------------------

std::string SignPatternSet::bitstring(Index i) const {
  std::string s(static_cast<std::size_t>(D.rows()), '0');
  for (Index k = 0; k < D.rows(); ++k) {
    if (D(k, i) != 0.0) s[static_cast<std::size_t>(k)] = '1';
  }
  return s;
}

void SignPatternSet::validate() const {
  std::unordered_set<std::string> seen;
  for (Index i = 0; i < D.cols(); ++i) {
    for (Index k = 0; k < D.rows(); ++k) {
      if (D(k, i) != 0.0 && D(k, i) != 1.0) throw DomainError("sign patterns: entries must be 0 or 1");
    }
    if (!seen.insert(bitstring(i)).second) throw DomainError("sign patterns: duplicate pattern");
  }
}

namespace {

SignPatternSet collect(const MatrixXd& X, const std::vector<VectorXd>& directions) {
  SignPatternSet out;
  out.draws = static_cast<Index>(directions.size());
  std::unordered_set<std::string> seen;
  std::vector<VectorXd> kept;
  for (const VectorXd& u : directions) {
    const VectorXd z = X * u;
    VectorXd ind(z.size());
    std::string key(static_cast<std::size_t>(z.size()), '0');
    for (Index k = 0; k < z.size(); ++k) {
      ind[k] = z[k] >= 0.0 ? 1.0 : 0.0;
      if (ind[k] != 0.0) key[static_cast<std::size_t>(k)] = '1';
    }
    if (seen.insert(key).second) kept.push_back(std::move(ind));
  }
  out.D.resize(X.rows(), static_cast<Index>(kept.size()));
  for (std::size_t i = 0; i < kept.size(); ++i) out.D.col(static_cast<Index>(i)) = kept[i];
  return out;
}

}  // namespace

SignPatternSet sample_sign_patterns(const MatrixXd& X, Index target, std::uint64_t seed) {
  if (target < 1) throw DomainError("sample_sign_patterns: target must be >= 1");
  if (X.rows() < 1 || X.cols() < 1) throw DomainError("sample_sign_patterns: empty data");
  Rng rng(derive_seed(seed, "sign-patterns"));
  std::normal_distribution<double> normal;
  std::vector<VectorXd> dirs(static_cast<std::size_t>(target));
  for (auto& u : dirs) {
    u.resize(X.cols());
    for (Index j = 0; j < u.size(); ++j) u[j] = normal(rng);
  }
  SignPatternSet out = collect(X, dirs);
  out.seed = seed;
  return out;
}

SignPatternSet enumerate_sign_patterns_2d(const MatrixXd& X) {
  if (X.cols() != 2) throw DomainError("enumerate_sign_patterns_2d: data must have two columns");
  // x_k'u changes sign where u is orthogonal to x_k
  std::vector<double> angles;
  for (Index k = 0; k < X.rows(); ++k) {
    if (X.row(k).squaredNorm() == 0.0) continue;
    const double phi = std::atan2(X(k, 1), X(k, 0)) + M_PI / 2.0;
    for (const double a : {phi, phi + M_PI}) angles.push_back(std::remainder(a, 2.0 * M_PI));
  }
  std::vector<VectorXd> dirs;
  const auto at = [](double t) { return VectorXd{{std::cos(t), std::sin(t)}}; };
  if (angles.empty()) {
    dirs.push_back(at(0.0));
  } else {
    std::sort(angles.begin(), angles.end());
    for (std::size_t i = 0; i < angles.size(); ++i) {
      const double a = angles[i];
      const double next = i + 1 < angles.size() ? angles[i + 1] : angles[0] + 2.0 * M_PI;
      if (next > a) dirs.push_back(at(0.5 * (a + next)));
    }
    // the rays themselves, built from the rows so x_k'u = 0 exactly
    for (Index k = 0; k < X.rows(); ++k) {
      if (X.row(k).squaredNorm() == 0.0) continue;
      dirs.push_back(VectorXd{{-X(k, 1), X(k, 0)}});
      dirs.push_back(VectorXd{{X(k, 1), -X(k, 0)}});
    }
  }
  return collect(X, dirs);
}

// ---- gated linear model -------------------------------------------------

void GatedLinearModel::validate() const {
  if (V.rows() != W.rows() || V.cols() != W.cols()) throw DomainError("gated model: V and W shapes differ");
  if (V.cols() != patterns.count()) throw DomainError("gated model: weight count differs from pattern count");
  if (!V.allFinite() || !W.allFinite()) throw DomainError("gated model: non-finite weights");
  if (!(radius >= 0.0) || !std::isfinite(radius)) throw DomainError("gated model: radius must be >= 0");
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw DomainError("gated model: beta must be >= 0");
}

GatedLinearModel zero_model(const SignPatternSet& patterns, Index d, double beta, double radius, Norm p) {
  GatedLinearModel m;
  m.patterns = patterns;
  m.V = MatrixXd::Zero(d, patterns.count());
  m.W = MatrixXd::Zero(d, patterns.count());
  m.p = p;
  m.radius = radius;
  m.beta = beta;
  return m;
}

MatrixXd gated_theta(const GatedLinearModel& model) { return model.patterns.D * (model.V - model.W).transpose(); }

VectorXd gated_outputs(const GatedLinearModel& model, const MatrixXd& X) {
  if (X.rows() != model.patterns.n() || X.cols() != model.dim()) {
    throw DomainError("gated_outputs: data does not match the training rows of the patterns");
  }
  return (X.cwiseProduct(gated_theta(model))).rowwise().sum();
}

double worst_case_output(const GatedLinearModel& model, const Eigen::Ref<const VectorXd>& x_k, double y_k, Index k) {
  if (k < 0 || k >= model.patterns.n()) throw DomainError("worst_case_output: row index out of range");
  if (x_k.size() != model.dim()) throw DomainError("worst_case_output: dimension mismatch");
  const VectorXd theta = (model.V - model.W) * model.patterns.D.row(k).transpose();
  return linear_min_over_ball(y_k * theta, y_k * x_k.dot(theta), model.radius, model.p);
}

ConstraintResidual constraint_residual(const GatedLinearModel& model, const MatrixXd& X) {
  if (X.rows() != model.patterns.n() || X.cols() != model.dim()) {
    throw DomainError("constraint_residual: data does not match the patterns");
  }
  const Norm q = dual(model.p);
  const MatrixXd S = 2.0 * model.patterns.D.array() - 1.0;
  ConstraintResidual res;
  for (const MatrixXd* M : {&model.V, &model.W}) {
    const MatrixXd XM = X * *M;
    const VectorXd nq = column_norms(*M, q);
    for (Index i = 0; i < XM.cols(); ++i) {
      for (Index k = 0; k < XM.rows(); ++k) {
        res.max_violation = std::max(res.max_violation, model.radius * nq[i] - S(k, i) * XM(k, i));
        res.scale = std::max(res.scale, std::abs(XM(k, i)));
      }
    }
  }
  return res;
}

namespace {

// Rows the objective is taken over: all of them, or a minibatch whose
// penalty is scaled by n / m so both estimate the full-data objective.
struct Rows {
  MatrixXd X;   // m x d
  MatrixXd Xt;  // d x m
  VectorXd y;
  MatrixXd S;  // m x P, 2 D - 1
  MatrixXd D;
  double scale = 1.0;
};

Rows take_rows(const MatrixXd& X, const VectorXd& y, const MatrixXd& D, const std::vector<Index>* rows) {
  Rows out;
  if (rows == nullptr) {
    out.X = X;
    out.y = y;
    out.D = D;
  } else {
    const auto m = static_cast<Index>(rows->size());
    out.X.resize(m, X.cols());
    out.D.resize(m, D.cols());
    out.y.resize(m);
    for (Index t = 0; t < m; ++t) {
      const Index k = (*rows)[static_cast<std::size_t>(t)];
      out.X.row(t) = X.row(k);
      out.D.row(t) = D.row(k);
      out.y[t] = y[k];
    }
    out.scale = static_cast<double>(X.rows()) / static_cast<double>(m);
  }
  out.Xt = out.X.transpose();
  out.S = 2.0 * out.D.array() - 1.0;
  return out;
}

// Objective pieces and, when `gV` is set, a subgradient of hinge plus
// regularizer. The penalty enters training through penalty_prox instead.
ObjectiveParts evaluate(const Rows& b, const MatrixXd& V, const MatrixXd& W, double beta, double r, Norm q,
                        double rho, MatrixXd* gV, MatrixXd* gW) {
  const Index m = b.X.rows();
  ObjectiveParts parts;
  const MatrixXd Theta = b.D * (V - W).transpose();  // m x d
  VectorXd margins(m);
  for (Index k = 0; k < m; ++k) {
    margins[k] = b.y[k] * b.X.row(k).dot(Theta.row(k));
    if (r > 0.0) margins[k] -= r * norm(Theta.row(k).transpose(), q);
  }
  parts.hinge = kernels::hinge_sum(span_of(margins)) / static_cast<double>(m);

  if (gV != nullptr) {
    MatrixXd G = MatrixXd::Zero(m, b.X.cols());  // d hinge / d theta_k
    const double inv = 1.0 / static_cast<double>(m);
    for (Index k = 0; k < m; ++k) {
      if (margins[k] >= 1.0) continue;
      G.row(k) = (-b.y[k] * inv) * b.X.row(k);
      if (r > 0.0) {
        VectorXd sub = VectorXd::Zero(b.X.cols());
        add_norm_subgradient(Theta.row(k).transpose(), q, r * inv, sub);
        G.row(k) += sub.transpose();
      }
    }
    *gV = G.transpose() * b.D;  // d x P
    *gW = -*gV;
  }

  const double tiny = std::numeric_limits<double>::min();
  for (int side = 0; side < 2; ++side) {
    const MatrixXd& M = side == 0 ? V : W;
    MatrixXd* gM = side == 0 ? gV : gW;
    for (Index i = 0; i < M.cols(); ++i) {
      const double n2 = M.col(i).norm();
      parts.regularizer += 0.5 * beta * n2;
      if (gM != nullptr && n2 > tiny) gM->col(i) += (0.5 * beta / n2) * M.col(i);
    }
    const MatrixXd XM = b.X * M;  // m x P
    const VectorXd nq = r > 0.0 ? column_norms(M, q) : VectorXd::Zero(M.cols());
    MatrixXd C(m, M.cols());
    for (Index i = 0; i < M.cols(); ++i) C.col(i) = r * nq[i] - b.S.col(i).cwiseProduct(XM.col(i)).array();
    parts.penalty += rho * b.scale * kernels::pos_sq_sum(std::span<const double>(C.data(), static_cast<std::size_t>(C.size())));
    if (C.size() > 0) parts.max_violation = std::max(parts.max_violation, C.maxCoeff());
  }
  return parts;
}

// Approximate prox of the penalty by sweeps of closed-form row steps,
//   v <- argmin 1/2 ||v - z||^2 + t (a'v)_+^2,   a = r g - s_k x_k,
// over the violated rows, with g a subgradient of ||.||_q re-taken every
// sweep. Each sweep first rescales v by the exact minimizer along the ray
// through it. A column stops once a sweep moves it by less than 1e-3 of
// its norm.
void penalty_prox(MatrixXd& M, const Rows& b, double r, Norm q, double t, int max_sweeps) {
  constexpr double tol = 1e-3;
  const MatrixXd XM0 = b.X * M;
  const VectorXd row_sq = b.Xt.colwise().squaredNorm().transpose();
#pragma omp parallel for schedule(dynamic, 4)
  for (Index i = 0; i < M.cols(); ++i) {
    auto v = M.col(i);
    VectorXd g = VectorXd::Zero(M.rows());
    double nq = 0.0, gg = 0.0;
    VectorXd xv = XM0.col(i);
    const VectorXd z = v;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
      if (sweep > 0) xv.noalias() = b.X * v;
      if (r > 0.0) {
        nq = norm(v, q);
        g.setZero();
        add_norm_subgradient(v, q, 1.0, g);
        gg = g.squaredNorm();
      }
      double phi = 0.0;
      for (Index k = 0; k < xv.size(); ++k) {
        const double c = r * nq - b.S(k, i) * xv[k];
        if (c > 0.0) phi += c * c;
      }
      const double vv = v.squaredNorm();
      if (phi > 0.0 && vv > 0.0) {
        const double c = std::max(0.0, v.dot(z) / (vv + 2.0 * t * phi));
        v *= c;
        xv *= c;
        nq *= c;
      }
      double moved = 0.0;
      for (Index k = 0; k < xv.size(); ++k) {
        const double s = b.S(k, i);
        if (r * nq - s * xv[k] <= 0.0) continue;
        const auto x = b.Xt.col(k);
        const double gx = r > 0.0 ? g.dot(x) : 0.0;
        const double viol = (r > 0.0 ? r * g.dot(v) : 0.0) - s * x.dot(v);
        if (viol <= 0.0) continue;
        const double aa = r * r * gg - 2.0 * r * s * gx + row_sq[k];
        const double alpha = 2.0 * t * viol / (1.0 + 2.0 * t * aa);
        if (r > 0.0) v -= (alpha * r) * g;
        v += (alpha * s) * x;
        moved += alpha * std::sqrt(aa);
      }
      if (moved <= tol * v.norm()) break;
    }
  }
}

// n / lambda_max(X'X), the inverse curvature scale of an averaged loss in theta.
double data_step(const MatrixXd& X) {
  const MatrixXd G = X.transpose() * X;
  const double lam = Eigen::SelfAdjointEigenSolver<MatrixXd>(G, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
  return lam > 0.0 ? static_cast<double>(X.rows()) / lam : 1.0;
}

}  // namespace

ObjectiveParts evaluate_objective(const GatedLinearModel& model, const MatrixXd& X, const VectorXd& y, double rho) {
  model.validate();
  if (X.rows() != model.patterns.n() || X.cols() != model.dim() || y.size() != X.rows()) {
    throw DomainError("evaluate_objective: data does not match the model");
  }
  return evaluate(take_rows(X, y, model.patterns.D, nullptr), model.V, model.W, model.beta, model.radius,
                  dual(model.p), rho, nullptr, nullptr);
}

void PenaltyConfig::validate() const {
  if (!(rho > 0.0)) throw DomainError("penalty: rho must be > 0");
  if (!(max_rho >= rho)) throw DomainError("penalty: max_rho must be >= rho");
  if (!(step_size >= 0.0)) throw DomainError("penalty: step_size must be >= 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw DomainError("penalty: momentum must be in [0, 1)");
  if (epochs < 0) throw DomainError("penalty: epochs must be >= 0");
  if (constant_epochs < 0) throw DomainError("penalty: constant_epochs must be >= 0");
  if (!(final_step_ratio > 0.0 && final_step_ratio <= 1.0)) throw DomainError("penalty: final_step_ratio must be in (0, 1]");
  if (batch_size < 0) throw DomainError("penalty: batch_size must be >= 0");
  if (prox_sweeps < 1) throw DomainError("penalty: prox_sweeps must be >= 1");
  if (!(feasibility_tol > 0.0)) throw DomainError("penalty: feasibility_tol must be > 0");
}

ReluTrainResult train_convex_relu(const MatrixXd& X, const VectorXd& y, const SignPatternSet& patterns, double beta,
                                  double radius, Norm p, const PenaltyConfig& config) {
  config.validate();
  if (X.rows() == 0) throw DomainError("train_convex_relu: empty data");
  if (y.size() != X.rows()) throw DomainError("train_convex_relu: label count differs from row count");
  for (Index k = 0; k < y.size(); ++k) {
    if (y[k] != 1.0 && y[k] != -1.0) throw DomainError("train_convex_relu: labels must be +1 or -1");
  }
  if (patterns.count() == 0) throw DomainError("train_convex_relu: no sign patterns");
  if (patterns.n() != X.rows()) throw DomainError("train_convex_relu: patterns were built on different rows");
  if (!(beta > 0.0)) throw DomainError("train_convex_relu: beta must be > 0");
  if (!(radius >= 0.0) || !std::isfinite(radius)) throw DomainError("train_convex_relu: radius must be >= 0");

  const Index n = X.rows();
  const Index batch = config.batch_size > 0 && config.batch_size < n ? config.batch_size : 0;
  const double step0 = config.step_size > 0.0 ? config.step_size : data_step(X);
  const Norm q = dual(p);
  const Rows all = take_rows(X, y, patterns.D, nullptr);

  ReluTrainResult result;
  GatedLinearModel best = zero_model(patterns, X.cols(), beta, radius, p);
  double rho = config.rho;
  Rng rng(derive_seed(config.seed, "minibatch"));
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  int epoch_base = 0;

  for (;;) {
    MatrixXd V = best.V, W = best.W;
    MatrixXd Mv = MatrixXd::Zero(V.rows(), V.cols()), Mw = Mv;
    MatrixXd gV, gW;
    // inertial step on hinge + regularizer, then the penalty prox; the
    // momentum is the last displacement, prox included
    const auto update = [&](const Rows& b, double step) {
      MatrixXd Vn = V + config.momentum * Mv - step * gV;
      MatrixXd Wn = W + config.momentum * Mw - step * gW;
      penalty_prox(Vn, b, radius, q, step * rho * b.scale, config.prox_sweeps);
      penalty_prox(Wn, b, radius, q, step * rho * b.scale, config.prox_sweeps);
      Mv = Vn - V;
      Mw = Wn - W;
      V = std::move(Vn);
      W = std::move(Wn);
    };
    ObjectiveParts best_parts = evaluate(all, V, W, beta, radius, q, rho, nullptr, nullptr);
    double best_value = best_parts.penalized();
    if (!std::isfinite(best_value)) throw DomainError("train_convex_relu: objective is not finite at the start");

    const auto record = [&](int epoch, double step, const ObjectiveParts& current) {
      TraceRow row;
      row.epoch = epoch;
      row.rho = rho;
      row.step = step;
      row.objective = best_parts.objective();
      row.hinge = best_parts.hinge;
      row.regularizer = best_parts.regularizer;
      row.penalty = best_parts.penalty;
      row.max_violation = best_parts.max_violation;
      row.iterate_objective = current.penalized();
      result.trace.push_back(row);
    };
    const auto consider = [&](const ObjectiveParts& parts) {
      const double value = parts.penalized();
      if (!std::isfinite(value)) {
        throw DivergenceError("train_convex_relu: objective diverged; lower the step size", best);
      }
      if (value < best_value) {
        best_value = value;
        best_parts = parts;
        best.V = V;
        best.W = W;
      }
    };

    const int decay_epochs = std::max(1, config.epochs - config.constant_epochs);
    for (int e = 0; e < config.epochs; ++e) {
      const double step =
          e < config.constant_epochs
              ? step0
              : step0 * std::pow(config.final_step_ratio,
                                 static_cast<double>(e - config.constant_epochs + 1) / static_cast<double>(decay_epochs));
      if (batch == 0) {
        const ObjectiveParts parts = evaluate(all, V, W, beta, radius, q, rho, &gV, &gW);
        consider(parts);
        update(all, step);
        record(epoch_base + e + 1, step, parts);
      } else {
        std::shuffle(order.begin(), order.end(), rng);
        for (Index s = 0; s < n; s += batch) {
          const std::vector<Index> rows(order.begin() + s, order.begin() + std::min(n, s + batch));
          const Rows b = take_rows(X, y, patterns.D, &rows);
          evaluate(b, V, W, beta, radius, q, rho, &gV, &gW);
          update(b, step);
        }
        const ObjectiveParts parts = evaluate(all, V, W, beta, radius, q, rho, nullptr, nullptr);
        consider(parts);
        record(epoch_base + e + 1, step, parts);
      }
    }
    if (batch == 0 && config.epochs > 0) consider(evaluate(all, V, W, beta, radius, q, rho, nullptr, nullptr));
    epoch_base += config.epochs;

    result.residual = constraint_residual(best, X);
    result.rho = rho;
    result.feasible = result.residual.relative() <= config.feasibility_tol;
    if (result.feasible || rho * 10.0 > config.max_rho * (1.0 + 1e-12) || config.epochs == 0) break;
    rho *= 10.0;
  }
  result.model = std::move(best);
  return result;
}

// ---- weight recovery ----------------------------------------------------

TwoLayerNetwork recover_weights(const GatedLinearModel& model, double prune_ratio) {
  model.validate();
  TwoLayerNetwork net;
  net.activation = Activation::relu;
  net.input_dim = model.dim();
  const VectorXd nv = model.V.colwise().norm().transpose();
  const VectorXd nw = model.W.colwise().norm().transpose();
  double largest = 0.0;
  if (nv.size() > 0) largest = std::max(nv.maxCoeff(), nw.maxCoeff());
  if (largest == 0.0) return net;
  const double cut = prune_ratio * largest;
  for (Index i = 0; i < nv.size(); ++i) {
    if (nv[i] > cut) {
      const double s = std::sqrt(nv[i]);
      net.neurons.push_back({model.V.col(i) / s, s});
    }
    if (nw[i] > cut) {
      const double s = std::sqrt(nw[i]);
      net.neurons.push_back({model.W.col(i) / s, -s});
    }
  }
  return net;
}

double relu_forward(const TwoLayerNetwork& net, const Eigen::Ref<const VectorXd>& x) {
  if (net.activation != Activation::relu) throw DomainError("relu_forward: network is not a ReLU network");
  return net.forward(x);
}

// ---- serialization ------------------------------------------------------

nlohmann::json to_json(const SignPatternSet& patterns) {
  nlohmann::json bits = nlohmann::json::array();
  for (Index i = 0; i < patterns.count(); ++i) bits.push_back(patterns.bitstring(i));
  return {{"type", "sign_patterns"}, {"n", patterns.n()}, {"seed", patterns.seed}, {"draws", patterns.draws},
          {"patterns", bits}};
}

SignPatternSet patterns_from_json(const nlohmann::json& j) {
  if (j.value("type", "") != "sign_patterns") throw DomainError("json: not a sign_patterns object");
  SignPatternSet out;
  const auto n = j.at("n").get<Index>();
  const auto& bits = j.at("patterns");
  out.D.resize(n, static_cast<Index>(bits.size()));
  for (Index i = 0; i < out.D.cols(); ++i) {
    const auto s = bits.at(static_cast<std::size_t>(i)).get<std::string>();
    if (static_cast<Index>(s.size()) != n) throw DomainError("json: pattern length differs from n");
    for (Index k = 0; k < n; ++k) {
      const char ch = s[static_cast<std::size_t>(k)];
      if (ch != '0' && ch != '1') throw DomainError("json: pattern bits must be 0 or 1");
      out.D(k, i) = ch == '1' ? 1.0 : 0.0;
    }
  }
  out.seed = j.value("seed", std::uint64_t{0});
  out.draws = j.value("draws", Index{0});
  out.validate();
  return out;
}

nlohmann::json to_json(const GatedLinearModel& model) {
  return {{"type", "gated_linear_model"},
          {"d", model.dim()},
          {"p", to_string(model.p)},
          {"q", to_string(dual(model.p))},
          {"radius", model.radius},
          {"beta", model.beta},
          {"patterns", to_json(model.patterns)},
          {"v", matrix_json(model.V)},
          {"w", matrix_json(model.W)}};
}

GatedLinearModel gated_model_from_json(const nlohmann::json& j) {
  if (j.value("type", "") != "gated_linear_model") throw DomainError("json: not a gated_linear_model");
  GatedLinearModel m;
  const auto d = j.at("d").get<Index>();
  m.patterns = patterns_from_json(j.at("patterns"));
  m.V = matrix_from(j.at("v"), d);
  m.W = matrix_from(j.at("w"), d);
  m.p = norm_from_string(j.at("p").get<std::string>());
  m.radius = j.at("radius").get<double>();
  m.beta = j.at("beta").get<double>();
  m.validate();
  return m;
}

void write_trace_csv(const std::vector<TraceRow>& trace, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.precision(17);
  out << "epoch,rho,step,objective,hinge,regularizer,penalty,max_violation,iterate_objective\n";
  for (const TraceRow& r : trace) {
    out << r.epoch << ',' << r.rho << ',' << r.step << ',' << r.objective << ',' << r.hinge << ',' << r.regularizer
        << ',' << r.penalty << ',' << r.max_violation << ',' << r.iterate_objective << '\n';
  }
}

}  // namespace cvxrobust
