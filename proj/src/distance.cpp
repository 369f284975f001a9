#include <cmath>
#include <limits>
#include <random>

#include <Eigen/Eigenvalues>

#include "cvxrobust/error.hpp"
#include "cvxrobust/polytrain.hpp"
#include "cvxrobust/rng.hpp"

namespace cvxrobust {

using Eigen::Index;

namespace {

// s(lambda) = lambda y c h + ||x||^2 - sum_k (lambda q_k - xh_k)^2 / (1 + lambda p_k)
// with p = y a mu, q = y b ghat / 2 in the eigenbasis of Q.
struct SchurProfile {
  Eigen::VectorXd p, q, xh;
  double lin = 0.0;  // y c h
  double xx = 0.0;

  double value(double lam) const {
    double s = lam * lin + xx;
    for (Index k = 0; k < p.size(); ++k) {
      const double w = lam * q[k] - xh[k];
      s -= w * w / (1.0 + lam * p[k]);
    }
    return s;
  }

  double slope(double lam) const {
    double ds = lin;
    for (Index k = 0; k < p.size(); ++k) {
      const double den = 1.0 + lam * p[k];
      const double w = lam * q[k] - xh[k];
      ds -= (2.0 * q[k] * w * den - p[k] * w * w) / (den * den);
    }
    return ds;
  }
};

bool takes_opposite_sign(const QuadraticClassifier& clf, const Eigen::Ref<const Eigen::VectorXd>& x, double y,
                         const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>& eig, const DistanceOptions& opt) {
  auto opposite = [&](const Eigen::VectorXd& z) { return y * evaluate(clf, z) < 0.0; };
  if (opt.reference_points != nullptr) {
    const auto& R = *opt.reference_points;
    if (R.cols() != x.size()) throw DomainError("decision_distance: reference points have the wrong dimension");
    for (Index i = 0; i < R.rows(); ++i) {
      if (opposite(R.row(i).transpose())) return true;
    }
  }
  const Index d = x.size();
  const double base = std::max(1.0, x.norm());
  // far points along the principal axes catch indefinite and dominated forms
  for (Index k = 0; k < d; ++k) {
    for (const double t : {1.0, 10.0, 100.0, 1000.0}) {
      const Eigen::VectorXd v = eig.eigenvectors().col(k) * (t * base);
      if (opposite(x + v) || opposite(x - v)) return true;
    }
  }
  Rng rng(opt.seed);
  std::normal_distribution<double> normal;
  for (int i = 0; i < opt.random_probes; ++i) {
    const double scale = base * std::pow(10.0, static_cast<double>(i % 4));
    Eigen::VectorXd z(d);
    for (Index k = 0; k < d; ++k) z[k] = normal(rng);
    if (opposite(x + scale * z)) return true;
  }
  // y f(z) = z'Az + l'z + y c h with A = y a Q: unbounded below along a
  // negative eigenvalue or a null direction with l'v != 0, otherwise
  // minimized in closed form
  const auto& k = clf.coeffs;
  const Eigen::VectorXd mu = y * k.a * eig.eigenvalues();
  const Eigen::VectorXd l = y * k.b * (eig.eigenvectors().transpose() * clf.g);
  const double mu_tol = 1e-12 * std::max(1.0, mu.cwiseAbs().maxCoeff());
  const double l_tol = 1e-12 * std::max(1.0, l.cwiseAbs().maxCoeff());
  double lowest = y * k.c * clf.h;
  for (Index i = 0; i < d; ++i) {
    if (mu[i] < -mu_tol) return true;
    if (mu[i] <= mu_tol) {
      if (std::abs(l[i]) > l_tol) return true;
      continue;
    }
    lowest -= l[i] * l[i] / (4.0 * mu[i]);
  }
  return lowest <= 0.0;
}

}  // namespace

DistanceResult decision_distance(const QuadraticClassifier& clf, const Eigen::Ref<const Eigen::VectorXd>& x,
                                 double y, const DistanceOptions& options) {
  clf.validate();
  if (x.size() != clf.dim()) throw DomainError("decision_distance: dimension mismatch");
  if (y != 1.0 && y != -1.0) throw DomainError("decision_distance: label must be +1 or -1");
  const auto& k = clf.coeffs;
  const double quad = k.a * x.dot(clf.Q * x), lin = k.b * clf.g.dot(x), cst = k.c * clf.h;
  const double margin = y * (quad + lin + cst);
  const double fscale = 1.0 + std::abs(quad) + std::abs(lin) + std::abs(cst);
  DistanceResult out;
  if (std::abs(margin) <= 1e-13 * fscale) {
    out.diagnostic = "point lies on the decision boundary";
    return out;
  }
  if (margin < 0.0) throw DomainError("decision_distance: point is misclassified (y f(x) < 0)");

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(clf.Q);
  if (eig.info() != Eigen::Success) throw NumericalError("decision_distance: eigendecomposition of Q failed");

  if (!takes_opposite_sign(clf, x, y, eig, options)) {
    out.distance = std::numeric_limits<double>::infinity();
    out.s = out.distance;
    out.unbounded = true;
    out.diagnostic = "classifier is single-signed";
    return out;
  }

  SchurProfile sp;
  sp.p = y * k.a * eig.eigenvalues();
  sp.q = 0.5 * y * k.b * (eig.eigenvectors().transpose() * clf.g);
  sp.xh = eig.eigenvectors().transpose() * x;
  sp.lin = y * k.c * clf.h;
  sp.xx = x.squaredNorm();

  const double pmax = sp.p.cwiseAbs().maxCoeff();
  double lam_max = std::numeric_limits<double>::infinity();
  for (Index i = 0; i < sp.p.size(); ++i) {
    if (sp.p[i] < 0.0) lam_max = std::min(lam_max, -1.0 / sp.p[i]);
  }

  double lo = 0.0, hi = 0.0;
  if (std::isfinite(lam_max)) {
    hi = lam_max * (1.0 - 1e-14);
  } else {
    // limiting slope as lambda -> inf; a positive limit means s is unbounded
    double limit = sp.lin;
    for (Index i = 0; i < sp.p.size(); ++i) {
      if (sp.p[i] > 1e-14 * pmax) {
        limit -= sp.q[i] * sp.q[i] / sp.p[i];
      } else if (sp.q[i] != 0.0) {
        limit = -std::numeric_limits<double>::infinity();
        break;
      }
    }
    if (limit > 1e-12 * (1.0 + std::abs(sp.lin))) {
      out.distance = std::numeric_limits<double>::infinity();
      out.s = out.distance;
      out.unbounded = true;
      out.diagnostic = "s is unbounded in lambda";
      return out;
    }
    hi = 1.0;
    while (sp.slope(hi) > 0.0 && hi < 1e15) hi *= 2.0;
  }
  if (sp.slope(hi) > 0.0) {
    lo = hi;
  } else {
    for (int it = 0; it < 400 && hi - lo > 1e-15 * hi; ++it) {
      const double mid = 0.5 * (lo + hi);
      (sp.slope(mid) > 0.0 ? lo : hi) = mid;
    }
  }
  const double lam = lo;
  out.lambda = lam;
  out.s = std::max(sp.value(lam), 0.0);
  out.distance = std::sqrt(out.s);
  return out;
}

conic::ConicProgram build_decision_distance_sdp(const QuadraticClassifier& clf,
                                                const Eigen::Ref<const Eigen::VectorXd>& x, double y) {
  clf.validate();
  if (x.size() != clf.dim()) throw DomainError("decision distance sdp: dimension mismatch");
  const Index d = x.size();
  const auto& k = clf.coeffs;
  conic::ProgramBuilder pb;
  const Index s = pb.add_variable("s", 1).offset;
  const Index lam = pb.add_variable("lambda", 1).offset;
  pb.set_cost(s, -1.0);
  pb.add_nonneg(conic::AffineExpr{}.add(lam, 1.0));
  std::vector<conic::AffineExpr> lower;
  for (Index j = 0; j <= d; ++j) {
    for (Index i = j; i <= d; ++i) {
      conic::AffineExpr e;
      if (i < d) {
        e.constant = i == j ? 1.0 : 0.0;
        e.add(lam, y * k.a * clf.Q(i, j));
      } else if (j < d) {
        e.constant = -x[j];
        e.add(lam, 0.5 * y * k.b * clf.g[j]);
      } else {
        e.constant = x.squaredNorm();
        e.add(lam, y * k.c * clf.h).add(s, -1.0);
      }
      lower.push_back(std::move(e));
    }
  }
  pb.add_psd(d + 1, lower);
  return pb.build();
}

std::vector<DistanceResult> decision_distances(const QuadraticClassifier& clf, const Eigen::MatrixXd& X,
                                               const Eigen::VectorXd& y, const DistanceOptions& options) {
  if (X.rows() != y.size()) throw DomainError("decision_distances: X and y disagree on n");
  if (X.cols() != clf.dim()) throw DomainError("decision_distances: dimension mismatch");
  std::vector<DistanceResult> out(static_cast<std::size_t>(X.rows()));
#pragma omp parallel for schedule(dynamic)
  for (Index i = 0; i < X.rows(); ++i) {
    DistanceResult& r = out[static_cast<std::size_t>(i)];
    if (y[i] * evaluate(clf, X.row(i).transpose()) < 0.0) {
      r.distance = std::numeric_limits<double>::quiet_NaN();
      r.s = r.distance;
      r.diagnostic = "misclassified";
      continue;
    }
    DistanceOptions opt = options;
    opt.seed = derive_seed(options.seed, "probe-" + std::to_string(i));
    r = decision_distance(clf, X.row(i).transpose(), y[i], opt);
  }
  return out;
}

}  // namespace cvxrobust
