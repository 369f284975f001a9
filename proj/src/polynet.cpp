#include "cvxrobust/polynet.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>

#include "cvxrobust/error.hpp"
#include "cvxrobust/kernels.hpp"

namespace cvxrobust {

using Eigen::Index;

void ActivationCoeffs::validate() const {
  if (!std::isfinite(a) || !std::isfinite(b) || !std::isfinite(c)) {
    throw DomainError("activation coefficients must be finite");
  }
  if (a == 0.0) throw DomainError("activation coefficient a must be nonzero");
}

ActivationCoeffs fit_quadratic(double lo, double hi, int grid_points,
                               const std::function<double(double)>& target) {
  if (!(lo < hi)) throw DomainError("fit: interval must satisfy lo < hi");
  if (grid_points < 3) throw DomainError("fit: need at least 3 grid points");
  // centred and scaled abscissa keeps the 3x3 normal equations well conditioned
  const double mid = 0.5 * (lo + hi);
  const double half = 0.5 * (hi - lo);
  Eigen::Matrix3d N = Eigen::Matrix3d::Zero();
  Eigen::Vector3d rhs = Eigen::Vector3d::Zero();
  for (int k = 0; k < grid_points; ++k) {
    const double u = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(grid_points - 1);
    const double t = (u - mid) / half;
    const Eigen::Vector3d phi(t * t, t, 1.0);
    N.noalias() += phi * phi.transpose();
    rhs.noalias() += phi * target(u);
  }
  Eigen::LDLT<Eigen::Matrix3d> ldlt(N);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || ldlt.rcond() < 1e-14) {
    throw NumericalError("fit: singular normal equations");
  }
  const Eigen::Vector3d w = ldlt.solve(rhs);
  // w0 t^2 + w1 t + w2 with t = (u - mid)/half
  ActivationCoeffs out;
  out.a = w[0] / (half * half);
  out.b = w[1] / half - 2.0 * w[0] * mid / (half * half);
  out.c = w[0] * mid * mid / (half * half) - w[1] * mid / half + w[2];
  return out;
}

ActivationCoeffs fit_relu_poly(double lo, double hi, int grid_points) {
  if (!(lo < 0.0 && hi > 0.0)) throw DomainError("fit_relu_poly: interval must contain 0 in its interior");
  return fit_quadratic(lo, hi, grid_points, [](double u) { return std::max(u, 0.0); });
}

void QuadraticClassifier::validate() const {
  coeffs.validate();
  const Index d = g.size();
  if (Q.rows() != d || Q.cols() != d) throw DomainError("classifier: Q must be d x d with d = dim(g)");
  if (!Q.allFinite() || !g.allFinite() || !std::isfinite(h)) throw DomainError("classifier: non-finite weights");
  if ((Q - Q.transpose()).cwiseAbs().maxCoeff() > 1e-9 * std::max(1.0, Q.cwiseAbs().maxCoeff())) {
    throw DomainError("classifier: Q is not symmetric");
  }
}

double evaluate(const QuadraticClassifier& clf, const Eigen::Ref<const Eigen::VectorXd>& x) {
  if (x.size() != clf.dim()) {
    throw DomainError("evaluate: input has dimension " + std::to_string(x.size()) + ", classifier expects " +
                      std::to_string(clf.dim()));
  }
  const auto& k = clf.coeffs;
  return k.a * x.dot(clf.Q * x) + k.b * clf.g.dot(x) + k.c * clf.h;
}

Eigen::VectorXd gradient(const QuadraticClassifier& clf, const Eigen::Ref<const Eigen::VectorXd>& x) {
  if (x.size() != clf.dim()) throw DomainError("gradient: dimension mismatch");
  return 2.0 * clf.coeffs.a * (clf.Q * x) + clf.coeffs.b * clf.g;
}

double TwoLayerNetwork::forward(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  if (x.size() != input_dim) {
    throw DomainError("network: input has dimension " + std::to_string(x.size()) + ", expected " +
                      std::to_string(input_dim));
  }
  const std::span<const double> xs(x.data(), static_cast<std::size_t>(x.size()));
  std::vector<double> z(neurons.size());
  std::vector<double> alpha(neurons.size());
  for (std::size_t j = 0; j < neurons.size(); ++j) {
    z[j] = kernels::dot(std::span<const double>(neurons[j].u.data(), xs.size()), xs);
    alpha[j] = neurons[j].alpha;
  }
  if (activation == Activation::relu) return kernels::relu_weighted_sum(z, alpha);
  double f = 0.0;
  for (std::size_t j = 0; j < z.size(); ++j) f += coeffs(z[j]) * alpha[j];
  return f;
}

Eigen::VectorXd TwoLayerNetwork::input_gradient(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  if (x.size() != input_dim) throw DomainError("network: dimension mismatch");
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(input_dim);
  for (const auto& nr : neurons) {
    const double z = nr.u.dot(x);
    double w = 0.0;
    if (activation == Activation::relu) {
      w = z > 0.0 ? nr.alpha : 0.0;  // inactive branch at exactly zero
    } else {
      w = (2.0 * coeffs.a * z + coeffs.b) * nr.alpha;
    }
    if (w != 0.0) grad.noalias() += w * nr.u;
  }
  return grad;
}

namespace {

double balance(const Eigen::VectorXd& p) {
  const Index d = p.size() - 1;
  return p.head(d).squaredNorm() - p[d] * p[d];
}

// <p, q> in the metric diag(I, -1)
double balance_cross(const Eigen::VectorXd& p, const Eigen::VectorXd& q) {
  const Index d = p.size() - 1;
  return p.head(d).dot(q.head(d)) - p[d] * q[d];
}

}  // namespace

std::vector<RankOneFactor> balanced_factors(const Eigen::MatrixXd& Z, double trace_tol) {
  if (Z.rows() != Z.cols() || Z.rows() < 2) throw DomainError("decomposition: Z must be square with side >= 2");
  if (!Z.allFinite()) throw DomainError("decomposition: non-finite entries");
  const Index side = Z.rows();
  const Index d = side - 1;
  const Eigen::MatrixXd S = 0.5 * (Z + Z.transpose());
  const double trace = S.trace();
  const double mismatch = S.topLeftCorner(d, d).trace() - S(d, d);
  if (std::abs(mismatch) > trace_tol * std::max(1.0, std::abs(trace))) {
    throw DomainError("decomposition: trace(Z1) - Z4 = " + std::to_string(mismatch) + " exceeds tolerance");
  }
  if (!(trace > 1e-300)) return {};

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(S);
  if (eig.info() != Eigen::Success) throw NumericalError("decomposition: eigendecomposition failed");
  const double floor = 1e-9 * trace;

  std::vector<Eigen::VectorXd> pending;
  for (Index k = side - 1; k >= 0; --k) {
    const double lam = eig.eigenvalues()[k];
    if (lam <= floor) break;
    pending.push_back(std::sqrt(lam) * eig.eigenvectors().col(k));
  }

  std::vector<Eigen::VectorXd> done;
  const double tiny = 1e-15 * trace;
  while (!pending.empty()) {
    // retire factors that are already balanced
    for (auto it = pending.begin(); it != pending.end();) {
      if (std::abs(balance(*it)) <= tiny) {
        done.push_back(std::move(*it));
        it = pending.erase(it);
      } else {
        ++it;
      }
    }
    if (pending.empty()) break;
    auto pos = std::max_element(pending.begin(), pending.end(),
                                [](const auto& a, const auto& b) { return balance(a) < balance(b); });
    auto neg = std::min_element(pending.begin(), pending.end(),
                                [](const auto& a, const auto& b) { return balance(a) < balance(b); });
    const double gp = balance(*pos);
    const double gn = balance(*neg);
    if (!(gp > 0.0 && gn < 0.0)) {
      // a single sign left: only the trace mismatch remains; rescale r and s
      // of each leftover factor to the same norm
      for (auto& p : pending) {
        const double rn = p.head(d).norm();
        const double sn = std::abs(p[d]);
        const double target = std::sqrt(0.5 * (rn * rn + sn * sn));
        if (rn > 0.0) p.head(d) *= target / rn;
        if (sn > 0.0) p[d] *= target / sn;
        done.push_back(std::move(p));
      }
      pending.clear();
      break;
    }
    // find t with balance(pos + t neg) = 0:  gp + 2 t cross + t^2 gn = 0
    const double cross = balance_cross(*pos, *neg);
    const double disc = cross * cross - gp * gn;  // > 0 since gp * gn < 0
    const double q = -(cross + std::copysign(std::sqrt(disc), cross));
    const double t = gp / q;
    const double scale = 1.0 / std::sqrt(1.0 + t * t);
    Eigen::VectorXd balanced = scale * (*pos + t * *neg);
    Eigen::VectorXd rest = scale * (*neg - t * *pos);
    done.push_back(std::move(balanced));
    *pos = std::move(rest);
    pending.erase(neg);
  }

  std::vector<RankOneFactor> out;
  for (auto& p : done) {
    if (p.squaredNorm() < floor) continue;
    if (p[d] < 0.0) p = -p;
    out.push_back({p.head(d), p[d]});
  }
  return out;
}

std::vector<Neuron> neural_decomposition(const Eigen::MatrixXd& Z, double trace_tol) {
  std::vector<Neuron> neurons;
  for (const auto& f : balanced_factors(Z, trace_tol)) {
    const double rn = f.r.norm();
    if (rn == 0.0) continue;
    neurons.push_back({f.r / rn, f.s * f.s});
  }
  return neurons;
}

TwoLayerNetwork decompose_blocks(const Eigen::MatrixXd& Z, const Eigen::MatrixXd& Zp,
                                 const ActivationCoeffs& coeffs, double trace_tol) {
  TwoLayerNetwork net;
  net.activation = Activation::polynomial;
  net.coeffs = coeffs;
  net.input_dim = Z.rows() - 1;
  for (auto& nr : neural_decomposition(Z, trace_tol)) net.neurons.push_back(std::move(nr));
  for (auto& nr : neural_decomposition(Zp, trace_tol)) {
    nr.alpha = -nr.alpha;
    net.neurons.push_back(std::move(nr));
  }
  return net;
}

QuadraticClassifier to_quadratic(const TwoLayerNetwork& net) {
  if (net.activation != Activation::polynomial) {
    throw DomainError("to_quadratic: only polynomial-activation networks have a quadratic form");
  }
  QuadraticClassifier clf;
  clf.coeffs = net.coeffs;
  clf.Q = Eigen::MatrixXd::Zero(net.input_dim, net.input_dim);
  clf.g = Eigen::VectorXd::Zero(net.input_dim);
  clf.h = 0.0;
  for (const auto& nr : net.neurons) {
    clf.Q.noalias() += nr.alpha * nr.u * nr.u.transpose();
    clf.g.noalias() += nr.alpha * nr.u;
    clf.h += nr.alpha;
  }
  return clf;
}

// ---- JSON ------------------------------------------------------------------

namespace {

nlohmann::json vec_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd vec_from(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Index>(v.size()));
}

}  // namespace

nlohmann::json to_json(const ActivationCoeffs& c) { return {{"a", c.a}, {"b", c.b}, {"c", c.c}}; }

ActivationCoeffs coeffs_from_json(const nlohmann::json& j) {
  ActivationCoeffs c{j.at("a").get<double>(), j.at("b").get<double>(), j.at("c").get<double>()};
  c.validate();
  return c;
}

nlohmann::json to_json(const QuadraticClassifier& clf, const nlohmann::json& provenance) {
  nlohmann::json rows = nlohmann::json::array();
  for (Index i = 0; i < clf.Q.rows(); ++i) rows.push_back(vec_json(clf.Q.row(i).transpose()));
  nlohmann::json j{{"type", "quadratic_classifier"},
                   {"d", clf.dim()},
                   {"coeffs", to_json(clf.coeffs)},
                   {"Q", rows},
                   {"g", vec_json(clf.g)},
                   {"h", clf.h}};
  if (!provenance.is_null()) j["provenance"] = provenance;
  return j;
}

QuadraticClassifier classifier_from_json(const nlohmann::json& j) {
  if (j.value("type", "") != "quadratic_classifier") throw DomainError("json: not a quadratic_classifier");
  QuadraticClassifier clf;
  clf.coeffs = coeffs_from_json(j.at("coeffs"));
  clf.g = vec_from(j.at("g"));
  clf.h = j.at("h").get<double>();
  const Index d = clf.g.size();
  const auto& rows = j.at("Q");
  if (static_cast<Index>(rows.size()) != d) throw DomainError("json: Q has wrong number of rows");
  clf.Q.resize(d, d);
  for (Index i = 0; i < d; ++i) {
    const Eigen::VectorXd r = vec_from(rows[static_cast<std::size_t>(i)]);
    if (r.size() != d) throw DomainError("json: Q row has wrong length");
    clf.Q.row(i) = r.transpose();
  }
  if (j.contains("d") && j.at("d").get<Index>() != d) throw DomainError("json: d does not match g");
  clf.validate();
  return clf;
}

nlohmann::json to_json(const TwoLayerNetwork& net, const nlohmann::json& provenance) {
  nlohmann::json neurons = nlohmann::json::array();
  for (const auto& nr : net.neurons) neurons.push_back({{"u", vec_json(nr.u)}, {"alpha", nr.alpha}});
  nlohmann::json j{{"type", "two_layer_network"},
                   {"activation", net.activation == Activation::relu ? "relu" : "polynomial"},
                   {"d", net.input_dim},
                   {"neurons", neurons}};
  if (net.activation == Activation::polynomial) j["coeffs"] = to_json(net.coeffs);
  if (!provenance.is_null()) j["provenance"] = provenance;
  return j;
}

TwoLayerNetwork network_from_json(const nlohmann::json& j) {
  if (j.value("type", "") != "two_layer_network") throw DomainError("json: not a two_layer_network");
  TwoLayerNetwork net;
  const std::string act = j.at("activation").get<std::string>();
  if (act == "relu") {
    net.activation = Activation::relu;
  } else if (act == "polynomial") {
    net.activation = Activation::polynomial;
    net.coeffs = coeffs_from_json(j.at("coeffs"));
  } else {
    throw DomainError("json: unknown activation '" + act + "'");
  }
  net.input_dim = j.at("d").get<Index>();
  for (const auto& nj : j.at("neurons")) {
    Neuron nr{vec_from(nj.at("u")), nj.at("alpha").get<double>()};
    if (nr.u.size() != net.input_dim) throw DomainError("json: neuron dimension mismatch");
    net.neurons.push_back(std::move(nr));
  }
  return net;
}

}  // namespace cvxrobust
