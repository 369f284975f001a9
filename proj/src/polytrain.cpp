#include "cvxrobust/polytrain.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>

#include "cvxrobust/error.hpp"

namespace cvxrobust {

using Eigen::Index;
using conic::AffineExpr;


conic::SolverSettings poly_solver_defaults() {
  conic::SolverSettings s;
  s.method = conic::Method::interior_point;
  s.tol = 1e-8;
  return s;
}

QuadraticClassifier SdpBlocks::classifier(const ActivationCoeffs& coeffs) const {
  QuadraticClassifier clf;
  clf.Q = Z1() - Z1p();
  clf.Q = 0.5 * (clf.Q + clf.Q.transpose());
  clf.g = Z2() - Z2p();
  clf.h = Z4() - Z4p();
  clf.coeffs = coeffs;
  return clf;
}

// ---- S-procedure LMI -------------------------------------------------------

LmiStencil s_procedure_lmi(double r, const Eigen::Ref<const Eigen::VectorXd>& x, double y,
                           const ActivationCoeffs& coeffs) {
  if (!(r > 0.0)) throw DomainError("s_procedure_lmi: radius must be positive");
  if (y != 1.0 && y != -1.0) throw DomainError("s_procedure_lmi: label must be +1 or -1");
  const Index d = x.size();
  const double a = coeffs.a, b = coeffs.b, c = coeffs.c;
  LmiStencil st;
  st.side = d + 1;
  st.unknowns.d = d;
  const LmiUnknowns& u = st.unknowns;
  st.entries.resize(static_cast<std::size_t>(conic::svec_length(d + 1)));
  auto entry = [&](Index i, Index j) -> AffineExpr& {
    return st.entries[static_cast<std::size_t>(conic::svec_index(d + 1, i, j))];
  };

  // top-left block: lambda I + y a Q
  for (Index j = 0; j < d; ++j) {
    for (Index i = j; i < d; ++i) {
      AffineExpr& e = entry(i, j);
      if (i == j) e.add(u.lambda(), 1.0);
      e.add(u.q(i, j), y * a);
    }
  }
  // last row: y b g_j / 2 - lambda x_j
  for (Index j = 0; j < d; ++j) entry(d, j).add(u.g(j), 0.5 * y * b).add(u.lambda(), -x[j]);
  // corner: lambda (||x||^2 - r^2) + y c h - delta
  AffineExpr& corner = entry(d, d);
  corner.add(u.lambda(), x.squaredNorm() - r * r);
  corner.add(u.h(), y * c);
  corner.add(u.delta(), -1.0);
  return st;
}

Eigen::MatrixXd LmiStencil::assemble(const Eigen::MatrixXd& Q, const Eigen::VectorXd& g, double h,
                                     double delta, double lambda) const {
  const Index d = unknowns.d;
  Eigen::VectorXd val(unknowns.count());
  for (Index j = 0; j < d; ++j) {
    for (Index i = j; i < d; ++i) val[unknowns.q(i, j)] = Q(i, j);
  }
  val.segment(unknowns.g(0), d) = g;
  val[unknowns.h()] = h;
  val[unknowns.delta()] = delta;
  val[unknowns.lambda()] = lambda;

  Eigen::MatrixXd S(side, side);
  for (Index j = 0; j < side; ++j) {
    for (Index i = j; i < side; ++i) {
      const AffineExpr& e = entries[static_cast<std::size_t>(conic::svec_index(side, i, j))];
      double v = e.constant;
      for (const auto& [k, coef] : e.terms) v += coef * val[k];
      S(i, j) = v;
      S(j, i) = v;
    }
  }
  return S;
}

// ---- program assembly ------------------------------------------------------

namespace {

struct BlockVars {
  Index d = 0;
  conic::VariableRange K, Zp;  // K = Z - Z' = [[Q, g], [g', h]]

  Index k(Index i, Index j) const { return K.offset + conic::svec_index(d + 1, i, j); }
  Index zp(Index i, Index j) const { return Zp.offset + conic::svec_index(d + 1, i, j); }
  Index q(Index i, Index j) const { return k(i, j); }
  Index g(Index j) const { return k(d, j); }
  Index h() const { return k(d, d); }
};

// The program works with K = Z - Z' and Z' (so Z = K + Z'): data-dependent
// rows then touch only the (d+1)(d+2)/2 entries of K, and the sole
// equalities are the two trace conditions.
BlockVars add_blocks(conic::ProgramBuilder& pb, Index d, double beta) {
  BlockVars bv;
  bv.d = d;
  bv.K = pb.add_variable("K", conic::svec_length(d + 1));
  bv.Zp = pb.add_variable("Zp", conic::svec_length(d + 1));

  // beta (Z4 + Z4') = beta (K4 + 2 Z4')
  pb.set_cost(bv.h(), beta);
  pb.set_cost(bv.zp(d, d), 2.0 * beta);

  // tr(Z1) = Z4, tr(Z1') = Z4'
  conic::AffineExpr tz, tzp;
  for (Index j = 0; j < d; ++j) {
    tz.add(bv.k(j, j), 1.0).add(bv.zp(j, j), 1.0);
    tzp.add(bv.zp(j, j), 1.0);
  }
  tz.add(bv.h(), -1.0).add(bv.zp(d, d), -1.0);
  tzp.add(bv.zp(d, d), -1.0);
  pb.add_equality(tz);
  pb.add_equality(tzp);

  std::vector<conic::AffineExpr> lz, lzp;
  for (Index j = 0; j <= d; ++j) {
    for (Index i = j; i <= d; ++i) {
      lz.push_back(conic::AffineExpr{}.add(bv.k(i, j), 1.0).add(bv.zp(i, j), 1.0));
      lzp.push_back(conic::AffineExpr{}.add(bv.zp(i, j), 1.0));
    }
  }
  pb.add_psd(d + 1, lz);
  pb.add_psd(d + 1, lzp);
  return bv;
}

// (row, col) of position k in the svec order of a side-d matrix
std::pair<Index, Index> lower_position(Index d, Index k) {
  Index j = 0, start = 0;
  while (start + (d - j) <= k) {
    start += d - j;
    ++j;
  }
  return {j + (k - start), j};
}

// Rewrites an expression over LMI unknowns in terms of program variables.
AffineExpr lower_to_program(const AffineExpr& e, const LmiUnknowns& u, const BlockVars& bv, Index delta_var,
                            Index lambda_var) {
  AffineExpr out;
  out.constant = e.constant;
  out.terms.reserve(e.terms.size());
  for (const auto& [k, coef] : e.terms) {
    if (k < u.g(0)) {
      const auto [i, j] = lower_position(u.d, k);
      out.add(bv.q(i, j), coef);
    } else if (k < u.h()) {
      out.add(bv.g(k - u.g(0)), coef);
    } else if (k == u.h()) {
      out.add(bv.h(), coef);
    } else if (k == u.delta()) {
      out.add(delta_var, coef);
    } else {
      out.add(lambda_var, coef);
    }
  }
  return out;
}

// y_hat = a x'Qx + b g'x + c h
AffineExpr prediction_expr(const Eigen::Ref<const Eigen::VectorXd>& x, const BlockVars& bv,
                           const ActivationCoeffs& k) {
  const Index d = bv.d;
  AffineExpr e;
  for (Index j = 0; j < d; ++j) {
    e.add(bv.q(j, j), k.a * x[j] * x[j]);
    for (Index i = j + 1; i < d; ++i) e.add(bv.q(i, j), 2.0 * k.a * x[i] * x[j]);
    e.add(bv.g(j), k.b * x[j]);
  }
  e.add(bv.h(), k.c);
  return e;
}

void check_training_inputs(const Dataset& data, double beta) {
  if (data.n() == 0 || data.d() == 0) throw DomainError("poly sdp: empty dataset (n = 0 or d = 0)");
  if (!(beta > 0.0)) throw DomainError("poly sdp: beta must be positive");
}

}  // namespace

PolySdp build_standard_sdp(const Dataset& data, double beta, const ActivationCoeffs& coeffs) {
  check_training_inputs(data, beta);
  coeffs.validate();
  const Index n = data.n(), d = data.d();
  conic::ProgramBuilder pb;
  const BlockVars bv = add_blocks(pb, d, beta);
  const auto t = pb.add_variable("t", n);
  for (Index i = 0; i < n; ++i) {
    pb.set_cost(t.offset + i, 1.0 / static_cast<double>(n));
    pb.add_nonneg(AffineExpr{}.add(t.offset + i, 1.0));
    // t_i >= 1 - y_i y_hat_i
    AffineExpr e = prediction_expr(data.X().row(i).transpose(), bv, coeffs);
    for (auto& term : e.terms) term.second *= data.y()[i];
    e.add(t.offset + i, 1.0);
    e.constant = -1.0;
    pb.add_nonneg(e);
  }
  PolySdp out;
  out.program = pb.build();
  out.d = d;
  out.n = n;
  out.beta = beta;
  out.coeffs = coeffs;
  out.X = data.X();
  out.y = data.y();
  return out;
}

PolySdp build_robust_sdp(const Dataset& data, double beta, double r, const ActivationCoeffs& coeffs) {
  check_training_inputs(data, beta);
  coeffs.validate();
  if (!(r > 0.0)) throw DomainError("robust sdp: radius must be positive (use the standard program for r = 0)");
  const Index n = data.n(), d = data.d();
  conic::ProgramBuilder pb;
  const BlockVars bv = add_blocks(pb, d, beta);
  const auto t = pb.add_variable("t", n);
  const auto delta = pb.add_variable("delta", n);
  const auto lambda = pb.add_variable("lambda", n);
  for (Index i = 0; i < n; ++i) {
    pb.set_cost(t.offset + i, 1.0 / static_cast<double>(n));
    pb.add_nonneg(AffineExpr{}.add(t.offset + i, 1.0));
    // t_i >= 1 - delta_i
    AffineExpr hinge;
    hinge.constant = -1.0;
    hinge.add(t.offset + i, 1.0).add(delta.offset + i, 1.0);
    pb.add_nonneg(hinge);
    pb.add_nonneg(AffineExpr{}.add(lambda.offset + i, 1.0));
  }
  for (Index i = 0; i < n; ++i) {
    const LmiStencil st = s_procedure_lmi(r, data.X().row(i).transpose(), data.y()[i], coeffs);
    std::vector<AffineExpr> lowered;
    lowered.reserve(st.entries.size());
    for (const auto& e : st.entries) {
      lowered.push_back(lower_to_program(e, st.unknowns, bv, delta.offset + i, lambda.offset + i));
    }
    pb.add_psd(st.side, lowered);
  }
  PolySdp out;
  out.program = pb.build();
  out.d = d;
  out.n = n;
  out.beta = beta;
  out.radius = r;
  out.coeffs = coeffs;
  out.X = data.X();
  out.y = data.y();
  return out;
}

// ---- extraction ------------------------------------------------------------

namespace {

Eigen::MatrixXd unpack_raw_lower(const Eigen::VectorXd& v, Index side) {
  Eigen::MatrixXd M(side, side);
  Index k = 0;
  for (Index j = 0; j < side; ++j) {
    for (Index i = j; i < side; ++i, ++k) {
      M(i, j) = v[k];
      M(j, i) = v[k];
    }
  }
  return M;
}

double min_eigenvalue(const Eigen::MatrixXd& M) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(M, Eigen::EigenvaluesOnly);
  return eig.eigenvalues()[0];
}

}  // namespace

ExtractedModel extract_classifier(const conic::ConicSolution& sol, const PolySdp& sdp, double tol) {
  ExtractedModel out;
  if (sol.status != conic::SolveStatus::optimal) {
    const bool near = sol.status == conic::SolveStatus::max_iters && sol.primal_residual <= 10.0 * tol &&
                      sol.dual_residual <= 10.0 * tol && sol.duality_gap <= 10.0 * tol;
    if (!near) {
      throw SolveFailure(std::string("poly sdp: solver status ") + conic::to_string(sol.status) +
                             " (primal residual " + std::to_string(sol.primal_residual) + ", dual residual " +
                             std::to_string(sol.dual_residual) + ", gap " + std::to_string(sol.duality_gap) + ")",
                         sol);
    }
    out.warnings.push_back("solver hit max_iters; residuals within 10x tolerance, proceeding");
  }
  const Index d = sdp.d;
  const auto& prog = sdp.program;
  out.blocks.Zp = unpack_raw_lower(prog.slice(sol.x, "Zp"), d + 1);
  out.blocks.Z = unpack_raw_lower(prog.slice(sol.x, "K"), d + 1) + out.blocks.Zp;
  out.classifier = out.blocks.classifier(sdp.coeffs);
  out.objective = sol.primal_objective;

  const double scale = std::max(1.0, out.blocks.Z.trace() + out.blocks.Zp.trace());
  out.z_min_eigenvalue = min_eigenvalue(out.blocks.Z);
  out.zp_min_eigenvalue = min_eigenvalue(out.blocks.Zp);
  if (std::min(out.z_min_eigenvalue, out.zp_min_eigenvalue) < -10.0 * tol * scale) {
    out.warnings.push_back("PSD block minimum eigenvalue below -10 tol");
  }
  const double tz = out.blocks.Z1().trace() - out.blocks.Z4();
  const double tzp = out.blocks.Z1p().trace() - out.blocks.Z4p();
  if (std::max(std::abs(tz), std::abs(tzp)) > 10.0 * tol * scale) {
    out.warnings.push_back("trace coupling violated beyond 10 tol");
  }

  if (sdp.radius) {
    RobustCertificate cert;
    cert.radius = *sdp.radius;
    cert.lambda = prog.slice(sol.x, "lambda");
    cert.delta = prog.slice(sol.x, "delta");
    cert.lmi_min_eigenvalue.resize(sdp.n);
    for (Index i = 0; i < sdp.n; ++i) {
      const LmiStencil st = s_procedure_lmi(cert.radius, sdp.X.row(i).transpose(), sdp.y[i], sdp.coeffs);
      cert.lmi_min_eigenvalue[i] = min_eigenvalue(
          st.assemble(out.classifier.Q, out.classifier.g, out.classifier.h, cert.delta[i], cert.lambda[i]));
    }
    if (cert.lambda.minCoeff() < -10.0 * tol) out.warnings.push_back("negative S-procedure multiplier");
    out.hinge_loss = (1.0 - cert.delta.array()).max(0.0).mean();
    out.certificate = std::move(cert);
  } else {
    double acc = 0.0;
    for (Index i = 0; i < sdp.n; ++i) {
      acc += std::max(0.0, 1.0 - sdp.y[i] * evaluate(out.classifier, sdp.X.row(i).transpose()));
    }
    out.hinge_loss = acc / static_cast<double>(sdp.n);
  }
  return out;
}

PolyTrainResult train_poly(const Dataset& data, const TrainConfig& config) {
  if (config.radius < 0.0) throw DomainError("train_poly: radius must be nonnegative");
  const PolySdp sdp = config.radius > 0.0 ? build_robust_sdp(data, config.beta, config.radius, config.coeffs)
                                          : build_standard_sdp(data, config.beta, config.coeffs);
  PolyTrainResult res;
  res.solution = conic::solve(sdp.program, config.solver);
  res.model = extract_classifier(res.solution, sdp, config.solver.tol);
  return res;
}

nlohmann::json to_json(const SdpBlocks& blocks) {
  auto mat = [](const Eigen::MatrixXd& M) {
    nlohmann::json rows = nlohmann::json::array();
    for (Index i = 0; i < M.rows(); ++i) {
      std::vector<double> r(static_cast<std::size_t>(M.cols()));
      for (Index j = 0; j < M.cols(); ++j) r[static_cast<std::size_t>(j)] = M(i, j);
      rows.push_back(std::move(r));
    }
    return rows;
  };
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ez(blocks.Z, Eigen::EigenvaluesOnly);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ezp(blocks.Zp, Eigen::EigenvaluesOnly);
  auto rank = [](const Eigen::VectorXd& ev) {
    const double top = std::max(ev.maxCoeff(), 0.0);
    Index r = 0;
    for (Index k = 0; k < ev.size(); ++k) r += ev[k] > 1e-9 * std::max(top, 1e-300);
    return r;
  };
  return {{"d", blocks.dim()},
          {"Z", mat(blocks.Z)},
          {"Zp", mat(blocks.Zp)},
          {"Z4", blocks.Z4()},
          {"Z4p", blocks.Z4p()},
          {"trace_residual", blocks.Z1().trace() - blocks.Z4()},
          {"trace_residual_p", blocks.Z1p().trace() - blocks.Z4p()},
          {"min_eigenvalue", ez.eigenvalues()[0]},
          {"min_eigenvalue_p", ezp.eigenvalues()[0]},
          {"rank", rank(ez.eigenvalues())},
          {"rank_p", rank(ezp.eigenvalues())}};
}

nlohmann::json to_json(const RobustCertificate& cert) {
  auto v = [](const Eigen::VectorXd& x) { return std::vector<double>(x.data(), x.data() + x.size()); };
  return {{"radius", cert.radius},
          {"lambda", v(cert.lambda)},
          {"delta", v(cert.delta)},
          {"lmi_min_eigenvalue", v(cert.lmi_min_eigenvalue)}};
}

}  // namespace cvxrobust
