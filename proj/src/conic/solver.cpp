// Operator splitting on the homogeneous self-dual embedding
//
//   Q u = v,  u = (x, y, tau) in R^n x K* x R+,  v = (r, s, kappa) in 0 x K x R+,
//   Q = [[0, A', c], [-A, 0, b], [-c', -b', 0]].
//
// Each iteration solves one linear system with I + Q (a cached sparse LDL'
// factorization of I + A'A plus a rank-one correction), projects onto the
// cones and updates the dual iterate. Problem data are equilibrated first.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>

#include <Eigen/SparseCholesky>

#include "cvxrobust/conic.hpp"
#include "cvxrobust/error.hpp"
#include "detail.hpp"

namespace cvxrobust::conic {

const char* to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::infeasible: return "infeasible";
    case SolveStatus::unbounded: return "unbounded";
    case SolveStatus::max_iters: return "max_iters";
  }
  return "unknown";
}

const char* to_string(Method method) {
  return method == Method::admm ? "admm" : "interior_point";
}

void detail::fill_residuals(const ConicProgram& prog, ConicSolution& sol) {
  const double nb = prog.b.norm();
  const double nc = prog.c.norm();
  sol.primal_objective = prog.c.dot(sol.x);
  sol.dual_objective = -prog.b.dot(sol.z);
  sol.primal_residual = (prog.A * sol.x + sol.s - prog.b).norm() / (1.0 + nb);
  sol.dual_residual = (prog.A.transpose() * sol.z + prog.c).norm() / (1.0 + nc);
  sol.duality_gap = std::abs(sol.primal_objective - sol.dual_objective) /
                    (1.0 + std::abs(sol.primal_objective) + std::abs(sol.dual_objective));
}

namespace {

constexpr double kMinScale = 1e-4;
constexpr double kMaxScale = 1e4;
constexpr int kRuizPasses = 25;

struct BlockLayout {
  Index zero = 0;
  Index nonneg = 0;
  std::vector<std::pair<Index, Index>> psd;  // (offset, side)
};

BlockLayout layout_of(const ConeSpec& cones) {
  BlockLayout l;
  l.zero = cones.zero;
  l.nonneg = cones.nonneg;
  Index off = cones.zero + cones.nonneg;
  for (const Index s : cones.psd) {
    l.psd.emplace_back(off, s);
    off += svec_length(s);
  }
  return l;
}

struct Equilibration {
  Eigen::VectorXd row;  // D
  Eigen::VectorXd col;  // E
  double sigma_b = 1.0;
  double sigma_c = 1.0;
};

// Ruiz scaling A <- D A E. Rows of a PSD block share one factor so the cone
// is mapped onto itself.
Equilibration equilibrate(SparseMatrix& A, const BlockLayout& layout) {
  const Index m = A.rows();
  const Index n = A.cols();
  Equilibration eq;
  eq.row = Eigen::VectorXd::Ones(m);
  eq.col = Eigen::VectorXd::Ones(n);

  for (int pass = 0; pass < kRuizPasses; ++pass) {
    Eigen::VectorXd rnorm = Eigen::VectorXd::Zero(m);
    Eigen::VectorXd cnorm = Eigen::VectorXd::Zero(n);
    for (Index j = 0; j < n; ++j) {
      for (SparseMatrix::InnerIterator it(A, j); it; ++it) {
        const double a = std::abs(it.value());
        rnorm[it.row()] = std::max(rnorm[it.row()], a);
        cnorm[j] = std::max(cnorm[j], a);
      }
    }
    for (const auto& [off, side] : layout.psd) {
      const Index len = svec_length(side);
      const double mean = rnorm.segment(off, len).mean();
      rnorm.segment(off, len).setConstant(mean);
    }
    auto factor = [](double v) {
      if (v <= 0.0) return 1.0;
      return 1.0 / std::sqrt(std::clamp(v, kMinScale, kMaxScale));
    };
    Eigen::VectorXd dr = rnorm.unaryExpr(factor);
    Eigen::VectorXd dc = cnorm.unaryExpr(factor);
    for (Index j = 0; j < n; ++j) {
      for (SparseMatrix::InnerIterator it(A, j); it; ++it) it.valueRef() *= dr[it.row()] * dc[j];
    }
    eq.row.array() *= dr.array();
    eq.col.array() *= dc.array();
  }
  return eq;
}

class Workspace {
 public:
  Workspace(const ConicProgram& prog, const SolverSettings& settings)
      : prog_(prog), settings_(settings), layout_(layout_of(prog.cones)) {
    n_ = prog.c.size();
    m_ = prog.b.size();
    A_ = prog.A;
    A_.makeCompressed();
    if (settings.scaling) {
      eq_ = equilibrate(A_, layout_);
    } else {
      eq_.row = Eigen::VectorXd::Ones(m_);
      eq_.col = Eigen::VectorXd::Ones(n_);
    }
    b_ = eq_.row.cwiseProduct(prog.b);
    c_ = eq_.col.cwiseProduct(prog.c);
    eq_.sigma_b = settings.scale / std::max(b_.norm(), kMinScale);
    eq_.sigma_c = settings.scale / std::max(c_.norm(), kMinScale);
    b_ *= eq_.sigma_b;
    c_ *= eq_.sigma_c;

    SparseMatrix K = SparseMatrix(A_.transpose()) * A_;
    for (Index j = 0; j < n_; ++j) K.coeffRef(j, j) += 1.0;
    K.makeCompressed();
    ldlt_.compute(K);
    if (ldlt_.info() != Eigen::Success) {
      throw NumericalError("conic solve: factorization of I + A'A failed");
    }

    // g = (I + M)^{-1} h with h = (c, b)
    solve_block(c_, b_, gx_, gy_);
    denom_ = 1.0 + c_.dot(gx_) + b_.dot(gy_);
  }

  ConicSolution run();

 private:
  // (I + M)(x, y) = (wx, wy),  M = [[0, A'], [-A, 0]]
  void solve_block(const Eigen::VectorXd& wx, const Eigen::VectorXd& wy, Eigen::VectorXd& x,
                   Eigen::VectorXd& y) const {
    x = ldlt_.solve(wx - A_.transpose() * wy);
    y = wy + A_ * x;
  }

  void project_dual_cone(Eigen::Ref<Eigen::VectorXd> y) const {
    // zero cone rows are free in the dual
    auto nn = y.segment(layout_.zero, layout_.nonneg);
    nn = nn.cwiseMax(0.0);
    const auto nblocks = static_cast<std::ptrdiff_t>(layout_.psd.size());
#if defined(_OPENMP)
#pragma omp parallel for schedule(dynamic)
#endif
    for (std::ptrdiff_t k = 0; k < nblocks; ++k) {
      const auto [off, side] = layout_.psd[static_cast<std::size_t>(k)];
      project_psd_svec(y.segment(off, svec_length(side)), side);
    }
  }

  struct Unscaled {
    Eigen::VectorXd x, y, s;
  };

  Unscaled unscale(const Eigen::VectorXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& s,
                   double tau) const {
    Unscaled o;
    o.x = eq_.col.cwiseProduct(x) / (tau * eq_.sigma_b);
    o.s = s.cwiseQuotient(eq_.row) / (tau * eq_.sigma_b);
    o.y = eq_.row.cwiseProduct(y) / (tau * eq_.sigma_c);
    return o;
  }

  void fill_residuals(ConicSolution& sol) const { detail::fill_residuals(prog_, sol); }

  const ConicProgram& prog_;
  const SolverSettings& settings_;
  BlockLayout layout_;
  Index n_ = 0;
  Index m_ = 0;
  SparseMatrix A_;
  Eigen::VectorXd b_, c_;
  Equilibration eq_;
  Eigen::SimplicialLDLT<SparseMatrix> ldlt_;
  Eigen::VectorXd gx_, gy_;
  double denom_ = 1.0;
};

ConicSolution Workspace::run() {
  const double alpha = settings_.relaxation;
  Eigen::VectorXd ux = Eigen::VectorXd::Zero(n_), uy = Eigen::VectorXd::Zero(m_);
  Eigen::VectorXd vx = Eigen::VectorXd::Zero(n_), vy = Eigen::VectorXd::Zero(m_);
  double utau = 1.0, vkappa = 1.0;

  Eigen::VectorXd px, py, tx, ty;
  ConicSolution sol;
  const int interval = std::max(1, settings_.check_interval);

  for (std::int64_t it = 1; it <= settings_.max_iters; ++it) {
    // u~ = (I + Q)^{-1}(u + v)
    const Eigen::VectorXd wx = ux + vx;
    const Eigen::VectorXd wy = uy + vy;
    const double wtau = utau + vkappa;
    solve_block(wx, wy, px, py);
    const double tau_t = (wtau + c_.dot(px) + b_.dot(py)) / denom_;
    tx = px - tau_t * gx_;
    ty = py - tau_t * gy_;

    // relaxation, projection, dual update
    const Eigen::VectorXd rx = alpha * tx + (1.0 - alpha) * ux;
    const Eigen::VectorXd ry = alpha * ty + (1.0 - alpha) * uy;
    const double rtau = alpha * tau_t + (1.0 - alpha) * utau;

    ux = rx - vx;
    uy = ry - vy;
    project_dual_cone(uy);
    utau = std::max(rtau - vkappa, 0.0);

    vx += ux - rx;
    vy += uy - ry;
    vkappa += utau - rtau;

    if (it % interval != 0 && it != settings_.max_iters) continue;

    if (!ux.allFinite() || !uy.allFinite() || !std::isfinite(utau)) {
      throw NumericalError("conic solve: iterates became non-finite at iteration " + std::to_string(it));
    }

    sol.iterations = it;
    if (utau > 1e-12 * std::max(1.0, vkappa)) {
      const Unscaled o = unscale(ux, uy, vy, utau);
      sol.x = o.x;
      sol.z = o.y;
      sol.s = o.s;
      fill_residuals(sol);
      if (settings_.verbose > 0 && it % settings_.verbose == 0) {
        std::fprintf(stderr, "iter %8lld  pres %.3e  dres %.3e  gap %.3e  pobj %.6e\n",
                     static_cast<long long>(it), sol.primal_residual, sol.dual_residual,
                     sol.duality_gap, sol.primal_objective);
      }
      if (sol.primal_residual <= settings_.tol && sol.dual_residual <= settings_.tol &&
          sol.duality_gap <= settings_.tol) {
        sol.status = SolveStatus::optimal;
        return sol;
      }
    }

    // certificates only once tau has collapsed relative to kappa
    if (vkappa > utau) {
      const Eigen::VectorXd y = eq_.row.cwiseProduct(uy);
      const double bty = prog_.b.dot(y);
      if (bty < 0.0 && (prog_.A.transpose() * y).norm() < settings_.infeasibility_tol * -bty) {
        sol.status = SolveStatus::infeasible;
        sol.z = y / -bty;
        sol.x = Eigen::VectorXd::Constant(n_, std::nan(""));
        sol.s = Eigen::VectorXd::Constant(m_, std::nan(""));
        return sol;
      }
      const Eigen::VectorXd x = eq_.col.cwiseProduct(ux);
      const Eigen::VectorXd s = vy.cwiseQuotient(eq_.row);
      const double ctx = prog_.c.dot(x);
      if (ctx < 0.0 && (prog_.A * x + s).norm() < settings_.infeasibility_tol * -ctx) {
        sol.status = SolveStatus::unbounded;
        sol.x = x / -ctx;
        sol.s = s / -ctx;
        sol.z = Eigen::VectorXd::Constant(m_, std::nan(""));
        return sol;
      }
    }
  }
  if (sol.x.size() == 0) {
    sol.x = Eigen::VectorXd::Zero(n_);
    sol.s = Eigen::VectorXd::Zero(m_);
    sol.z = Eigen::VectorXd::Zero(m_);
    fill_residuals(sol);
  }
  sol.status = SolveStatus::max_iters;
  return sol;
}

}  // namespace

ConicSolution detail::solve_admm(const ConicProgram& program, const SolverSettings& settings) {
  Workspace ws(program, settings);
  return ws.run();
}

ConicSolution solve(const ConicProgram& program, const SolverSettings& settings) {
  program.validate();
  if (!(settings.tol > 0.0) || settings.max_iters < 1) {
    throw DomainError("conic solve: tolerance must be positive and max_iters at least 1");
  }
  if (!(settings.relaxation > 0.0 && settings.relaxation < 2.0)) {
    throw DomainError("conic solve: relaxation must lie in (0, 2)");
  }
  using Clock = std::chrono::steady_clock;
  const auto t0 = Clock::now();
  ConicSolution sol;
  auto t1 = t0;
  if (settings.method == Method::interior_point) {
    if (settings.ipm_max_iters < 1) throw DomainError("conic solve: ipm_max_iters must be at least 1");
    t1 = Clock::now();
    sol = detail::solve_interior_point(program, settings);
  } else {
    Workspace ws(program, settings);
    t1 = Clock::now();
    sol = ws.run();
  }
  const auto t2 = Clock::now();
  sol.setup_seconds = std::chrono::duration<double>(t1 - t0).count();
  sol.solve_seconds = std::chrono::duration<double>(t2 - t1).count();
  return sol;
}

}  // namespace cvxrobust::conic
