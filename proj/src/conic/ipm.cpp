// Primal-dual interior-point method on the homogeneous self-dual embedding
//
//   A x = b tau,  G x + s = h tau,  A'y + G'z + c tau = 0,
//   kappa = -(c'x + b'y + h'z),  s, z in K,  tau, kappa >= 0,
//
// with Nesterov-Todd scaling and Mehrotra predictor-corrector steps. The
// zero-cone rows of the program are the equalities A x = b; the remaining
// rows form G x + s = h. Each iteration assembles the reduced Newton matrix
// G' W^{-1} W^{-T} G + A'A densely and solves it by Cholesky.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <tuple>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "cvxrobust/error.hpp"
#include "detail.hpp"

namespace cvxrobust::conic::detail {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct Entry {
  int p, q;  // matrix position, p >= q
  double v;  // matrix value (svec value unscaled)
};

struct Block {
  Index off = 0;  // offset inside the cone rows
  Index side = 0;
  Index len = 0;
  std::vector<Index> cols;                 // program columns touching this block
  std::vector<std::vector<Entry>> entries;  // per local column
};

struct Scaling {
  VectorXd w;    // nonneg part, W = diag(w)
  VectorXd lnn;  // nonneg part of lambda
  std::vector<MatrixXd> r, rti;
  std::vector<VectorXd> lam;
};

class Ipm {
 public:
  Ipm(const ConicProgram& prog, const SolverSettings& settings) : prog_(prog), settings_(settings) {
    n_ = prog.c.size();
    p_ = prog.cones.zero;
    l_ = prog.cones.nonneg;
    mg_ = prog.b.size() - p_;
    Aeq_ = prog.A.topRows(p_);
    G_ = prog.A.bottomRows(mg_);
    Gt_ = G_.transpose();
    beq_ = prog.b.head(p_);
    h_ = prog.b.tail(mg_);
    c_ = prog.c;
    Gnn_ = G_.topRows(l_);
    {
      // dense copy of the nonnegative rows restricted to the columns they touch
      for (Index j = 0; j < n_; ++j) {
        if (SparseMatrix::InnerIterator(Gnn_, j)) nn_cols_.push_back(j);
      }
      const auto nc = static_cast<Index>(nn_cols_.size());
      if (static_cast<double>(l_) * static_cast<double>(nc) <= 5e7) {
        Gnn_dense_ = MatrixXd::Zero(l_, nc);
        for (Index k = 0; k < nc; ++k) {
          for (SparseMatrix::InnerIterator it(Gnn_, nn_cols_[static_cast<std::size_t>(k)]); it; ++it) {
            Gnn_dense_(it.row(), k) = it.value();
          }
        }
      }
    }
    AtA_ = MatrixXd(SparseMatrix(Aeq_.transpose() * Aeq_));
    theta_ = static_cast<double>(l_);

    Index off = l_;
    std::vector<int> owner(static_cast<std::size_t>(mg_), -1);
    for (const Index side : prog.cones.psd) {
      Block b;
      b.off = off;
      b.side = side;
      b.len = svec_length(side);
      for (Index k = 0; k < b.len; ++k) owner[static_cast<std::size_t>(off + k)] = static_cast<int>(blocks_.size());
      off += b.len;
      theta_ += static_cast<double>(side);
      blocks_.push_back(std::move(b));
    }
    // svec position -> (row, col)
    std::vector<std::vector<std::pair<int, int>>> pos_cache;
    auto positions = [&](Index side) -> const std::vector<std::pair<int, int>>& {
      if (static_cast<Index>(pos_cache.size()) <= side) pos_cache.resize(static_cast<std::size_t>(side + 1));
      auto& pc = pos_cache[static_cast<std::size_t>(side)];
      if (pc.empty()) {
        for (Index j = 0; j < side; ++j) {
          for (Index i = j; i < side; ++i) pc.emplace_back(static_cast<int>(i), static_cast<int>(j));
        }
      }
      return pc;
    };
    for (Index j = 0; j < n_; ++j) {
      for (SparseMatrix::InnerIterator it(G_, j); it; ++it) {
        const int bi = owner[static_cast<std::size_t>(it.row())];
        if (bi < 0) continue;
        Block& b = blocks_[static_cast<std::size_t>(bi)];
        if (b.cols.empty() || b.cols.back() != j) {
          b.cols.push_back(j);
          b.entries.emplace_back();
        }
        const auto [pi, qi] = positions(b.side)[static_cast<std::size_t>(it.row() - b.off)];
        const double v = pi == qi ? it.value() : it.value() / std::numbers::sqrt2;
        b.entries.back().push_back({pi, qi, v});
      }
    }
  }

  ConicSolution run();

 private:
  // ---- cone algebra on the G rows ----------------------------------------

  static MatrixXd smat_block(const VectorXd& u, const Block& b) { return smat(u.segment(b.off, b.len)); }

  static void put_block(VectorXd& u, const Block& b, const MatrixXd& M) { u.segment(b.off, b.len) = svec(M); }

  enum class Op { W, WinvT, WT, Winv };

  VectorXd apply(const Scaling& sc, const VectorXd& u, Op op) const {
    VectorXd out(mg_);
    if (op == Op::W || op == Op::WT) {
      out.head(l_) = sc.w.cwiseProduct(u.head(l_));
    } else {
      out.head(l_) = u.head(l_).cwiseQuotient(sc.w);
    }
    for (std::size_t k = 0; k < blocks_.size(); ++k) {
      const Block& b = blocks_[k];
      const MatrixXd U = smat_block(u, b);
      MatrixXd M;
      switch (op) {
        case Op::W: M = sc.r[k].transpose() * U * sc.r[k]; break;
        case Op::WinvT: M = sc.rti[k].transpose() * U * sc.rti[k]; break;
        case Op::WT: M = sc.r[k] * U * sc.r[k].transpose(); break;
        case Op::Winv: M = sc.rti[k] * U * sc.rti[k].transpose(); break;
      }
      put_block(out, b, 0.5 * (M + M.transpose()));
    }
    return out;
  }

  VectorXd identity() const {
    VectorXd e = VectorXd::Zero(mg_);
    e.head(l_).setOnes();
    for (const Block& b : blocks_) {
      for (Index j = 0; j < b.side; ++j) e[b.off + svec_index(b.side, j, j)] = 1.0;
    }
    return e;
  }

  VectorXd lambda_vec(const Scaling& sc) const {
    VectorXd out = VectorXd::Zero(mg_);
    out.head(l_) = sc.lnn;
    for (std::size_t k = 0; k < blocks_.size(); ++k) {
      const Block& b = blocks_[k];
      for (Index j = 0; j < b.side; ++j) out[b.off + svec_index(b.side, j, j)] = sc.lam[k][j];
    }
    return out;
  }

  VectorXd jordan(const VectorXd& u, const VectorXd& v) const {
    VectorXd out(mg_);
    out.head(l_) = u.head(l_).cwiseProduct(v.head(l_));
    for (const Block& b : blocks_) {
      const MatrixXd U = smat_block(u, b), V = smat_block(v, b);
      const MatrixXd P = U * V;
      put_block(out, b, 0.5 * (P + P.transpose()));
    }
    return out;
  }

  // u with lambda o u = r, lambda diagonal in the scaled frame
  VectorXd lambda_solve(const Scaling& sc, const VectorXd& r) const {
    VectorXd out(mg_);
    out.head(l_) = r.head(l_).cwiseQuotient(sc.lnn);
    for (std::size_t k = 0; k < blocks_.size(); ++k) {
      const Block& b = blocks_[k];
      Index idx = b.off;
      for (Index j = 0; j < b.side; ++j) {
        for (Index i = j; i < b.side; ++i, ++idx) out[idx] = 2.0 * r[idx] / (sc.lam[k][i] + sc.lam[k][j]);
      }
    }
    return out;
  }

  // largest t with lambda + t d in the cone (inf if unbounded)
  double max_step(const Scaling& sc, const VectorXd& d) const {
    double t = std::numeric_limits<double>::infinity();
    for (Index i = 0; i < l_; ++i) {
      if (d[i] < 0.0) t = std::min(t, -sc.lnn[i] / d[i]);
    }
    for (std::size_t k = 0; k < blocks_.size(); ++k) {
      const Block& b = blocks_[k];
      const VectorXd isq = sc.lam[k].cwiseSqrt().cwiseInverse();
      const MatrixXd D = isq.asDiagonal() * smat_block(d, b) * isq.asDiagonal();
      Eigen::SelfAdjointEigenSolver<MatrixXd> eig(D, Eigen::EigenvaluesOnly);
      const double lo = eig.eigenvalues()[0];
      if (lo < 0.0) t = std::min(t, -1.0 / lo);
    }
    return t;
  }

  // smallest t with u + t e in the cone, i.e. minus the smallest eigenvalue
  double cone_shift(const VectorXd& u) const {
    double lo = std::numeric_limits<double>::infinity();
    if (l_ > 0) lo = u.head(l_).minCoeff();
    for (const Block& b : blocks_) {
      Eigen::SelfAdjointEigenSolver<MatrixXd> eig(smat_block(u, b), Eigen::EigenvaluesOnly);
      lo = std::min(lo, eig.eigenvalues()[0]);
    }
    return std::isfinite(lo) ? -lo : -1.0;
  }

  Scaling identity_scaling() const {
    Scaling sc;
    sc.w = VectorXd::Ones(l_);
    sc.lnn = VectorXd::Ones(l_);
    for (const Block& b : blocks_) {
      sc.r.push_back(MatrixXd::Identity(b.side, b.side));
      sc.rti.push_back(MatrixXd::Identity(b.side, b.side));
      sc.lam.push_back(VectorXd::Ones(b.side));
    }
    return sc;
  }

  // Nesterov-Todd scaling point of (s, z); false if either left the cone numerically
  bool nt_scaling(const VectorXd& s, const VectorXd& z, Scaling& sc) const {
    sc = Scaling{};
    const auto sn = s.head(l_), zn = z.head(l_);
    if (l_ > 0 && (sn.minCoeff() <= 0.0 || zn.minCoeff() <= 0.0)) return false;
    sc.w = sn.cwiseQuotient(zn).cwiseSqrt();
    sc.lnn = sn.cwiseProduct(zn).cwiseSqrt();
    for (const Block& b : blocks_) {
      Eigen::LLT<MatrixXd> ls(smat_block(s, b)), lz(smat_block(z, b));
      if (ls.info() != Eigen::Success || lz.info() != Eigen::Success) return false;
      const MatrixXd L1 = ls.matrixL(), L2 = lz.matrixL();
      Eigen::JacobiSVD<MatrixXd> svd(L2.transpose() * L1, Eigen::ComputeFullU | Eigen::ComputeFullV);
      const VectorXd lam = svd.singularValues();
      if (!(lam.minCoeff() > 0.0)) return false;
      const VectorXd isq = lam.cwiseSqrt().cwiseInverse();
      sc.r.push_back(L1 * svd.matrixV() * isq.asDiagonal());
      sc.rti.push_back(L2 * svd.matrixU() * isq.asDiagonal());
      sc.lam.push_back(lam);
    }
    return true;
  }

  // ---- Newton systems ----------------------------------------------------

  // Adds the Gram matrix of the scaled block columns svec(R' M_j R) to the
  // lower triangle of H:
  //   <R' M_i R, R' M_j R> = tr(U_i U_j),  U_j = M_j P,  P = R R'.
  // U_j is nonzero only on the rows M_j touches, which for sparse M_j is
  // far cheaper than forming the scaled columns.
  static void add_block_hessian(const Block& b, const MatrixXd& R, MatrixXd& H) {
    const Index nc = static_cast<Index>(b.cols.size());
    const auto col = [&](Index j) { return b.cols[static_cast<std::size_t>(j)]; };
    const auto add = [&](Index i, Index j, double v) {
      H(std::max(col(i), col(j)), std::min(col(i), col(j))) += v;
    };
    // rows touched by each column, flattened: rows[start[j] .. start[j+1])
    std::vector<int> rows;
    std::vector<std::size_t> start{0};
    for (Index j = 0; j < nc; ++j) {
      const std::size_t s0 = rows.size();
      for (const Entry& e : b.entries[static_cast<std::size_t>(j)]) {
        rows.push_back(e.p);
        rows.push_back(e.q);
      }
      std::sort(rows.begin() + static_cast<std::ptrdiff_t>(s0), rows.end());
      rows.erase(std::unique(rows.begin() + static_cast<std::ptrdiff_t>(s0), rows.end()), rows.end());
      start.push_back(rows.size());
    }
    const double touched = static_cast<double>(rows.size());
    const double dense_cost = static_cast<double>(nc) * static_cast<double>(nc) * static_cast<double>(b.len);

    if (touched * touched < dense_cost) {
      const MatrixXd P = R * R.transpose();
      // U rows stored side-major: U(:, k) is the touched row rows[k]
      MatrixXd U = MatrixXd::Zero(b.side, static_cast<Index>(rows.size()));
      for (Index j = 0; j < nc; ++j) {
        const std::size_t s0 = start[static_cast<std::size_t>(j)];
        const std::size_t s1 = start[static_cast<std::size_t>(j) + 1];
        const auto slot = [&](int r) {
          return static_cast<Index>(std::lower_bound(rows.begin() + static_cast<std::ptrdiff_t>(s0),
                                                     rows.begin() + static_cast<std::ptrdiff_t>(s1), r) -
                                    rows.begin());
        };
        for (const Entry& e : b.entries[static_cast<std::size_t>(j)]) {
          U.col(slot(e.p)) += e.v * P.col(e.q);
          if (e.p != e.q) U.col(slot(e.q)) += e.v * P.col(e.p);
        }
      }
      for (Index j = 0; j < nc; ++j) {
        const std::size_t j0 = start[static_cast<std::size_t>(j)];
        const std::size_t j1 = start[static_cast<std::size_t>(j) + 1];
        for (Index i = j; i < nc; ++i) {
          const std::size_t i0 = start[static_cast<std::size_t>(i)];
          const std::size_t i1 = start[static_cast<std::size_t>(i) + 1];
          double acc = 0.0;
          for (std::size_t a = i0; a < i1; ++a) {
            for (std::size_t c = j0; c < j1; ++c) {
              acc += U(rows[c], static_cast<Index>(a)) * U(rows[a], static_cast<Index>(c));
            }
          }
          add(i, j, acc);
        }
      }
      return;
    }

    MatrixXd Gb(b.len, nc);
    MatrixXd M(b.side, b.side);
    for (Index j = 0; j < nc; ++j) {
      const auto& ent = b.entries[static_cast<std::size_t>(j)];
      M.setZero();
      if (static_cast<Index>(ent.size()) * 4 > b.side) {
        for (const Entry& e : ent) {
          M(e.p, e.q) = e.v;
          M(e.q, e.p) = e.v;
        }
        M = R.transpose() * M * R;
      } else {
        for (const Entry& e : ent) {
          if (e.p == e.q) {
            M.noalias() += e.v * R.row(e.p).transpose() * R.row(e.p);
          } else {
            M.noalias() += e.v * R.row(e.p).transpose() * R.row(e.q);
            M.noalias() += e.v * R.row(e.q).transpose() * R.row(e.p);
          }
        }
      }
      Gb.col(j) = svec(M);
    }
    MatrixXd Hb = MatrixXd::Zero(nc, nc);
    Hb.selfadjointView<Eigen::Lower>().rankUpdate(Gb.transpose());
    for (Index j = 0; j < nc; ++j) {
      for (Index i = j; i < nc; ++i) add(i, j, Hb(i, j));
    }
  }

  // Factor H = G' W^{-1} W^{-T} G + A'A and the equality Schur complement.
  bool factor(const Scaling& sc) {
    MatrixXd H = AtA_;
    if (l_ > 0 && Gnn_dense_.size() > 0) {
      const MatrixXd Gs = sc.w.cwiseInverse().asDiagonal() * Gnn_dense_;
      const auto nc = static_cast<Index>(nn_cols_.size());
      MatrixXd Hb = MatrixXd::Zero(nc, nc);
      Hb.selfadjointView<Eigen::Lower>().rankUpdate(Gs.transpose());
      for (Index j = 0; j < nc; ++j) {
        const Index cj = nn_cols_[static_cast<std::size_t>(j)];
        for (Index i = j; i < nc; ++i) {
          const Index ci = nn_cols_[static_cast<std::size_t>(i)];
          H(std::max(ci, cj), std::min(ci, cj)) += Hb(i, j);
        }
      }
    } else if (l_ > 0) {
      const SparseMatrix Gs = sc.w.cwiseInverse().asDiagonal() * Gnn_;
      const MatrixXd P = MatrixXd(SparseMatrix(Gs.transpose() * Gs));
      H.triangularView<Eigen::Lower>() += P;
    }
    for (std::size_t k = 0; k < blocks_.size(); ++k) add_block_hessian(blocks_[k], sc.rti[k], H);
    // H is accumulated in its lower triangle
    double reg = 0.0;
    const double diag_max = std::max(1.0, H.diagonal().cwiseAbs().maxCoeff());
    for (int attempt = 0; attempt < 8; ++attempt) {
      MatrixXd Hr = H;
      Hr.diagonal().array() += reg;
      llt_.compute(Hr.selfadjointView<Eigen::Lower>());
      if (llt_.info() == Eigen::Success) break;
      reg = reg == 0.0 ? 1e-14 * diag_max : reg * 100.0;
    }
    if (llt_.info() != Eigen::Success) return false;
    if (p_ > 0) {
      Y_ = llt_.solve(MatrixXd(SparseMatrix(Aeq_.transpose())));
      MatrixXd S = Aeq_ * Y_;
      S = 0.5 * (S + S.transpose());
      double sreg = 0.0;
      const double sdiag = std::max(1e-300, S.diagonal().cwiseAbs().maxCoeff());
      for (int attempt = 0; attempt < 8; ++attempt) {
        MatrixXd Sr = S;
        Sr.diagonal().array() += sreg;
        sllt_.compute(Sr);
        if (sllt_.info() == Eigen::Success) break;
        sreg = sreg == 0.0 ? 1e-14 * sdiag : sreg * 100.0;
      }
      if (sllt_.info() != Eigen::Success) return false;
    }
    return true;
  }

  struct Dir {
    VectorXd x, y, z;
  };

  Dir solve_once(const Scaling& sc, const VectorXd& bx, const VectorXd& by, const VectorXd& bz) const {
    const VectorXd t = apply(sc, apply(sc, bz, Op::WinvT), Op::Winv);
    VectorXd rhs = bx + Gt_ * t;
    if (p_ > 0) rhs += Aeq_.transpose() * by;
    const VectorXd v = llt_.solve(rhs);
    Dir d;
    if (p_ > 0) {
      d.y = sllt_.solve(Aeq_ * v - by);
      d.x = v - Y_ * d.y;
    } else {
      d.y = VectorXd::Zero(0);
      d.x = v;
    }
    d.z = apply(sc, apply(sc, G_ * d.x - bz, Op::WinvT), Op::Winv);
    return d;
  }

  // [0 A' G'; A 0 0; G 0 -W'W] (x, y, z) = (bx, by, bz), with refinement
  Dir solve_kkt(const Scaling& sc, const VectorXd& bx, const VectorXd& by, const VectorXd& bz) const {
    Dir d = solve_once(sc, bx, by, bz);
    for (int pass = 0; pass < 2; ++pass) {
      VectorXd rx = bx - Gt_ * d.z;
      if (p_ > 0) rx -= Aeq_.transpose() * d.y;
      const VectorXd ry = p_ > 0 ? VectorXd(by - Aeq_ * d.x) : VectorXd(VectorXd::Zero(0));
      const VectorXd rz = bz - (G_ * d.x - apply(sc, apply(sc, d.z, Op::W), Op::WT));
      const Dir e = solve_once(sc, rx, ry, rz);
      d.x += e.x;
      d.y += e.y;
      d.z += e.z;
    }
    return d;
  }

  const ConicProgram& prog_;
  const SolverSettings& settings_;
  Index n_ = 0, p_ = 0, l_ = 0, mg_ = 0;
  SparseMatrix Aeq_, G_, Gt_, Gnn_;
  VectorXd beq_, h_, c_;
  MatrixXd AtA_;
  std::vector<Index> nn_cols_;
  MatrixXd Gnn_dense_;
  double theta_ = 0.0;
  std::vector<Block> blocks_;
  Eigen::LLT<MatrixXd> llt_;
  Eigen::LLT<MatrixXd> sllt_;
  MatrixXd Y_;
};

ConicSolution Ipm::run() {
  ConicSolution sol;
  const VectorXd e = identity();

  // starting point from the identity-scaled KKT system
  const Scaling id = identity_scaling();
  if (!factor(id)) throw NumericalError("conic solve (interior point): singular KKT system at the starting point");
  Dir pr = solve_kkt(id, VectorXd::Zero(n_), beq_, h_);
  VectorXd x = pr.x;
  VectorXd s = -pr.z;
  Dir du = solve_kkt(id, -c_, VectorXd::Zero(p_), VectorXd::Zero(mg_));
  VectorXd y = du.y;
  VectorXd z = du.z;
  if (const double a = cone_shift(s); a >= 0.0) s += (1.0 + a) * e;
  if (const double a = cone_shift(z); a >= 0.0) z += (1.0 + a) * e;
  double tau = 1.0, kappa = 1.0;

  auto record = [&](double t) {
    sol.x = x / t;
    sol.s = VectorXd::Zero(p_ + mg_);
    sol.s.tail(mg_) = s / t;
    sol.z.resize(p_ + mg_);
    sol.z.head(p_) = y / t;
    sol.z.tail(mg_) = z / t;
    fill_residuals(prog_, sol);
  };

  Scaling sc;
  Dir a_dir;
  for (int it = 0; it <= settings_.ipm_max_iters; ++it) {
    sol.iterations = it;
    VectorXd rx = Gt_ * z + c_ * tau;
    if (p_ > 0) rx += Aeq_.transpose() * y;
    const VectorXd ry = Aeq_ * x - beq_ * tau;
    const VectorXd rz = G_ * x + s - h_ * tau;
    const double cx = c_.dot(x), by = beq_.dot(y) + h_.dot(z);
    const double rt = cx + by + kappa;

    record(tau);
    if (settings_.verbose > 0) {
      std::fprintf(stderr, "ipm %3d  pres %.3e  dres %.3e  gap %.3e  pobj %.9e  tau %.2e  kappa %.2e\n", it,
                   sol.primal_residual, sol.dual_residual, sol.duality_gap, sol.primal_objective, tau, kappa);
    }
    if (sol.primal_residual <= settings_.tol && sol.dual_residual <= settings_.tol &&
        sol.duality_gap <= settings_.tol) {
      sol.status = SolveStatus::optimal;
      return sol;
    }
    // certificates, in the same scale-free form as the splitting method
    const double itol = settings_.infeasibility_tol;
    if (by < 0.0) {
      VectorXd aty = Gt_ * z;
      if (p_ > 0) aty += Aeq_.transpose() * y;
      if (aty.norm() <= itol * -by) {
        sol.status = SolveStatus::infeasible;
        sol.z.head(p_) = y / -by;
        sol.z.tail(mg_) = z / -by;
        sol.x = VectorXd::Constant(n_, std::nan(""));
        sol.s = VectorXd::Constant(p_ + mg_, std::nan(""));
        return sol;
      }
    }
    if (cx < 0.0) {
      const double res = std::sqrt((Aeq_ * x).squaredNorm() + (G_ * x + s).squaredNorm());
      if (res <= itol * -cx) {
        sol.status = SolveStatus::unbounded;
        sol.x = x / -cx;
        sol.s = VectorXd::Zero(p_ + mg_);
        sol.s.tail(mg_) = s / -cx;
        sol.z = VectorXd::Constant(p_ + mg_, std::nan(""));
        return sol;
      }
    }
    if (it == settings_.ipm_max_iters) break;

    const double mu = (s.dot(z) + tau * kappa) / (theta_ + 1.0);
    if (!nt_scaling(s, z, sc) || !factor(sc)) break;
    const VectorXd lam = lambda_vec(sc);
    const VectorXd lam_sq = jordan(lam, lam);

    const Dir d2 = solve_kkt(sc, -c_, beq_, h_);
    const double q2 = c_.dot(d2.x) + beq_.dot(d2.y) + h_.dot(d2.z);

    VectorXd dsa, dza;
    double dtau_a = 0.0, dkappa_a = 0.0, sigma = 0.0;
    VectorXd dx, dy, dz, dsk;
    double dtau = 0.0, dkappa = 0.0, step = 0.0;
    for (int pass = 0; pass < 2; ++pass) {
      const bool affine = pass == 0;
      const double rho = affine ? 1.0 : 1.0 - sigma;
      VectorXd rs = -lam_sq;
      double rk = -tau * kappa;
      if (!affine) {
        rs -= jordan(dsa, dza);
        rs += sigma * mu * e;
        rk += -dtau_a * dkappa_a + sigma * mu;
      }
      const VectorXd t1 = lambda_solve(sc, rs);
      const Dir d1 = solve_kkt(sc, -rho * rx, -rho * ry, -rho * rz - apply(sc, t1, Op::WT));
      const double q1 = c_.dot(d1.x) + beq_.dot(d1.y) + h_.dot(d1.z);
      dtau = (-rho * rt - q1 - rk / tau) / (q2 - kappa / tau);
      dx = d1.x + dtau * d2.x;
      dy = d1.y + dtau * d2.y;
      dz = d1.z + dtau * d2.z;
      dkappa = (rk - kappa * dtau) / tau;
      const VectorXd dzk = apply(sc, dz, Op::W);
      dsk = t1 - dzk;
      double amax = std::min(max_step(sc, dsk), max_step(sc, dzk));
      if (dtau < 0.0) amax = std::min(amax, -tau / dtau);
      if (dkappa < 0.0) amax = std::min(amax, -kappa / dkappa);
      if (affine) {
        const double a = std::min(1.0, amax);
        sigma = std::pow(1.0 - a, 3.0);
        dsa = dsk;
        dza = dzk;
        dtau_a = dtau;
        dkappa_a = dkappa;
      } else {
        step = std::min(1.0, 0.99 * amax);
      }
    }
    if (!(step > 1e-12)) break;
    x += step * dx;
    y += step * dy;
    z += step * dz;
    s += step * apply(sc, dsk, Op::WT);
    tau += step * dtau;
    kappa += step * dkappa;
    if (!x.allFinite() || !z.allFinite() || !s.allFinite() || !std::isfinite(tau)) {
      throw NumericalError("conic solve (interior point): iterates became non-finite at iteration " +
                           std::to_string(it));
    }
  }
  record(tau);
  sol.status = SolveStatus::max_iters;
  return sol;
}

}  // namespace

ConicSolution solve_interior_point(const ConicProgram& program, const SolverSettings& settings) {
  Ipm ipm(program, settings);
  return ipm.run();
}

}  // namespace cvxrobust::conic::detail
