#include <cmath>
#include <numbers>

#include <Eigen/Eigenvalues>

#include "cvxrobust/conic.hpp"
#include "cvxrobust/error.hpp"

namespace cvxrobust::conic {

Index ConeSpec::dim() const {
  Index total = zero + nonneg;
  for (const Index s : psd) total += svec_length(s);
  return total;
}

Index svec_length(Index side) { return side * (side + 1) / 2; }

Index svec_side(Index length) {
  const auto side = static_cast<Index>(std::llround((std::sqrt(8.0 * static_cast<double>(length) + 1.0) - 1.0) / 2.0));
  if (svec_length(side) != length) {
    throw DomainError("svec: length " + std::to_string(length) + " is not triangular");
  }
  return side;
}

Index svec_index(Index side, Index row, Index col) {
  if (row < col) std::swap(row, col);
  return col * side - col * (col - 1) / 2 + (row - col);
}

Eigen::VectorXd svec(const Eigen::MatrixXd& M) {
  if (M.rows() != M.cols()) throw DomainError("svec: matrix is not square");
  const Index s = M.rows();
  Eigen::VectorXd v(svec_length(s));
  Index k = 0;
  for (Index j = 0; j < s; ++j) {
    v[k++] = M(j, j);
    for (Index i = j + 1; i < s; ++i) v[k++] = std::numbers::sqrt2 * 0.5 * (M(i, j) + M(j, i));
  }
  return v;
}

Eigen::MatrixXd smat(const Eigen::Ref<const Eigen::VectorXd>& v) {
  const Index s = svec_side(v.size());
  Eigen::MatrixXd M(s, s);
  Index k = 0;
  for (Index j = 0; j < s; ++j) {
    M(j, j) = v[k++];
    for (Index i = j + 1; i < s; ++i) {
      const double e = v[k++] / std::numbers::sqrt2;
      M(i, j) = e;
      M(j, i) = e;
    }
  }
  return M;
}

namespace {

// In-place clip of a symmetric matrix; returns false when nothing changed.
bool clip_negative_eigenvalues(Eigen::MatrixXd& M) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(M, Eigen::ComputeEigenvectors);
  if (eig.info() != Eigen::Success) {
    throw NumericalError("project_psd: eigendecomposition failed for a " + std::to_string(M.rows()) +
                         "x" + std::to_string(M.cols()) + " block (max |entry| " +
                         std::to_string(M.cwiseAbs().maxCoeff()) + ")");
  }
  const Eigen::VectorXd& lam = eig.eigenvalues();  // ascending
  const Index s = M.rows();
  Index negatives = 0;
  while (negatives < s && lam[negatives] < 0.0) ++negatives;
  if (negatives == 0) return false;
  if (negatives == s) {
    M.setZero();
    return true;
  }
  const Eigen::MatrixXd& V = eig.eigenvectors();
  if (negatives <= s - negatives) {
    // M - V_- diag(lam_-) V_-'
    const auto Vn = V.leftCols(negatives);
    M.noalias() -= Vn * lam.head(negatives).asDiagonal() * Vn.transpose();
  } else {
    const auto Vp = V.rightCols(s - negatives);
    M.noalias() = Vp * lam.tail(s - negatives).asDiagonal() * Vp.transpose();
  }
  return true;
}

}  // namespace

Eigen::MatrixXd project_psd(const Eigen::MatrixXd& M) {
  if (M.rows() != M.cols()) throw DomainError("project_psd: matrix is not square");
  if (!M.allFinite()) throw DomainError("project_psd: non-finite entries");
  Eigen::MatrixXd S = 0.5 * (M + M.transpose());
  clip_negative_eigenvalues(S);
  return 0.5 * (S + S.transpose());
}

void project_psd_svec(Eigen::Ref<Eigen::VectorXd> v, Index side) {
  if (side == 1) {
    v[0] = std::max(v[0], 0.0);
    return;
  }
  Eigen::MatrixXd M = smat(v);
  if (clip_negative_eigenvalues(M)) v = svec(M);
}

}  // namespace cvxrobust::conic
