#pragma once

// Cone programs in the form
//
//   minimize    c'x
//   subject to  A x + s = b,   s in K
//
// where K is the product, in this order, of a zero cone, a nonnegative
// orthant and a list of PSD cones. PSD blocks are stored as svec vectors:
// the lower triangle in column-major order with off-diagonal entries scaled
// by sqrt(2), so that <svec(M), svec(N)> = trace(MN).

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace cvxrobust::conic {

using Eigen::Index;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor, Index>;

struct ConeSpec {
  Index zero = 0;
  Index nonneg = 0;
  std::vector<Index> psd;  // block side lengths

  Index dim() const;
};

struct VariableRange {
  Index offset = 0;
  Index size = 0;
};

struct ConicProgram {
  Eigen::VectorXd c;
  SparseMatrix A;
  Eigen::VectorXd b;
  ConeSpec cones;
  std::map<std::string, VariableRange> variables;

  /// Throws DomainError on inconsistent dimensions.
  void validate() const;

  Eigen::VectorXd slice(const Eigen::VectorXd& x, const std::string& name) const;
};

enum class SolveStatus { optimal, infeasible, unbounded, max_iters };

const char* to_string(SolveStatus status);

enum class Method {
  admm,            // operator splitting on the homogeneous self-dual embedding
  interior_point,  // primal-dual path following, Nesterov-Todd scaling
};

const char* to_string(Method method);

struct SolverSettings {
  Method method = Method::admm;
  double tol = 1e-6;               // relative residual / gap tolerance
  std::int64_t max_iters = 200000;
  int ipm_max_iters = 100;
  bool scaling = true;             // diagonal (Ruiz) equilibration
  double infeasibility_tol = 1e-7;
  double relaxation = 1.5;         // over-relaxation in (0, 2)
  double scale = 1.0;              // weight of b and c after equilibration
  int check_interval = 10;
  int verbose = 0;                 // print progress every `verbose` iterations when > 0
};

struct ConicSolution {
  Eigen::VectorXd x;  // primal variables
  Eigen::VectorXd s;  // primal slacks, in K
  Eigen::VectorXd z;  // dual variables, in K*
  SolveStatus status = SolveStatus::max_iters;
  double primal_residual = 0.0;  // ||Ax + s - b|| / (1 + ||b||)
  double dual_residual = 0.0;    // ||A'z + c|| / (1 + ||c||)
  double duality_gap = 0.0;      // |c'x + b'z| / (1 + |c'x| + |b'z|)
  double primal_objective = 0.0;
  double dual_objective = 0.0;
  std::int64_t iterations = 0;
  double setup_seconds = 0.0;
  double solve_seconds = 0.0;
};

/// Solves with the method selected in `settings`. Pure in (program,
/// settings); identical calls give identical results. The interior-point
/// method ignores scaling, relaxation, scale and max_iters (it uses
/// ipm_max_iters).
ConicSolution solve(const ConicProgram& program, const SolverSettings& settings = {});

// ---- symmetric-matrix vectorization ------------------------------------

Index svec_length(Index side);
/// Inverse of svec_length; throws DomainError if `length` is not triangular.
Index svec_side(Index length);
/// Position of entry (row, col), row >= col, inside svec of a side-`side` matrix.
Index svec_index(Index side, Index row, Index col);

/// Symmetrizes (M + M')/2 first; throws DomainError for non-square input.
Eigen::VectorXd svec(const Eigen::MatrixXd& M);
Eigen::MatrixXd smat(const Eigen::Ref<const Eigen::VectorXd>& v);

/// Frobenius-nearest PSD matrix by eigenvalue clipping.
Eigen::MatrixXd project_psd(const Eigen::MatrixXd& M);

/// Projects a packed svec vector onto the PSD cone in place.
void project_psd_svec(Eigen::Ref<Eigen::VectorXd> v, Index side);

// ---- program assembly -------------------------------------------------

/// Affine expression  constant + sum coef * x[var].
struct AffineExpr {
  double constant = 0.0;
  std::vector<std::pair<Index, double>> terms;

  AffineExpr& add(Index var, double coef) {
    if (coef != 0.0) terms.emplace_back(var, coef);
    return *this;
  }
};

/// Collects named variables, a linear objective and constraints in any order,
/// then emits the rows in canonical cone order.
class ProgramBuilder {
 public:
  VariableRange add_variable(const std::string& name, Index size);
  Index num_variables() const { return num_vars_; }

  void set_cost(Index var, double coef);

  void add_equality(const AffineExpr& expr);  // expr == 0
  void add_nonneg(const AffineExpr& expr);    // expr >= 0

  /// `lower` holds the side*(side+1)/2 lower-triangle entries in column-major
  /// order, unscaled; the builder applies the sqrt(2) factor.
  void add_psd(Index side, const std::vector<AffineExpr>& lower);

  ConicProgram build() const;

 private:
  struct Row {
    double b = 0.0;
    std::vector<std::pair<Index, double>> a;
  };
  static Row to_row(const AffineExpr& expr, double scale);

  Index num_vars_ = 0;
  std::map<std::string, VariableRange> variables_;
  std::vector<std::pair<Index, double>> cost_;
  std::vector<Row> zero_rows_;
  std::vector<Row> nonneg_rows_;
  std::vector<std::pair<Index, std::vector<Row>>> psd_blocks_;
};

// ---- text interchange ------------------------------------------------------

/// Writes the program in the line-oriented sparse format documented in
/// docs/conic-format.md (coordinates are 0-based, values %.17g).
void write_program(const ConicProgram& program, std::ostream& out);
ConicProgram read_program(std::istream& in);

}  // namespace cvxrobust::conic
