#include <numbers>

#include "cvxrobust/conic.hpp"
#include "cvxrobust/error.hpp"

namespace cvxrobust::conic {

void ConicProgram::validate() const {
  const Index n = c.size();
  const Index m = b.size();
  if (A.rows() != m || A.cols() != n) {
    throw DomainError("conic program: A is " + std::to_string(A.rows()) + "x" + std::to_string(A.cols()) +
                      ", expected " + std::to_string(m) + "x" + std::to_string(n));
  }
  if (cones.zero < 0 || cones.nonneg < 0) throw DomainError("conic program: negative cone size");
  for (const Index s : cones.psd) {
    if (s < 1) throw DomainError("conic program: PSD block side must be positive");
  }
  if (cones.dim() != m) {
    throw DomainError("conic program: cone dimension " + std::to_string(cones.dim()) +
                      " does not match " + std::to_string(m) + " rows");
  }
  if (!c.allFinite() || !b.allFinite()) throw DomainError("conic program: non-finite data");
  for (const auto& [name, range] : variables) {
    if (range.offset < 0 || range.size < 0 || range.offset + range.size > n) {
      throw DomainError("conic program: variable '" + name + "' out of range");
    }
  }
}

Eigen::VectorXd ConicProgram::slice(const Eigen::VectorXd& x, const std::string& name) const {
  const auto it = variables.find(name);
  if (it == variables.end()) throw DomainError("conic program: no variable named '" + name + "'");
  return x.segment(it->second.offset, it->second.size);
}

VariableRange ProgramBuilder::add_variable(const std::string& name, Index size) {
  if (variables_.contains(name)) throw DomainError("builder: duplicate variable '" + name + "'");
  const VariableRange r{num_vars_, size};
  variables_[name] = r;
  num_vars_ += size;
  return r;
}

void ProgramBuilder::set_cost(Index var, double coef) { cost_.emplace_back(var, coef); }

ProgramBuilder::Row ProgramBuilder::to_row(const AffineExpr& expr, double scale) {
  // expr = k + a'x  and the slack is s = b - A x, so b = k and A = -a
  Row row;
  row.b = scale * expr.constant;
  row.a.reserve(expr.terms.size());
  for (const auto& [var, coef] : expr.terms) row.a.emplace_back(var, -scale * coef);
  return row;
}

void ProgramBuilder::add_equality(const AffineExpr& expr) { zero_rows_.push_back(to_row(expr, 1.0)); }

void ProgramBuilder::add_nonneg(const AffineExpr& expr) { nonneg_rows_.push_back(to_row(expr, 1.0)); }

void ProgramBuilder::add_psd(Index side, const std::vector<AffineExpr>& lower) {
  if (static_cast<Index>(lower.size()) != svec_length(side)) {
    throw DomainError("builder: PSD block of side " + std::to_string(side) + " needs " +
                      std::to_string(svec_length(side)) + " entries");
  }
  std::vector<Row> rows;
  rows.reserve(lower.size());
  Index k = 0;
  for (Index j = 0; j < side; ++j) {
    for (Index i = j; i < side; ++i, ++k) {
      rows.push_back(to_row(lower[static_cast<std::size_t>(k)], i == j ? 1.0 : std::numbers::sqrt2));
    }
  }
  psd_blocks_.emplace_back(side, std::move(rows));
}

ConicProgram ProgramBuilder::build() const {
  ConicProgram prog;
  prog.variables = variables_;
  prog.c = Eigen::VectorXd::Zero(num_vars_);
  for (const auto& [var, coef] : cost_) prog.c[var] += coef;

  prog.cones.zero = static_cast<Index>(zero_rows_.size());
  prog.cones.nonneg = static_cast<Index>(nonneg_rows_.size());
  for (const auto& blk : psd_blocks_) prog.cones.psd.push_back(blk.first);
  const Index m = prog.cones.dim();
  prog.b = Eigen::VectorXd::Zero(m);

  std::vector<Eigen::Triplet<double, Index>> trip;
  Index r = 0;
  auto emit = [&](const Row& row) {
    prog.b[r] = row.b;
    for (const auto& [var, coef] : row.a) {
      if (var < 0 || var >= num_vars_) throw DomainError("builder: variable index out of range");
      trip.emplace_back(r, var, coef);
    }
    ++r;
  };
  for (const auto& row : zero_rows_) emit(row);
  for (const auto& row : nonneg_rows_) emit(row);
  for (const auto& blk : psd_blocks_) {
    for (const auto& row : blk.second) emit(row);
  }
  prog.A.resize(m, num_vars_);
  prog.A.setFromTriplets(trip.begin(), trip.end());  // duplicates are summed
  prog.A.prune(0.0);
  prog.A.makeCompressed();
  return prog;
}

}  // namespace cvxrobust::conic
