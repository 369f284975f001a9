#pragma once

#include "cvxrobust/conic.hpp"

namespace cvxrobust::conic::detail {

ConicSolution solve_admm(const ConicProgram& program, const SolverSettings& settings);
ConicSolution solve_interior_point(const ConicProgram& program, const SolverSettings& settings);

// Fills objectives and relative residuals of sol.x, sol.s, sol.z.
void fill_residuals(const ConicProgram& program, ConicSolution& sol);

}  // namespace cvxrobust::conic::detail
