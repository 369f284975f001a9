#pragma once

// Data-parallel inner loops shared by training and attack code.
//
// Each kernel has a scalar reference implementation and, where the target
// supports it, an AVX2/FMA or NEON variant. The variant is chosen once at
// first use from the running CPU; force_isa() pins a variant for testing.
// SIMD variants reassociate floating-point sums, so reductions agree with
// the scalar reference to rounding, not bit-exactly. Element-wise kernels
// are bit-exact across variants.

#include <span>
#include <string_view>

namespace cvxrobust::kernels {

enum class Isa { scalar, avx2, neon };

std::string_view isa_name(Isa isa);

/// True if the variant was compiled in and the running CPU supports it.
bool isa_supported(Isa isa);

/// Variant currently used by the dispatching entry points.
Isa active_isa();

/// Pin a variant. Throws DomainError if it is not supported here.
void force_isa(Isa isa);

/// Return to automatic selection.
void reset_isa();

struct KernelTable {
  double (*dot)(const double* a, const double* b, std::size_t n);
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  double (*norm1)(const double* x, std::size_t n);
  double (*norm_inf)(const double* x, std::size_t n);
  // sum_k max(x_k, 0)^2
  double (*pos_sq_sum)(const double* x, std::size_t n);
  // out_k = scale * max(x_k, 0)
  void (*scaled_pos)(const double* x, double scale, double* out, std::size_t n);
  // sum_k max(1 - m_k, 0)
  double (*hinge_sum)(const double* margins, std::size_t n);
  // sum_j max(z_j, 0) * alpha_j
  double (*relu_weighted_sum)(const double* z, const double* alpha, std::size_t n);
  // out_k = x_k + eps * sign(dir_k), with sign(0) = 0
  void (*sign_step)(const double* x, const double* dir, double eps, double* out, std::size_t n);
};

const KernelTable& table(Isa isa);

// Dispatching entry points. Span lengths must agree; checked in debug builds.
double dot(std::span<const double> a, std::span<const double> b);
void axpy(double alpha, std::span<const double> x, std::span<double> y);
double norm1(std::span<const double> x);
double norm_inf(std::span<const double> x);
double pos_sq_sum(std::span<const double> x);
void scaled_pos(std::span<const double> x, double scale, std::span<double> out);
double hinge_sum(std::span<const double> margins);
double relu_weighted_sum(std::span<const double> z, std::span<const double> alpha);
void sign_step(std::span<const double> x, std::span<const double> dir, double eps,
               std::span<double> out);

namespace detail {
const KernelTable& scalar_table();
const KernelTable* avx2_table();  // nullptr when not compiled in
const KernelTable* neon_table();  // nullptr when not compiled in
}  // namespace detail

}  // namespace cvxrobust::kernels
