#include <algorithm>
#include <cmath>

#include "cvxrobust/kernels.hpp"

namespace cvxrobust::kernels::detail {
namespace {

double dot(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

double norm1(const double* x, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += std::abs(x[i]);
  return acc;
}

double norm_inf(const double* x, std::size_t n) {
  double m = 0.0;
  for (std::size_t i = 0; i < n; ++i) m = std::max(m, std::abs(x[i]));
  return m;
}

double pos_sq_sum(const double* x, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double p = std::max(x[i], 0.0);
    acc += p * p;
  }
  return acc;
}

void scaled_pos(const double* x, double scale, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = scale * std::max(x[i], 0.0);
}

double hinge_sum(const double* m, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += std::max(1.0 - m[i], 0.0);
  return acc;
}

double relu_weighted_sum(const double* z, const double* alpha, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += std::max(z[i], 0.0) * alpha[i];
  return acc;
}

void sign_step(const double* x, const double* dir, double eps, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double s = dir[i] > 0.0 ? 1.0 : (dir[i] < 0.0 ? -1.0 : 0.0);
    out[i] = x[i] + eps * s;
  }
}

constexpr KernelTable kScalar{dot,       axpy,      norm1,
                              norm_inf,  pos_sq_sum, scaled_pos,
                              hinge_sum, relu_weighted_sum, sign_step};

}  // namespace

const KernelTable& scalar_table() { return kScalar; }

}  // namespace cvxrobust::kernels::detail
