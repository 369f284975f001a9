#include "cvxrobust/kernels.hpp"

#if defined(__aarch64__) && defined(__ARM_NEON)

#include <arm_neon.h>

#include <algorithm>
#include <cmath>

namespace cvxrobust::kernels::detail {
namespace {

double dot(const double* a, const double* b, std::size_t n) {
  float64x2_t acc0 = vdupq_n_f64(0.0);
  float64x2_t acc1 = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc0 = vfmaq_f64(acc0, vld1q_f64(a + i), vld1q_f64(b + i));
    acc1 = vfmaq_f64(acc1, vld1q_f64(a + i + 2), vld1q_f64(b + i + 2));
  }
  double acc = vaddvq_f64(vaddq_f64(acc0, acc1));
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(alpha);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    vst1q_f64(y + i, vaddq_f64(vld1q_f64(y + i), vmulq_f64(va, vld1q_f64(x + i))));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

double norm1(const double* x, std::size_t n) {
  float64x2_t acc = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) acc = vaddq_f64(acc, vabsq_f64(vld1q_f64(x + i)));
  double s = vaddvq_f64(acc);
  for (; i < n; ++i) s += std::abs(x[i]);
  return s;
}

double norm_inf(const double* x, std::size_t n) {
  float64x2_t acc = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) acc = vmaxq_f64(acc, vabsq_f64(vld1q_f64(x + i)));
  double m = vmaxvq_f64(acc);
  for (; i < n; ++i) m = std::max(m, std::abs(x[i]));
  return m;
}

double pos_sq_sum(const double* x, std::size_t n) {
  const float64x2_t zero = vdupq_n_f64(0.0);
  float64x2_t acc = zero;
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t p = vmaxq_f64(vld1q_f64(x + i), zero);
    acc = vfmaq_f64(acc, p, p);
  }
  double s = vaddvq_f64(acc);
  for (; i < n; ++i) {
    const double p = std::max(x[i], 0.0);
    s += p * p;
  }
  return s;
}

void scaled_pos(const double* x, double scale, double* out, std::size_t n) {
  const float64x2_t zero = vdupq_n_f64(0.0);
  const float64x2_t vs = vdupq_n_f64(scale);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(out + i, vmulq_f64(vs, vmaxq_f64(vld1q_f64(x + i), zero)));
  for (; i < n; ++i) out[i] = scale * std::max(x[i], 0.0);
}

double hinge_sum(const double* m, std::size_t n) {
  const float64x2_t zero = vdupq_n_f64(0.0);
  const float64x2_t one = vdupq_n_f64(1.0);
  float64x2_t acc = zero;
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) acc = vaddq_f64(acc, vmaxq_f64(vsubq_f64(one, vld1q_f64(m + i)), zero));
  double s = vaddvq_f64(acc);
  for (; i < n; ++i) s += std::max(1.0 - m[i], 0.0);
  return s;
}

double relu_weighted_sum(const double* z, const double* alpha, std::size_t n) {
  const float64x2_t zero = vdupq_n_f64(0.0);
  float64x2_t acc = zero;
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    acc = vfmaq_f64(acc, vmaxq_f64(vld1q_f64(z + i), zero), vld1q_f64(alpha + i));
  }
  double s = vaddvq_f64(acc);
  for (; i < n; ++i) s += std::max(z[i], 0.0) * alpha[i];
  return s;
}

void sign_step(const double* x, const double* dir, double eps, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double s = dir[i] > 0.0 ? eps : (dir[i] < 0.0 ? -eps : 0.0);
    out[i] = x[i] + s;
  }
}

constexpr KernelTable kNeon{dot,       axpy,      norm1,
                            norm_inf,  pos_sq_sum, scaled_pos,
                            hinge_sum, relu_weighted_sum, sign_step};

}  // namespace

const KernelTable* neon_table() { return &kNeon; }

}  // namespace cvxrobust::kernels::detail

#else

namespace cvxrobust::kernels::detail {
const KernelTable* neon_table() { return nullptr; }
}  // namespace cvxrobust::kernels::detail

#endif
