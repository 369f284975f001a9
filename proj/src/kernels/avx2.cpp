// Compiled with -mavx2 -mfma on x86-64; only reached after a CPUID check.

#include "cvxrobust/kernels.hpp"

#if defined(__x86_64__) && defined(__AVX2__) && defined(__FMA__)

#include <immintrin.h>

#include <algorithm>
#include <cmath>

namespace cvxrobust::kernels::detail {
namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

inline double hmax(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d m = _mm_max_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_max_sd(m, _mm_unpackhi_pd(m, m)));
}

inline __m256d vabs(__m256d v) {
  return _mm256_andnot_pd(_mm256_set1_pd(-0.0), v);
}

double dot(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  }
  double acc = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  // mul then add (no fma) so results match the scalar loop bit-for-bit
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d prod = _mm256_mul_pd(va, _mm256_loadu_pd(x + i));
    _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), prod));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

double norm1(const double* x, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, vabs(_mm256_loadu_pd(x + i)));
  double s = hsum(acc);
  for (; i < n; ++i) s += std::abs(x[i]);
  return s;
}

double norm_inf(const double* x, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) acc = _mm256_max_pd(acc, vabs(_mm256_loadu_pd(x + i)));
  double m = hmax(acc);
  for (; i < n; ++i) m = std::max(m, std::abs(x[i]));
  return m;
}

double pos_sq_sum(const double* x, std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  __m256d acc = zero;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d p = _mm256_max_pd(_mm256_loadu_pd(x + i), zero);
    acc = _mm256_fmadd_pd(p, p, acc);
  }
  double s = hsum(acc);
  for (; i < n; ++i) {
    const double p = std::max(x[i], 0.0);
    s += p * p;
  }
  return s;
}

void scaled_pos(const double* x, double scale, double* out, std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  const __m256d vs = _mm256_set1_pd(scale);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i, _mm256_mul_pd(vs, _mm256_max_pd(_mm256_loadu_pd(x + i), zero)));
  }
  for (; i < n; ++i) out[i] = scale * std::max(x[i], 0.0);
}

double hinge_sum(const double* m, std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  const __m256d one = _mm256_set1_pd(1.0);
  __m256d acc = zero;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc = _mm256_add_pd(acc, _mm256_max_pd(_mm256_sub_pd(one, _mm256_loadu_pd(m + i)), zero));
  }
  double s = hsum(acc);
  for (; i < n; ++i) s += std::max(1.0 - m[i], 0.0);
  return s;
}

double relu_weighted_sum(const double* z, const double* alpha, std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  __m256d acc = zero;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d p = _mm256_max_pd(_mm256_loadu_pd(z + i), zero);
    acc = _mm256_fmadd_pd(p, _mm256_loadu_pd(alpha + i), acc);
  }
  double s = hsum(acc);
  for (; i < n; ++i) s += std::max(z[i], 0.0) * alpha[i];
  return s;
}

void sign_step(const double* x, const double* dir, double eps, double* out, std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  const __m256d pos = _mm256_set1_pd(eps);
  const __m256d neg = _mm256_set1_pd(-eps);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d d = _mm256_loadu_pd(dir + i);
    const __m256d gt = _mm256_cmp_pd(d, zero, _CMP_GT_OQ);
    const __m256d lt = _mm256_cmp_pd(d, zero, _CMP_LT_OQ);
    const __m256d step = _mm256_or_pd(_mm256_and_pd(gt, pos), _mm256_and_pd(lt, neg));
    _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(x + i), step));
  }
  for (; i < n; ++i) {
    const double s = dir[i] > 0.0 ? eps : (dir[i] < 0.0 ? -eps : 0.0);
    out[i] = x[i] + s;
  }
}

constexpr KernelTable kAvx2{dot,       axpy,      norm1,
                            norm_inf,  pos_sq_sum, scaled_pos,
                            hinge_sum, relu_weighted_sum, sign_step};

}  // namespace

const KernelTable* avx2_table() { return &kAvx2; }

}  // namespace cvxrobust::kernels::detail

#else

namespace cvxrobust::kernels::detail {
const KernelTable* avx2_table() { return nullptr; }
}  // namespace cvxrobust::kernels::detail

#endif
