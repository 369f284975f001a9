#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "cvxrobust/error.hpp"
#include "cvxrobust/kernels.hpp"

using namespace cvxrobust;
using namespace cvxrobust::kernels;

namespace {

std::vector<double> random_vector(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  std::vector<double> v(n);
  for (auto& x : v) x = normal(rng);
  // exact zeros exercise sign(0) and the kinks
  for (std::size_t i = 0; i < n; i += 7) v[i] = 0.0;
  return v;
}

std::vector<Isa> simd_variants() {
  std::vector<Isa> out;
  for (const Isa isa : {Isa::avx2, Isa::neon}) {
    if (isa_supported(isa)) out.push_back(isa);
  }
  return out;
}

double rel_tol(double ref, std::size_t n) { return 1e-13 * (1.0 + std::abs(ref)) * std::sqrt(static_cast<double>(n) + 1.0); }

}  // namespace

TEST(Kernels, ScalarReferenceValues) {
  const KernelTable& k = table(Isa::scalar);
  const double a[] = {1.0, -2.0, 3.0};
  const double b[] = {4.0, 5.0, -6.0};
  EXPECT_EQ(k.dot(a, b, 3), 4.0 - 10.0 - 18.0);
  EXPECT_EQ(k.norm1(a, 3), 6.0);
  EXPECT_EQ(k.norm_inf(a, 3), 3.0);
  EXPECT_EQ(k.pos_sq_sum(a, 3), 10.0);
  EXPECT_EQ(k.hinge_sum(a, 3), 0.0 + 3.0 + 0.0);
  EXPECT_EQ(k.relu_weighted_sum(a, b, 3), 4.0 - 18.0);
  double out[3];
  k.scaled_pos(a, 2.0, out, 3);
  EXPECT_EQ(out[0], 2.0);
  EXPECT_EQ(out[1], 0.0);
  const double dir[] = {0.0, -1.0, 2.0};
  k.sign_step(a, dir, 0.5, out, 3);
  EXPECT_EQ(out[0], 1.0);
  EXPECT_EQ(out[1], -2.5);
  EXPECT_EQ(out[2], 3.5);
  double y[] = {1.0, 1.0, 1.0};
  k.axpy(2.0, a, y, 3);
  EXPECT_EQ(y[1], -3.0);
}

TEST(Kernels, SimdMatchesScalar) {
  const auto variants = simd_variants();
  if (variants.empty()) GTEST_SKIP() << "no SIMD variant on this CPU";
  std::mt19937_64 rng(21);
  const KernelTable& ref = table(Isa::scalar);
  for (const Isa isa : variants) {
    const KernelTable& k = table(isa);
    for (const std::size_t n : {0u, 1u, 3u, 4u, 5u, 8u, 15u, 16u, 17u, 31u, 100u, 1023u, 4099u}) {
      const auto a = random_vector(n, rng);
      const auto b = random_vector(n, rng);
      SCOPED_TRACE(std::string(isa_name(isa)) + " n=" + std::to_string(n));
      const double d = ref.dot(a.data(), b.data(), n);
      EXPECT_NEAR(k.dot(a.data(), b.data(), n), d, rel_tol(d, n));
      const double n1 = ref.norm1(a.data(), n);
      EXPECT_NEAR(k.norm1(a.data(), n), n1, rel_tol(n1, n));
      EXPECT_EQ(k.norm_inf(a.data(), n), ref.norm_inf(a.data(), n));
      const double ps = ref.pos_sq_sum(a.data(), n);
      EXPECT_NEAR(k.pos_sq_sum(a.data(), n), ps, rel_tol(ps, n));
      const double hs = ref.hinge_sum(a.data(), n);
      EXPECT_NEAR(k.hinge_sum(a.data(), n), hs, rel_tol(hs, n));
      const double rw = ref.relu_weighted_sum(a.data(), b.data(), n);
      EXPECT_NEAR(k.relu_weighted_sum(a.data(), b.data(), n), rw, rel_tol(rw, n));

      std::vector<double> o1(n), o2(n);
      ref.scaled_pos(a.data(), 1.7, o1.data(), n);
      k.scaled_pos(a.data(), 1.7, o2.data(), n);
      EXPECT_EQ(o1, o2);
      ref.sign_step(a.data(), b.data(), 0.3, o1.data(), n);
      k.sign_step(a.data(), b.data(), 0.3, o2.data(), n);
      EXPECT_EQ(o1, o2);
      std::vector<double> y1 = b, y2 = b;
      ref.axpy(-0.7, a.data(), y1.data(), n);
      k.axpy(-0.7, a.data(), y2.data(), n);
      for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(y1[i], y2[i], 1e-15 * (1.0 + std::abs(y1[i])));
    }
  }
}

TEST(Kernels, DispatchAndForce) {
  EXPECT_TRUE(isa_supported(Isa::scalar));
  force_isa(Isa::scalar);
  EXPECT_EQ(active_isa(), Isa::scalar);
  const std::vector<double> a{1.0, 2.0};
  EXPECT_EQ(dot(a, a), 5.0);
  for (const Isa isa : {Isa::avx2, Isa::neon}) {
    if (!isa_supported(isa)) EXPECT_THROW(force_isa(isa), DomainError);
  }
  reset_isa();
  EXPECT_TRUE(isa_supported(active_isa()));
  EXPECT_EQ(isa_name(Isa::scalar), "scalar");
}
