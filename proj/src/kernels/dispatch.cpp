#include <atomic>
#include <cassert>

#include "cvxrobust/error.hpp"
#include "cvxrobust/kernels.hpp"

namespace cvxrobust::kernels {
namespace {

bool cpu_has_avx2() {
#if defined(__x86_64__) && (defined(__GNUC__) || defined(__clang__))
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Isa detect() {
  if (isa_supported(Isa::avx2)) return Isa::avx2;
  if (isa_supported(Isa::neon)) return Isa::neon;
  return Isa::scalar;
}

std::atomic<const KernelTable*> g_active{nullptr};
std::atomic<Isa> g_isa{Isa::scalar};

const KernelTable& active() {
  const KernelTable* t = g_active.load(std::memory_order_acquire);
  if (t == nullptr) {
    reset_isa();
    t = g_active.load(std::memory_order_acquire);
  }
  return *t;
}

}  // namespace

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::scalar: return "scalar";
    case Isa::avx2: return "avx2";
    case Isa::neon: return "neon";
  }
  return "unknown";
}

bool isa_supported(Isa isa) {
  switch (isa) {
    case Isa::scalar: return true;
    case Isa::avx2: return detail::avx2_table() != nullptr && cpu_has_avx2();
    case Isa::neon: return detail::neon_table() != nullptr;
  }
  return false;
}

const KernelTable& table(Isa isa) {
  if (!isa_supported(isa)) {
    throw DomainError("kernel variant not available: " + std::string(isa_name(isa)));
  }
  switch (isa) {
    case Isa::avx2: return *detail::avx2_table();
    case Isa::neon: return *detail::neon_table();
    case Isa::scalar: break;
  }
  return detail::scalar_table();
}

Isa active_isa() {
  active();
  return g_isa.load(std::memory_order_acquire);
}

void force_isa(Isa isa) {
  const KernelTable& t = table(isa);
  g_isa.store(isa, std::memory_order_release);
  g_active.store(&t, std::memory_order_release);
}

void reset_isa() { force_isa(detect()); }

double dot(std::span<const double> a, std::span<const double> b) {
  assert(a.size() == b.size());
  return active().dot(a.data(), b.data(), a.size());
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  assert(x.size() == y.size());
  active().axpy(alpha, x.data(), y.data(), x.size());
}

double norm1(std::span<const double> x) { return active().norm1(x.data(), x.size()); }

double norm_inf(std::span<const double> x) { return active().norm_inf(x.data(), x.size()); }

double pos_sq_sum(std::span<const double> x) { return active().pos_sq_sum(x.data(), x.size()); }

void scaled_pos(std::span<const double> x, double scale, std::span<double> out) {
  assert(x.size() == out.size());
  active().scaled_pos(x.data(), scale, out.data(), x.size());
}

double hinge_sum(std::span<const double> margins) {
  return active().hinge_sum(margins.data(), margins.size());
}

double relu_weighted_sum(std::span<const double> z, std::span<const double> alpha) {
  assert(z.size() == alpha.size());
  return active().relu_weighted_sum(z.data(), alpha.data(), z.size());
}

void sign_step(std::span<const double> x, std::span<const double> dir, double eps,
               std::span<double> out) {
  assert(x.size() == dir.size() && x.size() == out.size());
  active().sign_step(x.data(), dir.data(), eps, out.data(), x.size());
}

}  // namespace cvxrobust::kernels
