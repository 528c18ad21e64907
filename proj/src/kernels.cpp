#include "grpo/kernels.hpp"

#include <cassert>

namespace grpo::kernels {

namespace scalar {

double dot(const double* a, const double* b, std::size_t n) noexcept {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) noexcept {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

}  // namespace scalar

#if !defined(GRPO_HAVE_AVX2)
// Builds without the AVX2 translation unit fall back to the reference loops.
namespace avx2 {
double dot(const double* a, const double* b, std::size_t n) noexcept {
  return scalar::dot(a, b, n);
}
void axpy(double alpha, const double* x, double* y, std::size_t n) noexcept {
  scalar::axpy(alpha, x, y, n);
}
}  // namespace avx2
#endif

namespace {

struct Table {
  Backend backend;
  double (*dot)(const double*, const double*, std::size_t) noexcept;
  void (*axpy)(double, const double*, double*, std::size_t) noexcept;
};

constexpr Table kScalar{Backend::scalar, &scalar::dot, &scalar::axpy};
constexpr Table kAvx2{Backend::avx2, &avx2::dot, &avx2::axpy};

bool cpu_has_avx2() noexcept {
#if defined(GRPO_HAVE_AVX2) && (defined(__x86_64__) || defined(__i386__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const Table* best_table() noexcept { return cpu_has_avx2() ? &kAvx2 : &kScalar; }

const Table*& current() noexcept {
  static const Table* table = best_table();
  return table;
}

}  // namespace

Backend active_backend() noexcept { return current()->backend; }

bool backend_available(Backend backend) noexcept {
  return backend == Backend::scalar || cpu_has_avx2();
}

bool select_backend(Backend backend) noexcept {
  if (!backend_available(backend)) return false;
  current() = backend == Backend::avx2 ? &kAvx2 : &kScalar;
  return true;
}

void select_best_backend() noexcept { current() = best_table(); }

std::string_view backend_name(Backend backend) noexcept {
  return backend == Backend::avx2 ? "avx2" : "scalar";
}

double dot(std::span<const double> a, std::span<const double> b) noexcept {
  assert(a.size() == b.size());
  return current()->dot(a.data(), b.data(), a.size());
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) noexcept {
  assert(x.size() == y.size());
  current()->axpy(alpha, x.data(), y.data(), x.size());
}

void gemv(std::span<const double> m, std::size_t rows, std::size_t cols,
          std::span<const double> x, std::span<double> out) noexcept {
  assert(m.size() == rows * cols && x.size() == cols && out.size() == rows);
  const auto* t = current();
  for (std::size_t r = 0; r < rows; ++r) out[r] = t->dot(m.data() + r * cols, x.data(), cols);
}

void ger(std::span<const double> u, std::span<const double> x, std::span<double> m) noexcept {
  assert(m.size() == u.size() * x.size());
  const auto* t = current();
  const std::size_t cols = x.size();
  for (std::size_t r = 0; r < u.size(); ++r) {
    if (u[r] == 0.0) continue;
    t->axpy(u[r], x.data(), m.data() + r * cols, cols);
  }
}

}  // namespace grpo::kernels
