#pragma once

// Dense double-precision kernels used by the policy hot loops.
//
// Every kernel has a scalar reference implementation and, on x86-64, an
// AVX2+FMA variant. The variant is chosen once at runtime from CPUID and can be
// pinned explicitly (tests pin each backend in turn and compare results).
// Variants agree to rounding, not bitwise: the vector paths reassociate sums.

#include <cstddef>
#include <span>
#include <string_view>

namespace grpo::kernels {

enum class Backend { scalar, avx2 };

/// Backend currently used by the free functions below.
Backend active_backend() noexcept;

/// Pins a backend. Returns false (and leaves the selection unchanged) when the
/// CPU or the build does not support it. Not thread-safe; call before work starts.
bool select_backend(Backend backend) noexcept;

/// Restores CPUID-based selection.
void select_best_backend() noexcept;

bool backend_available(Backend backend) noexcept;

std::string_view backend_name(Backend backend) noexcept;

/// sum_i a[i] * b[i]; a and b have equal length.
double dot(std::span<const double> a, std::span<const double> b) noexcept;

/// y += alpha * x
void axpy(double alpha, std::span<const double> x, std::span<double> y) noexcept;

/// out[r] = sum_c m[r * cols + c] * x[c] for a row-major rows x cols matrix.
void gemv(std::span<const double> m, std::size_t rows, std::size_t cols,
          std::span<const double> x, std::span<double> out) noexcept;

/// m[r * cols + c] += u[r] * x[c] (rank-1 update of a row-major matrix).
void ger(std::span<const double> u, std::span<const double> x, std::span<double> m) noexcept;

// Backend-specific entry points. Exposed for equivalence tests.
namespace scalar {
double dot(const double* a, const double* b, std::size_t n) noexcept;
void axpy(double alpha, const double* x, double* y, std::size_t n) noexcept;
}  // namespace scalar

namespace avx2 {
double dot(const double* a, const double* b, std::size_t n) noexcept;
void axpy(double alpha, const double* x, double* y, std::size_t n) noexcept;
}  // namespace avx2

}  // namespace grpo::kernels
