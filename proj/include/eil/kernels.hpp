#pragma once

// Inner-loop arithmetic used by the encoder, the alignment filters and the
// policy network. Every kernel has a portable scalar reference and, where the
// target supports it, an AVX2 variant selected once at runtime.
//
// Both variants accumulate in four interleaved lanes, reduce the lanes as
// (l0 + l2) + (l1 + l3) and then add the tail sequentially, with no fused
// multiply-add. Results are therefore bitwise identical across variants.

#include <cstddef>
#include <span>
#include <string_view>

namespace eil::kernels {

enum class Isa { scalar, avx2 };

struct KernelTable {
  Isa isa;
  double (*dot)(const double* a, const double* b, std::size_t n);
  double (*squared_distance)(const double* a, const double* b, std::size_t n);
  /// y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
};

const KernelTable& scalar_table();
/// nullptr when the AVX2 variant was not compiled in or the CPU lacks AVX2.
const KernelTable* avx2_table();

/// The table in use. Chosen on first call: AVX2 when available unless the
/// EIL_ISA environment variable is set to "scalar".
const KernelTable& active();
/// Overrides the runtime choice. Throws UsageError if `isa` is unavailable.
void select(Isa isa);
std::string_view isa_name(Isa isa);

inline double dot(std::span<const double> a, std::span<const double> b) {
  return active().dot(a.data(), b.data(), a.size());
}
inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  return active().squared_distance(a.data(), b.data(), a.size());
}
inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  active().axpy(alpha, x.data(), y.data(), x.size());
}

/// out[i * m + j] = ||a_i - b_j||^2 for row-major a (n x d) and b (m x d).
void pairwise_squared_distances(const double* a, std::size_t n, const double* b,
                                std::size_t m, std::size_t d, double* out);

/// Index of the row of `rows` (m x d) nearest to `query`; ties go to the
/// smaller index. Searches rows [begin, m).
std::size_t nearest_row(const double* query, const double* rows, std::size_t m,
                        std::size_t d, std::size_t begin = 0);

}  // namespace eil::kernels
