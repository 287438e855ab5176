#include "eil/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <cstring>

#include "eil/error.hpp"
#include "kernels_impl.hpp"

namespace eil::kernels {

namespace {

const KernelTable kScalar{Isa::scalar, detail::dot_scalar, detail::squared_distance_scalar,
                          detail::axpy_scalar};

#if defined(EIL_HAVE_AVX2)
const KernelTable kAvx2{Isa::avx2, detail::dot_avx2, detail::squared_distance_avx2,
                        detail::axpy_avx2};
#endif

const KernelTable* choose_default() {
  const char* forced = std::getenv("EIL_ISA");
  if (forced != nullptr && std::strcmp(forced, "scalar") == 0) return &kScalar;
  if (const KernelTable* t = avx2_table()) return t;
  return &kScalar;
}

std::atomic<const KernelTable*>& current() {
  static std::atomic<const KernelTable*> table{choose_default()};
  return table;
}

}  // namespace

const KernelTable& scalar_table() { return kScalar; }

const KernelTable* avx2_table() {
#if defined(EIL_HAVE_AVX2)
  static const bool supported = __builtin_cpu_supports("avx2");
  return supported ? &kAvx2 : nullptr;
#else
  return nullptr;
#endif
}

const KernelTable& active() { return *current().load(std::memory_order_relaxed); }

void select(Isa isa) {
  if (isa == Isa::scalar) {
    current().store(&kScalar);
    return;
  }
  const KernelTable* t = avx2_table();
  if (t == nullptr) throw UsageError("AVX2 kernels are not available on this machine");
  current().store(t);
}

std::string_view isa_name(Isa isa) { return isa == Isa::avx2 ? "avx2" : "scalar"; }

void pairwise_squared_distances(const double* a, std::size_t n, const double* b,
                                std::size_t m, std::size_t d, double* out) {
  const auto sqdist = active().squared_distance;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) out[i * m + j] = sqdist(a + i * d, b + j * d, d);
  }
}

std::size_t nearest_row(const double* query, const double* rows, std::size_t m,
                        std::size_t d, std::size_t begin) {
  const auto sqdist = active().squared_distance;
  std::size_t best = begin;
  double best_d = sqdist(query, rows + begin * d, d);
  for (std::size_t j = begin + 1; j < m; ++j) {
    const double dj = sqdist(query, rows + j * d, d);
    if (dj < best_d) {
      best_d = dj;
      best = j;
    }
  }
  return best;
}

}  // namespace eil::kernels
