#pragma once

#include <string>
#include <vector>

#include "eil/domain.hpp"
#include "eil/rng.hpp"

namespace eil::test {

inline Matrix gaussian(std::size_t rows, std::size_t cols, Rng& rng, double scale = 1.0) {
  Matrix m(rows, cols);
  for (double& v : m.values()) v = scale * rng.normal();
  return m;
}

inline EmbeddingSequence sequence(std::string id, Matrix m) { return {std::move(id), std::move(m)}; }

inline EmbeddingSequence column(std::string id, const std::vector<double>& xs) {
  Matrix m(xs.size(), 1);
  for (std::size_t i = 0; i < xs.size(); ++i) m(i, 0) = xs[i];
  return {std::move(id), std::move(m)};
}

inline std::vector<std::size_t> iota(std::size_t n) {
  std::vector<std::size_t> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = i;
  return v;
}

}  // namespace eil::test
