/*
 * Copyright 2026 The fisher-unlearn Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Independent reference computations shared by the unit tests and the
// acceptance binary.

#ifndef FISHER_UNLEARN_TESTS_ORACLES_HPP_
#define FISHER_UNLEARN_TESTS_ORACLES_HPP_

#include <cstddef>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "fisher_unlearn/lm/model.hpp"
#include "fisher_unlearn/numerics.hpp"

namespace fisher_unlearn::testing {

using numerics::DenseMatrix;

inline std::filesystem::path source_dir() { return FISHER_UNLEARN_SOURCE_DIR; }

/// Single-layer layout of d parameters.
inline lm::LayoutPtr flat_layout(std::size_t d, const std::string& name = "w") {
  return std::make_shared<const lm::LayerLayout>(
      lm::LayerLayout::from_shapes({{name, {d}}}));
}

inline std::vector<std::vector<double>> random_gradients(numerics::Rng& rng, std::size_t count,
                                                         std::size_t d, double scale = 1.0) {
  std::vector<std::vector<double>> out;
  for (std::size_t i = 0; i < count; ++i) {
    auto g = numerics::gaussian_sample(rng, d);
    for (double& v : g) v *= scale;
    out.push_back(std::move(g));
  }
  return out;
}

/// (lambda I + (1/m) sum g g^T)^{-1} over coordinates [lo, lo + w), by
/// forming the matrix and inverting it.
inline DenseMatrix dense_fisher_inverse(const std::vector<std::vector<double>>& grads,
                                        double lambda, std::size_t m, std::size_t lo,
                                        std::size_t w) {
  DenseMatrix a = DenseMatrix::identity(w, lambda);
  for (const auto& g : grads)
    for (std::size_t i = 0; i < w; ++i)
      for (std::size_t j = 0; j < w; ++j) a(i, j) += g[lo + i] * g[lo + j] / static_cast<double>(m);
  return numerics::dense_inverse(a);
}

/// Plain Sherman-Morrison recursion on one dense block, no symmetrization.
inline DenseMatrix dense_recursion(const std::vector<std::vector<double>>& grads, double lambda,
                                   std::size_t m, std::size_t lo, std::size_t w) {
  DenseMatrix f = DenseMatrix::identity(w, 1.0 / lambda);
  for (const auto& g : grads) {
    std::vector<double> u(w, 0.0);
    double q = 0.0;
    for (std::size_t i = 0; i < w; ++i) {
      for (std::size_t j = 0; j < w; ++j) u[i] += f(i, j) * g[lo + j];
      q += g[lo + i] * u[i];
    }
    for (std::size_t i = 0; i < w; ++i)
      for (std::size_t j = 0; j < w; ++j) f(i, j) -= u[i] * u[j] / (static_cast<double>(m) + q);
  }
  return f;
}

}  // namespace fisher_unlearn::testing

#endif  // FISHER_UNLEARN_TESTS_ORACLES_HPP_
