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

// Dense linear algebra, seeded randomness, histograms and divergences.
// Everything is 64-bit floating point; nothing here allocates hidden state
// except Rng, which is single-owner and must be forked (not shared) across
// independent consumers.

#ifndef FISHER_UNLEARN_NUMERICS_HPP_
#define FISHER_UNLEARN_NUMERICS_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <ranges>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fisher_unlearn/error.hpp"

namespace fisher_unlearn::numerics {

// ---------------------------------------------------------------------------
// Rng
// ---------------------------------------------------------------------------

/// xoshiro256** (Blackman & Vigna), state expanded from a 64-bit seed with
/// splitmix64. Chosen once for the whole library so an experiment replays
/// bit-identically from its seed on a given platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) { reseed(seed); }

  void reseed(std::uint64_t seed) {
    std::uint64_t x = seed;
    for (auto& word : state_) word = splitmix64(x);
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, n). Rejection sampling keeps it unbiased.
  std::uint64_t uniform_index(std::uint64_t n) {
    if (n == 0) fail(ErrorCode::kInvalidArgument, "uniform_index(0)");
    const std::uint64_t threshold = (0 - n) % n;
    for (;;) {
      const std::uint64_t x = next_u64();
      if (x >= threshold) return x % n;
    }
  }

  /// Child generator seeded from one parent draw.
  Rng fork() { return Rng(next_u64()); }

  template <class T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(uniform_index(i));
      std::swap(items[i - 1], items[j]);
    }
  }

  bool operator==(const Rng&) const = default;

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }
  static std::uint64_t splitmix64(std::uint64_t& x) {
    std::uint64_t z = (x += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::uint64_t state_[4]{};
};

/// n independent N(0,1) draws by the Marsaglia polar method. Each call starts
/// a fresh pair sequence and discards an unused spare, so a request of n is
/// always a prefix of a request of n + k from the same generator state.
inline std::vector<double> gaussian_sample(Rng& rng, std::size_t n) {
  std::vector<double> out;
  out.reserve(n);
  while (out.size() < n) {
    double u = 0.0, v = 0.0, s = 0.0;
    do {
      u = 2.0 * rng.uniform() - 1.0;
      v = 2.0 * rng.uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double scale = std::sqrt(-2.0 * std::log(s) / s);
    out.push_back(u * scale);
    if (out.size() < n) out.push_back(v * scale);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Vectors
// ---------------------------------------------------------------------------

inline double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) fail(ErrorCode::kLengthMismatch, "dot");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

inline double l2_norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

/// y += alpha * x
inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  if (x.size() != y.size()) fail(ErrorCode::kLengthMismatch, "axpy");
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

inline bool all_finite(std::span<const double> a) {
  return std::all_of(a.begin(), a.end(), [](double x) { return std::isfinite(x); });
}

// ---------------------------------------------------------------------------
// DenseMatrix
// ---------------------------------------------------------------------------

class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
      fail(ErrorCode::kShapeMismatch, "matrix data length != rows * cols");
    }
  }

  static DenseMatrix identity(std::size_t n, double scale = 1.0) {
    DenseMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = scale;
    return m;
  }

  static DenseMatrix diagonal(std::span<const double> diag) {
    DenseMatrix m(diag.size(), diag.size());
    for (std::size_t i = 0; i < diag.size(); ++i) m(i, i) = diag[i];
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool square() const noexcept { return rows_ == cols_; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  DenseMatrix transpose() const {
    DenseMatrix t(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
      for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
    return t;
  }

  std::vector<double> diagonal_values() const {
    std::vector<double> d(std::min(rows_, cols_));
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = (*this)(i, i);
    return d;
  }

  double frobenius_norm() const { return l2_norm(data_); }

  /// |A[i][j] - A[j][i]| <= tol * max(1, |A[i][j]|) for all i, j.
  bool is_symmetric(double tol = 1e-12) const {
    if (!square()) return false;
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = i + 1; j < cols_; ++j) {
        const double a = (*this)(i, j);
        if (std::abs(a - (*this)(j, i)) > tol * std::max(1.0, std::abs(a))) return false;
      }
    return true;
  }

  bool operator==(const DenseMatrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline DenseMatrix operator*(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.rows()) fail(ErrorCode::kShapeMismatch, "matmul inner dims");
  DenseMatrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
    }
  return c;
}

inline DenseMatrix operator-(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    fail(ErrorCode::kShapeMismatch, "matrix subtraction");
  DenseMatrix c = a;
  for (std::size_t i = 0; i < c.data().size(); ++i) c.data()[i] -= b.data()[i];
  return c;
}

inline std::vector<double> matvec(const DenseMatrix& a, std::span<const double> x) {
  if (a.cols() != x.size()) fail(ErrorCode::kShapeMismatch, "matvec");
  std::vector<double> y(a.rows(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) y[i] = dot(a.row(i), x);
  return y;
}

/// ||A - B||_F / max(||B||_F, tiny)
inline double relative_frobenius_error(const DenseMatrix& a, const DenseMatrix& b) {
  return (a - b).frobenius_norm() /
         std::max(b.frobenius_norm(), std::numeric_limits<double>::min());
}

/// Gauss-Jordan elimination with partial pivoting. Throws SingularMatrix when
/// the largest available pivot falls below 1e-12 in magnitude.
inline DenseMatrix dense_inverse(const DenseMatrix& a) {
  constexpr double kPivotGuard = 1e-12;
  if (!a.square()) fail(ErrorCode::kShapeMismatch, "dense_inverse of non-square matrix");
  const std::size_t n = a.rows();
  DenseMatrix work = a;
  DenseMatrix inv = DenseMatrix::identity(n);
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(work(r, col)) > std::abs(work(pivot, col))) pivot = r;
    if (std::abs(work(pivot, col)) < kPivotGuard) {
      fail(ErrorCode::kSingularMatrix,
           "pivot below 1e-12 at column " + std::to_string(col));
    }
    if (pivot != col) {
      std::swap_ranges(work.row(col).begin(), work.row(col).end(), work.row(pivot).begin());
      std::swap_ranges(inv.row(col).begin(), inv.row(col).end(), inv.row(pivot).begin());
    }
    const double scale = 1.0 / work(col, col);
    for (double& x : work.row(col)) x *= scale;
    for (double& x : inv.row(col)) x *= scale;
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col) continue;
      const double factor = work(r, col);
      if (factor == 0.0) continue;
      axpy(-factor, work.row(col), work.row(r));
      axpy(-factor, inv.row(col), inv.row(r));
    }
  }
  return inv;
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
/// Intended for small blocks (tests, diagnostics); O(n^3) per sweep.
inline std::vector<double> symmetric_eigenvalues(const DenseMatrix& a,
                                                 int max_sweeps = 100) {
  if (!a.square()) fail(ErrorCode::kShapeMismatch, "eigenvalues of non-square matrix");
  const std::size_t n = a.rows();
  DenseMatrix m = a;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) off += m(i, j) * m(i, j);
    if (off < 1e-30 * std::max(1.0, m.frobenius_norm())) break;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = m(p, q);
        if (apq == 0.0) continue;
        const double theta = (m(q, q) - m(p, p)) / (2.0 * apq);
        const double t = std::copysign(1.0, theta) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double mkp = m(k, p), mkq = m(k, q);
          m(k, p) = c * mkp - s * mkq;
          m(k, q) = s * mkp + c * mkq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double mpk = m(p, k), mqk = m(q, k);
          m(p, k) = c * mpk - s * mqk;
          m(q, k) = s * mpk + c * mqk;
        }
      }
  }
  std::vector<double> eig = m.diagonal_values();
  std::sort(eig.begin(), eig.end());
  return eig;
}

// ---------------------------------------------------------------------------
// Histograms and divergences
// ---------------------------------------------------------------------------

struct Histogram {
  std::vector<std::uint64_t> counts;
  std::uint64_t clipped_below = 0;  // values < lo, attributed to bin 0
  std::uint64_t clipped_above = 0;  // values > hi, attributed to the last bin

  std::uint64_t clipped() const noexcept { return clipped_below + clipped_above; }
  std::uint64_t in_range() const {
    return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
  }
};

/// Equal-width histogram over [lo, hi]. x == hi lands in the last bin.
/// Out-of-range values (and NaN) are not added to `counts`; they are tallied
/// against the nearest edge in the clipped fields.
inline Histogram histogram(std::span<const double> values, std::size_t bins,
                           double lo, double hi) {
  if (bins == 0) fail(ErrorCode::kBadRange, "histogram needs at least one bin");
  if (!(lo < hi)) fail(ErrorCode::kBadRange, "histogram range requires lo < hi");
  Histogram h;
  h.counts.assign(bins, 0);
  const double width = hi - lo;
  for (double x : values) {
    if (std::isnan(x) || x < lo) {
      ++h.clipped_below;
      continue;
    }
    if (x > hi) {
      ++h.clipped_above;
      continue;
    }
    auto bin = static_cast<std::size_t>(std::floor((x - lo) / width * static_cast<double>(bins)));
    h.counts[std::min(bin, bins - 1)] += 1;
  }
  return h;
}

/// KL(P || Q) in nats, where P and Q are (counts + smoothing) normalized.
template <std::ranges::sized_range R1, std::ranges::sized_range R2>
double kl_divergence(const R1& p_counts, const R2& q_counts, double smoothing = 1e-9) {
  if (std::ranges::size(p_counts) != std::ranges::size(q_counts))
    fail(ErrorCode::kLengthMismatch, "kl_divergence inputs differ in length");
  if (!(smoothing > 0.0)) fail(ErrorCode::kInvalidArgument, "smoothing must be > 0");
  const std::size_t n = std::ranges::size(p_counts);
  if (n == 0) return 0.0;
  std::vector<double> p(n), q(n);
  std::size_t i = 0;
  for (const auto& c : p_counts) p[i++] = static_cast<double>(c) + smoothing;
  i = 0;
  for (const auto& c : q_counts) q[i++] = static_cast<double>(c) + smoothing;
  const double p_total = std::accumulate(p.begin(), p.end(), 0.0);
  const double q_total = std::accumulate(q.begin(), q.end(), 0.0);
  double kl = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double pk = p[k] / p_total;
    const double qk = q[k] / q_total;
    kl += pk * std::log(pk / qk);
  }
  return std::max(kl, 0.0);
}

// ---------------------------------------------------------------------------
// Misc
// ---------------------------------------------------------------------------

/// 64-bit FNV-1a, used for config, layout and corpus fingerprints.
class Fnv1a {
 public:
  void bytes(const void* data, std::size_t size) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < size; ++i) {
      hash_ ^= p[i];
      hash_ *= 0x100000001b3ULL;
    }
  }
  void text(std::string_view s) { bytes(s.data(), s.size()); }
  template <class T>
  void value(const T& v) {
    bytes(&v, sizeof(T));
  }
  std::uint64_t digest() const noexcept { return hash_; }

 private:
  std::uint64_t hash_ = 0xcbf29ce484222325ULL;
};

inline std::string hex64(std::uint64_t v) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) s[static_cast<std::size_t>(i)] = kDigits[v & 0xF];
  return s;
}

}  // namespace fisher_unlearn::numerics

#endif  // FISHER_UNLEARN_NUMERICS_HPP_
