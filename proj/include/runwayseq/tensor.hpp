// Copyright 2026 The runwayseq Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef RUNWAYSEQ_TENSOR_HPP
#define RUNWAYSEQ_TENSOR_HPP

#include <Eigen/Core>
#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace runwayseq {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Matrix = MatrixX<double>;
using Vector = VectorX<double>;
using Index = Eigen::Index;

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {
inline std::string shape_str(Index rows, Index cols) {
  return std::to_string(rows) + "x" + std::to_string(cols);
}
}  // namespace detail

/// Deterministic random stream.
///
/// Draws are built from std::mt19937_64 words only; the std distributions
/// are implementation-defined and would break cross-platform replay.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1) with 53 bits of resolution.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n); rejection sampling keeps it unbiased.
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("Rng::below: empty range");
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t r;
    do {
      r = engine_();
    } while (r >= limit);
    return r % n;
  }

  /// Standard normal via Box-Muller; the second variate is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  /// Fisher-Yates.
  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// splitmix64 finalizer; used to derive independent child seeds.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// ---------------------------------------------------------------------------
// Fully-connected layer

/// Wx + b.
template <typename DW, typename DX, typename DB>
VectorX<typename DW::Scalar> linear_forward(const Eigen::MatrixBase<DW>& W,
                                            const Eigen::MatrixBase<DX>& x,
                                            const Eigen::MatrixBase<DB>& b) {
  if (W.cols() != x.size() || W.rows() != b.size()) {
    throw ShapeError("linear_forward: W is " +
                     detail::shape_str(W.rows(), W.cols()) + ", x has " +
                     std::to_string(x.size()) + " entries, b has " +
                     std::to_string(b.size()));
  }
  return W * x + b;
}

template <typename Scalar>
struct LinearGrads {
  MatrixX<Scalar> W;
  VectorX<Scalar> x;
  VectorX<Scalar> b;
};

template <typename DW, typename DX, typename DG>
LinearGrads<typename DW::Scalar> linear_backward(
    const Eigen::MatrixBase<DW>& W, const Eigen::MatrixBase<DX>& x,
    const Eigen::MatrixBase<DG>& grad_out) {
  if (W.cols() != x.size() || W.rows() != grad_out.size()) {
    throw ShapeError("linear_backward: W is " +
                     detail::shape_str(W.rows(), W.cols()) + ", x has " +
                     std::to_string(x.size()) + " entries, grad_out has " +
                     std::to_string(grad_out.size()));
  }
  return {grad_out * x.transpose(), W.transpose() * grad_out, grad_out};
}

// ---------------------------------------------------------------------------
// Activations. Derivatives take the forward output.

template <typename Derived>
auto tanh_forward(const Eigen::MatrixBase<Derived>& v) {
  return v.array().tanh().matrix();
}

template <typename Derived>
auto tanh_grad_from_output(const Eigen::MatrixBase<Derived>& t) {
  return (1 - t.array().square()).matrix();
}

template <typename Scalar>
Scalar sigmoid(Scalar z) {
  // Split on sign so exp never overflows.
  if (z >= 0) return Scalar(1) / (Scalar(1) + std::exp(-z));
  const Scalar e = std::exp(z);
  return e / (Scalar(1) + e);
}

template <typename Derived>
VectorX<typename Derived::Scalar> sigmoid_forward(
    const Eigen::MatrixBase<Derived>& v) {
  using Scalar = typename Derived::Scalar;
  return v.unaryExpr([](Scalar z) { return sigmoid(z); });
}

template <typename Derived>
auto sigmoid_grad_from_output(const Eigen::MatrixBase<Derived>& s) {
  return (s.array() * (1 - s.array())).matrix();
}

// ---------------------------------------------------------------------------
// Softmax and cross-entropy

template <typename Derived>
VectorX<typename Derived::Scalar> softmax(const Eigen::MatrixBase<Derived>& v) {
  if (v.size() == 0) throw ShapeError("softmax: empty input");
  using Scalar = typename Derived::Scalar;
  const VectorX<Scalar> shifted = (v.array() - v.maxCoeff()).exp().matrix();
  return shifted / shifted.sum();
}

template <typename Scalar>
struct CrossEntropy {
  Scalar loss;
  /// Gradient w.r.t. the pre-softmax logits.
  VectorX<Scalar> grad_logits;
};

template <typename Derived>
CrossEntropy<typename Derived::Scalar> cross_entropy(
    const Eigen::MatrixBase<Derived>& p_hat, Index label) {
  using Scalar = typename Derived::Scalar;
  if (label < 0 || label >= p_hat.size()) {
    throw std::out_of_range("cross_entropy: label " + std::to_string(label) +
                            " outside [0, " + std::to_string(p_hat.size()) +
                            ")");
  }
  VectorX<Scalar> grad = p_hat;
  grad(label) -= Scalar(1);
  const Scalar p = std::max(p_hat(label), std::numeric_limits<Scalar>::min());
  return {-std::log(p), std::move(grad)};
}

// ---------------------------------------------------------------------------
// Column-wise max pooling over rows

template <typename Scalar>
struct MaxPool {
  VectorX<Scalar> values;
  /// Row that produced each column's maximum (lowest index on ties).
  Eigen::VectorXi argmax;
};

template <typename Derived>
MaxPool<typename Derived::Scalar> maxpool_columns(
    const Eigen::MatrixBase<Derived>& rows) {
  using Scalar = typename Derived::Scalar;
  if (rows.rows() == 0) throw ShapeError("maxpool_columns: zero rows");
  MaxPool<Scalar> out{VectorX<Scalar>(rows.cols()),
                      Eigen::VectorXi(rows.cols())};
  for (Index j = 0; j < rows.cols(); ++j) {
    Index best = 0;
    Scalar value = rows(0, j);
    for (Index i = 1; i < rows.rows(); ++i) {
      if (rows(i, j) > value) {
        value = rows(i, j);
        best = i;
      }
    }
    out.values(j) = value;
    out.argmax(j) = static_cast<int>(best);
  }
  return out;
}

/// Routes each column's gradient to its argmax row.
template <typename Derived>
MatrixX<typename Derived::Scalar> maxpool_backward(
    const Eigen::MatrixBase<Derived>& grad_out, const Eigen::VectorXi& argmax,
    Index num_rows) {
  using Scalar = typename Derived::Scalar;
  if (grad_out.size() != argmax.size()) {
    throw ShapeError("maxpool_backward: grad has " +
                     std::to_string(grad_out.size()) + " entries, argmax " +
                     std::to_string(argmax.size()));
  }
  MatrixX<Scalar> grad = MatrixX<Scalar>::Zero(num_rows, grad_out.size());
  for (Index j = 0; j < grad_out.size(); ++j) grad(argmax(j), j) = grad_out(j);
  return grad;
}

// ---------------------------------------------------------------------------
// Cosine distance / similarity

template <typename Scalar>
struct CosineDistance {
  Scalar distance;
  VectorX<Scalar> grad_a;
  VectorX<Scalar> grad_b;
};

inline constexpr double kMinNorm = 1e-12;

/// 1 - cos(a, b). A zero-norm argument gives distance 1 and zero gradients.
template <typename DA, typename DB>
CosineDistance<typename DA::Scalar> cosine_distance(
    const Eigen::MatrixBase<DA>& a, const Eigen::MatrixBase<DB>& b) {
  using Scalar = typename DA::Scalar;
  if (a.size() != b.size()) {
    throw ShapeError("cosine_distance: lengths " + std::to_string(a.size()) +
                     " and " + std::to_string(b.size()));
  }
  // Same dot kernel for all three products so that a == b cancels exactly.
  const Scalar aa = a.dot(a);
  const Scalar bb = b.dot(b);
  const Scalar ab = a.dot(b);
  const Scalar na = std::sqrt(aa);
  const Scalar nb = std::sqrt(bb);
  if (na < kMinNorm || nb < kMinNorm) {
    return {Scalar(1), VectorX<Scalar>::Zero(a.size()),
            VectorX<Scalar>::Zero(b.size())};
  }
  const Scalar denom = std::sqrt(aa * bb);
  const Scalar cos = std::clamp(ab / denom, Scalar(-1), Scalar(1));
  VectorX<Scalar> grad_a = -(b / denom - (cos / aa) * a);
  VectorX<Scalar> grad_b = -(a / denom - (cos / bb) * b);
  return {Scalar(1) - cos, std::move(grad_a), std::move(grad_b)};
}

/// cos(a, b); zero-norm arguments score 0.
template <typename DA, typename DB>
typename DA::Scalar cosine_similarity(const Eigen::MatrixBase<DA>& a,
                                      const Eigen::MatrixBase<DB>& b) {
  using Scalar = typename DA::Scalar;
  if (a.size() != b.size()) {
    throw ShapeError("cosine_similarity: lengths " + std::to_string(a.size()) +
                     " and " + std::to_string(b.size()));
  }
  const Scalar aa = a.dot(a);
  const Scalar bb = b.dot(b);
  if (std::sqrt(aa) < kMinNorm || std::sqrt(bb) < kMinNorm) return Scalar(0);
  return std::clamp(a.dot(b) / std::sqrt(aa * bb), Scalar(-1), Scalar(1));
}

// ---------------------------------------------------------------------------
// Initialization

/// Xavier/Glorot uniform in +-sqrt(6 / (rows + cols)).
inline Matrix xavier_init(Index rows, Index cols, Rng& rng) {
  if (rows < 1 || cols < 1) {
    throw ShapeError("xavier_init: shape " + detail::shape_str(rows, cols));
  }
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Matrix m(rows, cols);
  // Fill in row-major order so the draw sequence is layout independent.
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = rng.uniform(-bound, bound);
  return m;
}

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& m) {
  return m.allFinite();
}

}  // namespace runwayseq

#endif  // RUNWAYSEQ_TENSOR_HPP
