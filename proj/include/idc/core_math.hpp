#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "idc/errors.hpp"

namespace idc {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Weight storage. Row-major so a flat parameter buffer reads row by row.
template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Index = Eigen::Index;

inline constexpr double kProbabilityFloor = 1e-12;

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& x) {
  return x.allFinite();
}

template <typename DerivedA, typename DerivedB>
void check_same_dim(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) {
  if (a.size() != b.size()) {
    throw Error(Errc::DimensionMismatch, "dimension mismatch: " + std::to_string(a.size()) +
                                             " vs " + std::to_string(b.size()));
  }
}

/// Cosine similarity mapped linearly onto [0,1]. Clamped because the
/// floating-point cosine can overshoot +-1 by an ulp.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar normalized_similarity(const Eigen::MatrixBase<DerivedA>& a,
                                                const Eigen::MatrixBase<DerivedB>& b) {
  using Scalar = typename DerivedA::Scalar;
  check_same_dim(a, b);
  const Scalar na = a.stableNorm();
  const Scalar nb = b.stableNorm();
  if (na == Scalar(0) || nb == Scalar(0)) {
    throw Error(Errc::ZeroNormVector, "similarity of a zero-norm vector");
  }
  const Scalar cosine = (a / na).dot(b / nb);
  return std::clamp((cosine + Scalar(1)) / Scalar(2), Scalar(0), Scalar(1));
}

/// Same as normalized_similarity with both norms supplied by the caller.
template <typename DerivedA, typename DerivedB, typename Scalar>
Scalar normalized_similarity(const Eigen::MatrixBase<DerivedA>& a, Scalar norm_a,
                             const Eigen::MatrixBase<DerivedB>& b, Scalar norm_b) {
  const Scalar cosine = a.dot(b) / (norm_a * norm_b);
  return std::clamp((cosine + Scalar(1)) / Scalar(2), Scalar(0), Scalar(1));
}

/// Indices of the min(k, n) largest scores, largest first. Equal scores
/// resolve to the lower index.
template <typename Derived>
std::vector<Index> top_k_indices(const Eigen::MatrixBase<Derived>& scores, Index k) {
  const Index n = scores.size();
  if (n == 0) throw Error(Errc::EmptyInput, "top_k_indices on empty scores");
  if (k < 1) throw Error(Errc::ConfigInvalid, "top_k_indices needs k >= 1");
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  const Index kk = std::min(k, n);
  std::partial_sort(order.begin(), order.begin() + kk, order.end(), [&](Index a, Index b) {
    if (scores(a) != scores(b)) return scores(a) > scores(b);
    return a < b;
  });
  order.resize(static_cast<std::size_t>(kk));
  return order;
}

/// Index of the largest entry; ties go to the lowest index.
template <typename Derived>
Index argmax(const Eigen::MatrixBase<Derived>& x) {
  if (x.size() == 0) throw Error(Errc::EmptyInput, "argmax of empty vector");
  Index best = 0;
  for (Index i = 1; i < x.size(); ++i) {
    if (x(i) > x(best)) best = i;
  }
  return best;
}

template <typename Derived>
Vector<typename Derived::Scalar> softmax(const Eigen::MatrixBase<Derived>& logits) {
  using Scalar = typename Derived::Scalar;
  if (logits.size() == 0) throw Error(Errc::EmptyInput, "softmax of empty vector");
  Vector<Scalar> p = (logits.array() - logits.maxCoeff()).exp().matrix();
  p /= p.sum();
  return p;
}

/// Natural-log cross entropy with the target probability floored at 1e-12.
template <typename Derived>
typename Derived::Scalar cross_entropy(const Eigen::MatrixBase<Derived>& probs, Index label) {
  using Scalar = typename Derived::Scalar;
  if (label < 0 || label >= probs.size()) {
    throw Error(Errc::LabelOutOfRange, "label " + std::to_string(label) + " outside [0," +
                                           std::to_string(probs.size()) + ")");
  }
  return -std::log(std::max(probs(label), Scalar(kProbabilityFloor)));
}

template <typename Scalar>
Scalar mse(Scalar x, Scalar target) {
  const Scalar d = x - target;
  return d * d;
}

template <typename Scalar>
Scalar sigmoid(Scalar z) {
  if (z >= Scalar(0)) return Scalar(1) / (Scalar(1) + std::exp(-z));
  const Scalar e = std::exp(z);
  return e / (Scalar(1) + e);
}

}  // namespace idc
