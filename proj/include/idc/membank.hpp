#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "idc/core_math.hpp"

namespace idc {

/// One key-value-age entry. `key` is the stored source feature, `value` its
/// learnable representative score, `age` the number of touch events on the
/// owning bank since this slot was last selected by a read.
template <typename Scalar>
struct MemorySlot {
  Vector<Scalar> key;
  Scalar key_norm = Scalar(0);
  Scalar value = Scalar(0);
  std::uint64_t age = 0;
  std::string provenance;
  /// Monotone per-bank write counter at the time this slot was written.
  std::uint64_t write_seq = 0;
};

template <typename Scalar>
struct EvidenceItem {
  int class_id = 0;
  Index slot_index = 0;
  std::string provenance;
  Scalar similarity = Scalar(0);
  Scalar value = Scalar(0);
  Scalar contribution = Scalar(0);
};

/// Result of reading one bank. `selected` and `evidence` are ordered by
/// descending similarity (ascending slot index on ties); `similarities[j]`
/// belongs to `selected[j]`.
template <typename Scalar>
struct ReadResult {
  int class_id = 0;
  Scalar score = Scalar(0);
  std::vector<Index> selected;
  std::vector<Scalar> similarities;
  std::vector<EvidenceItem<Scalar>> evidence;

  Index k() const { return static_cast<Index>(selected.size()); }
};

struct WriteOutcome {
  enum class Kind { inserted, evicted };
  Kind kind = Kind::inserted;
  Index slot_index = 0;

  friend bool operator==(const WriteOutcome&, const WriteOutcome&) = default;
};

/// Fixed-capacity store for one class.
template <typename Scalar>
class MemoryBank {
 public:
  using VectorX = Vector<Scalar>;

  MemoryBank() = default;
  MemoryBank(int class_id, Index capacity, Index dim)
      : class_id_(class_id), capacity_(capacity), dim_(dim) {
    if (capacity < 1) throw Error(Errc::ConfigInvalid, "memory bank capacity must be >= 1");
    if (dim < 1) throw Error(Errc::ConfigInvalid, "memory key dimension must be >= 1");
    slots_.reserve(static_cast<std::size_t>(capacity));
  }

  int class_id() const { return class_id_; }
  Index capacity() const { return capacity_; }
  Index dim() const { return dim_; }
  Index size() const { return static_cast<Index>(slots_.size()); }
  bool empty() const { return slots_.empty(); }
  const std::vector<MemorySlot<Scalar>>& slots() const { return slots_; }
  const MemorySlot<Scalar>& slot(Index i) const { return slots_.at(static_cast<std::size_t>(i)); }
  std::uint64_t write_counter() const { return write_counter_; }

  void set_value(Index i, Scalar v) { slots_.at(static_cast<std::size_t>(i)).value = v; }

  VectorX values() const {
    VectorX v(size());
    for (Index i = 0; i < size(); ++i) v(i) = slots_[static_cast<std::size_t>(i)].value;
    return v;
  }
  void set_values(const Eigen::Ref<const VectorX>& v) {
    if (v.size() != size()) throw Error(Errc::ShapeMismatch, "value vector size mismatch");
    for (Index i = 0; i < size(); ++i) slots_[static_cast<std::size_t>(i)].value = v(i);
  }

  /// Similarities of every slot key to the query.
  VectorX similarities(const Eigen::Ref<const VectorX>& query) const {
    check_query(query);
    const Scalar qn = query.norm();
    VectorX s(size());
    for (Index i = 0; i < size(); ++i) {
      const auto& slot = slots_[static_cast<std::size_t>(i)];
      s(i) = normalized_similarity(query, qn, slot.key, slot.key_norm);
    }
    return s;
  }

  /// Mean of value * similarity over the k' = min(n_k, size) most similar
  /// slots. Does not touch ages.
  ReadResult<Scalar> read(const Eigen::Ref<const VectorX>& query, Index n_k,
                          bool with_evidence = true) const {
    if (empty()) {
      throw Error(Errc::EmptyBank, "read from empty memory bank " + std::to_string(class_id_));
    }
    const VectorX sims = similarities(query);
    ReadResult<Scalar> r;
    r.class_id = class_id_;
    r.selected = top_k_indices(sims, n_k);
    r.similarities.reserve(r.selected.size());
    Scalar acc = Scalar(0);
    for (Index i : r.selected) {
      const auto& slot = slots_[static_cast<std::size_t>(i)];
      const Scalar s = sims(i);
      r.similarities.push_back(s);
      acc += slot.value * s;
      if (with_evidence) {
        r.evidence.push_back({class_id_, i, slot.provenance, s, slot.value, slot.value * s});
      }
    }
    r.score = acc / static_cast<Scalar>(r.selected.size());
    return r;
  }

  /// Selected slots get age 0; every other slot ages by one.
  void touch(std::span<const Index> selected) {
    for (Index i : selected) {
      if (i < 0 || i >= size()) {
        throw Error(Errc::IndexOutOfRange, "touch index " + std::to_string(i) +
                                               " outside bank of size " + std::to_string(size()));
      }
    }
    for (auto& slot : slots_) ++slot.age;
    for (Index i : selected) slots_[static_cast<std::size_t>(i)].age = 0;
  }

  /// Append while below capacity, otherwise overwrite the oldest slot
  /// (lowest index among equal ages). The written slot starts at age 0.
  WriteOutcome write(const Eigen::Ref<const VectorX>& key, Scalar value, std::string provenance) {
    if (key.size() != dim_) {
      throw Error(Errc::DimensionMismatch, "memory key has " + std::to_string(key.size()) +
                                               " entries, expected " + std::to_string(dim_));
    }
    const Scalar norm = key.norm();
    if (!(norm > Scalar(0))) throw Error(Errc::ZeroNormKey, "memory key has zero norm");
    MemorySlot<Scalar> slot{key, norm, value, 0, std::move(provenance), ++write_counter_};
    if (size() < capacity_) {
      slots_.push_back(std::move(slot));
      return {WriteOutcome::Kind::inserted, size() - 1};
    }
    Index victim = 0;
    for (Index i = 1; i < size(); ++i) {
      if (slots_[static_cast<std::size_t>(i)].age > slots_[static_cast<std::size_t>(victim)].age) {
        victim = i;
      }
    }
    slots_[static_cast<std::size_t>(victim)] = std::move(slot);
    return {WriteOutcome::Kind::evicted, victim};
  }

  /// Restores a slot verbatim (model loading).
  void restore_slot(MemorySlot<Scalar> slot) {
    if (size() >= capacity_) throw Error(Errc::CorruptFile, "bank holds more slots than capacity");
    if (slot.key.size() != dim_) throw Error(Errc::CorruptFile, "stored key has wrong dimension");
    slot.key_norm = slot.key.norm();
    if (!(slot.key_norm > Scalar(0))) throw Error(Errc::CorruptFile, "stored key has zero norm");
    slots_.push_back(std::move(slot));
  }
  void set_write_counter(std::uint64_t c) { write_counter_ = c; }

  /// Slot holding the most recent write with this provenance, or -1.
  Index find_latest(const std::string& provenance) const {
    Index best = -1;
    for (Index i = 0; i < size(); ++i) {
      const auto& s = slots_[static_cast<std::size_t>(i)];
      if (s.provenance == provenance &&
          (best < 0 || s.write_seq > slots_[static_cast<std::size_t>(best)].write_seq)) {
        best = i;
      }
    }
    return best;
  }

 private:
  void check_query(const Eigen::Ref<const VectorX>& query) const {
    if (query.size() != dim_) {
      throw Error(Errc::DimensionMismatch, "query has " + std::to_string(query.size()) +
                                               " entries, expected " + std::to_string(dim_));
    }
    if (!(query.norm() > Scalar(0))) throw Error(Errc::ZeroNormVector, "query has zero norm");
  }

  int class_id_ = 0;
  Index capacity_ = 0;
  Index dim_ = 0;
  std::vector<MemorySlot<Scalar>> slots_;
  std::uint64_t write_counter_ = 0;
};

/// One bank per class plus the read width N_k.
template <typename Scalar>
class MemoryBankSet {
 public:
  using VectorX = Vector<Scalar>;

  MemoryBankSet() = default;
  MemoryBankSet(int num_classes, Index capacity, Index dim, Index read_k) : read_k_(read_k) {
    if (num_classes < 1) throw Error(Errc::ConfigInvalid, "need at least one class");
    if (read_k < 1) throw Error(Errc::ConfigInvalid, "read width N_k must be >= 1");
    for (int c = 0; c < num_classes; ++c) banks_.emplace_back(c, capacity, dim);
  }

  int num_classes() const { return static_cast<int>(banks_.size()); }
  Index read_k() const { return read_k_; }
  MemoryBank<Scalar>& bank(int c) { return banks_.at(static_cast<std::size_t>(c)); }
  const MemoryBank<Scalar>& bank(int c) const { return banks_.at(static_cast<std::size_t>(c)); }
  const std::vector<MemoryBank<Scalar>>& banks() const { return banks_; }

  ReadResult<Scalar> read(int c, const Eigen::Ref<const VectorX>& query,
                          bool with_evidence = true) const {
    return bank(c).read(query, read_k_, with_evidence);
  }

  /// Reads every non-empty bank with a target feature and touches the
  /// selected slots. Keys, values and sizes are left unchanged.
  void refresh_with_target(const Eigen::Ref<const VectorX>& target_query) {
    if (!(target_query.norm() > Scalar(0))) {
      throw Error(Errc::ZeroNormVector, "target query has zero norm");
    }
    for (auto& b : banks_) {
      if (b.empty()) continue;
      const auto r = b.read(target_query, read_k_, false);
      b.touch(r.selected);
    }
  }

 private:
  std::vector<MemoryBank<Scalar>> banks_;
  Index read_k_ = 1;
};

/// Highest-probability class other than the true label (lowest index on ties).
template <typename Derived>
int most_confusing_negative(const Eigen::MatrixBase<Derived>& probs, Index true_label) {
  const Index n = probs.size();
  if (n < 2) throw Error(Errc::SingleClass, "most confusing negative needs at least 2 classes");
  if (true_label < 0 || true_label >= n) {
    throw Error(Errc::LabelOutOfRange, "label " + std::to_string(true_label) + " out of range");
  }
  Index best = -1;
  for (Index c = 0; c < n; ++c) {
    if (c == true_label) continue;
    if (best < 0 || probs(c) > probs(best)) best = c;
  }
  return static_cast<int>(best);
}

template <typename Scalar>
struct IdcLoss {
  Scalar loss = Scalar(0);
  /// (slot index, d loss / d value) for the positive and negative bank.
  std::vector<std::pair<Index, Scalar>> positive_grads;
  std::vector<std::pair<Index, Scalar>> negative_grads;
};

/// (P_c - 1)^2 + P_neg^2 and its gradient with respect to each selected
/// value. Keys and the query are constants, so d P / d v_i = s_i / k'.
template <typename Scalar>
IdcLoss<Scalar> idc_loss_and_value_grads(const ReadResult<Scalar>& pos,
                                         const ReadResult<Scalar>& neg) {
  IdcLoss<Scalar> out;
  out.loss = mse(pos.score, Scalar(1)) + mse(neg.score, Scalar(0));
  const Scalar dpos = Scalar(2) * (pos.score - Scalar(1)) / static_cast<Scalar>(pos.k());
  const Scalar dneg = Scalar(2) * neg.score / static_cast<Scalar>(neg.k());
  for (std::size_t j = 0; j < pos.selected.size(); ++j) {
    out.positive_grads.emplace_back(pos.selected[j], dpos * pos.similarities[j]);
  }
  for (std::size_t j = 0; j < neg.selected.size(); ++j) {
    out.negative_grads.emplace_back(neg.selected[j], dneg * neg.similarities[j]);
  }
  return out;
}

}  // namespace idc
