#pragma once

// Soft target labels built from co-occurrence sets: a single-sample label
// that keeps 1 - alpha on the target and spreads alpha uniformly over the
// classes that may co-occur with it, and the two-target analogue used for
// mixed sample pairs.

#include <cstddef>
#include <mutex>
#include <optional>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ubant/cooccur.hpp"

namespace ubant {

struct TargetLabel {
  std::vector<double> probs;  // length C
  double alpha = 0.0;
  std::vector<ClassId> support;  // targets first, then members ascending

  bool is_one_hot() const { return support.size() == 1; }
};

// probs[c] = 1 - alpha, alpha / |A_c| on each member. An empty set puts all
// mass on c. Throws unless 0 <= alpha < 1 and c < num_classes.
TargetLabel single_label(ClassId c, const CooccurrenceSet& set, double alpha, std::size_t num_classes);

// probs[c_i] = probs[c_j] = (1 - alpha) / 2, alpha / |A_ij| on each member;
// an empty set splits all mass between the two targets. Throws if c_i == c_j.
TargetLabel pair_label(ClassId c_i, ClassId c_j, const CooccurrenceSet& set, double alpha, std::size_t num_classes);

// (A_ci u A_cj) \ {c_i, c_j}, summing scores of shared members.
CooccurrenceSet pair_set(const CooccurrenceSet& a_i, const CooccurrenceSet& a_j, ClassId c_i, ClassId c_j);

// Per-class co-occurrence sets over a merged internal + external matrix,
// materialized on first use. Thread-safe.
class LabelSpace {
 public:
  // `external` may be absent (internal statistics only).
  LabelSpace(UncertaintyMatrix internal, std::optional<UncertaintyMatrix> external, double alpha,
             std::size_t top_k = 0);

  std::size_t num_classes() const { return internal_.size(); }
  double alpha() const { return alpha_; }

  const CooccurrenceSet& set(ClassId c) const;
  TargetLabel single(ClassId c) const;
  TargetLabel pair(ClassId c_i, ClassId c_j) const;
  // internal + external scores
  UncertaintyMatrix merged() const;

  // {class_id: {alpha, members, probs: {id: p}}} for every class.
  nlohmann::json export_json() const;

 private:
  UncertaintyMatrix internal_;
  UncertaintyMatrix external_;  // zeros when absent
  double alpha_;
  std::size_t top_k_;
  mutable std::mutex mu_;
  mutable std::vector<std::optional<CooccurrenceSet>> cache_;
};

}  // namespace ubant
