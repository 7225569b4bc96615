#include "ubant/labelspace.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

namespace ubant {

namespace {

void check_alpha(double alpha) {
  if (!(alpha >= 0.0 && alpha < 1.0)) {
    throw std::invalid_argument("label alpha must lie in [0, 1), got " + std::to_string(alpha));
  }
}

void check_class(ClassId c, std::size_t n) {
  if (c >= n) throw std::invalid_argument("class " + std::to_string(c) + " out of range for C=" + std::to_string(n));
}

}  // namespace

TargetLabel single_label(ClassId c, const CooccurrenceSet& set, double alpha, std::size_t num_classes) {
  check_alpha(alpha);
  check_class(c, num_classes);
  TargetLabel label;
  label.alpha = alpha;
  label.probs.assign(num_classes, 0.0);
  label.support.push_back(c);
  if (set.empty() || alpha == 0.0) {
    label.probs[c] = 1.0;
    return label;
  }
  label.probs[c] = 1.0 - alpha;
  const double share = alpha / static_cast<double>(set.size());
  for (const auto& [m, score] : set.members) {
    check_class(m, num_classes);
    if (m == c) throw std::invalid_argument("single_label: target " + std::to_string(c) + " listed as a member");
    label.probs[m] = share;
    label.support.push_back(m);
  }
  return label;
}

TargetLabel pair_label(ClassId c_i, ClassId c_j, const CooccurrenceSet& set, double alpha, std::size_t num_classes) {
  check_alpha(alpha);
  check_class(c_i, num_classes);
  check_class(c_j, num_classes);
  if (c_i == c_j) {
    throw std::invalid_argument("pair_label: paired samples share class " + std::to_string(c_i) + "; resample the pair");
  }
  TargetLabel label;
  label.alpha = alpha;
  label.probs.assign(num_classes, 0.0);
  label.support = {c_i, c_j};
  if (set.empty() || alpha == 0.0) {
    label.probs[c_i] = 0.5;
    label.probs[c_j] = 0.5;
    return label;
  }
  label.probs[c_i] = (1.0 - alpha) / 2.0;
  label.probs[c_j] = (1.0 - alpha) / 2.0;
  const double share = alpha / static_cast<double>(set.size());
  for (const auto& [m, score] : set.members) {
    check_class(m, num_classes);
    if (m == c_i || m == c_j) throw std::invalid_argument("pair_label: a target is listed as a member");
    label.probs[m] = share;
    label.support.push_back(m);
  }
  return label;
}

CooccurrenceSet pair_set(const CooccurrenceSet& a_i, const CooccurrenceSet& a_j, ClassId c_i, ClassId c_j) {
  std::map<ClassId, std::int64_t> merged;
  for (const auto& [m, s] : a_i.members) merged[m] += s;
  for (const auto& [m, s] : a_j.members) merged[m] += s;
  merged.erase(c_i);
  merged.erase(c_j);
  CooccurrenceSet out;
  out.targets = {c_i, c_j};
  out.members.assign(merged.begin(), merged.end());
  return out;
}

LabelSpace::LabelSpace(UncertaintyMatrix internal, std::optional<UncertaintyMatrix> external, double alpha,
                       std::size_t top_k)
    : internal_(std::move(internal)), alpha_(alpha), top_k_(top_k) {
  check_alpha(alpha);
  if (external) {
    if (external->size() != internal_.size()) {
      throw std::invalid_argument("LabelSpace: internal matrix is " + std::to_string(internal_.size()) +
                                  " classes but external is " + std::to_string(external->size()));
    }
    external_ = std::move(*external);
  } else {
    external_ = UncertaintyMatrix(MatrixKind::external_activity, internal_.size());
  }
  cache_.resize(internal_.size());
}

const CooccurrenceSet& LabelSpace::set(ClassId c) const {
  check_class(c, num_classes());
  std::lock_guard lock(mu_);
  auto& slot = cache_[c];
  if (!slot) slot = merge_rows(internal_.row(c), external_.row(c), c, top_k_);
  return *slot;
}

TargetLabel LabelSpace::single(ClassId c) const { return single_label(c, set(c), alpha_, num_classes()); }

TargetLabel LabelSpace::pair(ClassId c_i, ClassId c_j) const {
  return pair_label(c_i, c_j, pair_set(set(c_i), set(c_j), c_i, c_j), alpha_, num_classes());
}

UncertaintyMatrix LabelSpace::merged() const {
  UncertaintyMatrix m = internal_ + external_;
  return m;
}

nlohmann::json LabelSpace::export_json() const {
  nlohmann::json out = nlohmann::json::object();
  for (ClassId c = 0; c < num_classes(); ++c) {
    const TargetLabel label = single(c);
    nlohmann::json probs = nlohmann::json::object();
    for (ClassId s : label.support) probs[std::to_string(s)] = label.probs[s];
    out[std::to_string(c)] = {{"alpha", alpha_}, {"members", set(c).member_ids()}, {"probs", std::move(probs)}};
  }
  return out;
}

}  // namespace ubant
