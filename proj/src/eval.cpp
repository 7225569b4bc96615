#include "ubant/eval.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace ubant {

namespace {

void check_inputs(const Tensor& probs, std::size_t n_truths) {
  if (probs.rank() != 2) throw std::invalid_argument("metrics: probs must be [N, C], got " + ad::shape_str(probs.shape()));
  if (n_truths == 0) throw std::invalid_argument("metrics: empty input");
  if (probs.dim(0) != n_truths) {
    throw std::invalid_argument("metrics: " + std::to_string(probs.dim(0)) + " rows vs " + std::to_string(n_truths) + " truths");
  }
}

std::span<const double> row(const Tensor& probs, std::size_t i) {
  const std::size_t c = probs.dim(1);
  return {probs.data().data() + i * c, c};
}

// Sample indices sorted by uncertainty, most uncertain first.
std::vector<std::size_t> by_uncertainty(std::span<const double> u) {
  std::vector<std::size_t> order(u.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return u[a] > u[b]; });
  return order;
}

std::optional<double> accuracy_of(const Tensor& probs, std::span<const ClassId> truths,
                                  std::span<const std::size_t> subset, std::size_t k) {
  if (subset.empty()) return std::nullopt;
  std::size_t hits = 0;
  for (std::size_t i : subset) hits += in_top_k(row(probs, i), truths[i], k) ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(subset.size());
}

}  // namespace

std::vector<ClassId> top_k(std::span<const double> probs, std::size_t k) {
  std::vector<ClassId> idx(probs.size());
  std::iota(idx.begin(), idx.end(), 0);
  k = std::min(k, idx.size());
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(), [&](ClassId a, ClassId b) {
    return probs[a] > probs[b] || (probs[a] == probs[b] && a < b);
  });
  idx.resize(k);
  return idx;
}

bool in_top_k(std::span<const double> probs, ClassId truth, std::size_t k) {
  // truth is in the top k iff fewer than k classes outrank it
  std::size_t above = 0;
  const double p = probs[truth];
  for (ClassId j = 0; j < probs.size(); ++j) {
    if (probs[j] > p || (probs[j] == p && j < truth)) ++above;
  }
  return above < k;
}

double topk_accuracy(const Tensor& probs, std::span<const ClassId> truths, std::size_t k) {
  check_inputs(probs, truths.size());
  if (k == 0) throw std::invalid_argument("topk_accuracy: k must be >= 1");
  std::vector<std::size_t> all(truths.size());
  std::iota(all.begin(), all.end(), 0);
  return *accuracy_of(probs, truths, all, k);
}

RecallReport mean_topk_recall(const Tensor& probs, std::span<const ClassId> truths, std::size_t k,
                              std::size_t many_shot_threshold) {
  check_inputs(probs, truths.size());
  if (many_shot_threshold == 0) throw std::invalid_argument("mean_topk_recall: threshold must be >= 1");
  std::map<ClassId, std::pair<std::size_t, std::size_t>> tally;  // class -> (hits, count)
  for (std::size_t i = 0; i < truths.size(); ++i) {
    auto& [hits, count] = tally[truths[i]];
    ++count;
    hits += in_top_k(row(probs, i), truths[i], k) ? 1 : 0;
  }
  RecallReport r;
  double sum = 0.0;
  for (const auto& [c, hc] : tally) {
    r.counts.emplace_back(c, hc.second);
    if (hc.second >= many_shot_threshold) {
      r.per_class.emplace_back(c, static_cast<double>(hc.first) / static_cast<double>(hc.second));
      sum += r.per_class.back().second;
    }
  }
  if (!r.per_class.empty()) r.mean = sum / static_cast<double>(r.per_class.size());
  return r;
}

MetricReport metric_report(const Tensor& probs, std::span<const ClassId> truths, std::span<const double> u_hat,
                           std::size_t many_shot_threshold) {
  MetricReport r;
  r.top1 = topk_accuracy(probs, truths, 1);
  r.top5 = topk_accuracy(probs, truths, 5);
  r.recall5 = mean_topk_recall(probs, truths, 5, many_shot_threshold);
  r.samples = truths.size();
  if (!u_hat.empty()) r.mean_u = std::accumulate(u_hat.begin(), u_hat.end(), 0.0) / static_cast<double>(u_hat.size());
  return r;
}

nlohmann::json to_json(const MetricReport& r) {
  nlohmann::json per_class = nlohmann::json::object();
  for (const auto& [c, v] : r.recall5.per_class) per_class[std::to_string(c)] = v;
  return {{"samples", r.samples},
          {"top1", r.top1},
          {"top5", r.top5},
          {"mean_top5_recall", r.recall5.mean ? nlohmann::json(*r.recall5.mean) : nlohmann::json(nullptr)},
          {"per_class_top5_recall", per_class},
          {"mean_u", r.mean_u}};
}

std::vector<RejectionPoint> rejection_curve(const Tensor& probs, std::span<const ClassId> truths,
                                            std::span<const double> uncertainties, std::span<const double> fractions,
                                            std::size_t k) {
  check_inputs(probs, truths.size());
  if (uncertainties.size() != truths.size()) throw std::invalid_argument("rejection_curve: uncertainty count mismatch");
  for (std::size_t i = 0; i < fractions.size(); ++i) {
    if (!(fractions[i] >= 0.0 && fractions[i] < 1.0) || (i > 0 && fractions[i] < fractions[i - 1])) {
      throw std::invalid_argument("rejection_curve: fractions must be ascending in [0, 1)");
    }
  }
  const std::vector<std::size_t> order = by_uncertainty(uncertainties);
  const std::size_t n = truths.size();
  std::vector<RejectionPoint> out;
  for (double r : fractions) {
    const auto drop = std::min(n - 1, static_cast<std::size_t>(std::ceil(r * static_cast<double>(n) - 1e-9)));
    const std::span<const std::size_t> kept(order.data() + drop, n - drop);
    out.push_back({r, kept.size(), *accuracy_of(probs, truths, kept, k)});
  }
  return out;
}

Histogram uncertainty_histogram(std::span<const double> u, std::size_t bins) {
  if (bins < 2) throw std::invalid_argument("uncertainty_histogram: bins must be >= 2");
  Histogram h;
  h.counts.assign(bins, 0);
  if (u.empty()) return h;
  const auto [lo, hi] = std::minmax_element(u.begin(), u.end());
  h.min = *lo;
  h.max = *hi;
  if (h.max == h.min) {
    h.degenerate = true;
    h.counts[0] = u.size();
    return h;
  }
  for (double v : u) {
    const double x = (v - h.min) / (h.max - h.min);
    h.counts[std::min(bins - 1, static_cast<std::size_t>(x * static_cast<double>(bins)))]++;
  }
  return h;
}

WeightNormReport weight_norm_report(const Tensor& weights, std::span<const std::size_t> class_counts) {
  if (weights.rank() != 2 || weights.dim(0) != class_counts.size()) {
    throw std::invalid_argument("weight_norm_report: weights " + ad::shape_str(weights.shape()) + " vs " +
                                std::to_string(class_counts.size()) + " class counts");
  }
  WeightNormReport r;
  for (ClassId c = 0; c < class_counts.size(); ++c) {
    double s = 0.0;
    for (std::size_t i = 0; i < weights.dim(1); ++i) s += weights.at(c, i) * weights.at(c, i);
    r.rows.push_back({c, class_counts[c], std::sqrt(s)});
  }
  std::stable_sort(r.rows.begin(), r.rows.end(),
                   [](const WeightNormRow& a, const WeightNormRow& b) { return a.count > b.count; });
  const std::size_t head = (r.rows.size() + 1) / 2;
  for (std::size_t i = 0; i < r.rows.size(); ++i) (i < head ? r.head_mean : r.tail_mean) += r.rows[i].norm;
  if (head > 0) r.head_mean /= static_cast<double>(head);
  if (r.rows.size() > head) r.tail_mean /= static_cast<double>(r.rows.size() - head);
  return r;
}

ClassPartitionReport partition_by_pairs(const UncertaintyMatrix& merged, const Tensor& probs,
                                        std::span<const ClassId> truths, std::size_t parts, std::size_t k) {
  check_inputs(probs, truths.size());
  const std::size_t n = merged.size();
  if (parts == 0) throw std::invalid_argument("partition_by_pairs: parts must be >= 1");
  if (n < 2 || probs.dim(1) != n) throw std::invalid_argument("partition_by_pairs: matrix size does not match probs");
  std::vector<std::pair<ClassId, ClassId>> pairs;
  for (ClassId a = 0; a < n; ++a) {
    for (ClassId b = a + 1; b < n; ++b) pairs.emplace_back(a, b);
  }
  std::stable_sort(pairs.begin(), pairs.end(), [&](const auto& x, const auto& y) {
    return merged.at(x.first, x.second) > merged.at(y.first, y.second);
  });
  std::vector<std::size_t> part_of(n, parts);
  for (std::size_t rank = 0; rank < pairs.size(); ++rank) {
    const std::size_t part = rank * parts / pairs.size();
    for (ClassId c : {pairs[rank].first, pairs[rank].second}) part_of[c] = std::min(part_of[c], part);
  }
  std::vector<std::vector<std::size_t>> members(parts);
  for (std::size_t i = 0; i < truths.size(); ++i) members[part_of[truths[i]]].push_back(i);
  ClassPartitionReport r;
  for (std::size_t p = 0; p < parts; ++p) {
    r.rows.push_back({"pairs_part" + std::to_string(p + 1), members[p].size(), accuracy_of(probs, truths, members[p], k)});
  }
  return r;
}

ClassPartitionReport partition_by_uncertainty(const Tensor& probs, std::span<const ClassId> truths,
                                              std::span<const double> uncertainties, std::size_t parts,
                                              std::size_t k) {
  check_inputs(probs, truths.size());
  if (parts == 0) throw std::invalid_argument("partition_by_uncertainty: parts must be >= 1");
  if (uncertainties.size() != truths.size()) throw std::invalid_argument("partition_by_uncertainty: count mismatch");
  const std::vector<std::size_t> order = by_uncertainty(uncertainties);
  const std::size_t n = order.size();
  ClassPartitionReport r;
  for (std::size_t q = 0; q <= parts; ++q) r.boundaries.push_back(q * n / parts);
  for (std::size_t q = 0; q < parts; ++q) {
    const std::span<const std::size_t> chunk(order.data() + r.boundaries[q], r.boundaries[q + 1] - r.boundaries[q]);
    r.rows.push_back({"uncertainty_part" + std::to_string(q + 1), chunk.size(), accuracy_of(probs, truths, chunk, k)});
  }
  return r;
}

double kendall_tau(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.size() < 2) throw std::invalid_argument("kendall_tau: need two equal-length vectors, n >= 2");
  long long score = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = i + 1; j < a.size(); ++j) {
      const double s = (a[i] - a[j]) * (b[i] - b[j]);
      score += s > 0 ? 1 : (s < 0 ? -1 : 0);
    }
  }
  const double pairs = static_cast<double>(a.size() * (a.size() - 1) / 2);
  return static_cast<double>(score) / pairs;
}

Evaluation evaluate(const AnticipationModel& model, const FeatureStore& store, std::span<const TrainSample> samples,
                    std::size_t batch_size) {
  if (samples.empty()) throw std::invalid_argument("evaluate: no samples");
  const std::size_t c = model.config().num_classes;
  Evaluation ev;
  ev.probs = Tensor({samples.size(), c});
  for (std::size_t begin = 0; begin < samples.size(); begin += batch_size) {
    const std::size_t end = std::min(samples.size(), begin + batch_size);
    std::vector<std::size_t> idx(end - begin);
    std::iota(idx.begin(), idx.end(), begin);
    const auto pred = model.predict(stack_observed(store, samples, idx), samples[begin].window);
    std::copy(pred.probs.data().begin(), pred.probs.data().end(), ev.probs.data().begin() + static_cast<std::ptrdiff_t>(begin * c));
    ev.u_hat.insert(ev.u_hat.end(), pred.u_hat.begin(), pred.u_hat.end());
  }
  for (const TrainSample& s : samples) ev.truths.push_back(s.target);
  return ev;
}

std::vector<NoiseRow> noise_sweep(const AnticipationModel& model, const FeatureStore& store,
                                  std::span<const TrainSample> samples, std::span<const double> etas,
                                  std::uint64_t seed) {
  std::vector<NoiseRow> rows;
  for (double eta : etas) {
    const Evaluation ev = evaluate(model, pollute(store, {eta, seed}), samples);
    const double mean_u = std::accumulate(ev.u_hat.begin(), ev.u_hat.end(), 0.0) / static_cast<double>(ev.u_hat.size());
    rows.push_back({eta, topk_accuracy(ev.probs, ev.truths, 5), mean_u});
  }
  return rows;
}

double family_order_tau(const AnticipationModel& model, const FeatureStore& store,
                        std::span<const FamilySample> families) {
  if (families.empty()) throw std::invalid_argument("family_order_tau: no families");
  const std::size_t m = families[0].members.size();
  std::vector<std::vector<double>> u(families.size());
  for (std::size_t j = 0; j < m; ++j) {
    std::vector<TrainSample> column;
    for (const FamilySample& f : families) {
      if (f.members.size() != m) throw std::invalid_argument("family_order_tau: families differ in size");
      column.push_back(f.members[j]);
    }
    const Evaluation ev = evaluate(model, store, column);
    for (std::size_t i = 0; i < families.size(); ++i) u[i].push_back(ev.u_hat[i]);
  }
  std::vector<double> ideal(m);
  for (std::size_t j = 0; j < m; ++j) ideal[j] = static_cast<double>(m - j);
  double total = 0.0;
  for (const auto& fu : u) total += kendall_tau(fu, ideal);
  return total / static_cast<double>(families.size());
}

}  // namespace ubant
