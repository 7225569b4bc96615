#pragma once

// Metrics and experiment harnesses. Rankings break ties by ascending class
// (or sample) index everywhere, so every report is deterministic.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ubant/cooccur.hpp"
#include "ubant/data.hpp"
#include "ubant/model.hpp"

namespace ubant {

// Indices of the k largest entries, largest first.
std::vector<ClassId> top_k(std::span<const double> probs, std::size_t k);
bool in_top_k(std::span<const double> probs, ClassId truth, std::size_t k);

// probs is [N, C]. Throws on empty input or k == 0.
double topk_accuracy(const Tensor& probs, std::span<const ClassId> truths, std::size_t k);

struct RecallReport {
  std::optional<double> mean;  // undefined when no class reaches the threshold
  std::vector<std::pair<ClassId, double>> per_class;  // many-shot classes only
  std::vector<std::pair<ClassId, std::size_t>> counts;  // every class seen
};
RecallReport mean_topk_recall(const Tensor& probs, std::span<const ClassId> truths, std::size_t k,
                              std::size_t many_shot_threshold);

struct MetricReport {
  double top1 = 0.0;
  double top5 = 0.0;
  RecallReport recall5;
  std::size_t samples = 0;
  double mean_u = 0.0;
};
MetricReport metric_report(const Tensor& probs, std::span<const ClassId> truths, std::span<const double> u_hat,
                           std::size_t many_shot_threshold = 10);
nlohmann::json to_json(const MetricReport& r);

struct RejectionPoint {
  double fraction = 0.0;
  std::size_t retained = 0;
  double accuracy = 0.0;
};
// For each R drops the ceil(R * N) most uncertain samples and reports top-k
// accuracy on the rest. Throws unless fractions are ascending in [0, 1).
std::vector<RejectionPoint> rejection_curve(const Tensor& probs, std::span<const ClassId> truths,
                                            std::span<const double> uncertainties, std::span<const double> fractions,
                                            std::size_t k = 5);

struct Histogram {
  std::vector<std::size_t> counts;
  double min = 0.0;
  double max = 0.0;
  bool degenerate = false;  // all values equal; everything lands in bin 0
};
// Min-max normalizes to [0, 1] and bins; the top edge is closed.
Histogram uncertainty_histogram(std::span<const double> u, std::size_t bins);

struct WeightNormRow {
  ClassId cls = 0;
  std::size_t count = 0;
  double norm = 0.0;
};
struct WeightNormReport {
  std::vector<WeightNormRow> rows;  // descending frequency
  double head_mean = 0.0;           // more frequent half
  double tail_mean = 0.0;
};
// weights is [C, d], one row per class.
WeightNormReport weight_norm_report(const Tensor& weights, std::span<const std::size_t> class_counts);

struct PartitionRow {
  std::string label;
  std::size_t samples = 0;
  std::optional<double> accuracy;
};
struct ClassPartitionReport {
  std::vector<PartitionRow> rows;
  std::vector<std::size_t> boundaries;  // sample-mode cut points into the sorted order
};
// Ranks all class pairs by merged score (descending, ties by pair index),
// cuts the ranking into `parts` chunks, and assigns each class to the chunk
// of its highest-ranked pair. Accuracy is top-k over samples of each chunk.
ClassPartitionReport partition_by_pairs(const UncertaintyMatrix& merged, const Tensor& probs,
                                        std::span<const ClassId> truths, std::size_t parts, std::size_t k = 5);
// Sorts samples by uncertainty (descending) and cuts at floor(q * N / parts).
ClassPartitionReport partition_by_uncertainty(const Tensor& probs, std::span<const ClassId> truths,
                                              std::span<const double> uncertainties, std::size_t parts,
                                              std::size_t k = 5);

// Kendall tau-a between two equal-length score vectors.
double kendall_tau(std::span<const double> a, std::span<const double> b);

// ---- model-driven harnesses ----

struct Evaluation {
  Tensor probs;  // [N, C]
  std::vector<double> u_hat;
  std::vector<ClassId> truths;
};
Evaluation evaluate(const AnticipationModel& model, const FeatureStore& store, std::span<const TrainSample> samples,
                    std::size_t batch_size = 256);

struct NoiseRow {
  double eta = 0.0;
  double top5 = 0.0;
  double mean_u = 0.0;
};
// Evaluates on polluted copies of `store`, one per eta.
std::vector<NoiseRow> noise_sweep(const AnticipationModel& model, const FeatureStore& store,
                                  std::span<const TrainSample> samples, std::span<const double> etas,
                                  std::uint64_t seed);

// Mean Kendall tau between each family's final-step uncertainties and the
// ideal descending order. Families must share member geometry by position.
double family_order_tau(const AnticipationModel& model, const FeatureStore& store,
                        std::span<const FamilySample> families);

}  // namespace ubant
