#pragma once

// Feature ingestion, windowing, synthetic corpora and the batch streams used
// by training.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ubant/autodiff.hpp"
#include "ubant/cooccur.hpp"
#include "ubant/model.hpp"

namespace ubant {

struct FeatureStore {
  enum class Source { ingested, synthetic };

  Source source = Source::ingested;
  std::size_t dim = 0;
  std::map<std::string, Tensor, std::less<>> videos;  // [snippets, dim] per video

  const Tensor& video(std::string_view id) const;
  std::size_t snippets(std::string_view id) const { return video(id).dim(0); }
  std::size_t num_snippets() const;
};

// Header `video_id,snippet_idx,f0,...,f{d-1}`; per video, snippet indices
// must be exactly 0..n-1 (any row order).
FeatureStore read_features(std::istream& in, const std::string& source = "features");
FeatureStore read_features(const std::string& path);
// Round-trips bit-exactly.
void write_features(std::ostream& out, const FeatureStore& store);

struct TrainSample {
  std::string video_id;
  std::size_t segment = 0;
  ClassId target = 0;
  std::size_t first_snippet = 0;  // observed snippets are [first, first + n_o)
  AnticipationWindow window;
};

struct WindowResult {
  std::vector<TrainSample> samples;
  std::size_t dropped = 0;  // segments without n_o + n_a snippets of footage
};

// One sample per segment whose start leaves room for n_o observed and n_a
// anticipation snippets. The observed span ends tau_a before the segment
// start (start rounded down to the snippet grid). Throws if a video is
// missing from the store or its footage ends before a usable window.
WindowResult window_samples(const AnnotationCorpus& corpus, const FeatureStore& store, const AnticipationWindow& window);

// Time-major stacking: n_o tensors of shape [idx.size(), dim]. All selected
// samples must share n_o.
std::vector<Tensor> stack_observed(const FeatureStore& store, std::span<const TrainSample> samples,
                                   std::span<const std::size_t> idx);

// ---- synthetic corpora ----

struct SyntheticSpec {
  std::size_t classes = 20;
  std::size_t branching = 4;       // successors per class
  std::size_t max_branching = 0;   // > branching: per-class count drawn from [branching, max_branching]
  double successor_entropy = 1.0;  // normalized entropy of each successor distribution
  std::size_t dim = 32;
  double feature_noise = 0.5;  // snippet noise std
  double noise_spread = 0.0;   // per-video noise std factor drawn from [1 - s, 1 + s]
  std::size_t videos = 50;
  std::size_t segments_per_video = 20;
  double min_duration = 2.0;
  double max_duration = 4.0;
  double lead_in = 4.0;  // unlabelled footage before the first segment
  double delta = 0.25;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SyntheticCorpus {
  Vocabulary vocab;
  AnnotationCorpus corpus;
  FeatureStore features;
  // successors[c] = (successor class, probability), descending probability
  std::vector<std::vector<std::pair<ClassId, double>>> successors;
  Tensor embeddings;  // [C, dim]
};

// Geometric successor weights exp(-lambda * rank) with lambda solved so the
// normalized entropy matches `successor_entropy`.
std::vector<double> successor_weights(std::size_t branching, double entropy);

SyntheticCorpus generate_synthetic(const SyntheticSpec& spec);

// Deterministic video-level split; returns (train, test).
std::pair<AnnotationCorpus, AnnotationCorpus> split_by_video(const AnnotationCorpus& corpus, double test_fraction,
                                                             std::uint64_t seed);

// ---- noise ----

struct NoiseConfig {
  double eta = 0.0;
  std::uint64_t seed = 0;
};

// f + eta * N(0, 1) elementwise; eta = 0 returns an exact copy.
FeatureStore pollute(const FeatureStore& store, const NoiseConfig& cfg);

// ---- batch streams ----

using SamplePair = std::pair<std::size_t, std::size_t>;

struct PairStream {
  std::vector<std::vector<SamplePair>> batches;  // one entry per mini-batch
  std::size_t unpairable_batches = 0;            // batches that emitted no pair
  std::size_t dropped = 0;                       // leftovers still unpaired at the end
};

// Shuffles sample indices, cuts them into batches of `batch_size`, and pairs
// samples with different classes inside each batch without replacement.
// Leftovers roll into the next batch. Throws if fewer than two classes are
// present or batch_size < 2.
PairStream pair_batches(std::span<const ClassId> classes, std::size_t batch_size, std::uint64_t seed);

struct FamilySample {
  std::vector<TrainSample> members;  // descending tau_a, shared observation start
};

struct FamilyResult {
  std::vector<FamilySample> families;
  std::size_t skipped = 0;
};

// Grid of M anticipation times taken at an even stride from the evaluation
// grid 2.0, 1.75, ..., 0.25.
std::vector<double> default_family_grid(std::size_t m);

// Member m observes tau_o + (grid[0] - grid[m]) seconds from the same start
// and anticipates grid[m]. Throws unless the grid is strictly decreasing with
// at least two entries.
FamilyResult family_batches(const AnnotationCorpus& corpus, const FeatureStore& store, double tau_o, double delta,
                            std::span<const double> tau_a_grid);

}  // namespace ubant
