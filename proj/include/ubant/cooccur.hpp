#pragma once

// Class co-occurrence statistics: the internal matrix (shared antecedent
// counts over annotated sequences) and the external matrix (one-hop
// knowledge-graph paths between verb and noun lemmas).

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace ubant {

using ClassId = std::size_t;

// Lowercases and joins whitespace-separated words with underscores.
std::string normalize_lemma(std::string_view lemma);

class Vocabulary {
 public:
  using PartId = std::int64_t;

  std::map<PartId, std::string> verbs;
  std::map<PartId, std::string> nouns;

  // Registers a (verb, noun) activity. Ids are assigned in call order.
  ClassId add_activity(PartId verb, PartId noun);
  // Builds dense activity ids from the unique pairs, sorted by (verb, noun).
  void set_activities(std::vector<std::pair<PartId, PartId>> pairs);

  std::optional<ClassId> find_activity(PartId verb, PartId noun) const;
  const std::pair<PartId, PartId>& activity(ClassId c) const { return activities_.at(c); }
  std::size_t num_classes() const { return activities_.size(); }

  // Dense position of a verb / noun id inside the sorted id maps.
  std::size_t verb_index(PartId verb) const;
  std::size_t noun_index(PartId noun) const;

  // Throws if an activity references a verb or noun missing from the maps.
  void validate() const;

 private:
  std::vector<std::pair<PartId, PartId>> activities_;
  std::map<std::pair<PartId, PartId>, ClassId> index_;
};

struct Segment {
  double start = 0.0;
  double stop = 0.0;
  ClassId activity = 0;
};

struct Video {
  std::string id;
  std::vector<Segment> segments;  // sorted by start
};

struct AnnotationCorpus {
  std::vector<Video> videos;

  std::size_t num_segments() const;
  // Throws on unsorted segments, start >= stop, or ids outside the vocabulary.
  void validate(const Vocabulary& vocab) const;
  const Video* find(std::string_view video_id) const;
};

// One row of the annotation CSV.
struct AnnotationRow {
  std::string video_id;
  double start = 0.0;
  double stop = 0.0;
  Vocabulary::PartId verb = 0;
  Vocabulary::PartId noun = 0;
};

std::vector<AnnotationRow> read_annotations(std::istream& in, const std::string& source = "annotations");
std::vector<AnnotationRow> read_annotations(const std::string& path);
void write_annotations(std::ostream& out, const AnnotationCorpus& corpus, const Vocabulary& vocab);

// `verb_id,lemma` / `noun_id,lemma` files.
std::map<Vocabulary::PartId, std::string> read_lemmas(std::istream& in, const std::string& source = "vocabulary");
std::map<Vocabulary::PartId, std::string> read_lemmas(const std::string& path);
void write_lemmas(std::ostream& out, const std::map<Vocabulary::PartId, std::string>& lemmas, const char* id_name);

// `activity_id,verb_id,noun_id` table persisted next to trained models.
void write_activities(std::ostream& out, const Vocabulary& vocab);
std::vector<std::pair<Vocabulary::PartId, Vocabulary::PartId>> read_activities(std::istream& in,
                                                                               const std::string& source);

// Adds every (verb, noun) pair of `rows` to `vocab` (sorted, unique).
void add_activities_from(Vocabulary& vocab, std::span<const AnnotationRow> rows);
// Groups rows into videos (sorted by id) with segments sorted by start.
// Throws if a row's (verb, noun) pair is not an activity of `vocab`.
AnnotationCorpus make_corpus(std::span<const AnnotationRow> rows, const Vocabulary& vocab);

enum class MatrixKind { internal, external_verb, external_noun, external_activity, merged };
const char* to_string(MatrixKind kind);

// Square, symmetric, zero-diagonal matrix of nonnegative integer scores.
class UncertaintyMatrix {
 public:
  UncertaintyMatrix() = default;
  UncertaintyMatrix(MatrixKind kind, std::size_t n) : kind_(kind), n_(n), values_(n * n, 0) {}

  MatrixKind kind() const { return kind_; }
  std::size_t size() const { return n_; }
  std::int64_t at(std::size_t i, std::size_t j) const { return values_[i * n_ + j]; }
  std::int64_t& at(std::size_t i, std::size_t j) { return values_[i * n_ + j]; }
  std::span<const std::int64_t> row(std::size_t i) const { return {values_.data() + i * n_, n_}; }
  std::size_t nonzero_pairs() const;  // unordered pairs with positive score

  // Elementwise sum; sizes must match. The result has kind `merged` unless
  // both kinds agree.
  UncertaintyMatrix operator+(const UncertaintyMatrix& other) const;
  friend bool operator==(const UncertaintyMatrix&, const UncertaintyMatrix&) = default;

 private:
  MatrixKind kind_ = MatrixKind::internal;
  std::size_t n_ = 0;
  std::vector<std::int64_t> values_;
};

// Header row `class,0,1,...`, then one row per class with exact integers.
void write_matrix_csv(std::ostream& out, const UncertaintyMatrix& m);
UncertaintyMatrix read_matrix_csv(std::istream& in, MatrixKind kind, const std::string& source = "matrix");

// Per-antecedent successor histograms. Shards built over disjoint video sets
// merge by addition; the matrix is formed only after merging because entries
// are products of successor counts.
class SuccessorCounts {
 public:
  explicit SuccessorCounts(std::size_t num_classes) : counts_(num_classes) {}

  // Counts each (segment k, segment k+1) transition.
  void add(const AnnotationCorpus& corpus, const Vocabulary& vocab);
  void merge(const SuccessorCounts& other);
  UncertaintyMatrix to_matrix() const;

  std::int64_t count(ClassId antecedent, ClassId successor) const;
  std::size_t num_classes() const { return counts_.size(); }

 private:
  std::vector<std::map<ClassId, std::int64_t>> counts_;
};

// Entry (a, b), a != b: number of (transition into a, transition into b)
// instance pairs that share the same antecedent class.
UncertaintyMatrix build_internal_matrix(const AnnotationCorpus& corpus, const Vocabulary& vocab);

struct KnowledgeEdge {
  std::string head;
  std::string relation;
  std::string tail;
  auto operator<=>(const KnowledgeEdge&) const = default;
};

// Relations used for path counting unless overridden.
const std::vector<std::string>& default_relations();
// Every relation name a knowledge edge may carry.
const std::vector<std::string>& relation_catalogue();

struct KnowledgeEdgeSet {
  std::set<KnowledgeEdge> edges;
  std::set<std::string> selected_relations{default_relations().begin(), default_relations().end()};
};

// `head<TAB>relation<TAB>tail` per line. Lemmas are normalized and a `/r/`
// relation prefix is stripped. Malformed lines throw csv::ParseError.
KnowledgeEdgeSet read_edges(std::istream& in, const std::string& source = "edges");
KnowledgeEdgeSet read_edges(const std::string& path);

struct ExternalMatrices {
  UncertaintyMatrix verb;      // indexed by Vocabulary::verb_index
  UncertaintyMatrix noun;      // indexed by Vocabulary::noun_index
  UncertaintyMatrix activity;  // indexed by ClassId
};

// Verb/noun entries count undirected length-2 paths u - x - v through any
// intermediate node x using only selected relations; activity entries add the
// verb and noun entries of the two classes.
ExternalMatrices build_external_matrix(const KnowledgeEdgeSet& edges, const Vocabulary& vocab);

// Target class(es) plus the classes that may co-occur with them.
struct CooccurrenceSet {
  std::vector<ClassId> targets;
  std::vector<std::pair<ClassId, std::int64_t>> members;  // ascending id, score > 0

  std::size_t size() const { return members.size(); }
  bool empty() const { return members.empty(); }
  bool contains(ClassId c) const;
  std::vector<ClassId> member_ids() const;
};

// A^c: classes j != target with internal[j] + external[j] > 0. A positive
// `top_k` keeps only the k highest merged scores (ties to the lower id).
CooccurrenceSet merge_rows(std::span<const std::int64_t> internal_row, std::span<const std::int64_t> external_row,
                           ClassId target, std::size_t top_k = 0);

}  // namespace ubant
