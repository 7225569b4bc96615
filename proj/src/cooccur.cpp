#include "ubant/cooccur.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "ubant/csv.hpp"

namespace ubant {

std::string normalize_lemma(std::string_view lemma) {
  std::string out;
  bool pending_sep = false;
  for (char ch : lemma) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c) || ch == '_') {
      pending_sep = !out.empty();
      continue;
    }
    if (pending_sep) out.push_back('_');
    pending_sep = false;
    out.push_back(static_cast<char>(std::tolower(c)));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Vocabulary

ClassId Vocabulary::add_activity(PartId verb, PartId noun) {
  const auto key = std::make_pair(verb, noun);
  if (auto it = index_.find(key); it != index_.end()) return it->second;
  const ClassId id = activities_.size();
  activities_.push_back(key);
  index_.emplace(key, id);
  return id;
}

void Vocabulary::set_activities(std::vector<std::pair<PartId, PartId>> pairs) {
  std::sort(pairs.begin(), pairs.end());
  pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
  activities_.clear();
  index_.clear();
  for (const auto& [v, n] : pairs) add_activity(v, n);
}

std::optional<ClassId> Vocabulary::find_activity(PartId verb, PartId noun) const {
  if (auto it = index_.find({verb, noun}); it != index_.end()) return it->second;
  return std::nullopt;
}

std::size_t Vocabulary::verb_index(PartId verb) const {
  auto it = verbs.find(verb);
  if (it == verbs.end()) throw std::out_of_range("unknown verb id " + std::to_string(verb));
  return static_cast<std::size_t>(std::distance(verbs.begin(), it));
}

std::size_t Vocabulary::noun_index(PartId noun) const {
  auto it = nouns.find(noun);
  if (it == nouns.end()) throw std::out_of_range("unknown noun id " + std::to_string(noun));
  return static_cast<std::size_t>(std::distance(nouns.begin(), it));
}

void Vocabulary::validate() const {
  for (ClassId c = 0; c < activities_.size(); ++c) {
    const auto& [v, n] = activities_[c];
    if (!verbs.contains(v)) {
      throw std::invalid_argument("activity " + std::to_string(c) + " references unknown verb " + std::to_string(v));
    }
    if (!nouns.contains(n)) {
      throw std::invalid_argument("activity " + std::to_string(c) + " references unknown noun " + std::to_string(n));
    }
  }
}

// ---------------------------------------------------------------------------
// Corpus

std::size_t AnnotationCorpus::num_segments() const {
  std::size_t n = 0;
  for (const auto& v : videos) n += v.segments.size();
  return n;
}

void AnnotationCorpus::validate(const Vocabulary& vocab) const {
  for (const auto& v : videos) {
    for (std::size_t k = 0; k < v.segments.size(); ++k) {
      const Segment& s = v.segments[k];
      const std::string where = "video " + v.id + " segment " + std::to_string(k);
      if (!(s.start < s.stop)) throw std::invalid_argument(where + ": start must precede stop");
      if (k > 0 && s.start < v.segments[k - 1].start) throw std::invalid_argument(where + ": segments not sorted");
      if (s.activity >= vocab.num_classes()) {
        throw std::invalid_argument(where + ": unknown activity id " + std::to_string(s.activity));
      }
    }
  }
}

const Video* AnnotationCorpus::find(std::string_view video_id) const {
  for (const auto& v : videos) {
    if (v.id == video_id) return &v;
  }
  return nullptr;
}

std::vector<AnnotationRow> read_annotations(std::istream& in, const std::string& source) {
  std::vector<AnnotationRow> rows;
  bool header = true;
  csv::for_each_row(in, ',', [&](std::size_t line, const std::vector<std::string_view>& f) {
    if (header) {
      header = false;
      if (f.size() != 5 || f[0] != "video_id") {
        throw csv::ParseError(source, line, "expected header video_id,start_s,stop_s,verb_id,noun_id");
      }
      return;
    }
    if (f.size() != 5) throw csv::ParseError(source, line, "expected 5 fields, got " + std::to_string(f.size()));
    AnnotationRow r;
    r.video_id = std::string(f[0]);
    if (r.video_id.empty() || !csv::parse_number(f[1], r.start) || !csv::parse_number(f[2], r.stop) ||
        !csv::parse_number(f[3], r.verb) || !csv::parse_number(f[4], r.noun)) {
      throw csv::ParseError(source, line, "malformed annotation row");
    }
    if (!(r.start < r.stop)) throw csv::ParseError(source, line, "start_s must be < stop_s");
    rows.push_back(std::move(r));
  });
  if (header) throw csv::ParseError(source, 0, "empty file");
  return rows;
}

std::vector<AnnotationRow> read_annotations(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return read_annotations(in, path);
}

void write_annotations(std::ostream& out, const AnnotationCorpus& corpus, const Vocabulary& vocab) {
  out << "video_id,start_s,stop_s,verb_id,noun_id\n";
  for (const auto& v : corpus.videos) {
    for (const auto& s : v.segments) {
      const auto& [verb, noun] = vocab.activity(s.activity);
      out << v.id << ',' << csv::format_double(s.start) << ',' << csv::format_double(s.stop) << ',' << verb << ',' << noun << '\n';
    }
  }
}

std::map<Vocabulary::PartId, std::string> read_lemmas(std::istream& in, const std::string& source) {
  std::map<Vocabulary::PartId, std::string> out;
  bool header = true;
  csv::for_each_row(in, ',', [&](std::size_t line, const std::vector<std::string_view>& f) {
    if (header) {
      header = false;
      if (f.size() != 2 || f[1] != "lemma") throw csv::ParseError(source, line, "expected header <id>,lemma");
      return;
    }
    Vocabulary::PartId id = 0;
    if (f.size() != 2 || !csv::parse_number(f[0], id) || f[1].empty()) {
      throw csv::ParseError(source, line, "malformed vocabulary row");
    }
    if (!out.emplace(id, normalize_lemma(f[1])).second) {
      throw csv::ParseError(source, line, "duplicate id " + std::to_string(id));
    }
  });
  return out;
}

std::map<Vocabulary::PartId, std::string> read_lemmas(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return read_lemmas(in, path);
}

void write_lemmas(std::ostream& out, const std::map<Vocabulary::PartId, std::string>& lemmas, const char* id_name) {
  out << id_name << ",lemma\n";
  for (const auto& [id, lemma] : lemmas) out << id << ',' << lemma << '\n';
}

void write_activities(std::ostream& out, const Vocabulary& vocab) {
  out << "activity_id,verb_id,noun_id\n";
  for (ClassId c = 0; c < vocab.num_classes(); ++c) {
    out << c << ',' << vocab.activity(c).first << ',' << vocab.activity(c).second << '\n';
  }
}

std::vector<std::pair<Vocabulary::PartId, Vocabulary::PartId>> read_activities(std::istream& in,
                                                                               const std::string& source) {
  std::vector<std::pair<Vocabulary::PartId, Vocabulary::PartId>> out;
  bool header = true;
  csv::for_each_row(in, ',', [&](std::size_t line, const std::vector<std::string_view>& f) {
    if (header) {
      header = false;
      return;
    }
    std::size_t id = 0;
    Vocabulary::PartId v = 0, n = 0;
    if (f.size() != 3 || !csv::parse_number(f[0], id) || !csv::parse_number(f[1], v) ||
        !csv::parse_number(f[2], n) || id != out.size()) {
      throw csv::ParseError(source, line, "malformed activity row");
    }
    out.emplace_back(v, n);
  });
  return out;
}

void add_activities_from(Vocabulary& vocab, std::span<const AnnotationRow> rows) {
  std::vector<std::pair<Vocabulary::PartId, Vocabulary::PartId>> pairs;
  for (ClassId c = 0; c < vocab.num_classes(); ++c) pairs.push_back(vocab.activity(c));
  for (const auto& r : rows) pairs.emplace_back(r.verb, r.noun);
  vocab.set_activities(std::move(pairs));
}

AnnotationCorpus make_corpus(std::span<const AnnotationRow> rows, const Vocabulary& vocab) {
  std::map<std::string, std::vector<Segment>> grouped;
  for (const auto& r : rows) {
    auto& segs = grouped[r.video_id];
    const auto act = vocab.find_activity(r.verb, r.noun);
    if (!act) {
      throw std::invalid_argument("video " + r.video_id + " segment " + std::to_string(segs.size()) +
                                  ": (verb " + std::to_string(r.verb) + ", noun " + std::to_string(r.noun) +
                                  ") is not a known activity");
    }
    segs.push_back({r.start, r.stop, *act});
  }
  AnnotationCorpus corpus;
  for (auto& [id, segs] : grouped) {
    std::stable_sort(segs.begin(), segs.end(), [](const Segment& a, const Segment& b) { return a.start < b.start; });
    corpus.videos.push_back({id, std::move(segs)});
  }
  return corpus;
}

// ---------------------------------------------------------------------------
// Matrices

const char* to_string(MatrixKind kind) {
  switch (kind) {
    case MatrixKind::internal: return "internal";
    case MatrixKind::external_verb: return "external-verb";
    case MatrixKind::external_noun: return "external-noun";
    case MatrixKind::external_activity: return "external-activity";
    case MatrixKind::merged: return "merged";
  }
  return "?";
}

std::size_t UncertaintyMatrix::nonzero_pairs() const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < n_; ++i) {
    for (std::size_t j = i + 1; j < n_; ++j) n += at(i, j) > 0 ? 1 : 0;
  }
  return n;
}

UncertaintyMatrix UncertaintyMatrix::operator+(const UncertaintyMatrix& other) const {
  if (n_ != other.n_) {
    throw std::invalid_argument("matrix sum: size " + std::to_string(n_) + " vs " + std::to_string(other.n_));
  }
  UncertaintyMatrix out(kind_ == other.kind_ ? kind_ : MatrixKind::merged, n_);
  for (std::size_t i = 0; i < values_.size(); ++i) out.values_[i] = values_[i] + other.values_[i];
  return out;
}

void write_matrix_csv(std::ostream& out, const UncertaintyMatrix& m) {
  out << "class";
  for (std::size_t j = 0; j < m.size(); ++j) out << ',' << j;
  out << '\n';
  for (std::size_t i = 0; i < m.size(); ++i) {
    out << i;
    for (std::size_t j = 0; j < m.size(); ++j) out << ',' << m.at(i, j);
    out << '\n';
  }
}

UncertaintyMatrix read_matrix_csv(std::istream& in, MatrixKind kind, const std::string& source) {
  std::vector<std::vector<std::int64_t>> rows;
  std::size_t n = 0;
  bool header = true;
  csv::for_each_row(in, ',', [&](std::size_t line, const std::vector<std::string_view>& f) {
    if (header) {
      header = false;
      if (f.empty() || f[0] != "class") throw csv::ParseError(source, line, "expected header starting with 'class'");
      n = f.size() - 1;
      return;
    }
    std::size_t id = 0;
    if (f.size() != n + 1 || !csv::parse_number(f[0], id) || id != rows.size()) {
      throw csv::ParseError(source, line, "malformed matrix row");
    }
    std::vector<std::int64_t> row(n);
    for (std::size_t j = 0; j < n; ++j) {
      if (!csv::parse_number(f[j + 1], row[j]) || row[j] < 0) {
        throw csv::ParseError(source, line, "entry " + std::to_string(j) + " is not a nonnegative integer");
      }
    }
    rows.push_back(std::move(row));
  });
  if (rows.size() != n) throw csv::ParseError(source, rows.size() + 1, "matrix is not square");
  UncertaintyMatrix m(kind, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) m.at(i, j) = rows[i][j];
  }
  return m;
}

// ---------------------------------------------------------------------------
// Internal statistics

void SuccessorCounts::add(const AnnotationCorpus& corpus, const Vocabulary& vocab) {
  for (const auto& v : corpus.videos) {
    for (std::size_t k = 0; k < v.segments.size(); ++k) {
      if (v.segments[k].activity >= vocab.num_classes() || v.segments[k].activity >= counts_.size()) {
        throw std::invalid_argument("video " + v.id + " segment " + std::to_string(k) + ": unknown activity id " +
                                    std::to_string(v.segments[k].activity));
      }
    }
    for (std::size_t k = 0; k + 1 < v.segments.size(); ++k) {
      ++counts_[v.segments[k].activity][v.segments[k + 1].activity];
    }
  }
}

void SuccessorCounts::merge(const SuccessorCounts& other) {
  if (other.counts_.size() != counts_.size()) throw std::invalid_argument("SuccessorCounts::merge: class count differs");
  for (std::size_t c = 0; c < counts_.size(); ++c) {
    for (const auto& [s, n] : other.counts_[c]) counts_[c][s] += n;
  }
}

std::int64_t SuccessorCounts::count(ClassId antecedent, ClassId successor) const {
  const auto& m = counts_.at(antecedent);
  auto it = m.find(successor);
  return it == m.end() ? 0 : it->second;
}

UncertaintyMatrix SuccessorCounts::to_matrix() const {
  UncertaintyMatrix m(MatrixKind::internal, counts_.size());
  for (const auto& succ : counts_) {
    for (auto a = succ.begin(); a != succ.end(); ++a) {
      for (auto b = std::next(a); b != succ.end(); ++b) {
        const std::int64_t v = a->second * b->second;
        m.at(a->first, b->first) += v;
        m.at(b->first, a->first) += v;
      }
    }
  }
  return m;
}

UncertaintyMatrix build_internal_matrix(const AnnotationCorpus& corpus, const Vocabulary& vocab) {
  SuccessorCounts counts(vocab.num_classes());
  counts.add(corpus, vocab);
  return counts.to_matrix();
}

// ---------------------------------------------------------------------------
// External statistics

const std::vector<std::string>& default_relations() {
  static const std::vector<std::string> rels = {
      "MotivatedByGoal", "HasPrerequisite", "MannerOf",  "UsedFor",         "Entails",
      "LocatedNear",     "HasFirstSubevent", "HasSubevent", "HasLastSubevent", "Causes",
      "CreatedBy",       "ReceivesAction",  "CausesDesire", "CapableOf"};
  return rels;
}

const std::vector<std::string>& relation_catalogue() {
  static const std::vector<std::string> rels = {
      "RelatedTo",      "FormOf",         "IsA",          "PartOf",           "HasA",
      "UsedFor",        "CapableOf",      "AtLocation",   "Causes",           "HasSubevent",
      "HasFirstSubevent", "HasLastSubevent", "HasPrerequisite", "HasProperty", "MotivatedByGoal",
      "ObstructedBy",   "Desires",        "CreatedBy",    "Synonym",          "Antonym",
      "DistinctFrom",   "DerivedFrom",    "SymbolOf",     "DefinedAs",        "MannerOf",
      "LocatedNear",    "HasContext",     "SimilarTo",    "EtymologicallyRelatedTo",
      "EtymologicallyDerivedFrom", "CausesDesire", "MadeOf", "ReceivesAction", "Entails",
      "InstanceOf",     "NotDesires",     "NotUsedFor",   "NotCapableOf",     "NotHasProperty",
      "ExternalURL"};
  return rels;
}

namespace {

bool known_relation(std::string_view r) {
  if (r.starts_with("dbpedia/") && r.size() > 8) return true;
  const auto& cat = relation_catalogue();
  return std::find(cat.begin(), cat.end(), r) != cat.end();
}

// Symmetric path counts between the given endpoint lemmas.
UncertaintyMatrix count_paths(const std::unordered_map<std::string, std::vector<std::string>>& adjacency,
                              const std::map<Vocabulary::PartId, std::string>& lemmas, MatrixKind kind) {
  std::unordered_map<std::string, std::vector<std::size_t>> endpoint;  // lemma -> dense indices
  std::size_t idx = 0;
  for (const auto& [id, lemma] : lemmas) endpoint[lemma].push_back(idx++);

  UncertaintyMatrix m(kind, lemmas.size());
  std::map<std::size_t, std::int64_t> hits;
  for (const auto& [mid, nbrs] : adjacency) {
    hits.clear();
    for (const std::string& n : nbrs) {
      auto it = endpoint.find(n);
      if (it == endpoint.end()) continue;
      for (std::size_t e : it->second) ++hits[e];
    }
    for (auto a = hits.begin(); a != hits.end(); ++a) {
      for (auto b = std::next(a); b != hits.end(); ++b) {
        const std::int64_t v = a->second * b->second;
        m.at(a->first, b->first) += v;
        m.at(b->first, a->first) += v;
      }
    }
  }
  return m;
}

}  // namespace

KnowledgeEdgeSet read_edges(std::istream& in, const std::string& source) {
  KnowledgeEdgeSet set;
  csv::for_each_row(in, '\t', [&](std::size_t line, const std::vector<std::string_view>& f) {
    if (f.size() != 3 || f[0].empty() || f[1].empty() || f[2].empty()) {
      throw csv::ParseError(source, line, "expected head<TAB>relation<TAB>tail");
    }
    std::string_view rel = f[1];
    if (rel.starts_with("/r/")) rel.remove_prefix(3);
    if (!known_relation(rel)) throw csv::ParseError(source, line, "unknown relation '" + std::string(rel) + "'");
    set.edges.insert({normalize_lemma(f[0]), std::string(rel), normalize_lemma(f[2])});
  });
  return set;
}

KnowledgeEdgeSet read_edges(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return read_edges(in, path);
}

ExternalMatrices build_external_matrix(const KnowledgeEdgeSet& edges, const Vocabulary& vocab) {
  if (edges.selected_relations.empty()) throw std::invalid_argument("build_external_matrix: no relations selected");
  for (const auto& r : edges.selected_relations) {
    if (!known_relation(r)) throw std::invalid_argument("build_external_matrix: unknown relation '" + r + "'");
  }
  std::unordered_map<std::string, std::vector<std::string>> adjacency;
  for (const auto& e : edges.edges) {
    if (!edges.selected_relations.contains(e.relation) || e.head == e.tail) continue;
    adjacency[e.head].push_back(e.tail);
    adjacency[e.tail].push_back(e.head);
  }
  ExternalMatrices out;
  out.verb = count_paths(adjacency, vocab.verbs, MatrixKind::external_verb);
  out.noun = count_paths(adjacency, vocab.nouns, MatrixKind::external_noun);

  const std::size_t c = vocab.num_classes();
  out.activity = UncertaintyMatrix(MatrixKind::external_activity, c);
  std::vector<std::size_t> vi(c), ni(c);
  for (ClassId k = 0; k < c; ++k) {
    vi[k] = vocab.verb_index(vocab.activity(k).first);
    ni[k] = vocab.noun_index(vocab.activity(k).second);
  }
  for (ClassId a = 0; a < c; ++a) {
    for (ClassId b = 0; b < c; ++b) {
      if (a == b) continue;
      out.activity.at(a, b) = out.verb.at(vi[a], vi[b]) + out.noun.at(ni[a], ni[b]);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Co-occurrence sets

bool CooccurrenceSet::contains(ClassId c) const {
  return std::binary_search(members.begin(), members.end(), std::make_pair(c, std::int64_t{0}),
                            [](const auto& a, const auto& b) { return a.first < b.first; });
}

std::vector<ClassId> CooccurrenceSet::member_ids() const {
  std::vector<ClassId> out;
  out.reserve(members.size());
  for (const auto& m : members) out.push_back(m.first);
  return out;
}

CooccurrenceSet merge_rows(std::span<const std::int64_t> internal_row, std::span<const std::int64_t> external_row,
                           ClassId target, std::size_t top_k) {
  if (internal_row.size() != external_row.size()) {
    throw std::invalid_argument("merge_rows: row lengths " + std::to_string(internal_row.size()) + " vs " +
                                std::to_string(external_row.size()));
  }
  if (target >= internal_row.size()) throw std::invalid_argument("merge_rows: target class out of range");
  CooccurrenceSet set;
  set.targets = {target};
  for (ClassId j = 0; j < internal_row.size(); ++j) {
    if (j == target) continue;
    const std::int64_t s = internal_row[j] + external_row[j];
    if (s > 0) set.members.emplace_back(j, s);
  }
  if (top_k > 0 && set.members.size() > top_k) {
    std::stable_sort(set.members.begin(), set.members.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    set.members.resize(top_k);
    std::sort(set.members.begin(), set.members.end());
  }
  return set;
}

}  // namespace ubant
