#pragma once

// Brute-force reference implementations shared by unit and acceptance tests.
// They deliberately avoid the library's algorithms: plain enumeration only.

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "ubant/cooccur.hpp"

namespace oracle {

using ubant::AnnotationCorpus;
using ubant::ClassId;
using ubant::KnowledgeEdgeSet;
using ubant::Vocabulary;

using Matrix = std::vector<std::vector<long long>>;

// Every ordered pair of distinct (antecedent, successor) instances that share
// an antecedent class and have different successor classes adds one.
inline Matrix internal_matrix(const AnnotationCorpus& corpus, std::size_t num_classes) {
  struct Instance {
    ClassId antecedent, successor;
  };
  std::vector<Instance> inst;
  for (const auto& v : corpus.videos) {
    for (std::size_t k = 0; k + 1 < v.segments.size(); ++k) {
      inst.push_back({v.segments[k].activity, v.segments[k + 1].activity});
    }
  }
  Matrix m(num_classes, std::vector<long long>(num_classes, 0));
  for (std::size_t i = 0; i < inst.size(); ++i) {
    for (std::size_t j = 0; j < inst.size(); ++j) {
      if (i == j || inst[i].antecedent != inst[j].antecedent) continue;
      if (inst[i].successor == inst[j].successor) continue;
      ++m[inst[i].successor][inst[j].successor];
    }
  }
  return m;
}

// Counts ordered pairs of distinct selected edges (e1, e2) forming a walk
// u - x - v with u != v, edges read in both directions.
inline Matrix lemma_paths(const KnowledgeEdgeSet& edges, const std::vector<std::string>& lemmas) {
  std::vector<std::pair<std::string, std::string>> es;
  for (const auto& e : edges.edges) {
    if (edges.selected_relations.count(e.relation) && e.head != e.tail) es.emplace_back(e.head, e.tail);
  }
  std::multimap<std::string, std::size_t> index;
  for (std::size_t i = 0; i < lemmas.size(); ++i) index.emplace(lemmas[i], i);
  Matrix m(lemmas.size(), std::vector<long long>(lemmas.size(), 0));
  for (std::size_t i = 0; i < es.size(); ++i) {
    for (std::size_t j = 0; j < es.size(); ++j) {
      if (i == j) continue;
      for (int oi = 0; oi < 2; ++oi) {
        const std::string& u = oi ? es[i].second : es[i].first;
        const std::string& x1 = oi ? es[i].first : es[i].second;
        for (int oj = 0; oj < 2; ++oj) {
          const std::string& x2 = oj ? es[j].second : es[j].first;
          const std::string& v = oj ? es[j].first : es[j].second;
          if (x1 != x2 || u == v) continue;
          const auto [ub, ue] = index.equal_range(u);
          const auto [vb, ve] = index.equal_range(v);
          for (auto a = ub; a != ue; ++a) {
            for (auto b = vb; b != ve; ++b) ++m[a->second][b->second];
          }
        }
      }
    }
  }
  return m;
}

inline std::vector<std::string> lemma_list(const std::map<Vocabulary::PartId, std::string>& m) {
  std::vector<std::string> out;
  for (const auto& [id, l] : m) out.push_back(l);
  return out;
}

inline Matrix activity_paths(const KnowledgeEdgeSet& edges, const Vocabulary& vocab) {
  const Matrix vm = lemma_paths(edges, lemma_list(vocab.verbs));
  const Matrix nm = lemma_paths(edges, lemma_list(vocab.nouns));
  const std::size_t c = vocab.num_classes();
  Matrix m(c, std::vector<long long>(c, 0));
  for (ClassId a = 0; a < c; ++a) {
    for (ClassId b = 0; b < c; ++b) {
      if (a == b) continue;
      const auto [va, na] = vocab.activity(a);
      const auto [vb, nb] = vocab.activity(b);
      m[a][b] = vm[vocab.verb_index(va)][vocab.verb_index(vb)] + nm[vocab.noun_index(na)][vocab.noun_index(nb)];
    }
  }
  return m;
}

inline bool equal(const ubant::UncertaintyMatrix& got, const Matrix& want) {
  if (got.size() != want.size()) return false;
  for (std::size_t i = 0; i < want.size(); ++i) {
    for (std::size_t j = 0; j < want.size(); ++j) {
      if (got.at(i, j) != want[i][j]) return false;
    }
  }
  return true;
}

// Random vocabulary with `verbs` x `nouns` lemmas and `classes` distinct pairs.
inline Vocabulary random_vocab(std::mt19937_64& rng, std::size_t verbs, std::size_t nouns, std::size_t classes) {
  Vocabulary vocab;
  for (std::size_t i = 0; i < verbs; ++i) vocab.verbs[static_cast<long>(i)] = "v" + std::to_string(i);
  for (std::size_t i = 0; i < nouns; ++i) vocab.nouns[static_cast<long>(i)] = "n" + std::to_string(i);
  std::vector<std::pair<long, long>> all;
  for (std::size_t v = 0; v < verbs; ++v) {
    for (std::size_t n = 0; n < nouns; ++n) all.emplace_back(v, n);
  }
  std::shuffle(all.begin(), all.end(), rng);
  all.resize(std::min(classes, all.size()));
  vocab.set_activities({all.begin(), all.end()});
  return vocab;
}

inline AnnotationCorpus random_corpus(std::mt19937_64& rng, std::size_t num_classes, std::size_t max_videos,
                                      std::size_t max_segments) {
  std::uniform_int_distribution<std::size_t> nv(1, max_videos), ns(1, max_segments), cls(0, num_classes - 1);
  AnnotationCorpus corpus;
  const std::size_t videos = nv(rng);
  for (std::size_t v = 0; v < videos; ++v) {
    ubant::Video video;
    video.id = "v" + std::to_string(v);
    const std::size_t segs = ns(rng);
    for (std::size_t s = 0; s < segs; ++s) {
      video.segments.push_back({static_cast<double>(s), static_cast<double>(s) + 0.5, cls(rng)});
    }
    corpus.videos.push_back(std::move(video));
  }
  return corpus;
}

// Random edges over the vocabulary lemmas plus a few intermediate nodes.
inline KnowledgeEdgeSet random_edges(std::mt19937_64& rng, const Vocabulary& vocab, std::size_t count) {
  std::vector<std::string> nodes = lemma_list(vocab.verbs);
  for (const auto& n : lemma_list(vocab.nouns)) nodes.push_back(n);
  for (int i = 0; i < 6; ++i) nodes.push_back("x" + std::to_string(i));
  const std::vector<std::string> rels = {"UsedFor", "Causes", "MannerOf", "Antonym", "IsA"};
  std::uniform_int_distribution<std::size_t> pick(0, nodes.size() - 1), rel(0, rels.size() - 1);
  KnowledgeEdgeSet set;
  set.selected_relations = {"UsedFor", "Causes", "MannerOf"};
  while (set.edges.size() < count) set.edges.insert({nodes[pick(rng)], rels[rel(rng)], nodes[pick(rng)]});
  return set;
}

inline double entropy(const std::vector<double>& p) {
  double h = 0.0;
  for (double q : p) {
    if (q > 0) h -= q * std::log(q);
  }
  return h;
}

}  // namespace oracle
