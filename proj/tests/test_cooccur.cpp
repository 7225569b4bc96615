#include <doctest.h>

#include <random>
#include <sstream>

#include "oracles.hpp"
#include "ubant/cooccur.hpp"
#include "ubant/csv.hpp"

using namespace ubant;

namespace {

// verbs: open(0), take(1), close(2); nouns: fridge(0), milk(1)
Vocabulary kitchen() {
  Vocabulary v;
  v.verbs = {{0, "open"}, {1, "take"}, {2, "close"}};
  v.nouns = {{0, "fridge"}, {1, "milk"}};
  v.set_activities({{0, 0}, {1, 1}, {2, 0}});
  return v;
}

}  // namespace

TEST_CASE("normalize_lemma lowercases and joins words") {
  CHECK(normalize_lemma("Pick  Up") == "pick_up");
  CHECK(normalize_lemma(" cutting_board ") == "cutting_board");
  CHECK(normalize_lemma("KNIFE") == "knife");
}

TEST_CASE("two sequences sharing an antecedent give one symmetric pair") {
  const Vocabulary vocab = kitchen();
  const ClassId open = *vocab.find_activity(0, 0), take = *vocab.find_activity(1, 1), close = *vocab.find_activity(2, 0);
  AnnotationCorpus corpus;
  corpus.videos.push_back({"a", {{0, 1, open}, {1, 2, take}}});
  corpus.videos.push_back({"b", {{0, 1, open}, {1, 2, close}}});
  const UncertaintyMatrix m = build_internal_matrix(corpus, vocab);
  CHECK(m.at(take, close) == 1);
  CHECK(m.at(close, take) == 1);
  CHECK(m.nonzero_pairs() == 1);
  CHECK(m.at(open, take) == 0);
}

TEST_CASE("single segment video gives a zero matrix") {
  const Vocabulary vocab = kitchen();
  AnnotationCorpus corpus;
  corpus.videos.push_back({"a", {{0, 1, 0}}});
  CHECK(build_internal_matrix(corpus, vocab).nonzero_pairs() == 0);
}

TEST_CASE("internal matrix matches enumeration on random corpora") {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 20; ++t) {
    const Vocabulary vocab = oracle::random_vocab(rng, 4, 4, 9);
    const AnnotationCorpus corpus = oracle::random_corpus(rng, vocab.num_classes(), 20, 20);
    const UncertaintyMatrix m = build_internal_matrix(corpus, vocab);
    CHECK(oracle::equal(m, oracle::internal_matrix(corpus, vocab.num_classes())));
    for (std::size_t i = 0; i < m.size(); ++i) {
      CHECK(m.at(i, i) == 0);
      for (std::size_t j = 0; j < m.size(); ++j) CHECK(m.at(i, j) == m.at(j, i));
    }
  }
}

TEST_CASE("internal statistics are order invariant and shard additive") {
  std::mt19937_64 rng(6);
  const Vocabulary vocab = oracle::random_vocab(rng, 3, 4, 10);
  AnnotationCorpus corpus = oracle::random_corpus(rng, vocab.num_classes(), 30, 12);
  const UncertaintyMatrix base = build_internal_matrix(corpus, vocab);

  AnnotationCorpus shuffled = corpus;
  std::shuffle(shuffled.videos.begin(), shuffled.videos.end(), rng);
  CHECK(build_internal_matrix(shuffled, vocab) == base);

  AnnotationCorpus left, right;
  for (std::size_t i = 0; i < corpus.videos.size(); ++i) (i % 2 ? left : right).videos.push_back(corpus.videos[i]);
  SuccessorCounts a(vocab.num_classes()), b(vocab.num_classes());
  a.add(left, vocab);
  b.add(right, vocab);
  a.merge(b);
  CHECK(a.to_matrix() == base);
}

TEST_CASE("external path counting") {
  Vocabulary vocab;
  vocab.verbs = {{0, "cut"}, {1, "slice"}, {2, "join"}};
  vocab.nouns = {{0, "knife"}};
  vocab.set_activities({{0, 0}, {1, 0}, {2, 0}});

  SUBCASE("empty edge set") {
    const ExternalMatrices m = build_external_matrix(KnowledgeEdgeSet{}, vocab);
    CHECK(m.verb.nonzero_pairs() == 0);
    CHECK(m.activity.nonzero_pairs() == 0);
  }
  SUBCASE("shared tail gives one path") {
    KnowledgeEdgeSet edges;
    edges.edges = {{"cut", "UsedFor", "knife"}, {"slice", "UsedFor", "knife"}};
    const ExternalMatrices m = build_external_matrix(edges, vocab);
    CHECK(m.verb.at(0, 1) == 1);
    CHECK(m.verb.at(1, 0) == 1);
    CHECK(m.activity.at(0, 1) == 1);
    CHECK(m.activity.at(0, 2) == 0);
  }
  SUBCASE("unselected relations are ignored") {
    KnowledgeEdgeSet edges;
    edges.edges = {{"cut", "Antonym", "join"}, {"join", "Antonym", "slice"}};
    CHECK(build_external_matrix(edges, vocab).verb.at(0, 1) == 0);
  }
  SUBCASE("empty relation selection is rejected") {
    KnowledgeEdgeSet edges;
    edges.selected_relations.clear();
    CHECK_THROWS_AS(build_external_matrix(edges, vocab), std::invalid_argument);
  }
}

TEST_CASE("external matrices match enumeration on random graphs") {
  std::mt19937_64 rng(8);
  for (int t = 0; t < 10; ++t) {
    const Vocabulary vocab = oracle::random_vocab(rng, 5, 5, 12);
    const KnowledgeEdgeSet edges = oracle::random_edges(rng, vocab, 80);
    const ExternalMatrices m = build_external_matrix(edges, vocab);
    CHECK(oracle::equal(m.verb, oracle::lemma_paths(edges, oracle::lemma_list(vocab.verbs))));
    CHECK(oracle::equal(m.noun, oracle::lemma_paths(edges, oracle::lemma_list(vocab.nouns))));
    CHECK(oracle::equal(m.activity, oracle::activity_paths(edges, vocab)));
  }
}

TEST_CASE("merge_rows keeps nonzero union without the target") {
  const std::int64_t internal[] = {0, 2, 0, 1};
  const std::int64_t external[] = {0, 0, 3, 0};
  const CooccurrenceSet s = merge_rows(internal, external, 0);
  CHECK(s.member_ids() == std::vector<ClassId>{1, 2, 3});
  CHECK(s.members[1].second == 3);

  const std::int64_t zero[] = {0, 0, 0, 0};
  CHECK(merge_rows(zero, zero, 2).empty());

  const std::int64_t self[] = {5, 0, 1, 0};
  CHECK(merge_rows(self, zero, 0).member_ids() == std::vector<ClassId>{2});

  const std::int64_t scores[] = {0, 1, 4, 4, 2};
  const std::int64_t none[] = {0, 0, 0, 0, 0};
  CHECK(merge_rows(scores, none, 0, 2).member_ids() == std::vector<ClassId>{2, 3});
}

TEST_CASE("annotation parsing reports line numbers") {
  std::istringstream ok("video_id,start_s,stop_s,verb_id,noun_id\nv1,0,1.5,2,3\n\nv1,1.5,2,0,0\n");
  const auto rows = read_annotations(ok);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].stop == 1.5);
  CHECK(rows[0].noun == 3);

  std::istringstream bad("video_id,start_s,stop_s,verb_id,noun_id\nv1,0,1,2,3\nv1,zero,1,2,3\n");
  try {
    read_annotations(bad, "ann.csv");
    FAIL("expected a parse error");
  } catch (const csv::ParseError& e) {
    CHECK(e.line() == 3);
    CHECK(std::string(e.what()).find("ann.csv:3") != std::string::npos);
  }
  std::istringstream reversed("video_id,start_s,stop_s,verb_id,noun_id\nv1,2,1,2,3\n");
  CHECK_THROWS_AS(read_annotations(reversed), csv::ParseError);
}

TEST_CASE("unknown activities are rejected with the video id") {
  const Vocabulary vocab = kitchen();
  const AnnotationRow row{"vid_9", 0, 1, 1, 0};
  try {
    make_corpus(std::span(&row, 1), vocab);
    FAIL("expected rejection");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("vid_9") != std::string::npos);
  }
}

TEST_CASE("edge parsing normalizes lemmas and strips relation prefixes") {
  std::istringstream in("Cut Up\t/r/UsedFor\tKnife\n");
  const KnowledgeEdgeSet s = read_edges(in);
  REQUIRE(s.edges.size() == 1);
  CHECK(s.edges.begin()->head == "cut_up");
  CHECK(s.edges.begin()->relation == "UsedFor");

  std::istringstream bad("a\tUsedFor\tb\nonly-two\tfields\n");
  try {
    read_edges(bad, "edges.tsv");
    FAIL("expected a parse error");
  } catch (const csv::ParseError& e) {
    CHECK(e.line() == 2);
  }
  std::istringstream unknown("a\tLikes\tb\n");
  CHECK_THROWS_AS(read_edges(unknown), csv::ParseError);
}

TEST_CASE("matrix and vocabulary files round-trip") {
  std::mt19937_64 rng(9);
  const Vocabulary vocab = oracle::random_vocab(rng, 4, 3, 8);
  const AnnotationCorpus corpus = oracle::random_corpus(rng, vocab.num_classes(), 10, 10);
  const UncertaintyMatrix m = build_internal_matrix(corpus, vocab);
  std::stringstream ss;
  write_matrix_csv(ss, m);
  CHECK(read_matrix_csv(ss, MatrixKind::internal) == m);

  std::stringstream acts;
  write_activities(acts, vocab);
  Vocabulary back;
  back.verbs = vocab.verbs;
  back.nouns = vocab.nouns;
  back.set_activities(read_activities(acts, "activities"));
  for (ClassId c = 0; c < vocab.num_classes(); ++c) CHECK(back.activity(c) == vocab.activity(c));

  std::stringstream ann;
  write_annotations(ann, corpus, vocab);
  const auto rows = read_annotations(ann);
  const AnnotationCorpus again = make_corpus(rows, back);
  CHECK(build_internal_matrix(again, back) == m);
}
