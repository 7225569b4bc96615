#include <doctest.h>

#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "test_util.hpp"
#include "ubant/data.hpp"

using namespace ubant;

namespace {

FeatureStore ramp_store(const std::string& id, std::size_t snippets, std::size_t dim) {
  FeatureStore s;
  s.dim = dim;
  Tensor t({snippets, dim});
  for (std::size_t i = 0; i < snippets; ++i) {
    for (std::size_t j = 0; j < dim; ++j) t.at(i, j) = static_cast<double>(i) + 0.01 * static_cast<double>(j);
  }
  s.videos.emplace(id, std::move(t));
  return s;
}

SyntheticSpec small_spec() {
  SyntheticSpec s;
  s.classes = 8;
  s.branching = 3;
  s.dim = 6;
  s.videos = 6;
  s.segments_per_video = 8;
  s.seed = 17;
  return s;
}

}  // namespace

TEST_CASE("feature files round-trip bit-exactly") {
  std::mt19937_64 rng(1);
  FeatureStore s;
  s.dim = 3;
  s.videos.emplace("b", testutil::randn({4, 3}, rng));
  s.videos.emplace("a", testutil::randn({2, 3}, rng));
  s.videos.at("a").at(0, 0) = 0.1 + 0.2;  // non-representable decimal
  std::stringstream ss;
  write_features(ss, s);
  const FeatureStore back = read_features(ss);
  CHECK(back.dim == 3);
  CHECK(back.videos == s.videos);
  CHECK(back.num_snippets() == 6);
}

TEST_CASE("feature parsing accepts any row order but requires contiguous indices") {
  std::istringstream shuffled("video_id,snippet_idx,f0,f1\nv,1,3,4\nv,0,1,2\n");
  const FeatureStore s = read_features(shuffled);
  CHECK(s.video("v") == Tensor::matrix(2, 2, {1, 2, 3, 4}));

  std::istringstream gap("video_id,snippet_idx,f0\nv,0,1\nv,2,3\n");
  CHECK_THROWS(read_features(gap));
  std::istringstream dup("video_id,snippet_idx,f0\nv,0,1\nv,0,3\n");
  CHECK_THROWS(read_features(dup));
  std::istringstream width("video_id,snippet_idx,f0,f1\nv,0,1\n");
  CHECK_THROWS(read_features(width));
  CHECK_THROWS_AS(s.video("missing"), std::out_of_range);
}

TEST_CASE("windows end tau_a before the segment start") {
  const AnticipationWindow w = AnticipationWindow::make(1.5, 2.0, 0.25);
  const FeatureStore store = ramp_store("v", 80, 2);
  AnnotationCorpus corpus;
  corpus.videos.push_back({"v", {{1.0, 3.0, 0}, {3.5, 5.0, 1}, {10.1, 12.0, 2}}});
  const WindowResult r = window_samples(corpus, store, w);
  CHECK(r.dropped == 1);  // 1.0 s leaves no room for 14 snippets
  REQUIRE(r.samples.size() == 2);
  CHECK(r.samples[0].first_snippet == 0);   // start 14, end 6
  CHECK(r.samples[1].first_snippet == 26);  // floor(10.1 / 0.25) = 40, end 32
  CHECK(r.samples[1].target == 2);

  const std::size_t idx[] = {1, 0};
  const auto obs = stack_observed(store, r.samples, idx);
  REQUIRE(obs.size() == 6);
  CHECK(obs[0].shape() == ad::Shape{2, 2});
  CHECK(obs[0].at(0, 0) == 26.0);
  CHECK(obs[5].at(1, 1) == doctest::Approx(5.01));

  AnnotationCorpus far;
  far.videos.push_back({"v", {{40.0, 41.0, 0}}});
  CHECK_THROWS_AS(window_samples(far, store, w), std::invalid_argument);
  AnnotationCorpus missing;
  missing.videos.push_back({"nope", {{5.0, 6.0, 0}}});
  CHECK_THROWS_AS(window_samples(missing, store, w), std::invalid_argument);
}

TEST_CASE("successor weights hit the requested normalized entropy") {
  for (double h : {0.0, 0.25, 0.5, 0.75, 1.0}) {
    const auto w = successor_weights(5, h);
    CHECK(std::accumulate(w.begin(), w.end(), 0.0) == doctest::Approx(1.0));
    CHECK(testutil::entropy(w) / std::log(5.0) == doctest::Approx(h).epsilon(1e-6));
    CHECK(std::is_sorted(w.rbegin(), w.rend()));
  }
  CHECK(successor_weights(1, 0.7) == std::vector<double>{1.0});
}

TEST_CASE("synthetic corpora are deterministic and well formed") {
  const SyntheticSpec spec = small_spec();
  const SyntheticCorpus a = generate_synthetic(spec), b = generate_synthetic(spec);
  CHECK(a.features.videos == b.features.videos);
  CHECK(a.corpus.num_segments() == 48);
  CHECK(a.vocab.num_classes() == 8);
  CHECK_NOTHROW(a.corpus.validate(a.vocab));
  for (const auto& succ : a.successors) CHECK(succ.size() == 3);

  for (const Video& v : a.corpus.videos) {
    CHECK(v.segments.front().start == spec.lead_in);
    for (std::size_t k = 0; k + 1 < v.segments.size(); ++k) {
      CHECK(v.segments[k].stop == v.segments[k + 1].start);
      const double len = v.segments[k].stop - v.segments[k].start;
      CHECK(len >= spec.min_duration);
      CHECK(len <= spec.max_duration);
      const auto& succ = a.successors[v.segments[k].activity];
      CHECK(std::any_of(succ.begin(), succ.end(), [&](const auto& p) { return p.first == v.segments[k + 1].activity; }));
    }
    CHECK(a.features.snippets(v.id) * spec.delta >= v.segments.back().stop);
  }

  SyntheticSpec other = spec;
  other.seed = 18;
  CHECK_FALSE(generate_synthetic(other).features.videos == a.features.videos);
}

TEST_CASE("zero successor entropy yields a chain with no shared antecedents") {
  SyntheticSpec spec = small_spec();
  spec.successor_entropy = 0.0;
  const SyntheticCorpus s = generate_synthetic(spec);
  CHECK(build_internal_matrix(s.corpus, s.vocab).nonzero_pairs() == 0);
}

TEST_CASE("variable branching stays in range") {
  SyntheticSpec spec = small_spec();
  spec.max_branching = 5;
  const SyntheticCorpus s = generate_synthetic(spec);
  for (const auto& succ : s.successors) {
    CHECK(succ.size() >= 3);
    CHECK(succ.size() <= 5);
  }
}

TEST_CASE("invalid synthetic specs are refused") {
  SyntheticSpec s = small_spec();
  s.branching = 8;
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  s = small_spec();
  s.successor_entropy = 1.5;
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  s = small_spec();
  s.min_duration = 0.1;
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
}

TEST_CASE("video split is deterministic and disjoint") {
  const SyntheticCorpus s = generate_synthetic(small_spec());
  const auto [train, test] = split_by_video(s.corpus, 0.3, 5);
  const auto [train2, test2] = split_by_video(s.corpus, 0.3, 5);
  CHECK(test.videos.size() == 2);
  CHECK(train.videos.size() == 4);
  std::set<std::string> ids;
  for (const auto& v : train.videos) ids.insert(v.id);
  for (const auto& v : test.videos) CHECK_FALSE(ids.contains(v.id));
  CHECK(test.videos[0].id == test2.videos[0].id);
}

TEST_CASE("pollution is additive gaussian and exact at zero") {
  const SyntheticCorpus s = generate_synthetic(small_spec());
  CHECK(pollute(s.features, {0.0, 3}).videos == s.features.videos);
  const FeatureStore noisy = pollute(s.features, {2.0, 3});
  double sum = 0, sq = 0;
  std::size_t n = 0;
  for (const auto& [id, t] : noisy.videos) {
    const Tensor& clean = s.features.video(id);
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double d = t[i] - clean[i];
      sum += d;
      sq += d * d;
      ++n;
    }
  }
  CHECK(sum / n == doctest::Approx(0.0).epsilon(0.1));
  CHECK(std::sqrt(sq / n) == doctest::Approx(2.0).epsilon(0.05));
  CHECK(pollute(s.features, {2.0, 3}).videos == noisy.videos);
}

TEST_CASE("pair batches pair distinct classes without replacement") {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<ClassId> cls(0, 4);
  std::vector<ClassId> classes(103);
  for (ClassId& c : classes) c = cls(rng);
  const PairStream s = pair_batches(classes, 16, 9);
  CHECK(s.batches.size() == 7);
  std::set<std::size_t> used;
  std::size_t pairs = 0;
  for (const auto& batch : s.batches) {
    for (const auto& [i, j] : batch) {
      CHECK(classes[i] != classes[j]);
      CHECK(used.insert(i).second);
      CHECK(used.insert(j).second);
      ++pairs;
    }
  }
  CHECK(2 * pairs + s.dropped == classes.size());
  CHECK(pair_batches(classes, 16, 9).batches == s.batches);

  const std::vector<ClassId> one = {1, 1, 1};
  CHECK_THROWS_AS(pair_batches(one, 4, 1), std::invalid_argument);
  CHECK_THROWS_AS(pair_batches(classes, 1, 1), std::invalid_argument);
}

TEST_CASE("family grid and shared observation start") {
  CHECK(default_family_grid(4) == std::vector<double>{2.0, 1.5, 1.0, 0.5});
  CHECK(default_family_grid(2) == std::vector<double>{2.0, 1.0});
  CHECK_THROWS_AS(default_family_grid(1), std::invalid_argument);

  const FeatureStore store = ramp_store("v", 80, 2);
  AnnotationCorpus corpus;
  corpus.videos.push_back({"v", {{1.0, 3.0, 0}, {10.0, 12.0, 1}}});
  const auto grid = default_family_grid(4);
  const FamilyResult r = family_batches(corpus, store, 1.5, 0.25, grid);
  CHECK(r.skipped == 1);
  REQUIRE(r.families.size() == 1);
  const auto& m = r.families[0].members;
  REQUIRE(m.size() == 4);
  for (std::size_t k = 0; k < 4; ++k) {
    CHECK(m[k].first_snippet == m[0].first_snippet);
    CHECK(m[k].window.tau_a == grid[k]);
    CHECK(m[k].window.n_o + m[k].window.n_a == m[0].window.n_o + m[0].window.n_a);
  }
  const double bad[] = {1.0, 2.0};
  CHECK_THROWS_AS(family_batches(corpus, store, 1.5, 0.25, bad), std::invalid_argument);
}
