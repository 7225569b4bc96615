#include "ubant/data.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <numeric>
#include <ostream>
#include <random>
#include <set>
#include <stdexcept>

#include "ubant/csv.hpp"

namespace ubant {

// ---------------------------------------------------------------------------
// Feature store

const Tensor& FeatureStore::video(std::string_view id) const {
  auto it = videos.find(id);
  if (it == videos.end()) throw std::out_of_range("no features for video '" + std::string(id) + "'");
  return it->second;
}

std::size_t FeatureStore::num_snippets() const {
  std::size_t n = 0;
  for (const auto& [id, t] : videos) n += t.dim(0);
  return n;
}

FeatureStore read_features(std::istream& in, const std::string& source) {
  FeatureStore store;
  std::map<std::string, std::map<std::size_t, std::vector<double>>, std::less<>> rows;
  bool header = true;
  csv::for_each_row(in, ',', [&](std::size_t line, const std::vector<std::string_view>& f) {
    if (header) {
      header = false;
      if (f.size() < 3 || f[0] != "video_id" || f[1] != "snippet_idx") {
        throw csv::ParseError(source, line, "expected header video_id,snippet_idx,f0,...");
      }
      store.dim = f.size() - 2;
      return;
    }
    if (f.size() != store.dim + 2) {
      throw csv::ParseError(source, line, "expected " + std::to_string(store.dim + 2) + " fields, got " +
                                              std::to_string(f.size()));
    }
    std::size_t idx = 0;
    if (f[0].empty() || !csv::parse_number(f[1], idx)) throw csv::ParseError(source, line, "malformed feature row");
    std::vector<double> v(store.dim);
    for (std::size_t i = 0; i < store.dim; ++i) {
      if (!csv::parse_number(f[i + 2], v[i])) throw csv::ParseError(source, line, "malformed value in column f" + std::to_string(i));
    }
    auto& video = rows[std::string(f[0])];
    if (!video.emplace(idx, std::move(v)).second) {
      throw csv::ParseError(source, line, "duplicate snippet " + std::to_string(idx) + " for video " + std::string(f[0]));
    }
  });
  if (header) throw csv::ParseError(source, 0, "empty file");
  for (auto& [id, snippets] : rows) {
    if (snippets.rbegin()->first + 1 != snippets.size()) {
      throw std::runtime_error(source + ": snippet indices of video " + id + " are not contiguous from 0");
    }
    Tensor t({snippets.size(), store.dim});
    std::size_t r = 0;
    for (const auto& [idx, v] : snippets) std::copy(v.begin(), v.end(), t.data().begin() + static_cast<std::ptrdiff_t>(r++ * store.dim));
    store.videos.emplace(id, std::move(t));
  }
  return store;
}

FeatureStore read_features(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return read_features(in, path);
}

void write_features(std::ostream& out, const FeatureStore& store) {
  out << "video_id,snippet_idx";
  for (std::size_t i = 0; i < store.dim; ++i) out << ",f" << i;
  out << '\n';
  for (const auto& [id, t] : store.videos) {
    for (std::size_t r = 0; r < t.dim(0); ++r) {
      out << id << ',' << r;
      for (std::size_t i = 0; i < store.dim; ++i) out << ',' << csv::format_double(t.at(r, i));
      out << '\n';
    }
  }
}

// ---------------------------------------------------------------------------
// Windowing

namespace {

std::size_t snippet_floor(double t, double delta) {
  return static_cast<std::size_t>(std::floor(t / delta + 1e-9));
}

}  // namespace

WindowResult window_samples(const AnnotationCorpus& corpus, const FeatureStore& store, const AnticipationWindow& window) {
  WindowResult res;
  for (const Video& v : corpus.videos) {
    if (!store.videos.contains(v.id)) {
      throw std::invalid_argument("annotation video '" + v.id + "' has no features in the store");
    }
    const std::size_t available = store.snippets(v.id);
    for (std::size_t k = 0; k < v.segments.size(); ++k) {
      const Segment& s = v.segments[k];
      const std::size_t start = snippet_floor(s.start, window.delta);
      if (start < window.n_o + window.n_a) {
        ++res.dropped;
        continue;
      }
      const std::size_t end = start - window.n_a;
      if (end > available) {
        throw std::invalid_argument("video '" + v.id + "' has " + std::to_string(available) +
                                    " snippets but segment " + std::to_string(k) + " needs " + std::to_string(end));
      }
      res.samples.push_back({v.id, k, s.activity, end - window.n_o, window});
    }
  }
  return res;
}

std::vector<Tensor> stack_observed(const FeatureStore& store, std::span<const TrainSample> samples,
                                   std::span<const std::size_t> idx) {
  if (idx.empty()) throw std::invalid_argument("stack_observed: empty selection");
  const std::size_t n_o = samples[idx[0]].window.n_o;
  const std::size_t d = store.dim;
  std::vector<Tensor> out(n_o, Tensor({idx.size(), d}));
  for (std::size_t b = 0; b < idx.size(); ++b) {
    const TrainSample& s = samples[idx[b]];
    if (s.window.n_o != n_o) throw std::invalid_argument("stack_observed: mixed observation lengths in one batch");
    const Tensor& video = store.video(s.video_id);
    for (std::size_t t = 0; t < n_o; ++t) {
      const double* src = &video[(s.first_snippet + t) * d];
      std::copy(src, src + d, &out[t][b * d]);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic corpora

void SyntheticSpec::validate() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument("synthetic spec: " + what); };
  if (classes < 2) fail("classes must be >= 2");
  if (branching < 1 || branching >= classes) fail("branching must lie in [1, classes - 1]");
  if (max_branching != 0 && (max_branching < branching || max_branching >= classes)) {
    fail("max_branching must be 0 or lie in [branching, classes - 1]");
  }
  if (!(successor_entropy >= 0.0 && successor_entropy <= 1.0)) fail("successor_entropy must lie in [0, 1]");
  if (dim == 0) fail("dim must be positive");
  if (!(feature_noise >= 0.0)) fail("feature_noise must be >= 0");
  if (!(noise_spread >= 0.0 && noise_spread < 1.0)) fail("noise_spread must lie in [0, 1)");
  if (videos == 0 || segments_per_video == 0) fail("videos and segments_per_video must be positive");
  if (!(delta > 0.0)) fail("delta must be positive");
  if (!(min_duration >= delta && max_duration >= min_duration)) fail("need delta <= min_duration <= max_duration");
  if (!(lead_in >= 0.0)) fail("lead_in must be >= 0");
}

std::vector<double> successor_weights(std::size_t branching, double entropy) {
  std::vector<double> w(branching, 0.0);
  if (branching == 1 || entropy <= 0.0) {
    w[0] = 1.0;
    return w;
  }
  auto weights = [&](double lambda) {
    std::vector<double> p(branching);
    double z = 0.0;
    for (std::size_t r = 0; r < branching; ++r) z += (p[r] = std::exp(-lambda * static_cast<double>(r)));
    for (double& v : p) v /= z;
    return p;
  };
  auto normalized_entropy = [&](const std::vector<double>& p) {
    double h = 0.0;
    for (double v : p) {
      if (v > 0.0) h -= v * std::log(v);
    }
    return h / std::log(static_cast<double>(branching));
  };
  if (entropy >= 1.0) return weights(0.0);
  double lo = 0.0, hi = 60.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (normalized_entropy(weights(mid)) > entropy) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return weights(0.5 * (lo + hi));
}

namespace {

std::size_t draw(const std::vector<std::pair<ClassId, double>>& dist, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double x = u(rng);
  for (const auto& [c, p] : dist) {
    if ((x -= p) < 0.0) return c;
  }
  return dist.back().first;
}

}  // namespace

SyntheticCorpus generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  std::seed_seq seq{spec.seed, std::uint64_t{0x5e7}};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> normal(0.0, 1.0);

  SyntheticCorpus out;
  const std::size_t c_count = spec.classes;
  const auto nouns = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(c_count))));
  const std::size_t verbs = (c_count + nouns - 1) / nouns;
  for (std::size_t v = 0; v < verbs; ++v) out.vocab.verbs[static_cast<Vocabulary::PartId>(v)] = "verb_" + std::to_string(v);
  for (std::size_t n = 0; n < nouns; ++n) out.vocab.nouns[static_cast<Vocabulary::PartId>(n)] = "noun_" + std::to_string(n);
  std::vector<std::pair<Vocabulary::PartId, Vocabulary::PartId>> pairs;
  for (std::size_t c = 0; c < c_count; ++c) {
    pairs.emplace_back(static_cast<Vocabulary::PartId>(c / nouns), static_cast<Vocabulary::PartId>(c % nouns));
  }
  out.vocab.set_activities(pairs);

  std::uniform_int_distribution<std::size_t> branching(spec.branching, std::max(spec.branching, spec.max_branching));
  out.successors.resize(c_count);
  for (std::size_t c = 0; c < c_count; ++c) {
    const std::size_t k = spec.max_branching > spec.branching ? branching(rng) : spec.branching;
    const std::vector<double> weights = successor_weights(k, spec.successor_entropy);
    std::vector<ClassId> others;
    for (std::size_t j = 0; j < c_count; ++j) {
      if (j != c) others.push_back(j);
    }
    std::shuffle(others.begin(), others.end(), rng);
    for (std::size_t r = 0; r < k; ++r) out.successors[c].emplace_back(others[r], weights[r]);
  }

  out.embeddings = Tensor({c_count, spec.dim});
  for (double& v : out.embeddings.data()) v = normal(rng);

  out.features.source = FeatureStore::Source::synthetic;
  out.features.dim = spec.dim;
  const auto min_steps = static_cast<std::size_t>(std::llround(spec.min_duration / spec.delta));
  const auto max_steps = static_cast<std::size_t>(std::llround(spec.max_duration / spec.delta));
  const std::size_t lead = snippet_floor(spec.lead_in, spec.delta);
  std::uniform_int_distribution<std::size_t> duration(min_steps, max_steps);
  std::uniform_int_distribution<std::size_t> first_class(0, c_count - 1);
  std::uniform_real_distribution<double> spread(1.0 - spec.noise_spread, 1.0 + spec.noise_spread);
  const int width = static_cast<int>(std::to_string(spec.videos - 1).size());

  for (std::size_t vi = 0; vi < spec.videos; ++vi) {
    std::string id = std::to_string(vi);
    Video video;
    video.id = "vid_" + std::string(static_cast<std::size_t>(width) - std::min<std::size_t>(id.size(), width), '0') + id;
    std::vector<ClassId> snippet_class(lead, c_count);  // c_count marks background
    ClassId c = first_class(rng);
    for (std::size_t k = 0; k < spec.segments_per_video; ++k) {
      if (k > 0) c = draw(out.successors[c], rng);
      const std::size_t begin = snippet_class.size();
      const std::size_t len = duration(rng);
      snippet_class.insert(snippet_class.end(), len, c);
      video.segments.push_back({static_cast<double>(begin) * spec.delta, static_cast<double>(begin + len) * spec.delta, c});
    }
    const double sigma = spec.feature_noise * (spec.noise_spread > 0.0 ? spread(rng) : 1.0);
    Tensor feats({snippet_class.size(), spec.dim});
    for (std::size_t t = 0; t < snippet_class.size(); ++t) {
      for (std::size_t i = 0; i < spec.dim; ++i) {
        const double base = snippet_class[t] < c_count ? out.embeddings.at(snippet_class[t], i) : 0.0;
        feats.at(t, i) = base + sigma * normal(rng);
      }
    }
    out.features.videos.emplace(video.id, std::move(feats));
    out.corpus.videos.push_back(std::move(video));
  }
  return out;
}

std::pair<AnnotationCorpus, AnnotationCorpus> split_by_video(const AnnotationCorpus& corpus, double test_fraction,
                                                             std::uint64_t seed) {
  if (!(test_fraction >= 0.0 && test_fraction < 1.0)) throw std::invalid_argument("test_fraction must lie in [0, 1)");
  std::vector<std::size_t> order(corpus.videos.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_test = static_cast<std::size_t>(std::ceil(test_fraction * static_cast<double>(order.size()) - 1e-9));
  std::set<std::size_t> test(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test));
  std::pair<AnnotationCorpus, AnnotationCorpus> out;
  for (std::size_t i = 0; i < corpus.videos.size(); ++i) {
    (test.contains(i) ? out.second : out.first).videos.push_back(corpus.videos[i]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Noise

FeatureStore pollute(const FeatureStore& store, const NoiseConfig& cfg) {
  if (!(cfg.eta >= 0.0)) throw std::invalid_argument("pollute: eta must be >= 0");
  FeatureStore out = store;
  if (cfg.eta == 0.0) return out;
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (auto& [id, t] : out.videos) {
    for (double& v : t.data()) v += cfg.eta * normal(rng);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Batch streams

PairStream pair_batches(std::span<const ClassId> classes, std::size_t batch_size, std::uint64_t seed) {
  if (batch_size < 2) throw std::invalid_argument("pair_batches: batch size must be >= 2");
  if (std::set<ClassId>(classes.begin(), classes.end()).size() < 2) {
    throw std::invalid_argument("pair_batches: need samples from at least two classes to form pairs");
  }
  std::vector<std::size_t> order(classes.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  PairStream out;
  std::vector<std::size_t> carry;
  for (std::size_t begin = 0; begin < order.size(); begin += batch_size) {
    const std::size_t end = std::min(order.size(), begin + batch_size);
    std::map<ClassId, std::deque<std::size_t>> groups;
    for (std::size_t i : carry) groups[classes[i]].push_back(i);
    for (std::size_t k = begin; k < end; ++k) groups[classes[order[k]]].push_back(order[k]);

    std::vector<SamplePair> batch;
    while (true) {
      // two largest groups; lower class id wins ties
      auto first = groups.end(), second = groups.end();
      for (auto it = groups.begin(); it != groups.end(); ++it) {
        if (it->second.empty()) continue;
        if (first == groups.end() || it->second.size() > first->second.size()) {
          second = first;
          first = it;
        } else if (second == groups.end() || it->second.size() > second->second.size()) {
          second = it;
        }
      }
      if (second == groups.end()) break;
      batch.emplace_back(first->second.front(), second->second.front());
      first->second.pop_front();
      second->second.pop_front();
    }
    carry.clear();
    for (const auto& [c, g] : groups) carry.insert(carry.end(), g.begin(), g.end());
    if (batch.empty()) ++out.unpairable_batches;
    out.batches.push_back(std::move(batch));
  }
  out.dropped = carry.size();
  return out;
}

std::vector<double> default_family_grid(std::size_t m) {
  constexpr std::size_t kGrid = 8;
  if (m < 2 || m > kGrid) throw std::invalid_argument("family size must lie in [2, 8]");
  std::vector<double> out;
  for (std::size_t i = 0; i < m; ++i) out.push_back(2.0 - 0.25 * static_cast<double>(i * kGrid / m));
  return out;
}

FamilyResult family_batches(const AnnotationCorpus& corpus, const FeatureStore& store, double tau_o, double delta,
                            std::span<const double> tau_a_grid) {
  if (tau_a_grid.size() < 2) throw std::invalid_argument("family_batches: grid needs at least two entries");
  for (std::size_t m = 1; m < tau_a_grid.size(); ++m) {
    if (!(tau_a_grid[m] < tau_a_grid[m - 1])) throw std::invalid_argument("family_batches: grid must be strictly decreasing");
  }
  std::vector<AnticipationWindow> windows;
  for (double tau_a : tau_a_grid) {
    windows.push_back(AnticipationWindow::make(tau_o + (tau_a_grid[0] - tau_a), tau_a, delta));
  }
  const WindowResult base = window_samples(corpus, store, windows[0]);
  FamilyResult res;
  res.skipped = base.dropped;
  for (const TrainSample& s : base.samples) {
    FamilySample fam;
    for (const AnticipationWindow& w : windows) {
      TrainSample member = s;
      member.window = w;
      fam.members.push_back(std::move(member));
    }
    res.families.push_back(std::move(fam));
  }
  return res;
}

}  // namespace ubant
