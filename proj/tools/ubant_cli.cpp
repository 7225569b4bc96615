// ubant: statistics, synthetic data, training and evaluation from the shell.
//
// Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical failure.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "ubant/cooccur.hpp"
#include "ubant/csv.hpp"
#include "ubant/data.hpp"
#include "ubant/eval.hpp"
#include "ubant/labelspace.hpp"
#include "ubant/model.hpp"
#include "ubant/train.hpp"

#ifndef UBANT_VERSION
#define UBANT_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ubant;

namespace {

constexpr int kUsage = 2;
constexpr int kData = 3;
constexpr int kNumerical = 4;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256 failed");
  }
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  return os.str();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::string fmt(double v) { return csv::format_double(v); }

// Collects written files so the manifest can list them with digests.
class Run {
 public:
  Run(std::string command, fs::path out) : command_(std::move(command)), out_(std::move(out)) {
    fs::create_directories(out_);
  }

  void input(const std::string& path) {
    if (path.empty()) return;
    inputs_.push_back({{"path", path}, {"sha256", sha256_hex(slurp(path))}});
  }

  void write(const std::string& name, const std::string& bytes) {
    std::ofstream f(out_ / name, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + (out_ / name).string());
    f << bytes;
    if (!f) throw std::runtime_error("write failed for " + (out_ / name).string());
    outputs_.push_back({{"path", name}, {"sha256", sha256_hex(bytes)}});
  }

  template <class Fn>
  void write_with(const std::string& name, Fn&& fn) {
    std::ostringstream os;
    fn(os);
    write(name, os.str());
  }

  void finish(const json& config, std::uint64_t seed) {
    const json manifest = {{"command", command_},   {"code_version", UBANT_VERSION}, {"seed", seed},
                           {"config", config},      {"inputs", inputs_},           {"outputs", outputs_}};
    std::ofstream f(out_ / "manifest.json", std::ios::binary);
    f << manifest.dump(2) << '\n';
  }

  const fs::path& dir() const { return out_; }

 private:
  std::string command_;
  fs::path out_;
  json inputs_ = json::array();
  json outputs_ = json::array();
};

struct Global {
  std::uint64_t seed = 0;
  std::string out = "out";
};

// ---- shared loaders ----

struct VocabPaths {
  std::string verbs, nouns, activities;
};

Vocabulary load_vocab(const VocabPaths& p, const std::vector<AnnotationRow>* derive_from, Run& run) {
  Vocabulary vocab;
  run.input(p.verbs);
  run.input(p.nouns);
  vocab.verbs = read_lemmas(p.verbs);
  vocab.nouns = read_lemmas(p.nouns);
  if (!p.activities.empty()) {
    run.input(p.activities);
    std::ifstream in(p.activities);
    if (!in) throw std::runtime_error("cannot open " + p.activities);
    vocab.set_activities(read_activities(in, p.activities));
  } else if (derive_from) {
    add_activities_from(vocab, *derive_from);
  } else {
    throw UsageError("--activities is required");
  }
  vocab.validate();
  return vocab;
}

// Rows whose (verb, noun) pair the vocabulary does not know are dropped.
AnnotationCorpus known_rows(std::vector<AnnotationRow> rows, const Vocabulary& vocab, std::size_t* skipped) {
  const std::size_t before = rows.size();
  std::erase_if(rows, [&](const AnnotationRow& r) { return !vocab.find_activity(r.verb, r.noun); });
  if (skipped) *skipped = before - rows.size();
  return make_corpus(rows, vocab);
}

AnnotationCorpus load_corpus(const std::string& path, const Vocabulary& vocab, Run& run, std::size_t* skipped) {
  run.input(path);
  return known_rows(read_annotations(path), vocab, skipped);
}

std::vector<double> parse_list(const std::string& s, const char* what) {
  std::vector<double> out;
  for (std::string_view f : csv::split(s, ',')) {
    double v = 0.0;
    if (!csv::parse_number(f, v)) throw UsageError(std::string("malformed ") + what + " list: " + s);
    out.push_back(v);
  }
  return out;
}

std::string matrix_csv(const UncertaintyMatrix& m) {
  std::ostringstream os;
  write_matrix_csv(os, m);
  return os.str();
}

json top_pairs(const UncertaintyMatrix& m, std::size_t n) {
  std::vector<std::tuple<std::int64_t, std::size_t, std::size_t>> pairs;
  for (std::size_t a = 0; a < m.size(); ++a) {
    for (std::size_t b = a + 1; b < m.size(); ++b) {
      if (m.at(a, b) > 0) pairs.emplace_back(m.at(a, b), a, b);
    }
  }
  std::stable_sort(pairs.begin(), pairs.end(), [](const auto& x, const auto& y) { return std::get<0>(x) > std::get<0>(y); });
  json out = json::array();
  for (std::size_t i = 0; i < std::min(n, pairs.size()); ++i) {
    out.push_back({{"a", std::get<1>(pairs[i])}, {"b", std::get<2>(pairs[i])}, {"score", std::get<0>(pairs[i])}});
  }
  return out;
}

// ---- stats ----

struct StatsArgs {
  std::string annotations;
  VocabPaths vocab;
  std::string edges;
  std::vector<std::string> relations;
  std::size_t top = 20;
};

int cmd_stats(const Global& g, const StatsArgs& a) {
  Run run("stats", g.out);
  run.input(a.annotations);
  const std::vector<AnnotationRow> rows = read_annotations(a.annotations);
  const Vocabulary vocab = load_vocab(a.vocab, &rows, run);
  const AnnotationCorpus corpus = make_corpus(rows, vocab);
  const UncertaintyMatrix internal = build_internal_matrix(corpus, vocab);

  run.write_with("activities.csv", [&](std::ostream& os) { write_activities(os, vocab); });
  run.write("internal_matrix.csv", matrix_csv(internal));
  json summary = {{"classes", vocab.num_classes()},
                  {"videos", corpus.videos.size()},
                  {"segments", corpus.num_segments()},
                  {"internal", {{"nonzero_pairs", internal.nonzero_pairs()}, {"top_pairs", top_pairs(internal, a.top)}}}};
  std::optional<UncertaintyMatrix> merged;
  if (!a.edges.empty()) {
    run.input(a.edges);
    KnowledgeEdgeSet edges = read_edges(a.edges);
    if (!a.relations.empty()) edges.selected_relations = {a.relations.begin(), a.relations.end()};
    const ExternalMatrices ext = build_external_matrix(edges, vocab);
    run.write("external_verb_matrix.csv", matrix_csv(ext.verb));
    run.write("external_noun_matrix.csv", matrix_csv(ext.noun));
    run.write("external_activity_matrix.csv", matrix_csv(ext.activity));
    summary["external"] = {{"edges", edges.edges.size()},
                           {"relations", std::vector<std::string>(edges.selected_relations.begin(), edges.selected_relations.end())},
                           {"nonzero_pairs", ext.activity.nonzero_pairs()},
                           {"top_pairs", top_pairs(ext.activity, a.top)}};
    merged = internal + ext.activity;
  } else {
    merged = internal;
  }
  summary["merged"] = {{"nonzero_pairs", merged->nonzero_pairs()}, {"top_pairs", top_pairs(*merged, a.top)}};
  run.write("stats_summary.json", summary.dump(2) + "\n");
  run.finish({{"annotations", a.annotations},
              {"verbs", a.vocab.verbs},
              {"nouns", a.vocab.nouns},
              {"activities", a.vocab.activities},
              {"edges", a.edges},
              {"relations", a.relations},
              {"top", a.top}},
             g.seed);
  std::cout << "classes " << vocab.num_classes() << ", internal nonzero pairs " << internal.nonzero_pairs() << '\n';
  return 0;
}

// ---- gen ----

struct GenArgs {
  SyntheticSpec spec;
  double test_fraction = 0.2;
};

json spec_json(const SyntheticSpec& s) {
  return {{"classes", s.classes},     {"branching", s.branching},       {"max_branching", s.max_branching},
          {"entropy", s.successor_entropy}, {"dim", s.dim},           {"noise", s.feature_noise},
          {"noise_spread", s.noise_spread}, {"videos", s.videos},     {"segments", s.segments_per_video},
          {"min_duration", s.min_duration}, {"max_duration", s.max_duration}, {"lead_in", s.lead_in},
          {"delta", s.delta}};
}

int cmd_gen(const Global& g, GenArgs a) {
  a.spec.seed = derive_seed(g.seed, "data");
  try {
    a.spec.validate();
    if (!(a.test_fraction >= 0.0 && a.test_fraction < 1.0)) throw std::invalid_argument("test fraction must lie in [0, 1)");
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const SyntheticCorpus syn = generate_synthetic(a.spec);
  const auto [train, test] = split_by_video(syn.corpus, a.test_fraction, derive_seed(g.seed, "split"));

  Run run("gen", g.out);
  run.write_with("verbs.csv", [&](std::ostream& os) { write_lemmas(os, syn.vocab.verbs, "verb_id"); });
  run.write_with("nouns.csv", [&](std::ostream& os) { write_lemmas(os, syn.vocab.nouns, "noun_id"); });
  run.write_with("activities.csv", [&](std::ostream& os) { write_activities(os, syn.vocab); });
  run.write_with("annotations.csv", [&](std::ostream& os) { write_annotations(os, syn.corpus, syn.vocab); });
  run.write_with("annotations_train.csv", [&](std::ostream& os) { write_annotations(os, train, syn.vocab); });
  run.write_with("annotations_test.csv", [&](std::ostream& os) { write_annotations(os, test, syn.vocab); });
  run.write_with("features.csv", [&](std::ostream& os) { write_features(os, syn.features); });
  json succ = json::object();
  for (ClassId c = 0; c < syn.successors.size(); ++c) {
    json row = json::array();
    for (const auto& [s, p] : syn.successors[c]) row.push_back({{"class", s}, {"p", p}});
    succ[std::to_string(c)] = row;
  }
  run.write("successors.json", succ.dump(2) + "\n");
  json cfg = spec_json(a.spec);
  cfg["test_fraction"] = a.test_fraction;
  run.finish(cfg, g.seed);
  std::cout << "videos " << syn.corpus.videos.size() << " (train " << train.videos.size() << ", test "
            << test.videos.size() << "), segments " << syn.corpus.num_segments() << '\n';
  return 0;
}

// ---- train ----

struct TrainArgs {
  std::string annotations, features, edges;
  VocabPaths vocab;
  std::string profile = "desk";
  std::string objective = "auto";
  std::string pooling = "mean";
  std::optional<double> alpha, beta, gamma, lr, momentum, weight_decay, tau_o, tau_a, delta;
  std::optional<std::size_t> batch, epochs, hidden, family_size, families_per_step, top_k;
};

TrainConfig resolve_config(const TrainArgs& a, std::uint64_t seed) {
  TrainConfig c;
  if (a.profile == "desk") {
    c = TrainConfig::desk();
  } else if (a.profile == "paper") {
    c = TrainConfig::paper();
  } else {
    throw UsageError("unknown profile '" + a.profile + "' (expected desk or paper)");
  }
  if (a.alpha) c.hp.alpha = *a.alpha;
  if (a.beta) c.hp.beta = *a.beta;
  if (a.gamma) c.hp.gamma = *a.gamma;
  if (a.lr) c.learning_rate = *a.lr;
  if (a.momentum) c.momentum = *a.momentum;
  if (a.weight_decay) c.weight_decay = *a.weight_decay;
  if (a.tau_o) c.tau_o = *a.tau_o;
  if (a.tau_a) c.tau_a = *a.tau_a;
  if (a.delta) c.delta = *a.delta;
  if (a.batch) c.batch_size = *a.batch;
  if (a.epochs) c.epochs = *a.epochs;
  if (a.hidden) c.hidden_dim = *a.hidden;
  if (a.family_size) c.family_size = *a.family_size;
  if (a.families_per_step) c.families_per_step = *a.families_per_step;
  if (a.top_k) c.cooccur_top_k = *a.top_k;
  c.seed = seed;
  try {
    c.objective = parse_objective(a.objective);
    c.pooling = parse_pooling(a.pooling);
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  return c;
}

json config_json(const TrainConfig& c) {
  return {{"alpha", c.hp.alpha},
          {"beta", c.hp.beta},
          {"gamma", c.hp.gamma},
          {"objective", to_string(c.objective)},
          {"uses_ub", c.uses_ub()},
          {"learning_rate", c.learning_rate},
          {"momentum", c.momentum},
          {"weight_decay", c.weight_decay},
          {"batch_size", c.batch_size},
          {"epochs", c.epochs},
          {"family_size", c.family_size},
          {"families_per_step", c.families_per_step},
          {"hidden_dim", c.hidden_dim},
          {"pooling", to_string(c.pooling)},
          {"tau_o", c.tau_o},
          {"tau_a", c.tau_a},
          {"delta", c.delta},
          {"cooccur_top_k", c.cooccur_top_k}};
}

std::string checkpoint_bytes(const AnticipationModel& m) {
  std::ostringstream os(std::ios::binary);
  save_checkpoint(os, m);
  return os.str();
}

int cmd_train(const Global& g, const TrainArgs& a) {
  const TrainConfig cfg = resolve_config(a, g.seed);
  Run run("train", g.out);
  run.input(a.annotations);
  const std::vector<AnnotationRow> rows = read_annotations(a.annotations);
  const Vocabulary vocab = load_vocab(a.vocab, &rows, run);
  std::size_t skipped = 0;
  const AnnotationCorpus corpus = known_rows(rows, vocab, &skipped);
  run.input(a.features);
  const FeatureStore store = read_features(a.features);

  TrainData data;
  data.store = &store;
  const WindowResult windows = window_samples(corpus, store, cfg.window());
  data.samples = windows.samples;
  if (data.samples.empty()) throw std::invalid_argument("no training windows: every segment lacks footage");

  // Statistics come from the training annotations only.
  std::optional<UncertaintyMatrix> external;
  if (!a.edges.empty()) {
    run.input(a.edges);
    external = build_external_matrix(read_edges(a.edges), vocab).activity;
  }
  const LabelSpace labels(build_internal_matrix(corpus, vocab), external, cfg.hp.alpha, cfg.cooccur_top_k);
  data.labels = &labels;
  std::size_t family_skipped = 0;
  if (cfg.uses_ub() && cfg.hp.beta > 0.0) {
    const std::vector<double> grid = default_family_grid(cfg.family_size);
    FamilyResult fams = family_batches(corpus, store, cfg.tau_o, cfg.delta, grid);
    data.families = std::move(fams.families);
    family_skipped = fams.skipped;
  }

  ModelConfig mc;
  mc.input_dim = store.dim;
  mc.hidden_dim = cfg.hidden_dim;
  mc.num_classes = vocab.num_classes();
  mc.pooling = cfg.pooling;
  AnticipationModel model(mc, derive_seed(g.seed, "init"));

  run.write_with("activities.csv", [&](std::ostream& os) { write_activities(os, vocab); });
  std::ostringstream log;
  TrainResult result;
  try {
    result = train(model, cfg, data, &log);
  } catch (const NumericalError& e) {
    run.write("train_log.jsonl", log.str());
    run.write("model_last_good.ckpt", checkpoint_bytes(model));
    run.finish(config_json(cfg), g.seed);
    std::cerr << "error: " << e.what() << " (last good checkpoint: " << (run.dir() / "model_last_good.ckpt").string()
              << ")\n";
    return kNumerical;
  }
  run.write("train_log.jsonl", log.str());
  run.write("model_final.ckpt", checkpoint_bytes(model));
  run.write("model_best.ckpt", checkpoint_bytes(AnticipationModel(mc, result.best)));

  json epochs = json::array();
  for (const EpochSummary& e : result.epochs) {
    epochs.push_back({{"epoch", e.epoch}, {"steps", e.steps}, {"total", e.total}, {"l_srul", e.srul},
                      {"l_trul", e.trul}, {"l_wd", e.wd}});
  }
  const json summary = {{"samples", data.samples.size()},
                        {"dropped_segments", windows.dropped},
                        {"skipped_rows", skipped},
                        {"families", data.families.size()},
                        {"skipped_families", family_skipped},
                        {"classes", vocab.num_classes()},
                        {"best_epoch", result.best_epoch},
                        {"epochs", epochs}};
  run.write("train_summary.json", summary.dump(2) + "\n");
  json cfg_json = config_json(cfg);
  cfg_json["profile"] = a.profile;
  run.finish(cfg_json, g.seed);
  std::cout << "trained on " << data.samples.size() << " windows; final mean loss "
            << (result.epochs.empty() ? 0.0 : result.epochs.back().total) << '\n';
  return 0;
}

// ---- eval ----

struct EvalArgs {
  std::string checkpoint, annotations, features, train_annotations, edges;
  VocabPaths vocab;
  std::string mode = "metrics";
  double tau_o = 1.5;
  double tau_a = 2.0;
  double delta = 0.25;
  std::string fractions = "0,0.1,0.2,0.3";
  std::string etas = "0,1,5,10";
  std::size_t bins = 10;
  std::size_t many_shot = 10;
  std::size_t parts = 4;
  std::string partition = "pairs";
  std::size_t passes = 50;
  double drop_rate = 0.1;
};

int cmd_eval(const Global& g, const EvalArgs& a) {
  static const std::vector<std::string> modes = {"metrics", "reject", "noise", "histogram", "norms", "partitions", "mcdropout"};
  if (std::find(modes.begin(), modes.end(), a.mode) == modes.end()) throw UsageError("unknown eval mode '" + a.mode + "'");
  AnticipationWindow window;
  try {
    window = AnticipationWindow::make(a.tau_o, a.tau_a, a.delta);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  Run run("eval:" + a.mode, g.out);
  run.input(a.checkpoint);
  const AnticipationModel model = load_checkpoint(a.checkpoint);
  const Vocabulary vocab = load_vocab(a.vocab, nullptr, run);
  if (vocab.num_classes() != model.config().num_classes) {
    throw std::invalid_argument("checkpoint has " + std::to_string(model.config().num_classes) +
                                " classes but the vocabulary lists " + std::to_string(vocab.num_classes()));
  }
  std::size_t skipped = 0;
  const AnnotationCorpus corpus = load_corpus(a.annotations, vocab, run, &skipped);
  run.input(a.features);
  const FeatureStore store = read_features(a.features);
  if (store.dim != model.config().input_dim) {
    throw std::invalid_argument("features have dim " + std::to_string(store.dim) + " but the checkpoint expects [*, " +
                                std::to_string(model.config().input_dim) + "]");
  }
  const std::vector<TrainSample> samples = window_samples(corpus, store, window).samples;
  if (samples.empty()) throw std::invalid_argument("no evaluation windows");

  json cfg = {{"mode", a.mode}, {"tau_o", a.tau_o}, {"tau_a", a.tau_a}, {"delta", a.delta}, {"checkpoint", a.checkpoint},
              {"annotations", a.annotations}, {"features", a.features}};

  if (a.mode == "noise") {
    const std::vector<double> etas = parse_list(a.etas, "eta");
    std::ostringstream os;
    os << "eta,top5,mean_u\n";
    for (const NoiseRow& r : noise_sweep(model, store, samples, etas, derive_seed(g.seed, "noise"))) {
      os << fmt(r.eta) << ',' << fmt(r.top5) << ',' << fmt(r.mean_u) << '\n';
    }
    run.write("noise.csv", os.str());
    cfg["etas"] = etas;
    run.finish(cfg, g.seed);
    return 0;
  }
  if (a.mode == "mcdropout") {
    std::vector<std::size_t> idx(samples.size());
    std::iota(idx.begin(), idx.end(), 0);
    const McDropoutResult r = mc_dropout_forward(model, stack_observed(store, samples, idx), window, a.passes, a.drop_rate,
                                                 derive_seed(g.seed, "dropout"));
    const json out = {{"samples", samples.size()},
                      {"passes", a.passes},
                      {"drop_rate", a.drop_rate},
                      {"model_uncertainty", r.model_uncertainty},
                      {"mean_predictive_entropy", r.mean_predictive_entropy},
                      {"spread", r.spread},
                      {"mean_data_uncertainty", r.mean_data_uncertainty}};
    run.write("mcdropout.json", out.dump(2) + "\n");
    cfg["passes"] = a.passes;
    cfg["drop_rate"] = a.drop_rate;
    run.finish(cfg, g.seed);
    return 0;
  }
  if (a.mode == "norms") {
    if (a.train_annotations.empty()) throw UsageError("--train-annotations is required for mode norms");
    const AnnotationCorpus train = load_corpus(a.train_annotations, vocab, run, nullptr);
    std::vector<std::size_t> counts(vocab.num_classes(), 0);
    for (const Video& v : train.videos) {
      for (const Segment& s : v.segments) ++counts[s.activity];
    }
    const Tensor& w = model.params().get("head_c.w");  // [d, C]
    Tensor rows({w.dim(1), w.dim(0)});
    for (std::size_t i = 0; i < w.dim(0); ++i) {
      for (std::size_t c = 0; c < w.dim(1); ++c) rows.at(c, i) = w.at(i, c);
    }
    const WeightNormReport r = weight_norm_report(rows, counts);
    std::ostringstream os;
    os << "rank,class,count,norm\n";
    for (std::size_t i = 0; i < r.rows.size(); ++i) {
      os << i << ',' << r.rows[i].cls << ',' << r.rows[i].count << ',' << fmt(r.rows[i].norm) << '\n';
    }
    os << "# head_mean," << fmt(r.head_mean) << "\n# tail_mean," << fmt(r.tail_mean) << '\n';
    run.write("weight_norms.csv", os.str());
    run.finish(cfg, g.seed);
    return 0;
  }

  const Evaluation ev = evaluate(model, store, samples);
  if (a.mode == "metrics") {
    json out = to_json(metric_report(ev.probs, ev.truths, ev.u_hat, a.many_shot));
    out["skipped_rows"] = skipped;
    const FamilyResult fams = family_batches(corpus, store, a.tau_o, a.delta, default_family_grid(4));
    out["family_order_tau"] = fams.families.empty() ? json(nullptr) : json(family_order_tau(model, store, fams.families));
    run.write("metrics.json", out.dump(2) + "\n");
  } else if (a.mode == "reject") {
    const std::vector<double> fractions = parse_list(a.fractions, "fraction");
    std::ostringstream os;
    os << "R,accuracy,retained\n";
    for (const RejectionPoint& p : rejection_curve(ev.probs, ev.truths, ev.u_hat, fractions)) {
      os << fmt(p.fraction) << ',' << fmt(p.accuracy) << ',' << p.retained << '\n';
    }
    run.write("rejection.csv", os.str());
    cfg["fractions"] = fractions;
  } else if (a.mode == "histogram") {
    const Histogram h = uncertainty_histogram(ev.u_hat, a.bins);
    std::ostringstream os;
    os << "bin,lower,upper,count\n";
    for (std::size_t b = 0; b < h.counts.size(); ++b) {
      os << b << ',' << fmt(static_cast<double>(b) / static_cast<double>(a.bins)) << ','
         << fmt(static_cast<double>(b + 1) / static_cast<double>(a.bins)) << ',' << h.counts[b] << '\n';
    }
    if (h.degenerate) os << "# degenerate: all uncertainties equal " << fmt(h.min) << '\n';
    run.write("histogram.csv", os.str());
    cfg["bins"] = a.bins;
  } else if (a.mode == "partitions") {
    ClassPartitionReport r;
    if (a.partition == "pairs") {
      if (a.train_annotations.empty()) throw UsageError("--train-annotations is required for pair partitions");
      const AnnotationCorpus train = load_corpus(a.train_annotations, vocab, run, nullptr);
      UncertaintyMatrix merged = build_internal_matrix(train, vocab);
      if (!a.edges.empty()) {
        run.input(a.edges);
        merged = merged + build_external_matrix(read_edges(a.edges), vocab).activity;
      }
      r = partition_by_pairs(merged, ev.probs, ev.truths, a.parts);
    } else if (a.partition == "samples") {
      r = partition_by_uncertainty(ev.probs, ev.truths, ev.u_hat, a.parts);
    } else {
      throw UsageError("unknown partition '" + a.partition + "' (expected pairs or samples)");
    }
    std::ostringstream os;
    os << "partition,samples,top5\n";
    for (const PartitionRow& row : r.rows) {
      os << row.label << ',' << row.samples << ',' << (row.accuracy ? fmt(*row.accuracy) : std::string("undefined")) << '\n';
    }
    run.write("partitions.csv", os.str());
    cfg["partition"] = a.partition;
    cfg["parts"] = a.parts;
  }
  run.finish(cfg, g.seed);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Uncertainty-boosted activity anticipation"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Key-value config file (TOML/INI syntax)");
  app.set_version_flag("--version", UBANT_VERSION);
  Global g;
  app.add_option("--seed", g.seed, "Root seed for every random stream");
  app.add_option("--out", g.out, "Output directory");

  auto add_vocab = [](CLI::App* cmd, VocabPaths& v, bool activities_required) {
    cmd->add_option("--verbs", v.verbs, "Verb vocabulary CSV")->required()->check(CLI::ExistingFile);
    cmd->add_option("--nouns", v.nouns, "Noun vocabulary CSV")->required()->check(CLI::ExistingFile);
    auto* opt = cmd->add_option("--activities", v.activities, "Activity id CSV")->check(CLI::ExistingFile);
    if (activities_required) opt->required();
  };

  StatsArgs sa;
  auto* stats = app.add_subcommand("stats", "Build uncertainty matrices from annotations and an edge dump");
  stats->add_option("--annotations", sa.annotations, "Annotation CSV")->required()->check(CLI::ExistingFile);
  add_vocab(stats, sa.vocab, false);
  stats->add_option("--edges", sa.edges, "Knowledge edge TSV")->check(CLI::ExistingFile);
  stats->add_option("--relations", sa.relations, "Selected relation names")->delimiter(',');
  stats->add_option("--top", sa.top, "Pairs listed in the summary");

  GenArgs ga;
  auto* gen = app.add_subcommand("gen", "Write a synthetic corpus");
  gen->add_option("--classes", ga.spec.classes);
  gen->add_option("--branching", ga.spec.branching);
  gen->add_option("--max-branching", ga.spec.max_branching);
  gen->add_option("--entropy", ga.spec.successor_entropy);
  gen->add_option("--dim", ga.spec.dim);
  gen->add_option("--noise", ga.spec.feature_noise);
  gen->add_option("--noise-spread", ga.spec.noise_spread);
  gen->add_option("--videos", ga.spec.videos);
  gen->add_option("--segments", ga.spec.segments_per_video);
  gen->add_option("--min-duration", ga.spec.min_duration);
  gen->add_option("--max-duration", ga.spec.max_duration);
  gen->add_option("--lead-in", ga.spec.lead_in);
  gen->add_option("--delta", ga.spec.delta);
  gen->add_option("--test-fraction", ga.test_fraction);

  TrainArgs ta;
  auto* tr = app.add_subcommand("train", "Train the anticipation model");
  tr->add_option("--annotations", ta.annotations, "Training annotation CSV")->required()->check(CLI::ExistingFile);
  tr->add_option("--features", ta.features, "Feature CSV")->required()->check(CLI::ExistingFile);
  add_vocab(tr, ta.vocab, false);
  tr->add_option("--edges", ta.edges, "Knowledge edge TSV")->check(CLI::ExistingFile);
  tr->add_option("--profile", ta.profile, "desk or paper");
  tr->add_option("--objective", ta.objective, "auto, ub or plain");
  tr->add_option("--pooling", ta.pooling, "mean, max or min");
  tr->add_option("--alpha", ta.alpha);
  tr->add_option("--beta", ta.beta);
  tr->add_option("--gamma", ta.gamma);
  tr->add_option("--lr", ta.lr);
  tr->add_option("--momentum", ta.momentum);
  tr->add_option("--weight-decay", ta.weight_decay);
  tr->add_option("--tau-o", ta.tau_o);
  tr->add_option("--tau-a", ta.tau_a);
  tr->add_option("--delta", ta.delta);
  tr->add_option("--batch", ta.batch);
  tr->add_option("--epochs", ta.epochs);
  tr->add_option("--hidden", ta.hidden);
  tr->add_option("--family-size", ta.family_size);
  tr->add_option("--families-per-step", ta.families_per_step);
  tr->add_option("--top-k", ta.top_k, "Cap on co-occurrence set size (0 = none)");

  EvalArgs ea;
  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint");
  ev->add_option("--checkpoint", ea.checkpoint)->required()->check(CLI::ExistingFile);
  ev->add_option("--annotations", ea.annotations, "Evaluation annotation CSV")->required()->check(CLI::ExistingFile);
  ev->add_option("--features", ea.features)->required()->check(CLI::ExistingFile);
  add_vocab(ev, ea.vocab, true);
  ev->add_option("--train-annotations", ea.train_annotations)->check(CLI::ExistingFile);
  ev->add_option("--edges", ea.edges)->check(CLI::ExistingFile);
  ev->add_option("--mode", ea.mode, "metrics, reject, noise, histogram, norms, partitions or mcdropout");
  ev->add_option("--tau-o", ea.tau_o);
  ev->add_option("--tau-a", ea.tau_a);
  ev->add_option("--delta", ea.delta);
  ev->add_option("--fractions", ea.fractions);
  ev->add_option("--etas", ea.etas);
  ev->add_option("--bins", ea.bins);
  ev->add_option("--many-shot", ea.many_shot);
  ev->add_option("--parts", ea.parts);
  ev->add_option("--partition", ea.partition, "pairs or samples");
  ev->add_option("--passes", ea.passes);
  ev->add_option("--drop-rate", ea.drop_rate);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsage;
  }

  try {
    if (*stats) return cmd_stats(g, sa);
    if (*gen) return cmd_gen(g, ga);
    if (*tr) return cmd_train(g, ta);
    if (*ev) return cmd_eval(g, ea);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kData;
  }
  return kUsage;
}
