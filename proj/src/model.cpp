#include "ubant/model.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace ubant {

// ---------------------------------------------------------------------------
// Window / config

AnticipationWindow AnticipationWindow::make(double tau_o, double tau_a, double delta, std::size_t target_steps) {
  if (!(delta > 0.0)) throw std::invalid_argument("window: delta must be positive");
  auto snippets = [delta](double tau, const char* name) {
    const double q = tau / delta;
    const double r = std::round(q);
    if (!(tau > 0.0) || std::abs(q - r) > 1e-9 || r < 1.0) {
      throw std::invalid_argument(std::string("window: ") + name + "=" + std::to_string(tau) +
                                  " is not a positive multiple of delta=" + std::to_string(delta));
    }
    return static_cast<std::size_t>(r);
  };
  AnticipationWindow w;
  w.tau_o = tau_o;
  w.tau_a = tau_a;
  w.delta = delta;
  w.n_o = snippets(tau_o, "tau_o");
  w.n_a = snippets(tau_a, "tau_a");
  w.target_steps = target_steps;
  return w;
}

Pooling parse_pooling(std::string_view s) {
  if (s == "mean") return Pooling::mean;
  if (s == "max") return Pooling::max;
  if (s == "min") return Pooling::min;
  throw std::invalid_argument("unknown pooling '" + std::string(s) + "' (expected mean, max or min)");
}

const char* to_string(Pooling p) {
  switch (p) {
    case Pooling::mean: return "mean";
    case Pooling::max: return "max";
    case Pooling::min: return "min";
  }
  return "?";
}

void ModelConfig::validate() const {
  if (input_dim == 0 || hidden_dim == 0 || num_classes < 2) {
    throw std::invalid_argument("model config: input_dim, hidden_dim must be positive and num_classes >= 2");
  }
  if (!(u_floor > 0.0) || !(u_ceiling > u_floor)) {
    throw std::invalid_argument("model config: need 0 < u_floor < u_ceiling");
  }
}

// ---------------------------------------------------------------------------
// Parameters

Tensor& ParamSet::add(std::string name, Tensor init) {
  if (contains(name)) throw std::invalid_argument("duplicate parameter " + name);
  entries_.emplace_back(std::move(name), std::move(init));
  return entries_.back().second;
}

Tensor& ParamSet::get(std::string_view name) {
  for (auto& [n, t] : entries_) {
    if (n == name) return t;
  }
  throw std::out_of_range("no parameter named " + std::string(name));
}

const Tensor& ParamSet::get(std::string_view name) const { return const_cast<ParamSet*>(this)->get(name); }

bool ParamSet::contains(std::string_view name) const {
  for (const auto& [n, t] : entries_) {
    if (n == name) return true;
  }
  return false;
}

BoundParams::BoundParams(Graph& g, const ParamSet& params, bool requires_grad) : graph_(&g) {
  for (const auto& [name, t] : params.entries()) {
    index_.emplace(name, vars_.size());
    vars_.push_back(requires_grad ? g.variable(t) : g.constant(t));
  }
}

BoundParams::BoundParams(const ParamSet& layout, std::span<const Var> vars) {
  if (vars.size() != layout.size() || vars.empty()) {
    throw std::invalid_argument("BoundParams: " + std::to_string(vars.size()) + " nodes for " +
                                std::to_string(layout.size()) + " parameters");
  }
  graph_ = &vars[0].graph();
  for (std::size_t i = 0; i < vars.size(); ++i) {
    const auto& [name, t] = layout.entries()[i];
    if (vars[i].shape() != t.shape()) throw std::invalid_argument("BoundParams: shape mismatch for " + name);
    index_.emplace(name, i);
    vars_.push_back(vars[i]);
  }
}

Var BoundParams::operator[](std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) throw std::out_of_range("no bound parameter named " + std::string(name));
  return vars_[it->second];
}

namespace {

Tensor uniform(ad::Shape shape, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = dist(rng);
  return t;
}

void add_gru(ParamSet& ps, const std::string& prefix, std::size_t in, std::size_t hidden, std::mt19937_64& rng) {
  const double bx = 1.0 / std::sqrt(static_cast<double>(in));
  const double bh = 1.0 / std::sqrt(static_cast<double>(hidden));
  for (const char* gate : {"z", "r", "n"}) {
    ps.add(prefix + ".w" + gate, uniform({in, hidden}, bx, rng));
    ps.add(prefix + ".u" + gate, uniform({hidden, hidden}, bh, rng));
    ps.add(prefix + ".b" + gate, uniform({1, hidden}, bh, rng));
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Backbone

void GruBackbone::init(ParamSet& params, std::mt19937_64& rng) const {
  add_gru(params, "enc", input_dim_, hidden_dim_, rng);
  add_gru(params, "dec", input_dim_, hidden_dim_, rng);
}

Var GruBackbone::cell(const BoundParams& p, const std::string& prefix, Var x, Var h) const {
  using namespace ad;
  auto gate = [&](const char* g) {
    return add(add(matmul(x, p[prefix + ".w" + g]), matmul(h, p[prefix + ".u" + g])), p[prefix + ".b" + g]);
  };
  Var z = sigmoid(gate("z"));
  Var r = sigmoid(gate("r"));
  Var n = ad::tanh(add(add(matmul(x, p[prefix + ".wn"]), mul(r, matmul(h, p[prefix + ".un"]))), p[prefix + ".bn"]));
  // (1 - z) * n + z * h
  return add(n, mul(z, sub(h, n)));
}

BackboneOutput GruBackbone::forward(const BoundParams& p, std::span<const Var> observed, std::size_t steps) const {
  if (observed.empty()) throw std::invalid_argument("GruBackbone: no observed snippets");
  const std::size_t batch = observed[0].shape()[0];
  Graph& g = p.graph();
  BackboneOutput out;
  Var h = g.constant(Tensor({batch, hidden_dim_}, 0.0));
  for (const Var& x : observed) {
    h = cell(p, "enc", x, h);
    out.hidden_trace.push_back(h);
  }
  const Var last = observed.back();
  for (std::size_t k = 0; k < steps; ++k) {
    h = cell(p, "dec", last, h);
    out.features.push_back(h);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Model

AnticipationModel::AnticipationModel(ModelConfig config, std::uint64_t init_seed)
    : config_(config), backbone_(std::make_unique<GruBackbone>(config.input_dim, config.hidden_dim)) {
  config_.validate();
  std::mt19937_64 rng(init_seed);
  backbone_->init(params_, rng);
  const std::size_t f = backbone_->feature_dim();
  const double b = 1.0 / std::sqrt(static_cast<double>(f));
  params_.add("head_c.w", uniform({f, config_.num_classes}, b, rng));
  params_.add("head_c.b", uniform({1, config_.num_classes}, b, rng));
  params_.add("head_u.w", uniform({f, config_.num_classes}, b, rng));
  params_.add("head_u.b", uniform({1, config_.num_classes}, b, rng));
}

AnticipationModel::AnticipationModel(ModelConfig config, ParamSet params) : AnticipationModel(config, 0) {
  for (const auto& [name, expected] : params_.entries()) {
    if (!params.contains(name)) throw std::invalid_argument("checkpoint is missing parameter " + name);
    const Tensor& got = params.get(name);
    if (got.shape() != expected.shape()) {
      throw std::invalid_argument("parameter " + name + ": checkpoint shape " + ad::shape_str(got.shape()) +
                                  " vs config shape " + ad::shape_str(expected.shape()));
    }
  }
  if (params.size() != params_.size()) throw std::invalid_argument("checkpoint carries unexpected parameters");
  ParamSet ordered;
  for (const auto& [name, expected] : params_.entries()) ordered.add(name, params.get(name));
  params_ = std::move(ordered);
}

BackboneOutput AnticipationModel::encode_decode(const BoundParams& p, std::span<const Var> observed,
                                                const AnticipationWindow& window) const {
  if (observed.size() != window.n_o) {
    throw std::invalid_argument("encode_decode: got " + std::to_string(observed.size()) + " observed snippets, window needs " +
                                std::to_string(window.n_o));
  }
  for (const Var& x : observed) {
    if (x.shape().size() != 2 || x.shape()[1] != config_.input_dim || x.shape()[0] != observed[0].shape()[0]) {
      throw std::invalid_argument("encode_decode: snippet batch shape " + ad::shape_str(x.shape()) +
                                  " incompatible with input_dim " + std::to_string(config_.input_dim));
    }
  }
  return backbone_->forward(p, observed, window.steps());
}

HeadOutput AnticipationModel::dual_heads(const BoundParams& p, Var features) const {
  using namespace ad;
  HeadOutput out;
  out.logits = add(matmul(features, p["head_c.w"]), p["head_c.b"]);
  Var raw = add(matmul(features, p["head_u.w"]), p["head_u.b"]);
  out.u_vector = add_scalar(softplus(raw), config_.u_floor);
  Var pooled;
  switch (config_.pooling) {
    case Pooling::mean: pooled = mean(out.u_vector, 1); break;
    case Pooling::max: pooled = max(out.u_vector, 1); break;
    case Pooling::min: pooled = min(out.u_vector, 1); break;
  }
  out.u_hat = clamp(pooled, config_.u_floor, config_.u_ceiling);
  return out;
}

namespace {

AnticipationModel::Prediction to_prediction(const HeadOutput& h, Var features) {
  AnticipationModel::Prediction pr;
  pr.logits = h.logits.value();
  pr.probs = ad::softmax_axis(ad::div(h.logits, h.u_hat), 1).value();
  pr.u_hat.assign(h.u_hat.value().data().begin(), h.u_hat.value().data().end());
  pr.features = features.value();
  return pr;
}

std::vector<Var> constants(Graph& g, std::span<const Tensor> xs) {
  std::vector<Var> out;
  out.reserve(xs.size());
  for (const Tensor& t : xs) out.push_back(g.constant(t));
  return out;
}

double entropy(std::span<const double> p) {
  double h = 0.0;
  for (double v : p) {
    if (v > 0.0) h -= v * std::log(v);
  }
  return h;
}

}  // namespace

AnticipationModel::Prediction AnticipationModel::predict(std::span<const Tensor> observed,
                                                         const AnticipationWindow& window) const {
  Graph g;
  BoundParams p = bind(g, false);
  const std::vector<Var> obs = constants(g, observed);
  BackboneOutput bo = encode_decode(p, obs, window);
  return to_prediction(dual_heads(p, bo.features.back()), bo.features.back());
}

std::vector<AnticipationModel::Prediction> AnticipationModel::predict_steps(std::span<const Tensor> observed,
                                                                            const AnticipationWindow& window) const {
  Graph g;
  BoundParams p = bind(g, false);
  const std::vector<Var> obs = constants(g, observed);
  BackboneOutput bo = encode_decode(p, obs, window);
  std::vector<Prediction> out;
  for (const Var& f : bo.features) out.push_back(to_prediction(dual_heads(p, f), f));
  return out;
}

McDropoutResult mc_dropout_forward(const AnticipationModel& model, std::span<const Tensor> observed,
                                   const AnticipationWindow& window, std::size_t passes, double drop_rate,
                                   std::uint64_t seed) {
  if (passes < 2) throw std::invalid_argument("mc_dropout_forward: need at least 2 passes");
  if (!(drop_rate > 0.0 && drop_rate < 1.0)) throw std::invalid_argument("mc_dropout_forward: drop_rate must lie in (0, 1)");

  Graph g;
  BoundParams p = model.bind(g, false);
  const std::vector<Var> obs = constants(g, observed);
  const Var feat = model.encode_decode(p, obs, window).features.back();
  const ad::Shape fshape = feat.shape();
  const std::size_t batch = fshape[0];
  const std::size_t classes = model.config().num_classes;

  std::mt19937_64 rng(seed);
  std::bernoulli_distribution keep(1.0 - drop_rate);
  const double inv_keep = 1.0 / (1.0 - drop_rate);

  McDropoutResult res;
  res.mean_probs = Tensor({batch, classes}, 0.0);
  res.expected_entropy.assign(batch, 0.0);
  double u_sum = 0.0;
  for (std::size_t t = 0; t < passes; ++t) {
    Tensor mask(fshape);
    for (double& m : mask.data()) m = keep(rng) ? inv_keep : 0.0;
    const HeadOutput h = model.dual_heads(p, ad::mul(feat, g.constant(std::move(mask))));
    Tensor probs = ad::softmax_axis(ad::div(h.logits, h.u_hat), 1).value();
    for (std::size_t b = 0; b < batch; ++b) {
      const std::span<const double> row(&probs[b * classes], classes);
      res.expected_entropy[b] += entropy(row) / static_cast<double>(passes);
      u_sum += h.u_hat.value()[b];
    }
    for (std::size_t i = 0; i < probs.size(); ++i) res.mean_probs[i] += probs[i] / static_cast<double>(passes);
    res.pass_probs.push_back(std::move(probs));
  }

  double spread = 0.0;
  for (std::size_t i = 0; i < res.mean_probs.size(); ++i) {
    double var = 0.0;
    for (const Tensor& pp : res.pass_probs) var += (pp[i] - res.mean_probs[i]) * (pp[i] - res.mean_probs[i]);
    spread += std::sqrt(var / static_cast<double>(passes));
  }
  res.spread = spread / static_cast<double>(res.mean_probs.size());

  for (std::size_t b = 0; b < batch; ++b) {
    const double h = entropy(std::span<const double>(&res.mean_probs[b * classes], classes));
    res.predictive_entropy.push_back(h);
    // Jensen: H[mean] >= mean H; clip rounding noise.
    res.mutual_information.push_back(std::max(0.0, h - res.expected_entropy[b]));
    res.model_uncertainty += res.mutual_information.back() / static_cast<double>(batch);
    res.mean_predictive_entropy += h / static_cast<double>(batch);
  }
  res.mean_data_uncertainty = u_sum / static_cast<double>(batch * passes);
  return res;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr char kMagic[8] = {'U', 'B', 'A', 'N', 'T', 'C', 'K', 'P'};

void put_u32(std::ostream& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xffu));
}

void put_u64(std::ostream& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xffu));
}

std::uint64_t get_uint(std::istream& in, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) {
    const int c = in.get();
    if (c == std::char_traits<char>::eof()) throw std::runtime_error("checkpoint: unexpected end of file");
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(c)) << (8 * i);
  }
  return v;
}

std::string get_string(std::istream& in, std::size_t n) {
  std::string s(n, '\0');
  if (!in.read(s.data(), static_cast<std::streamsize>(n))) throw std::runtime_error("checkpoint: unexpected end of file");
  return s;
}

}  // namespace

void save_checkpoint(std::ostream& out, const AnticipationModel& model) {
  const ModelConfig& c = model.config();
  const nlohmann::json meta = {{"input_dim", c.input_dim},    {"hidden_dim", c.hidden_dim},
                               {"num_classes", c.num_classes}, {"pooling", to_string(c.pooling)},
                               {"u_floor", c.u_floor},        {"u_ceiling", c.u_ceiling},
                               {"backbone", "gru-gru"}};
  const std::string meta_s = meta.dump();
  out.write(kMagic, sizeof kMagic);
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(meta_s.size()));
  out.write(meta_s.data(), static_cast<std::streamsize>(meta_s.size()));
  put_u32(out, static_cast<std::uint32_t>(model.params().size()));
  for (const auto& [name, t] : model.params().entries()) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_u32(out, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) put_u64(out, d);
    for (double v : t.data()) put_u64(out, std::bit_cast<std::uint64_t>(v));
  }
  if (!out) throw std::runtime_error("checkpoint: write failed");
}

void save_checkpoint(const std::string& path, const AnticipationModel& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  save_checkpoint(out, model);
}

AnticipationModel load_checkpoint(std::istream& in) {
  if (get_string(in, sizeof kMagic) != std::string(kMagic, sizeof kMagic)) {
    throw std::runtime_error("checkpoint: bad magic");
  }
  const auto version = static_cast<std::uint32_t>(get_uint(in, 4));
  if (version != kCheckpointVersion) {
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
  }
  const nlohmann::json meta = nlohmann::json::parse(get_string(in, get_uint(in, 4)));
  ModelConfig c;
  c.input_dim = meta.at("input_dim").get<std::size_t>();
  c.hidden_dim = meta.at("hidden_dim").get<std::size_t>();
  c.num_classes = meta.at("num_classes").get<std::size_t>();
  c.pooling = parse_pooling(meta.at("pooling").get<std::string>());
  c.u_floor = meta.at("u_floor").get<double>();
  c.u_ceiling = meta.at("u_ceiling").get<double>();

  ParamSet params;
  const std::uint64_t blocks = get_uint(in, 4);
  for (std::uint64_t b = 0; b < blocks; ++b) {
    std::string name = get_string(in, get_uint(in, 4));
    const std::uint64_t rank = get_uint(in, 4);
    if (rank > 8) throw std::runtime_error("checkpoint: implausible rank for " + name);
    ad::Shape shape;
    for (std::uint64_t d = 0; d < rank; ++d) shape.push_back(get_uint(in, 8));
    Tensor t(shape);
    for (double& v : t.data()) v = std::bit_cast<double>(get_uint(in, 8));
    params.add(std::move(name), std::move(t));
  }
  return AnticipationModel(c, std::move(params));
}

AnticipationModel load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return load_checkpoint(in);
}

}  // namespace ubant
