#pragma once

// Generative anticipation model: an encoder-decoder backbone turns observed
// snippet features into one anticipated feature per anticipation timestamp,
// and two parallel linear heads map each anticipated feature to class
// logits and to a positive per-class uncertainty vector, pooled to a scalar.

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ubant/autodiff.hpp"

namespace ubant {

using ad::Graph;
using ad::Tensor;
using ad::Var;

// Timing geometry of one sample. All durations are whole multiples of the
// snippet length `delta`.
struct AnticipationWindow {
  double tau_o = 1.5;
  double tau_a = 2.0;
  double delta = 0.25;
  std::size_t n_o = 6;
  std::size_t n_a = 8;
  std::size_t target_steps = 0;  // extra decoder steps into the target segment

  // Throws unless tau_o and tau_a are positive multiples of delta.
  static AnticipationWindow make(double tau_o, double tau_a, double delta, std::size_t target_steps = 0);

  std::size_t steps() const { return n_a + target_steps; }
  // Anticipation time of decoder output k (k = 0 is tau_a, each step moves
  // one snippet closer to the target).
  double horizon(std::size_t k) const { return tau_a - static_cast<double>(k) * delta; }
};

enum class Pooling { mean, max, min };
Pooling parse_pooling(std::string_view s);
const char* to_string(Pooling p);

struct ModelConfig {
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 64;
  std::size_t num_classes = 0;
  Pooling pooling = Pooling::mean;
  double u_floor = 0.1;
  double u_ceiling = 10.0;

  void validate() const;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// Ordered, named parameter tensors.
class ParamSet {
 public:
  Tensor& add(std::string name, Tensor init);
  Tensor& get(std::string_view name);
  const Tensor& get(std::string_view name) const;
  bool contains(std::string_view name) const;

  std::size_t size() const { return entries_.size(); }
  std::vector<std::pair<std::string, Tensor>>& entries() { return entries_; }
  const std::vector<std::pair<std::string, Tensor>>& entries() const { return entries_; }

  friend bool operator==(const ParamSet&, const ParamSet&) = default;

 private:
  std::vector<std::pair<std::string, Tensor>> entries_;
};

// Graph leaves for every parameter of a ParamSet, in the same order.
class BoundParams {
 public:
  BoundParams(Graph& g, const ParamSet& params, bool requires_grad);
  // Adopts existing nodes, one per parameter of `layout` in order.
  BoundParams(const ParamSet& layout, std::span<const Var> vars);

  Var operator[](std::string_view name) const;
  Graph& graph() const { return *graph_; }
  const std::vector<Var>& vars() const { return vars_; }

 private:
  Graph* graph_;
  std::vector<Var> vars_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct BackboneOutput {
  std::vector<Var> features;      // one [B, feature_dim] per decoder step
  std::vector<Var> hidden_trace;  // encoder hidden state after each observed snippet
};

// Observed features -> anticipated features. Alternative encoder-decoders
// plug in here.
class Backbone {
 public:
  virtual ~Backbone() = default;
  virtual void init(ParamSet& params, std::mt19937_64& rng) const = 0;
  // `observed` is time-major: one [B, input_dim] tensor per snippet.
  virtual BackboneOutput forward(const BoundParams& p, std::span<const Var> observed, std::size_t steps) const = 0;
  virtual std::size_t feature_dim() const = 0;
};

// Single-layer GRU encoder; single-layer GRU decoder initialised from the
// encoder state and fed the last observed snippet at every step. The decoder
// hidden state is the anticipated feature.
class GruBackbone final : public Backbone {
 public:
  GruBackbone(std::size_t input_dim, std::size_t hidden_dim) : input_dim_(input_dim), hidden_dim_(hidden_dim) {}

  void init(ParamSet& params, std::mt19937_64& rng) const override;
  BackboneOutput forward(const BoundParams& p, std::span<const Var> observed, std::size_t steps) const override;
  std::size_t feature_dim() const override { return hidden_dim_; }

 private:
  Var cell(const BoundParams& p, const std::string& prefix, Var x, Var h) const;

  std::size_t input_dim_;
  std::size_t hidden_dim_;
};

struct HeadOutput {
  Var logits;    // [B, C]
  Var u_vector;  // [B, C], softplus(raw) + u_floor
  Var u_hat;     // [B, 1], pooled and clamped to [u_floor, u_ceiling]
};

class AnticipationModel {
 public:
  AnticipationModel(ModelConfig config, std::uint64_t init_seed);
  // Adopts trained parameters; throws if any shape disagrees with `config`.
  AnticipationModel(ModelConfig config, ParamSet params);

  const ModelConfig& config() const { return config_; }
  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }
  const Backbone& backbone() const { return *backbone_; }

  BoundParams bind(Graph& g, bool requires_grad = true) const { return BoundParams(g, params_, requires_grad); }

  // Throws std::invalid_argument on a snippet-count or feature-dim mismatch.
  BackboneOutput encode_decode(const BoundParams& p, std::span<const Var> observed,
                               const AnticipationWindow& window) const;
  HeadOutput dual_heads(const BoundParams& p, Var features) const;

  struct Prediction {
    Tensor logits;              // [B, C]
    Tensor probs;               // [B, C], logits / u_hat through softmax
    std::vector<double> u_hat;  // B
    Tensor features;            // [B, feature_dim]
  };
  // Final-step prediction for a time-major batch of observed snippets.
  Prediction predict(std::span<const Tensor> observed, const AnticipationWindow& window) const;
  // Same, for every decoder step.
  std::vector<Prediction> predict_steps(std::span<const Tensor> observed, const AnticipationWindow& window) const;

 private:
  ModelConfig config_;
  std::unique_ptr<Backbone> backbone_;
  ParamSet params_;
};

struct McDropoutResult {
  std::vector<Tensor> pass_probs;            // passes x [B, C]
  Tensor mean_probs;                         // [B, C]
  std::vector<double> predictive_entropy;    // H[mean p], per sample
  std::vector<double> expected_entropy;      // mean_t H[p_t], per sample
  std::vector<double> mutual_information;    // predictive - expected, per sample
  double model_uncertainty = 0.0;            // mean mutual information
  double mean_predictive_entropy = 0.0;
  double spread = 0.0;                       // mean over samples/classes of the across-pass std
  double mean_data_uncertainty = 0.0;        // mean pooled u_hat over passes and samples
};

// Monte Carlo dropout: `passes` forwards with independent inverted-dropout
// Bernoulli masks on the anticipated features feeding both heads.
McDropoutResult mc_dropout_forward(const AnticipationModel& model, std::span<const Tensor> observed,
                                   const AnticipationWindow& window, std::size_t passes, double drop_rate,
                                   std::uint64_t seed);

// Binary checkpoint: magic, format version, model config (JSON), then named
// parameter blocks (name, shape, little-endian float64 data).
inline constexpr std::uint32_t kCheckpointVersion = 1;
void save_checkpoint(std::ostream& out, const AnticipationModel& model);
void save_checkpoint(const std::string& path, const AnticipationModel& model);
AnticipationModel load_checkpoint(std::istream& in);
AnticipationModel load_checkpoint(const std::string& path);

}  // namespace ubant
