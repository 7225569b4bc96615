#pragma once

// Objectives assembled over a mini-batch, and the SGD training loop.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "ubant/data.hpp"
#include "ubant/labelspace.hpp"
#include "ubant/losses.hpp"
#include "ubant/model.hpp"

namespace ubant {

// Independent, named random streams derived from one seed.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream);

enum class Objective { automatic, ub, plain };
Objective parse_objective(std::string_view s);
const char* to_string(Objective o);

struct TrainConfig {
  HyperParams hp;
  Objective objective = Objective::automatic;  // plain when alpha = beta = gamma = 0
  double learning_rate = 0.05;
  double momentum = 0.9;
  double weight_decay = 5e-5;
  std::size_t batch_size = 32;
  std::size_t epochs = 10;
  std::size_t family_size = 4;
  std::size_t families_per_step = 8;
  std::size_t hidden_dim = 64;
  Pooling pooling = Pooling::mean;
  double tau_o = 1.5;
  double tau_a = 2.0;
  double delta = 0.25;
  std::size_t cooccur_top_k = 0;  // 0 = unlimited
  std::uint64_t seed = 0;

  static TrainConfig desk();
  static TrainConfig paper();

  void validate() const;
  bool uses_ub() const;
  AnticipationWindow window() const { return AnticipationWindow::make(tau_o, tau_a, delta); }
};

// One mini-batch of model inputs. Time-major observed stacks.
struct StepBatch {
  AnticipationWindow window;
  // ub objective
  std::vector<Tensor> obs_i, obs_j;  // [P, d] per snippet
  Tensor pair_labels;                // [P, C]
  std::vector<AnticipationWindow> family_windows;
  std::vector<std::vector<Tensor>> family_obs;  // per member: [F, d] per snippet
  // plain objective
  std::vector<Tensor> obs;  // [B, d] per snippet
  Tensor labels;            // [B, C]
};

struct StepLoss {
  Var total;
  Var srul;
  Var trul;  // invalid when the batch carries no families
  Var wd;
  double mean_u = 0.0;
};

// srul over uncertainty-weighted pair mixtures at every decoder step,
// beta * trul over family final-step uncertainties, gamma * sum of squared
// per-sample pooled uncertainties.
StepLoss ub_objective(const AnticipationModel& model, const BoundParams& p, const StepBatch& batch,
                      const HyperParams& hp);
// Cross-entropy of softmax(logits) against labels, averaged over decoder steps.
StepLoss plain_objective(const AnticipationModel& model, const BoundParams& p, const StepBatch& batch);

struct TrainData {
  const FeatureStore* store = nullptr;
  std::vector<TrainSample> samples;
  std::vector<FamilySample> families;
  const LabelSpace* labels = nullptr;  // required for the ub objective
};

struct EpochSummary {
  std::size_t epoch = 0;
  std::size_t steps = 0;
  double total = 0.0;  // means over steps
  double srul = 0.0;
  double trul = 0.0;
  double wd = 0.0;
};

struct TrainResult {
  std::vector<EpochSummary> epochs;
  ParamSet best;  // parameters after the epoch with the lowest mean loss
  std::size_t best_epoch = 0;
};

class NumericalError : public std::runtime_error {
 public:
  NumericalError(std::size_t epoch, std::size_t batch, const std::string& what)
      : std::runtime_error(what), epoch_(epoch), batch_(batch) {}
  std::size_t epoch() const { return epoch_; }
  std::size_t batch() const { return batch_; }

 private:
  std::size_t epoch_;
  std::size_t batch_;
};

// SGD with momentum and weight decay. Writes one JSON line per step to `log`
// when given. On a non-finite loss or gradient, throws NumericalError; the
// model keeps the last parameters that produced a finite step.
TrainResult train(AnticipationModel& model, const TrainConfig& cfg, const TrainData& data, std::ostream* log = nullptr);

}  // namespace ubant
