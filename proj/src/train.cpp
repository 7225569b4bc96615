#include "ubant/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>

#include <nlohmann/json.hpp>

namespace ubant {

std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream) {
  std::uint64_t h = 1469598103934665603ull;  // FNV-1a offset basis
  for (unsigned char ch : stream) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32)};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

Objective parse_objective(std::string_view s) {
  if (s == "auto") return Objective::automatic;
  if (s == "ub") return Objective::ub;
  if (s == "plain") return Objective::plain;
  throw std::invalid_argument("unknown objective '" + std::string(s) + "' (expected auto, ub or plain)");
}

const char* to_string(Objective o) {
  switch (o) {
    case Objective::automatic: return "auto";
    case Objective::ub: return "ub";
    case Objective::plain: return "plain";
  }
  return "?";
}

TrainConfig TrainConfig::desk() { return TrainConfig{}; }

TrainConfig TrainConfig::paper() {
  TrainConfig c;
  c.batch_size = 128;
  c.epochs = 100;
  c.families_per_step = 32;
  return c;
}

void TrainConfig::validate() const {
  hp.validate();
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("momentum must lie in [0, 1)");
  if (!(weight_decay >= 0.0)) throw std::invalid_argument("weight decay must be >= 0");
  if (batch_size < 2) throw std::invalid_argument("batch size must be >= 2");
  if (epochs == 0) throw std::invalid_argument("epochs must be >= 1");
  if (family_size < 2) throw std::invalid_argument("family size must be >= 2");
  if (hidden_dim == 0) throw std::invalid_argument("hidden_dim must be positive");
  (void)window();
}

bool TrainConfig::uses_ub() const {
  switch (objective) {
    case Objective::ub: return true;
    case Objective::plain: return false;
    case Objective::automatic: return !hp.is_plain();
  }
  return true;
}

namespace {

std::vector<Var> constants(Graph& g, const std::vector<Tensor>& xs) {
  std::vector<Var> out;
  out.reserve(xs.size());
  for (const Tensor& t : xs) out.push_back(g.constant(t));
  return out;
}

double mean_of(const Tensor& t) {
  return std::accumulate(t.data().begin(), t.data().end(), 0.0) / static_cast<double>(t.size());
}

}  // namespace

StepLoss ub_objective(const AnticipationModel& model, const BoundParams& p, const StepBatch& batch,
                      const HyperParams& hp) {
  Graph& g = p.graph();
  if (batch.obs_i.size() != batch.obs_j.size() || batch.obs_i.empty()) {
    throw std::invalid_argument("ub_objective: pair stacks differ in length");
  }
  const std::size_t pairs = batch.obs_i[0].dim(0);
  std::vector<Var> both;
  for (std::size_t t = 0; t < batch.obs_i.size(); ++t) {
    const Var parts[2] = {g.constant(batch.obs_i[t]), g.constant(batch.obs_j[t])};
    both.push_back(ad::concat(parts, 0));
  }
  const BackboneOutput bo = model.encode_decode(p, both, batch.window);

  std::vector<Var> mixed_logits, mixed_u, sample_u;
  double u_sum = 0.0;
  std::size_t u_count = 0;
  for (const Var& f : bo.features) {
    const HeadOutput h = model.dual_heads(p, f);
    const Var feats[2] = {ad::slice(f, 0, 0, pairs), ad::slice(f, 0, pairs, 2 * pairs)};
    const Var us[2] = {ad::slice(h.u_hat, 0, 0, pairs), ad::slice(h.u_hat, 0, pairs, 2 * pairs)};
    const std::vector<Var> w = relative_weights(us);
    const HeadOutput hm = model.dual_heads(p, mix_features(feats, w));
    mixed_logits.push_back(hm.logits);
    mixed_u.push_back(hm.u_hat);
    sample_u.push_back(h.u_hat);
    u_sum += mean_of(h.u_hat.value());
    ++u_count;
  }

  StepLoss out;
  out.srul = srul_loss(mixed_logits, mixed_u, batch.pair_labels);
  out.total = out.srul;

  if (!batch.family_obs.empty()) {
    if (batch.family_obs.size() != batch.family_windows.size() || batch.family_obs.size() < 2) {
      throw std::invalid_argument("ub_objective: need one window per family member and at least two members");
    }
    std::vector<Var> columns;
    for (std::size_t m = 0; m < batch.family_obs.size(); ++m) {
      const BackboneOutput fo = model.encode_decode(p, constants(g, batch.family_obs[m]), batch.family_windows[m]);
      const HeadOutput h = model.dual_heads(p, fo.features.back());
      columns.push_back(h.u_hat);
      sample_u.push_back(h.u_hat);
    }
    out.trul = trul_loss(ad::concat(columns, 1));
    out.total = ad::add(out.total, ad::scale(out.trul, hp.beta));
  }

  out.wd = wd_loss(sample_u);
  out.total = ad::add(out.total, ad::scale(out.wd, hp.gamma));
  out.mean_u = u_sum / static_cast<double>(u_count);
  return out;
}

StepLoss plain_objective(const AnticipationModel& model, const BoundParams& p, const StepBatch& batch) {
  Graph& g = p.graph();
  const BackboneOutput bo = model.encode_decode(p, constants(g, batch.obs), batch.window);
  Var total;
  double u_sum = 0.0;
  for (const Var& f : bo.features) {
    const HeadOutput h = model.dual_heads(p, f);
    Var term = soft_cross_entropy(ad::log_softmax_axis(h.logits, 1), batch.labels);
    total = total.valid() ? ad::add(total, term) : term;
    u_sum += mean_of(h.u_hat.value());
  }
  StepLoss out;
  out.srul = ad::scale(total, 1.0 / static_cast<double>(bo.features.size()));
  out.total = out.srul;
  out.mean_u = u_sum / static_cast<double>(bo.features.size());
  return out;
}

namespace {

bool all_finite(const Tensor& t) {
  return std::all_of(t.data().begin(), t.data().end(), [](double v) { return std::isfinite(v); });
}

Tensor label_rows(const std::vector<std::vector<double>>& rows, std::size_t classes) {
  Tensor t({rows.size(), classes});
  for (std::size_t r = 0; r < rows.size(); ++r) std::copy(rows[r].begin(), rows[r].end(), &t[r * classes]);
  return t;
}

}  // namespace

TrainResult train(AnticipationModel& model, const TrainConfig& cfg, const TrainData& data, std::ostream* log) {
  cfg.validate();
  if (data.store == nullptr || data.samples.empty()) throw std::invalid_argument("train: no training samples");
  const bool ub = cfg.uses_ub();
  if (ub && data.labels == nullptr) throw std::invalid_argument("train: the ub objective needs a label space");
  const std::size_t classes = model.config().num_classes;
  const AnticipationWindow window = cfg.window();
  for (const TrainSample& s : data.samples) {
    if (s.window.n_o != window.n_o || s.window.n_a != window.n_a) {
      throw std::invalid_argument("train: sample window differs from the configured window");
    }
    if (s.target >= classes) throw std::invalid_argument("train: sample class outside the model's class range");
  }
  const bool use_families = ub && cfg.hp.beta > 0.0 && !data.families.empty();

  std::vector<ClassId> sample_classes;
  for (const TrainSample& s : data.samples) sample_classes.push_back(s.target);

  std::vector<Tensor> velocity;
  for (const auto& [name, t] : model.params().entries()) velocity.emplace_back(t.shape(), 0.0);

  std::mt19937_64 shuffle_rng(derive_seed(cfg.seed, "pairing"));
  std::mt19937_64 family_rng(derive_seed(cfg.seed, "families"));
  std::vector<std::size_t> family_order(data.families.size());
  std::iota(family_order.begin(), family_order.end(), 0);
  std::size_t family_cursor = family_order.size();

  TrainResult result;
  double best_total = std::numeric_limits<double>::infinity();
  std::size_t step = 0;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<StepBatch> batches;
    std::vector<std::size_t> batch_ids;
    if (ub) {
      const PairStream stream = pair_batches(sample_classes, cfg.batch_size, shuffle_rng());
      for (std::size_t b = 0; b < stream.batches.size(); ++b) {
        const auto& pairs = stream.batches[b];
        if (pairs.empty()) continue;
        StepBatch sb;
        sb.window = window;
        std::vector<std::size_t> left, right;
        std::vector<std::vector<double>> labels;
        for (const auto& [i, j] : pairs) {
          left.push_back(i);
          right.push_back(j);
          labels.push_back(data.labels->pair(data.samples[i].target, data.samples[j].target).probs);
        }
        sb.obs_i = stack_observed(*data.store, data.samples, left);
        sb.obs_j = stack_observed(*data.store, data.samples, right);
        sb.pair_labels = label_rows(labels, classes);
        if (use_families) {
          std::vector<const FamilySample*> chosen;
          for (std::size_t f = 0; f < cfg.families_per_step; ++f) {
            if (family_cursor == family_order.size()) {
              std::shuffle(family_order.begin(), family_order.end(), family_rng);
              family_cursor = 0;
            }
            chosen.push_back(&data.families[family_order[family_cursor++]]);
          }
          const std::size_t m_count = chosen[0]->members.size();
          for (std::size_t m = 0; m < m_count; ++m) {
            std::vector<TrainSample> column;
            for (const FamilySample* f : chosen) column.push_back(f->members[m]);
            std::vector<std::size_t> idx(column.size());
            std::iota(idx.begin(), idx.end(), 0);
            sb.family_windows.push_back(column[0].window);
            sb.family_obs.push_back(stack_observed(*data.store, column, idx));
          }
        }
        batches.push_back(std::move(sb));
        batch_ids.push_back(b);
      }
    } else {
      std::vector<std::size_t> order(data.samples.size());
      std::iota(order.begin(), order.end(), 0);
      std::shuffle(order.begin(), order.end(), shuffle_rng);
      for (std::size_t begin = 0, b = 0; begin < order.size(); begin += cfg.batch_size, ++b) {
        const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
        const std::span<const std::size_t> idx(order.data() + begin, end - begin);
        StepBatch sb;
        sb.window = window;
        sb.obs = stack_observed(*data.store, data.samples, idx);
        sb.labels = Tensor({idx.size(), classes}, 0.0);
        for (std::size_t r = 0; r < idx.size(); ++r) sb.labels.at(r, data.samples[idx[r]].target) = 1.0;
        batches.push_back(std::move(sb));
        batch_ids.push_back(b);
      }
    }

    EpochSummary summary;
    summary.epoch = epoch;
    for (std::size_t bi = 0; bi < batches.size(); ++bi) {
      Graph g;
      const BoundParams p = model.bind(g, true);
      const StepLoss loss = ub ? ub_objective(model, p, batches[bi], cfg.hp) : plain_objective(model, p, batches[bi]);
      const double total = loss.total.item();
      if (!std::isfinite(total)) {
        throw NumericalError(epoch, batch_ids[bi], "non-finite loss in epoch " + std::to_string(epoch) + ", batch " +
                                                       std::to_string(batch_ids[bi]));
      }
      g.backward(loss.total);
      std::vector<Tensor> grads;
      for (const Var& v : p.vars()) {
        grads.push_back(g.grad(v));
        if (!all_finite(grads.back())) {
          throw NumericalError(epoch, batch_ids[bi], "non-finite gradient in epoch " + std::to_string(epoch) +
                                                         ", batch " + std::to_string(batch_ids[bi]));
        }
      }
      auto& entries = model.params().entries();
      for (std::size_t k = 0; k < entries.size(); ++k) {
        Tensor& theta = entries[k].second;
        Tensor& vel = velocity[k];
        for (std::size_t i = 0; i < theta.size(); ++i) {
          const double grad = grads[k][i] + cfg.weight_decay * theta[i];
          vel[i] = cfg.momentum * vel[i] + grad;
          theta[i] -= cfg.learning_rate * vel[i];
        }
      }

      const double srul = loss.srul.item();
      const double trul = loss.trul.valid() ? loss.trul.item() : 0.0;
      const double wd = loss.wd.valid() ? loss.wd.item() : 0.0;
      summary.total += total;
      summary.srul += srul;
      summary.trul += trul;
      summary.wd += wd;
      ++summary.steps;
      if (log) {
        const nlohmann::json line = {{"step", step},   {"epoch", epoch},  {"batch", batch_ids[bi]},
                                     {"l_srul", srul}, {"l_trul", trul},  {"l_wd", wd},
                                     {"total", total}, {"mean_u", loss.mean_u}};
        *log << line.dump() << '\n';
      }
      ++step;
    }
    if (summary.steps > 0) {
      const auto n = static_cast<double>(summary.steps);
      summary.total /= n;
      summary.srul /= n;
      summary.trul /= n;
      summary.wd /= n;
    }
    result.epochs.push_back(summary);
    if (summary.steps > 0 && summary.total < best_total) {
      best_total = summary.total;
      result.best = model.params();
      result.best_epoch = epoch;
    }
  }
  if (result.best.size() == 0) result.best = model.params();
  return result;
}

}  // namespace ubant
