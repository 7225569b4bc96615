#include "ubant/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace ubant {

void HyperParams::validate() const {
  if (!(alpha >= 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in [0, 1)");
  if (!(beta >= 0.0) || !(gamma >= 0.0)) throw std::invalid_argument("beta and gamma must be non-negative");
}

Var adjust_distribution(Var logits, Var u_hat) { return ad::softmax_axis(ad::div(logits, u_hat), 1); }

Var adjusted_log_probs(Var logits, Var u_hat) { return ad::log_softmax_axis(ad::div(logits, u_hat), 1); }

std::vector<double> adjust_distribution(std::span<const double> logits, double u_hat) {
  if (!(u_hat > 0.0)) throw std::invalid_argument("adjust_distribution: u_hat must be positive, got " + std::to_string(u_hat));
  if (logits.empty()) throw std::invalid_argument("adjust_distribution: empty logits");
  const double top = *std::max_element(logits.begin(), logits.end()) / u_hat;
  std::vector<double> p(logits.size());
  double z = 0.0;
  for (std::size_t j = 0; j < logits.size(); ++j) {
    p[j] = std::exp(logits[j] / u_hat - top);
    z += p[j];
  }
  for (double& v : p) v /= z;
  return p;
}

double anticipation_loss(std::span<const double> probs, std::span<const double> label) {
  if (probs.size() != label.size()) throw std::invalid_argument("anticipation_loss: length mismatch");
  double loss = 0.0;
  for (std::size_t j = 0; j < probs.size(); ++j) {
    if (label[j] != 0.0) loss -= label[j] * std::log(probs[j]);
  }
  return loss;
}

Var soft_cross_entropy(Var log_probs, const Tensor& labels) {
  if (labels.shape() != log_probs.shape()) {
    throw std::invalid_argument("soft_cross_entropy: labels " + ad::shape_str(labels.shape()) + " vs log-probs " +
                                ad::shape_str(log_probs.shape()));
  }
  Graph& g = log_probs.graph();
  const double rows = static_cast<double>(labels.dim(0));
  return ad::scale(ad::sum(ad::mul(log_probs, g.constant(labels))), -1.0 / rows);
}

std::vector<double> relative_weights(std::span<const double> u) {
  if (u.empty()) throw std::invalid_argument("relative_weights: empty input");
  double total = 0.0;
  for (double v : u) {
    if (!(v > 0.0)) throw std::invalid_argument("relative_weights: non-positive uncertainty " + std::to_string(v));
    total += v;
  }
  std::vector<double> w(u.begin(), u.end());
  for (double& v : w) v /= total;
  return w;
}

std::vector<Var> relative_weights(std::span<const Var> u) {
  if (u.empty()) throw std::invalid_argument("relative_weights: empty input");
  Var total = u[0];
  for (std::size_t k = 1; k < u.size(); ++k) total = ad::add(total, u[k]);
  std::vector<Var> w;
  w.reserve(u.size());
  for (const Var& v : u) w.push_back(ad::div(v, total));
  return w;
}

std::vector<double> mix_features(std::span<const std::vector<double>> features, std::span<const double> weights) {
  if (features.size() != weights.size() || features.empty()) {
    throw std::invalid_argument("mix_features: " + std::to_string(features.size()) + " features vs " +
                                std::to_string(weights.size()) + " weights");
  }
  std::vector<double> out(features[0].size(), 0.0);
  for (std::size_t k = 0; k < features.size(); ++k) {
    if (features[k].size() != out.size()) throw std::invalid_argument("mix_features: feature length mismatch");
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += weights[k] * features[k][i];
  }
  return out;
}

Var mix_features(std::span<const Var> features, std::span<const Var> weights) {
  if (features.size() != weights.size() || features.empty()) {
    throw std::invalid_argument("mix_features: " + std::to_string(features.size()) + " features vs " +
                                std::to_string(weights.size()) + " weights");
  }
  Var out = ad::mul(features[0], weights[0]);
  for (std::size_t k = 1; k < features.size(); ++k) out = ad::add(out, ad::mul(features[k], weights[k]));
  return out;
}

Var srul_loss(std::span<const Var> mixed_logits, std::span<const Var> mixed_u_hat, const Tensor& pair_labels) {
  if (mixed_logits.empty() || mixed_logits.size() != mixed_u_hat.size()) {
    throw std::invalid_argument("srul_loss: need one u_hat per timestamp");
  }
  Var total;
  for (std::size_t k = 0; k < mixed_logits.size(); ++k) {
    Var term = soft_cross_entropy(adjusted_log_probs(mixed_logits[k], mixed_u_hat[k]), pair_labels);
    total = total.valid() ? ad::add(total, term) : term;
  }
  return ad::scale(total, 1.0 / static_cast<double>(mixed_logits.size()));
}

double srul_loss(const std::vector<std::vector<std::vector<double>>>& probs,
                 const std::vector<std::vector<double>>& labels) {
  if (probs.empty()) throw std::invalid_argument("srul_loss: no timestamps");
  double total = 0.0;
  for (const auto& step : probs) {
    if (step.size() != labels.size() || labels.empty()) throw std::invalid_argument("srul_loss: pair count mismatch");
    double s = 0.0;
    for (std::size_t p = 0; p < step.size(); ++p) s += anticipation_loss(step[p], labels[p]);
    total += s / static_cast<double>(labels.size());
  }
  return total / static_cast<double>(probs.size());
}

double permutation_probability(std::span<const double> u, std::span<const std::size_t> order) {
  const std::size_t m = u.size();
  if (order.size() != m) throw std::invalid_argument("permutation_probability: order length differs from U");
  std::vector<bool> seen(m, false);
  for (std::size_t i : order) {
    if (i >= m || seen[i]) throw std::invalid_argument("permutation_probability: order is not a permutation");
    seen[i] = true;
  }
  for (double v : u) {
    if (!(v > 0.0)) throw std::invalid_argument("permutation_probability: non-positive uncertainty");
  }
  double tail = 0.0;
  for (double v : u) tail += v;
  double p = 1.0;
  for (std::size_t j = 0; j < m; ++j) {
    const double v = u[order[j]];
    p *= v / tail;
    tail -= v;
  }
  return p;
}

double trul_loss(const std::vector<std::vector<double>>& families, std::size_t* skipped) {
  double loss = 0.0;
  std::size_t skip = 0;
  for (const auto& u : families) {
    if (u.size() < 2) {
      ++skip;
      continue;
    }
    // suffix sums computed exactly instead of by subtraction
    for (std::size_t j = 0; j < u.size(); ++j) {
      double tail = 0.0;
      for (std::size_t m = j; m < u.size(); ++m) tail += u[m];
      if (!(u[j] > 0.0)) throw std::invalid_argument("trul_loss: non-positive uncertainty");
      loss -= std::log(u[j] / tail);
    }
  }
  if (skipped) *skipped = skip;
  return loss;
}

Var trul_loss(Var u) {
  if (u.shape().size() != 2 || u.shape()[1] < 2) {
    throw std::invalid_argument("trul_loss: expected [F, M] with M >= 2, got " + ad::shape_str(u.shape()));
  }
  const std::size_t m = u.shape()[1];
  std::vector<Var> tails;
  tails.reserve(m);
  for (std::size_t j = 0; j < m; ++j) tails.push_back(ad::sum(ad::slice(u, 1, j, m), 1));
  Var tail = ad::concat(tails, 1);
  return ad::neg(ad::sum(ad::sub(ad::log(u), ad::log(tail))));
}

double wd_loss(std::span<const double> u_hat) {
  double s = 0.0;
  for (double v : u_hat) s += v * v;
  return s;
}

Var wd_loss(std::span<const Var> u_hat) {
  if (u_hat.empty()) throw std::invalid_argument("wd_loss: no inputs");
  Var total = ad::sum(ad::square(u_hat[0]));
  for (std::size_t k = 1; k < u_hat.size(); ++k) total = ad::add(total, ad::sum(ad::square(u_hat[k])));
  return total;
}

LossBreakdown total_loss(double l_srul, double l_trul, double l_wd, const HyperParams& hp) {
  if (!(hp.beta >= 0.0) || !(hp.gamma >= 0.0)) throw std::invalid_argument("total_loss: negative weight");
  LossBreakdown b;
  b.l_srul = l_srul;
  b.l_trul = l_trul;
  b.l_wd = l_wd;
  b.beta = hp.beta;
  b.gamma = hp.gamma;
  b.total = l_srul + hp.beta * l_trul + hp.gamma * l_wd;
  return b;
}

}  // namespace ubant
