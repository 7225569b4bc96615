#pragma once

// Training objectives. Each loss has a graph form used for training and a
// plain-double form used for inspection and reference checks.

#include <cstddef>
#include <span>
#include <vector>

#include "ubant/autodiff.hpp"

namespace ubant {

using ad::Graph;
using ad::Tensor;
using ad::Var;

struct HyperParams {
  double alpha = 0.4;   // label mass on co-occurring classes
  double beta = 0.005;  // temporal ranking weight
  double gamma = 5e-6;  // uncertainty magnitude weight

  // Throws unless 0 <= alpha < 1 and beta, gamma >= 0.
  void validate() const;
  bool is_plain() const { return alpha == 0.0 && beta == 0.0 && gamma == 0.0; }
};

struct LossBreakdown {
  double l_srul = 0.0;
  double l_trul = 0.0;
  double l_wd = 0.0;
  double beta = 0.0;
  double gamma = 0.0;
  double total = 0.0;
};

// ---- distribution adjustment ----

// softmax(logits / u_hat) along the class axis. logits [B, C], u_hat [B, 1].
Var adjust_distribution(Var logits, Var u_hat);
Var adjusted_log_probs(Var logits, Var u_hat);

// Single-sample form. Throws std::invalid_argument if u_hat <= 0.
std::vector<double> adjust_distribution(std::span<const double> logits, double u_hat);

// ---- soft-label cross-entropy ----

// -sum_j label_j log probs_j.
double anticipation_loss(std::span<const double> probs, std::span<const double> label);

// Mean over rows of -sum_j labels[b, j] * log_probs[b, j]. labels is [B, C].
Var soft_cross_entropy(Var log_probs, const Tensor& labels);

// ---- sample-wise relative uncertainty ----

// u_k / sum(u). Throws on a non-positive entry.
std::vector<double> relative_weights(std::span<const double> u);
// Row-wise over a group of [B, 1] uncertainty columns.
std::vector<Var> relative_weights(std::span<const Var> u);

// sum_k w_k f_k. Throws on a length mismatch.
std::vector<double> mix_features(std::span<const std::vector<double>> features, std::span<const double> weights);
// features: [B, d] each; weights: [B, 1] each.
Var mix_features(std::span<const Var> features, std::span<const Var> weights);

// Mean over timestamps of the per-pair soft cross-entropy, averaged over
// pairs. One (logits, u_hat) entry per timestamp, computed from the mixed
// features; pair_labels is [P, C].
Var srul_loss(std::span<const Var> mixed_logits, std::span<const Var> mixed_u_hat, const Tensor& pair_labels);

// Reference form: probs[k][p] is the mixed distribution of pair p at
// timestamp k, labels[p] its pair label.
double srul_loss(const std::vector<std::vector<std::vector<double>>>& probs,
                 const std::vector<std::vector<double>>& labels);

// ---- temporal relative uncertainty ----

// prod_j u[order[j]] / sum_{m >= j} u[order[m]], where order[j] is the member
// placed at rank j. Throws if `order` is not a permutation of 0..M-1 or any
// u is non-positive.
double permutation_probability(std::span<const double> u, std::span<const std::size_t> order);

// -sum over families of log P(identity | U). Families with fewer than two
// members are skipped and counted in `skipped`.
double trul_loss(const std::vector<std::vector<double>>& families, std::size_t* skipped = nullptr);

// U is [F, M], each row one family with members in ideal (descending) order.
Var trul_loss(Var u);

// ---- magnitude regularizer ----

double wd_loss(std::span<const double> u_hat);
// Sum of squares over every entry of every input.
Var wd_loss(std::span<const Var> u_hat);

// ---- composite ----

LossBreakdown total_loss(double l_srul, double l_trul, double l_wd, const HyperParams& hp);

}  // namespace ubant
