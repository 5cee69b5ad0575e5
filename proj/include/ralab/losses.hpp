#pragma once

#include <string>
#include <vector>

#include "ralab/retriever.hpp"

namespace ralab {

enum class LossKind { adist, emdr2, pdist, loop };

inline std::string_view to_string(LossKind k) {
  switch (k) {
    case LossKind::adist: return "adist";
    case LossKind::emdr2: return "emdr2";
    case LossKind::pdist: return "pdist";
    case LossKind::loop: return "loop";
  }
  return "pdist";
}

inline LossKind parse_loss(std::string_view s) {
  if (s == "adist") return LossKind::adist;
  if (s == "emdr2") return LossKind::emdr2;
  if (s == "pdist") return LossKind::pdist;
  if (s == "loop") return LossKind::loop;
  throw Error("unknown loss '" + std::string(s) + "'");
}

/// Distribution the retriever is distilled towards. Held constant while the
/// retriever is differentiated.
struct TargetDistribution {
  std::vector<double> probs;
  LossKind source = LossKind::pdist;
  double temperature = 1.0;
  // Set when every input score was -inf and the target fell back to uniform.
  bool degenerate = false;
};

/// value is KL(target || p_retr) for the distillation losses and the
/// log marginal likelihood for EMDR². grad_wrt_scores is always the gradient
/// of the quantity being minimized (KL, or minus the EMDR² objective).
struct LossValue {
  double value = 0.0;
  std::vector<double> grad_wrt_scores;
};

/// sum_k p_k ln(p_k / q_k) with 0 ln 0 = 0.
inline double kl_divergence(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw Error("distributions differ in length");
  if (!is_distribution(p) || !is_distribution(q)) throw Error("argument is not a valid distribution");
  double kl = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (p[k] == 0.0) continue;
    if (q[k] == 0.0) throw Error("absolute continuity");
    kl += p[k] * std::log(p[k] / q[k]);
  }
  // Rounding can leave a tiny negative residue when p == q.
  return std::max(kl, 0.0);
}

namespace detail {

inline TargetDistribution make_target(std::span<const double> scores, double temperature, LossKind src) {
  if (!(temperature > 0.0)) throw Error("target temperature must be positive");
  TargetDistribution t;
  t.source = src;
  t.temperature = temperature;
  t.probs = softmax(scores, temperature, &t.degenerate);
  return t;
}

}  // namespace detail

/// softmax(relevance / theta_t).
inline TargetDistribution adist_target(std::span<const double> relevance, double temperature = 1.0) {
  for (double r : relevance)
    if (!(r >= 0.0) || !std::isfinite(r)) throw Error("relevance must be finite and nonnegative");
  return detail::make_target(relevance, temperature, LossKind::adist);
}

/// Posterior over documents under a uniform prior: softmax(loglik / theta_t).
inline TargetDistribution pdist_target(std::span<const double> per_doc_logliks, double temperature = 1.0) {
  return detail::make_target(per_doc_logliks, temperature, LossKind::pdist);
}

/// softmax(-loo_loglik / theta_t): the document whose removal hurts the
/// output most receives the most mass.
inline TargetDistribution loop_target(std::span<const double> loo_logliks, double temperature = 1.0) {
  if (loo_logliks.size() < 2) throw Error("leave-one-out undefined");
  std::vector<double> neg(loo_logliks.size());
  for (std::size_t k = 0; k < neg.size(); ++k) {
    if (std::isnan(loo_logliks[k])) throw Error("non-finite score");
    neg[k] = -loo_logliks[k];
  }
  // A document whose removal makes the output impossible dominates; clamp
  // +inf so the softmax stays defined.
  for (double& v : neg)
    if (v == std::numeric_limits<double>::infinity()) v = std::numeric_limits<double>::max() / 4;
  return detail::make_target(neg, temperature, LossKind::loop);
}

/// KL(target || retr.probs) and its gradient (p_retr - target) / theta.
/// When raw scores are available the log-probabilities come from a
/// log-softmax, so a retrieval probability that underflows to zero still
/// yields a finite loss.
inline LossValue distill_step(const TargetDistribution& target, const RetrievalDistribution& retr) {
  if (target.probs.size() != retr.probs.size()) throw Error("target and retrieval distributions differ in K");
  LossValue lv;
  if (retr.scores.size() == retr.probs.size()) {
    if (!is_distribution(target.probs)) throw Error("argument is not a valid distribution");
    std::vector<double> z(retr.scores.size());
    for (std::size_t k = 0; k < z.size(); ++k) z[k] = retr.scores[k] / retr.temperature;
    const double lse = logsumexp(z);
    double kl = 0.0;
    for (std::size_t k = 0; k < z.size(); ++k)
      if (target.probs[k] > 0.0) kl += target.probs[k] * (std::log(target.probs[k]) - (z[k] - lse));
    lv.value = std::max(kl, 0.0);
  } else {
    lv.value = kl_divergence(target.probs, retr.probs);
  }
  lv.grad_wrt_scores.resize(retr.probs.size());
  for (std::size_t k = 0; k < retr.probs.size(); ++k)
    lv.grad_wrt_scores[k] = (retr.probs[k] - target.probs[k]) / retr.temperature;
  return lv;
}

namespace detail {

// ln sum_k exp(loglik_k) p_k and the posterior responsibilities.
inline double log_mixture(std::span<const double> logliks, std::span<const double> probs, std::vector<double>* post) {
  std::vector<double> terms(logliks.size());
  for (std::size_t k = 0; k < logliks.size(); ++k)
    terms[k] = probs[k] > 0.0 ? logliks[k] + std::log(probs[k]) : -std::numeric_limits<double>::infinity();
  double lse = logsumexp(terms);
  if (post) {
    post->resize(terms.size());
    for (std::size_t k = 0; k < terms.size(); ++k) (*post)[k] = std::exp(terms[k] - lse);
  }
  return lse;
}

}  // namespace detail

/// Sequence-level EMDR²: value = ln sum_k p_LM(a | q, d_k) p_retr(d_k).
/// Only the retrieval distribution carries gradient; with posterior
/// w_k ∝ p_LM_k p_retr_k, d(-value)/d(score_k) = (p_retr_k - w_k) / theta.
inline LossValue emdr2_objective(std::span<const double> per_doc_logliks, std::span<const double> retr_probs,
                                 double temperature = 1.0) {
  if (per_doc_logliks.size() != retr_probs.size()) throw Error("loglik and retrieval lengths differ");
  if (!is_distribution(retr_probs)) throw Error("retrieval probabilities are not a valid distribution");
  for (double l : per_doc_logliks)
    if (std::isnan(l) || l == std::numeric_limits<double>::infinity()) throw Error("non-finite log-likelihood");
  LossValue lv;
  std::vector<double> post;
  lv.value = detail::log_mixture(per_doc_logliks, retr_probs, &post);
  lv.grad_wrt_scores.resize(retr_probs.size());
  for (std::size_t k = 0; k < retr_probs.size(); ++k) lv.grad_wrt_scores[k] = (retr_probs[k] - post[k]) / temperature;
  return lv;
}

/// Token-level EMDR²: the mixture is taken per output token and the
/// per-token log marginals are summed. `token_logliks` has K rows.
inline LossValue emdr2_token_objective(const std::vector<std::vector<double>>& token_logliks,
                                       std::span<const double> retr_probs, double temperature = 1.0) {
  if (token_logliks.size() != retr_probs.size()) throw Error("loglik and retrieval lengths differ");
  if (!is_distribution(retr_probs)) throw Error("retrieval probabilities are not a valid distribution");
  const std::size_t K = retr_probs.size();
  const std::size_t T = token_logliks.empty() ? 0 : token_logliks[0].size();
  LossValue lv;
  lv.grad_wrt_scores.assign(K, 0.0);
  std::vector<double> col(K), post;
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t k = 0; k < K; ++k) {
      if (token_logliks[k].size() != T) throw Error("ragged token log-likelihood table");
      col[k] = token_logliks[k][t];
    }
    lv.value += detail::log_mixture(col, retr_probs, &post);
    for (std::size_t k = 0; k < K; ++k) lv.grad_wrt_scores[k] += (retr_probs[k] - post[k]) / temperature;
  }
  return lv;
}

}  // namespace ralab
