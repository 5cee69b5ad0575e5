#pragma once

#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "ralab/corpus.hpp"

namespace ralab {

/// What every retriever objective needs from the reader. Documents are
/// passed in retrieval order; results are aligned with them.
class LMScorer {
 public:
  virtual ~LMScorer() = default;

  /// log p(output | query, d_k) for each k.
  virtual std::vector<double> per_doc_loglik(TokenView query, std::span<const Passage> docs, TokenView output) const = 0;

  /// log p(output | query, all docs), documents fused as one context.
  virtual double joint_loglik(TokenView query, std::span<const Passage> docs, TokenView output) const = 0;

  /// Nonnegative per-document relevance as seen by the reader.
  virtual std::vector<double> attention_relevance(TokenView query, std::span<const Passage> docs,
                                                  TokenView output) const = 0;

  /// Per-document, per-output-token log factors (K rows, |output| columns)
  /// whose row sums equal per_doc_loglik.
  virtual std::vector<std::vector<double>> per_token_logliks(TokenView query, std::span<const Passage> docs,
                                                             TokenView output) const {
    auto per_doc = per_doc_loglik(query, docs, output);
    std::vector<std::vector<double>> out(docs.size(), std::vector<double>(1));
    for (std::size_t k = 0; k < docs.size(); ++k) out[k][0] = per_doc[k];
    return out;
  }

  /// Entry k is joint_loglik over docs with d_k removed.
  virtual std::vector<double> loo_logliks(TokenView query, std::span<const Passage> docs, TokenView output) const {
    if (docs.size() < 2) throw Error("leave-one-out undefined");
    std::vector<double> out(docs.size());
    std::vector<Passage> rest;
    rest.reserve(docs.size() - 1);
    for (std::size_t k = 0; k < docs.size(); ++k) {
      rest.clear();
      for (std::size_t j = 0; j < docs.size(); ++j)
        if (j != k) rest.push_back(docs[j]);
      out[k] = joint_loglik(query, rest, output);
    }
    return out;
  }
};

/// Smoothed unigram-overlap reader. Every output token is scored as
///   lambda * freq_context(t) + (1 - lambda) / |V|
/// where the context is one document or the pooled counts of several.
/// The query is not part of the context.
class OverlapLM final : public LMScorer {
 public:
  OverlapLM(std::size_t vocab_size, double lambda = 0.5) : vocab_size_(vocab_size), lambda_(lambda) {
    if (vocab_size == 0) throw Error("vocab_size must be >= 1");
    if (!(lambda > 0.0 && lambda < 1.0)) throw Error("smoothing lambda must lie strictly inside (0,1)");
  }

  std::size_t vocab_size() const { return vocab_size_; }
  double lambda() const { return lambda_; }

  /// Per-token probability floor for tokens absent from the context.
  double floor() const { return (1.0 - lambda_) / static_cast<double>(vocab_size_); }

  std::vector<double> per_doc_loglik(TokenView, std::span<const Passage> docs, TokenView output) const override {
    require_output(output);
    std::vector<double> out;
    out.reserve(docs.size());
    for (const auto& d : docs) out.push_back(context_loglik(Counts(std::span(&d, 1)), output));
    return out;
  }

  double joint_loglik(TokenView, std::span<const Passage> docs, TokenView output) const override {
    require_output(output);
    if (docs.empty()) throw Error("joint log-likelihood needs at least one document");
    return context_loglik(Counts(docs), output);
  }

  std::vector<double> loo_logliks(TokenView, std::span<const Passage> docs, TokenView output) const override {
    require_output(output);
    if (docs.size() < 2) throw Error("leave-one-out undefined");
    // Subtract each document from the pooled counts instead of re-pooling.
    Counts all(docs);
    std::vector<double> out;
    out.reserve(docs.size());
    for (const auto& d : docs) {
      Counts rest = all;
      rest.remove(d);
      out.push_back(context_loglik(rest, output));
    }
    return out;
  }

  std::vector<double> attention_relevance(TokenView, std::span<const Passage> docs, TokenView output) const override {
    require_output(output);
    std::vector<double> rel;
    rel.reserve(docs.size());
    for (const auto& d : docs) {
      if (d.text.empty()) {
        rel.push_back(0.0);
        continue;
      }
      Counts c(std::span(&d, 1));
      double s = 0.0;
      for (const auto& t : output) s += static_cast<double>(c.count(t));
      rel.push_back(s / (static_cast<double>(d.text.size()) * static_cast<double>(output.size())));
    }
    return rel;
  }

  std::vector<std::vector<double>> per_token_logliks(TokenView, std::span<const Passage> docs,
                                                     TokenView output) const override {
    require_output(output);
    std::vector<std::vector<double>> out;
    out.reserve(docs.size());
    for (const auto& d : docs) {
      Counts c(std::span(&d, 1));
      std::vector<double> row;
      row.reserve(output.size());
      for (const auto& t : output) row.push_back(std::log(token_prob(c, t)));
      out.push_back(std::move(row));
    }
    return out;
  }

 private:
  class Counts {
   public:
    explicit Counts(std::span<const Passage> docs) {
      for (const auto& d : docs) add(d);
    }
    void add(const Passage& d) {
      for (const auto& t : d.text) ++counts_[t];
      total_ += d.text.size();
    }
    void remove(const Passage& d) {
      for (const auto& t : d.text) --counts_[t];
      total_ -= d.text.size();
    }
    std::size_t count(const std::string& t) const {
      auto it = counts_.find(t);
      return it == counts_.end() ? 0 : it->second;
    }
    std::size_t total() const { return total_; }

   private:
    std::unordered_map<std::string, std::size_t> counts_;
    std::size_t total_ = 0;
  };

  static void require_output(TokenView output) {
    if (output.empty()) throw Error("empty output");
  }

  double token_prob(const Counts& c, const std::string& t) const {
    double freq = c.total() == 0 ? 0.0 : static_cast<double>(c.count(t)) / static_cast<double>(c.total());
    return lambda_ * freq + floor();
  }

  double context_loglik(const Counts& c, TokenView output) const {
    double s = 0.0;
    for (const auto& t : output) s += std::log(token_prob(c, t));
    return s;
  }

  std::size_t vocab_size_;
  double lambda_;
};

/// Fixed scores keyed by passage id, for exercising losses in isolation.
/// Joint scores treat the documents as a uniform mixture.
class MockScorer final : public LMScorer {
 public:
  struct Entry {
    double loglik = 0.0;
    double relevance = 0.0;
  };

  explicit MockScorer(std::map<std::string, Entry> entries) : entries_(std::move(entries)) {}

  /// Lines of {"doc_id": .., "loglik": .., "relevance": ..}; relevance is optional.
  static MockScorer from_jsonl(const std::string& path) {
    std::map<std::string, Entry> e;
    for_each_jsonl(path, [&](const nlohmann::json& j) {
      e[j.at("doc_id").get<std::string>()] = Entry{j.at("loglik").get<double>(), j.value("relevance", 0.0)};
    });
    return MockScorer(std::move(e));
  }

  std::vector<double> per_doc_loglik(TokenView, std::span<const Passage> docs, TokenView) const override {
    std::vector<double> out;
    for (const auto& d : docs) out.push_back(at(d.id).loglik);
    return out;
  }

  double joint_loglik(TokenView q, std::span<const Passage> docs, TokenView a) const override {
    if (docs.empty()) throw Error("joint log-likelihood needs at least one document");
    auto per = per_doc_loglik(q, docs, a);
    return logsumexp(per) - std::log(static_cast<double>(docs.size()));
  }

  std::vector<double> attention_relevance(TokenView, std::span<const Passage> docs, TokenView) const override {
    std::vector<double> out;
    for (const auto& d : docs) out.push_back(at(d.id).relevance);
    return out;
  }

 private:
  const Entry& at(const std::string& id) const {
    auto it = entries_.find(id);
    if (it == entries_.end()) throw Error("mock scorer has no entry for '" + id + "'");
    return it->second;
  }
  std::map<std::string, Entry> entries_;
};

}  // namespace ralab
