#pragma once

#include <fstream>
#include <optional>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "ralab/binary_io.hpp"
#include "ralab/common.hpp"

namespace ralab {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using TokenView = std::span<const std::string>;

/// Token to row mapping shared by both encoder towers. Row 0 is the unknown
/// token and row 1 the retriever's mask token.
class Vocabulary {
 public:
  static constexpr std::uint32_t kUnk = 0;
  static constexpr std::uint32_t kMask = 1;
  static constexpr std::string_view kUnkToken = "[UNK]";
  static constexpr std::string_view kMaskToken = "[MASK]";

  Vocabulary() {
    add(std::string(kUnkToken));
    add(std::string(kMaskToken));
  }

  std::uint32_t add(const std::string& tok) {
    auto [it, inserted] = index_.try_emplace(tok, static_cast<std::uint32_t>(tokens_.size()));
    if (inserted) tokens_.push_back(tok);
    return it->second;
  }

  template <typename Range>
  void add_all(const Range& toks) {
    for (const auto& t : toks) add(t);
  }

  std::uint32_t lookup(const std::string& tok) const {
    auto it = index_.find(tok);
    return it == index_.end() ? kUnk : it->second;
  }

  bool contains(const std::string& tok) const { return index_.count(tok) != 0; }
  std::size_t size() const { return tokens_.size(); }
  const std::string& token(std::size_t i) const { return tokens_.at(i); }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::uint32_t> index_;
};

/// Embedding table plus optional square projection. A missing projection
/// acts as the identity.
struct Tower {
  Matrix table;
  std::optional<Matrix> projection;
};

/// Dual encoder. Queries go through `query`, passages through `doc`; both
/// start from the same initialization so that untrained retrieval behaves
/// like bag-of-words matching.
struct EncoderParams {
  Vocabulary vocab;
  std::size_t dim = 0;
  Tower query;
  Tower doc;

  void validate() const {
    if (dim == 0) throw Error("embedding dimension must be >= 1");
    for (const Tower* t : {&query, &doc}) {
      if (static_cast<std::size_t>(t->table.rows()) != vocab.size() || static_cast<std::size_t>(t->table.cols()) != dim)
        throw Error("embedding table shape does not match vocabulary and dimension");
      if (!t->table.allFinite()) throw Error("non-finite embedding entry");
      if (t->projection) {
        if (static_cast<std::size_t>(t->projection->rows()) != dim || static_cast<std::size_t>(t->projection->cols()) != dim)
          throw Error("projection must be square of size dim");
        if (!t->projection->allFinite()) throw Error("non-finite projection entry");
      }
    }
  }
};

enum class TrainMode { fixed, query_side, full };

inline std::string_view to_string(TrainMode m) {
  switch (m) {
    case TrainMode::fixed: return "fixed";
    case TrainMode::query_side: return "query_side";
    case TrainMode::full: return "full";
  }
  return "fixed";
}

/// Entries drawn uniformly from [-1/sqrt(d), 1/sqrt(d)]; projection starts at
/// identity. The document tower is a copy of the query tower.
inline EncoderParams init_encoder(Vocabulary vocab, std::size_t dim, std::uint64_t seed, bool with_projection = true) {
  if (dim == 0) throw Error("embedding dimension must be >= 1");
  EncoderParams p;
  p.vocab = std::move(vocab);
  p.dim = dim;
  std::mt19937_64 rng(seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(dim));
  std::uniform_real_distribution<double> u(-bound, bound);
  p.query.table.resize(static_cast<Eigen::Index>(p.vocab.size()), static_cast<Eigen::Index>(dim));
  for (Eigen::Index r = 0; r < p.query.table.rows(); ++r)
    for (Eigen::Index c = 0; c < p.query.table.cols(); ++c) p.query.table(r, c) = u(rng);
  if (with_projection) p.query.projection = Matrix::Identity(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
  p.doc = p.query;
  return p;
}

/// Mean of the token rows (before projection).
inline Vector pooled(const Tower& tower, const Vocabulary& vocab, TokenView text) {
  if (text.empty()) throw Error("empty input");
  Vector m = Vector::Zero(tower.table.cols());
  for (const auto& t : text) m += tower.table.row(vocab.lookup(t)).transpose();
  m /= static_cast<double>(text.size());
  return m;
}

inline Vector encode(const Tower& tower, const Vocabulary& vocab, TokenView text) {
  Vector m = pooled(tower, vocab, text);
  if (tower.projection) return *tower.projection * m;
  return m;
}

inline Vector encode_query(const EncoderParams& p, TokenView text) { return encode(p.query, p.vocab, text); }
inline Vector encode_doc(const EncoderParams& p, TokenView text) { return encode(p.doc, p.vocab, text); }

inline double score(const Vector& q, const Vector& d) {
  if (q.size() != d.size()) throw Error("dimension mismatch");
  return q.dot(d);
}

inline std::vector<float> to_float(const Vector& v) {
  std::vector<float> out(static_cast<std::size_t>(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) out[static_cast<std::size_t>(i)] = static_cast<float>(v[i]);
  return out;
}

struct RetrievalDistribution {
  std::vector<std::string> doc_ids;
  std::vector<double> scores;
  std::vector<double> probs;
  double temperature = 0.1;
};

/// p_k = exp(s_k / theta) / sum_j exp(s_j / theta).
inline RetrievalDistribution retrieval_distribution(std::span<const double> scores, double temperature,
                                                    std::vector<std::string> doc_ids = {}) {
  if (!(temperature > 0.0)) throw Error("temperature must be positive");
  if (scores.empty()) throw Error("retrieval distribution needs K >= 1");
  for (double s : scores)
    if (!std::isfinite(s)) throw Error("non-finite score");
  if (!doc_ids.empty() && doc_ids.size() != scores.size()) throw Error("doc id count does not match score count");
  RetrievalDistribution r;
  r.doc_ids = std::move(doc_ids);
  r.scores.assign(scores.begin(), scores.end());
  r.probs = softmax(scores, temperature);
  r.temperature = temperature;
  return r;
}

// ---------------------------------------------------------------------------
// Gradients

/// Dense gradient with the same layout as EncoderParams.
struct EncoderGradient {
  Matrix query_table;
  Matrix doc_table;
  std::optional<Matrix> query_projection;
  std::optional<Matrix> doc_projection;

  static EncoderGradient zeros_like(const EncoderParams& p) {
    EncoderGradient g;
    g.query_table = Matrix::Zero(p.query.table.rows(), p.query.table.cols());
    g.doc_table = Matrix::Zero(p.doc.table.rows(), p.doc.table.cols());
    if (p.query.projection) g.query_projection = Matrix::Zero(p.query.projection->rows(), p.query.projection->cols());
    if (p.doc.projection) g.doc_projection = Matrix::Zero(p.doc.projection->rows(), p.doc.projection->cols());
    return g;
  }

  bool doc_side_is_zero() const {
    return (doc_table.array() == 0.0).all() && (!doc_projection || (doc_projection->array() == 0.0).all());
  }

  EncoderGradient& operator*=(double s) {
    query_table *= s;
    doc_table *= s;
    if (query_projection) *query_projection *= s;
    if (doc_projection) *doc_projection *= s;
    return *this;
  }
};

namespace detail {

// Accumulates d(loss)/d(tower params) given d(loss)/d(encoding).
inline void backprop_tower(const Tower& tower, const Vocabulary& vocab, TokenView text, const Vector& grad_out,
                           Matrix& grad_table, std::optional<Matrix>& grad_proj) {
  Vector m = pooled(tower, vocab, text);
  Vector grad_m = grad_out;
  if (tower.projection) {
    *grad_proj += grad_out * m.transpose();
    grad_m = tower.projection->transpose() * grad_out;
  }
  grad_m /= static_cast<double>(text.size());
  for (const auto& t : text) grad_table.row(vocab.lookup(t)) += grad_m.transpose();
}

}  // namespace detail

/// Chain rule from d(loss)/d(scores), where score_k = encode_query(q) . encode_doc(d_k),
/// into `acc`. In query_side mode the document encodings are constants.
inline void backprop_scores(const EncoderParams& p, TokenView query, std::span<const TokenView> docs,
                            std::span<const double> grad_scores, TrainMode mode, EncoderGradient& acc) {
  if (mode == TrainMode::fixed) throw Error("retriever frozen");
  if (docs.size() != grad_scores.size()) throw Error("doc count does not match gradient length");
  Vector q = encode_query(p, query);
  Vector grad_q = Vector::Zero(q.size());
  for (std::size_t k = 0; k < docs.size(); ++k) {
    if (grad_scores[k] == 0.0) continue;
    Vector d = encode_doc(p, docs[k]);
    grad_q += grad_scores[k] * d;
    if (mode == TrainMode::full) {
      Vector grad_d = grad_scores[k] * q;
      detail::backprop_tower(p.doc, p.vocab, docs[k], grad_d, acc.doc_table, acc.doc_projection);
    }
  }
  detail::backprop_tower(p.query, p.vocab, query, grad_q, acc.query_table, acc.query_projection);
}

/// Gradient of KL(target || p_retr) with respect to encoder parameters.
/// The target is a constant; d(KL)/d(score_k) = (p_retr_k - target_k) / theta.
inline EncoderGradient retriever_gradient(const EncoderParams& p, TokenView query, std::span<const TokenView> docs,
                                          std::span<const double> target, double temperature, TrainMode mode) {
  if (mode == TrainMode::fixed) throw Error("retriever frozen");
  if (!is_distribution(target)) throw Error("target is not a valid distribution");
  if (target.size() != docs.size()) throw Error("target length does not match doc count");
  Vector q = encode_query(p, query);
  std::vector<double> scores(docs.size());
  for (std::size_t k = 0; k < docs.size(); ++k) scores[k] = score(q, encode_doc(p, docs[k]));
  auto probs = softmax(scores, temperature);
  std::vector<double> g(docs.size());
  for (std::size_t k = 0; k < docs.size(); ++k) g[k] = (probs[k] - target[k]) / temperature;
  EncoderGradient acc = EncoderGradient::zeros_like(p);
  backprop_scores(p, query, docs, g, mode, acc);
  return acc;
}

/// params -= lr * grad, restricted to the query tower in query_side mode and
/// a no-op in fixed mode.
inline void apply_sgd(EncoderParams& p, const EncoderGradient& g, double lr, TrainMode mode) {
  if (mode == TrainMode::fixed) return;
  p.query.table -= lr * g.query_table;
  if (p.query.projection && g.query_projection) *p.query.projection -= lr * *g.query_projection;
  if (mode == TrainMode::full) {
    p.doc.table -= lr * g.doc_table;
    if (p.doc.projection && g.doc_projection) *p.doc.projection -= lr * *g.doc_projection;
  }
}

// ---------------------------------------------------------------------------
// Checkpoint: "RLAB" | u32 format | u32 dim | u32 vocab | u32 flags |
// query table | [query projection] | doc table | [doc projection] | tokens.
// Tables are row-major float32.

inline constexpr std::uint32_t kCheckpointFormat = 1;

inline void save_checkpoint(const std::string& path, const EncoderParams& p) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IOError("cannot write '" + path + "'");
  bin::put_magic(out, "RLAB");
  bin::put(out, kCheckpointFormat);
  bin::put(out, static_cast<std::uint32_t>(p.dim));
  bin::put(out, static_cast<std::uint32_t>(p.vocab.size()));
  std::uint32_t flags = (p.query.projection ? 1u : 0u) | (p.doc.projection ? 2u : 0u);
  bin::put(out, flags);
  auto put_matrix = [&](const Matrix& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) bin::put_f32(out, static_cast<float>(m(r, c)));
  };
  put_matrix(p.query.table);
  if (p.query.projection) put_matrix(*p.query.projection);
  put_matrix(p.doc.table);
  if (p.doc.projection) put_matrix(*p.doc.projection);
  for (std::size_t i = 0; i < p.vocab.size(); ++i) bin::put_str(out, p.vocab.token(i));
  if (!out) throw IOError("write failed for '" + path + "'");
}

inline EncoderParams load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IOError("cannot open '" + path + "'");
  bin::expect_magic(in, "RLAB");
  if (bin::get<std::uint32_t>(in) != kCheckpointFormat) throw IOError("unsupported checkpoint format");
  EncoderParams p;
  p.dim = bin::get<std::uint32_t>(in);
  auto vocab_size = bin::get<std::uint32_t>(in);
  auto flags = bin::get<std::uint32_t>(in);
  if (p.dim == 0 || vocab_size < 2) throw IOError("corrupt checkpoint header");
  const auto d = static_cast<Eigen::Index>(p.dim);
  auto get_matrix = [&](Eigen::Index rows, Eigen::Index cols) {
    Matrix m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = bin::get_f32(in);
    return m;
  };
  p.query.table = get_matrix(vocab_size, d);
  if (flags & 1u) p.query.projection = get_matrix(d, d);
  p.doc.table = get_matrix(vocab_size, d);
  if (flags & 2u) p.doc.projection = get_matrix(d, d);
  Vocabulary vocab;
  for (std::uint32_t i = 0; i < vocab_size; ++i) {
    std::string tok = bin::get_str(in);
    if (vocab.add(tok) != i) throw IOError("corrupt checkpoint vocabulary");
  }
  p.vocab = std::move(vocab);
  p.validate();
  return p;
}

}  // namespace ralab
