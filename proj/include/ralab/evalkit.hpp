#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <map>
#include <set>
#include <numeric>
#include <string>
#include <unordered_map>
#include <vector>

#include "ralab/index.hpp"
#include "ralab/lm_scorer.hpp"
#include "ralab/retriever.hpp"

namespace ralab {

// ---------------------------------------------------------------------------
// Answer metrics

/// Lowercase, strip ASCII punctuation, drop the articles a/an/the, collapse
/// whitespace.
inline std::string normalize_answer(std::string_view s) {
  std::string lowered;
  lowered.reserve(s.size());
  for (unsigned char c : s) {
    if (std::ispunct(c)) continue;
    lowered.push_back(static_cast<char>(std::tolower(c)));
  }
  Tokens words = split_words(lowered);
  std::erase_if(words, [](const std::string& w) { return w == "a" || w == "an" || w == "the"; });
  return join(words, " ");
}

inline int exact_match(std::string_view prediction, std::string_view gold) {
  return normalize_answer(prediction) == normalize_answer(gold) ? 1 : 0;
}

/// Token-level F1 over normalized tokens (multiset overlap).
inline double f1(std::string_view prediction, std::string_view gold) {
  Tokens p = split_words(normalize_answer(prediction));
  Tokens g = split_words(normalize_answer(gold));
  if (p.empty() && g.empty()) return 1.0;
  if (p.empty() || g.empty()) return 0.0;
  std::unordered_map<std::string, int> counts;
  for (const auto& t : g) ++counts[t];
  int common = 0;
  for (const auto& t : p) {
    auto it = counts.find(t);
    if (it != counts.end() && it->second > 0) {
      --it->second;
      ++common;
    }
  }
  if (common == 0) return 0.0;
  double precision = static_cast<double>(common) / static_cast<double>(p.size());
  double recall = static_cast<double>(common) / static_cast<double>(g.size());
  return 2.0 * precision * recall / (precision + recall);
}

inline int exact_match_any(std::string_view prediction, std::span<const std::string> golds) {
  for (const auto& g : golds)
    if (exact_match(prediction, g)) return 1;
  return 0;
}

inline double f1_max(std::string_view prediction, std::span<const std::string> golds) {
  double best = 0.0;
  for (const auto& g : golds) best = std::max(best, f1(prediction, g));
  return best;
}

// ---------------------------------------------------------------------------
// Input templates

inline constexpr std::array<char, 4> kLetters = {'A', 'B', 'C', 'D'};

inline std::string choice_input(std::string_view question, const std::array<std::string, 4>& ordered_options) {
  std::string s = "question: " + std::string(question) + "\noptions:";
  for (std::size_t j = 0; j < 4; ++j) s += std::string(" (") + kLetters[j] + ") " + ordered_options[j];
  s += "\nanswer: [MASK_0]";
  return s;
}

inline std::string choice_target(char letter) { return std::string("[MASK_0] ") + letter; }

inline std::string qa_input(std::string_view question) { return "question: " + std::string(question) + " answer: [MASK_0]"; }

inline std::string qa_target(std::string_view answer) { return "[MASK_0] " + std::string(answer); }

// ---------------------------------------------------------------------------
// Multiple choice with de-biased inference

struct ChoiceTask {
  std::string question;
  std::array<std::string, 4> options;
  int gold = 0;

  void validate() const {
    if (gold < 0 || gold > 3) throw Error("gold option index must lie in 0..3");
  }
};

/// Returns a distribution over the letters A..D for one ordering of the
/// options.
class ChoiceScorer {
 public:
  virtual ~ChoiceScorer() = default;
  virtual std::array<double, 4> letter_probs(std::string_view question, const std::array<std::string, 4>& ordered_options,
                                             std::span<const Passage> docs) const = 0;
};

enum class DebiasMode { standard, cyclic4, all24 };

inline DebiasMode parse_debias_mode(std::string_view s) {
  if (s == "standard") return DebiasMode::standard;
  if (s == "cyclic4") return DebiasMode::cyclic4;
  if (s == "all24") return DebiasMode::all24;
  throw Error("unknown inference mode '" + std::string(s) + "'");
}

/// ordering[j] is the option shown under letter j.
using Ordering = std::array<int, 4>;

inline std::vector<Ordering> orderings(DebiasMode mode) {
  std::vector<Ordering> out;
  switch (mode) {
    case DebiasMode::standard: out.push_back({0, 1, 2, 3}); break;
    case DebiasMode::cyclic4:
      for (int s = 0; s < 4; ++s) out.push_back({s % 4, (s + 1) % 4, (s + 2) % 4, (s + 3) % 4});
      break;
    case DebiasMode::all24: {
      Ordering o = {0, 1, 2, 3};
      do out.push_back(o);
      while (std::next_permutation(o.begin(), o.end()));
      break;
    }
  }
  return out;
}

struct DebiasResult {
  int prediction = 0;
  std::array<double, 4> posterior{};  // over options, normalized
  std::size_t scorer_calls = 0;
};

/// Sums each letter's probability into the option it shows, over all
/// orderings of the mode, then normalizes. Ties go to the lowest option.
inline DebiasResult debias_infer(const ChoiceTask& task, const ChoiceScorer& scorer, DebiasMode mode,
                                 std::span<const Passage> docs = {}) {
  task.validate();
  DebiasResult r;
  for (const Ordering& o : orderings(mode)) {
    std::array<std::string, 4> shown;
    for (std::size_t j = 0; j < 4; ++j) shown[j] = task.options[static_cast<std::size_t>(o[j])];
    auto probs = scorer.letter_probs(task.question, shown, docs);
    for (std::size_t j = 0; j < 4; ++j) r.posterior[static_cast<std::size_t>(o[j])] += probs[j];
    ++r.scorer_calls;
  }
  double z = std::accumulate(r.posterior.begin(), r.posterior.end(), 0.0);
  if (z > 0.0)
    for (double& p : r.posterior) p /= z;
  r.prediction = static_cast<int>(std::max_element(r.posterior.begin(), r.posterior.end()) - r.posterior.begin());
  return r;
}

/// Scores each letter by the mean per-token log-likelihood of the option it
/// shows under the overlap reader with the retrieved documents pooled, then
/// takes a softmax over the four letters. No documents gives uniform.
class OverlapChoiceScorer final : public ChoiceScorer {
 public:
  explicit OverlapChoiceScorer(OverlapLM lm, double temperature = 1.0) : lm_(std::move(lm)), temperature_(temperature) {}

  std::array<double, 4> letter_probs(std::string_view question, const std::array<std::string, 4>& ordered,
                                     std::span<const Passage> docs) const override {
    std::array<double, 4> logits{};
    if (!docs.empty()) {
      Tokens q = split_words(question);
      for (std::size_t j = 0; j < 4; ++j) {
        Tokens opt = split_words(ordered[j]);
        logits[j] = opt.empty() ? std::log(lm_.floor())
                                : lm_.joint_loglik(q, docs, opt) / static_cast<double>(opt.size());
      }
    }
    auto p = softmax(logits, temperature_);
    return {p[0], p[1], p[2], p[3]};
  }

 private:
  OverlapLM lm_;
  double temperature_;
};

// ---------------------------------------------------------------------------
// Leakage

/// Length of the longest common contiguous token run (dynamic programming).
inline std::size_t longest_common_run(TokenView a, TokenView b) {
  if (a.empty() || b.empty()) return 0;
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  std::size_t best = 0;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : 0;
      best = std::max(best, cur[j]);
    }
    std::swap(prev, cur);
  }
  return best;
}

struct LeakageReport {
  bool flagged = false;
  std::size_t overlap = 0;              // max over passages
  std::vector<std::size_t> per_passage;  // aligned with the input
  std::vector<bool> passage_flags;
};

/// A passage leaks when its longest shared run covers at least 3/4 of the
/// question's tokens.
inline bool leaks(std::size_t overlap, std::size_t question_len) { return 4 * overlap >= 3 * question_len; }

inline LeakageReport leakage_audit(TokenView question, std::span<const Passage> passages) {
  if (question.empty()) throw Error("empty question");
  LeakageReport r;
  for (const auto& p : passages) {
    std::size_t o = longest_common_run(question, p.text);
    r.per_passage.push_back(o);
    r.passage_flags.push_back(leaks(o, question.size()));
    r.overlap = std::max(r.overlap, o);
  }
  r.flagged = leaks(r.overlap, question.size());
  return r;
}

struct EvalRecord {
  std::vector<Passage> retrieved;
  std::vector<bool> leaked;  // aligned with `retrieved`
};

struct RerunReport {
  double original = 0.0;
  double filtered = 0.0;
  double delta() const { return filtered - original; }
};

/// `metric(i, docs)` scores record i given a retrieval set. The filtered run
/// drops every leaked passage before scoring.
template <typename Metric>
RerunReport filtered_rerun(std::span<const EvalRecord> records, Metric&& metric) {
  RerunReport r;
  if (records.empty()) return r;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& rec = records[i];
    if (rec.leaked.size() != rec.retrieved.size()) throw Error("leak flags do not match retrieval set");
    r.original += metric(i, std::span<const Passage>(rec.retrieved));
    std::vector<Passage> kept;
    for (std::size_t j = 0; j < rec.retrieved.size(); ++j)
      if (!rec.leaked[j]) kept.push_back(rec.retrieved[j]);
    r.filtered += metric(i, std::span<const Passage>(kept));
  }
  r.original /= static_cast<double>(records.size());
  r.filtered /= static_cast<double>(records.size());
  return r;
}

// ---------------------------------------------------------------------------
// Retrieval sources and the temporal index swap

/// An index together with the passages it embeds, tagged with a dump date.
struct RetrievalSource {
  EmbeddingIndex index;
  std::vector<Passage> passages;
  Date dump_date;

  const Passage& passage(const std::string& id) const {
    if (by_id_.empty())
      for (std::size_t i = 0; i < passages.size(); ++i) by_id_.emplace(passages[i].id, i);
    auto it = by_id_.find(id);
    if (it == by_id_.end()) throw Error("index entry '" + id + "' has no passage");
    return passages[it->second];
  }

 private:
  mutable std::unordered_map<std::string, std::size_t> by_id_;
};

inline RetrievalSource make_source(std::vector<Passage> passages, const EncoderParams& encoder, Date dump_date,
                                   std::size_t shards = 1) {
  RetrievalSource s;
  s.index = build(passages, encoder, shards);
  s.passages = std::move(passages);
  s.dump_date = dump_date;
  return s;
}

inline std::vector<Passage> retrieve_passages(const RetrievalSource& src, const EncoderParams& encoder, TokenView query,
                                              std::size_t k) {
  auto hits = search(src.index, to_float(encode_query(encoder, query)), k);
  std::vector<Passage> out;
  for (const auto& h : hits) out.push_back(src.passage(h.id));
  return out;
}

class QAAnswerer {
 public:
  virtual ~QAAnswerer() = default;
  virtual std::string answer(TokenView query, std::span<const Passage> docs) const = 0;
};

/// Picks the retrieved passage sharing the most tokens with the query
/// (earlier rank wins ties) and answers with its remaining tokens.
class OverlapAnswerer final : public QAAnswerer {
 public:
  std::string answer(TokenView query, std::span<const Passage> docs) const override {
    std::unordered_map<std::string, int> q;
    for (const auto& t : query) q[t] = 1;
    const Passage* best = nullptr;
    std::size_t best_overlap = 0;
    for (const auto& d : docs) {
      std::size_t o = 0;
      for (const auto& t : d.text) o += q.count(t);
      if (!best || o > best_overlap) {
        best = &d;
        best_overlap = o;
      }
    }
    if (!best) return {};
    Tokens rest;
    for (const auto& t : best->text)
      if (!q.count(t)) rest.push_back(t);
    return join(rest, " ");
  }
};

struct TemporalQA {
  std::string query;
  std::map<int, std::string> answers_by_year;
};

/// Accuracy by (answer year, index year). Row i uses the answers of
/// `years[i]`; column j retrieves from the source dated `years[j]`.
struct TemporalMatrix {
  std::array<int, 2> years{};
  std::array<std::array<double, 2>, 2> accuracy{};
};

inline TemporalMatrix temporal_swap_eval(std::span<const TemporalQA> dataset, const RetrievalSource& a,
                                         const RetrievalSource& b, const EncoderParams& encoder,
                                         const QAAnswerer& answerer, std::size_t k = 5) {
  if (a.dump_date == b.dump_date) throw Error("indices share a dump_date");
  TemporalMatrix m;
  m.years = {a.dump_date.year, b.dump_date.year};
  const RetrievalSource* sources[2] = {&a, &b};
  std::array<std::array<std::size_t, 2>, 2> correct{}, total{};
  for (const auto& ex : dataset) {
    Tokens q = split_words(ex.query);
    for (std::size_t col = 0; col < 2; ++col) {
      auto docs = retrieve_passages(*sources[col], encoder, q, k);
      std::string pred = answerer.answer(q, docs);
      for (std::size_t row = 0; row < 2; ++row) {
        auto it = ex.answers_by_year.find(m.years[row]);
        if (it == ex.answers_by_year.end()) continue;
        ++total[row][col];
        correct[row][col] += static_cast<std::size_t>(exact_match(pred, it->second));
      }
    }
  }
  for (std::size_t r = 0; r < 2; ++r)
    for (std::size_t c = 0; c < 2; ++c)
      m.accuracy[r][c] = total[r][c] ? static_cast<double>(correct[r][c]) / static_cast<double>(total[r][c]) : 0.0;
  return m;
}

// ---------------------------------------------------------------------------
// Task JSONL

inline ChoiceTask choice_task_from_json(const nlohmann::json& j) {
  ChoiceTask t;
  t.question = j.at("question").get<std::string>();
  auto opts = j.at("options").get<std::vector<std::string>>();
  if (opts.size() != 4) throw Error("choice task needs exactly 4 options");
  std::copy(opts.begin(), opts.end(), t.options.begin());
  t.gold = j.at("gold").get<int>();
  t.validate();
  return t;
}

inline TemporalQA temporal_from_json(const nlohmann::json& j) {
  TemporalQA t;
  t.query = j.at("query").get<std::string>();
  for (auto it = j.at("answers_by_year").begin(); it != j.at("answers_by_year").end(); ++it)
    t.answers_by_year[std::stoi(it.key())] = it->get<std::string>();
  std::set<std::string> distinct;
  for (const auto& [y, ans] : t.answers_by_year) distinct.insert(normalize_answer(ans));
  if (t.answers_by_year.size() < 2 || distinct.size() < 2)
    throw Error("temporal question needs two years with differing answers");
  return t;
}

}  // namespace ralab
