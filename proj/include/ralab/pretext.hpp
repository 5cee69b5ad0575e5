#pragma once

#include <algorithm>
#include <array>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "ralab/corpus.hpp"
#include "ralab/retriever.hpp"

namespace ralab {

enum class Task { prefix_lm, mlm, title_to_section, supervised };

inline std::string_view to_string(Task t) {
  switch (t) {
    case Task::prefix_lm: return "prefix_lm";
    case Task::mlm: return "mlm";
    case Task::title_to_section: return "title_to_section";
    case Task::supervised: return "supervised";
  }
  return "prefix_lm";
}

inline Task parse_task(std::string_view s) {
  if (s == "prefix_lm") return Task::prefix_lm;
  if (s == "mlm") return Task::mlm;
  if (s == "title_to_section") return Task::title_to_section;
  if (s == "supervised") return Task::supervised;
  throw Error("unknown task '" + std::string(s) + "'");
}

/// A (query, output) training pair. `retrieval_query` is what the retriever
/// sees; it differs from `query` only for masked LM. The origin passage is
/// excluded from retrieval; the gold passage, when known, drives recall
/// metrics.
struct PretextExample {
  Tokens query;
  Tokens retrieval_query;
  Tokens output;
  std::string origin_passage_id;
  // Further ids to hide from retrieval (other chunks of the same origin).
  std::vector<std::string> excluded_ids;
  std::string gold_passage_id;
  Task task = Task::supervised;
};

inline std::string sentinel(std::size_t i) { return "[MASK_" + std::to_string(i) + "]"; }

inline bool is_sentinel(const std::string& t) {
  return t.size() > 7 && t.rfind("[MASK_", 0) == 0 && t.back() == ']';
}

/// query = first ceil(N/2) tokens, output = the rest.
inline PretextExample prefix_lm_example(TokenView chunk, std::string origin_id = {}) {
  if (chunk.size() < 2) throw Error("prefix LM needs at least 2 tokens");
  const std::size_t half = (chunk.size() + 1) / 2;
  PretextExample ex;
  ex.query.assign(chunk.begin(), chunk.begin() + static_cast<std::ptrdiff_t>(half));
  ex.output.assign(chunk.begin() + static_cast<std::ptrdiff_t>(half), chunk.end());
  ex.retrieval_query = ex.query;
  ex.origin_passage_id = std::move(origin_id);
  ex.task = Task::prefix_lm;
  return ex;
}

struct MaskSpan {
  std::size_t begin = 0;
  std::size_t length = 0;
};

struct MlmConfig {
  double mask_ratio = 0.15;
  double mean_span = 3.0;
  std::size_t min_span = 1;
  std::size_t max_span = 10;
};

/// Span layout for one chunk. Lengths are Poisson(mean_span) clamped to
/// [min_span, max_span]; the span count is round(ratio * N / mean_span).
/// A span that would overlap an earlier one is re-placed.
inline std::vector<MaskSpan> sample_mask_spans(std::size_t n, const MlmConfig& cfg, std::mt19937_64& rng) {
  const auto target = static_cast<std::size_t>(std::llround(cfg.mask_ratio * static_cast<double>(n) / cfg.mean_span));
  std::poisson_distribution<int> pois(cfg.mean_span);
  std::vector<char> used(n, 0);
  std::vector<MaskSpan> spans;
  for (std::size_t s = 0; s < std::max<std::size_t>(target, 1); ++s) {
    std::size_t len = std::clamp<std::size_t>(static_cast<std::size_t>(pois(rng)), cfg.min_span, cfg.max_span);
    len = std::min(len, n);
    std::uniform_int_distribution<std::size_t> start(0, n - len);
    for (int attempt = 0; attempt < 1000; ++attempt) {
      std::size_t b = start(rng);
      if (std::none_of(used.begin() + static_cast<std::ptrdiff_t>(b), used.begin() + static_cast<std::ptrdiff_t>(b + len),
                       [](char c) { return c != 0; })) {
        std::fill_n(used.begin() + static_cast<std::ptrdiff_t>(b), len, 1);
        spans.push_back({b, len});
        break;
      }
    }
  }
  std::sort(spans.begin(), spans.end(), [](const MaskSpan& a, const MaskSpan& b) { return a.begin < b.begin; });
  return spans;
}

/// Replaces spans with [MASK_i] in the query; the output lists each sentinel
/// followed by the tokens it hides. The retrieval query uses the retriever's
/// single mask token instead of the sentinels.
inline PretextExample mlm_from_spans(TokenView chunk, std::span<const MaskSpan> spans, std::string origin_id = {}) {
  PretextExample ex;
  ex.task = Task::mlm;
  ex.origin_passage_id = std::move(origin_id);
  std::size_t pos = 0;
  for (std::size_t i = 0; i < spans.size(); ++i) {
    const auto& sp = spans[i];
    if (sp.begin < pos || sp.begin + sp.length > chunk.size() || sp.length == 0) throw Error("invalid mask span layout");
    ex.query.insert(ex.query.end(), chunk.begin() + static_cast<std::ptrdiff_t>(pos),
                    chunk.begin() + static_cast<std::ptrdiff_t>(sp.begin));
    ex.query.push_back(sentinel(i));
    ex.output.push_back(sentinel(i));
    ex.output.insert(ex.output.end(), chunk.begin() + static_cast<std::ptrdiff_t>(sp.begin),
                     chunk.begin() + static_cast<std::ptrdiff_t>(sp.begin + sp.length));
    pos = sp.begin + sp.length;
  }
  ex.query.insert(ex.query.end(), chunk.begin() + static_cast<std::ptrdiff_t>(pos), chunk.end());
  ex.retrieval_query = ex.query;
  for (auto& t : ex.retrieval_query)
    if (is_sentinel(t)) t = std::string(Vocabulary::kMaskToken);
  return ex;
}

inline PretextExample mlm_example(TokenView chunk, std::uint64_t seed, const MlmConfig& cfg = {},
                                  std::string origin_id = {}) {
  if (chunk.size() < 10) throw Error("chunk too short for masked LM (need >= 10 tokens)");
  std::mt19937_64 rng(seed);
  auto spans = sample_mask_spans(chunk.size(), cfg, rng);
  return mlm_from_spans(chunk, spans, std::move(origin_id));
}

/// Puts the output's spans back into the query's sentinel slots.
inline Tokens fill_masks(TokenView query, TokenView output) {
  std::unordered_map<std::string, Tokens> fills;
  std::string current;
  for (const auto& t : output) {
    if (is_sentinel(t)) {
      current = t;
      fills[current];
    } else {
      if (current.empty()) throw Error("output does not start with a sentinel");
      fills[current].push_back(t);
    }
  }
  Tokens out;
  for (const auto& t : query) {
    if (is_sentinel(t)) {
      auto it = fills.find(t);
      if (it == fills.end()) throw Error("sentinel " + t + " missing from output");
      out.insert(out.end(), it->second.begin(), it->second.end());
    } else {
      out.push_back(t);
    }
  }
  return out;
}

inline const std::array<std::string_view, 4> kExcludedSections = {"See also", "References", "Further reading",
                                                                  "External links"};

/// query = "<article title> ; <section title>", output = section text.
inline PretextExample title_to_section_example(const RawDocument& doc, std::size_t section,
                                               std::size_t max_words = 200) {
  if (section >= doc.sections.size()) throw Error("section index out of range");
  const Section& sec = doc.sections[section];
  if (std::find(kExcludedSections.begin(), kExcludedSections.end(), sec.title) != kExcludedSections.end())
    throw Error("excluded section");
  PretextExample ex;
  ex.task = Task::title_to_section;
  ex.query = split_words(doc.title + " ; " + sec.title);
  ex.output = split_words(section_text(sec));
  if (ex.output.empty()) throw Error("empty section body");
  ex.retrieval_query = ex.query;
  // Ids follow chunk(): every passage cut from this section is excluded.
  const std::size_t parts = equal_split_sizes(ex.output.size(), max_words).size();
  for (std::size_t i = 0; i < parts; ++i)
    ex.excluded_ids.push_back(doc.id + "#" + std::to_string(section) + "-" + std::to_string(i));
  ex.origin_passage_id = ex.excluded_ids.front();
  return ex;
}

/// Training examples for `task` built from already chunked passages. For
/// title-to-section the chunks of one section are regrouped by
/// (doc_id, section_title). Passages too short for the task are skipped.
inline std::vector<PretextExample> examples_from_passages(std::span<const Passage> passages, Task task,
                                                          std::uint64_t seed = 0) {
  std::vector<PretextExample> out;
  switch (task) {
    case Task::prefix_lm:
      for (const auto& p : passages)
        if (p.text.size() >= 2) out.push_back(prefix_lm_example(p.text, p.id));
      break;
    case Task::mlm:
      for (const auto& p : passages)
        if (p.text.size() >= 10) out.push_back(mlm_example(p.text, seed ^ fnv1a(p.id), {}, p.id));
      break;
    case Task::title_to_section: {
      std::vector<std::pair<std::string, std::string>> order;
      std::map<std::pair<std::string, std::string>, std::vector<const Passage*>> groups;
      for (const auto& p : passages) {
        if (p.section_title.empty()) continue;
        if (std::find(kExcludedSections.begin(), kExcludedSections.end(), p.section_title) != kExcludedSections.end())
          continue;
        auto key = std::make_pair(p.doc_id, p.section_title);
        auto& g = groups[key];
        if (g.empty()) order.push_back(key);
        g.push_back(&p);
      }
      for (const auto& key : order) {
        const auto& g = groups[key];
        PretextExample ex;
        ex.task = Task::title_to_section;
        ex.query = split_words(g.front()->title + " ; " + key.second);
        ex.retrieval_query = ex.query;
        for (const Passage* p : g) {
          ex.output.insert(ex.output.end(), p->text.begin(), p->text.end());
          ex.excluded_ids.push_back(p->id);
        }
        if (ex.output.empty()) continue;
        ex.origin_passage_id = ex.excluded_ids.front();
        out.push_back(std::move(ex));
      }
      break;
    }
    case Task::supervised: throw Error("supervised task needs an examples file");
  }
  return out;
}

/// {query, output, retrieval_query?, gold_passage_id?, excluded_ids?}; text
/// fields are whitespace-tokenized strings.
inline PretextExample example_from_json(const nlohmann::json& j) {
  PretextExample ex;
  ex.task = Task::supervised;
  ex.query = split_words(j.at("query").get<std::string>());
  ex.output = split_words(j.at("output").get<std::string>());
  ex.retrieval_query = j.contains("retrieval_query") ? split_words(j["retrieval_query"].get<std::string>()) : ex.query;
  ex.gold_passage_id = j.value("gold_passage_id", "");
  ex.excluded_ids = j.value("excluded_ids", std::vector<std::string>{});
  if (ex.retrieval_query.empty() || ex.output.empty()) throw Error("example needs a nonempty query and output");
  return ex;
}

}  // namespace ralab
