#pragma once

#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "ralab/common.hpp"

namespace ralab {

enum class Source { wiki, cc, infobox };

inline std::string_view to_string(Source s) {
  switch (s) {
    case Source::wiki: return "wiki";
    case Source::cc: return "cc";
    case Source::infobox: return "infobox";
  }
  return "wiki";
}

inline Source parse_source(std::string_view s) {
  if (s == "wiki") return Source::wiki;
  if (s == "cc") return Source::cc;
  if (s == "infobox") return Source::infobox;
  throw Error("unknown source '" + std::string(s) + "'");
}

/// One section of a raw article. `entries` holds list/table/infobox items;
/// when present they are linearized into `text` before chunking.
struct Section {
  std::string title;
  std::string text;
  std::vector<std::string> entries;
};

struct RawDocument {
  std::string id;
  std::string title;
  std::vector<Section> sections;
  Source source = Source::wiki;
  std::optional<Date> dump_date;
};

struct Passage {
  std::string id;
  std::string doc_id;
  Tokens text;
  std::size_t word_count = 0;
  Source source = Source::wiki;
  std::optional<Date> dump_date;
  // Metadata only; never counted in word_count.
  std::string title;
  std::string section_title;
};

struct FilterConfig {
  std::size_t min_doc_length = 50;
  double max_mean_word_length = 10.0;
  double min_alnum_ratio = 0.6;
  double max_repeated_token_ratio = 0.5;

  void validate() const {
    if (!std::isfinite(max_mean_word_length)) throw ConfigError("max_mean_word_length", "must be finite");
    if (!(min_alnum_ratio >= 0.0 && min_alnum_ratio <= 1.0)) throw ConfigError("min_alnum_ratio", "must lie in [0,1]");
    if (!(max_repeated_token_ratio >= 0.0 && max_repeated_token_ratio <= 1.0))
      throw ConfigError("max_repeated_token_ratio", "must lie in [0,1]");
  }
};

/// The four statistics the quality filter thresholds.
struct DocStats {
  std::size_t words = 0;
  double mean_word_length = 0.0;
  double alnum_ratio = 0.0;
  double repeated_token_ratio = 0.0;
};

// ---------------------------------------------------------------------------

/// Joins non-empty entries with "; ".
inline std::string linearize_entries(std::span<const std::string> entries) {
  std::string out;
  for (const auto& e : entries) {
    if (e.empty()) continue;
    if (!out.empty()) out += "; ";
    out += e;
  }
  return out;
}

inline std::string section_text(const Section& s) {
  if (s.entries.empty()) return s.text;
  std::string lin = linearize_entries(s.entries);
  if (s.text.empty()) return lin;
  if (lin.empty()) return s.text;
  return s.text + "; " + lin;
}

/// Flattens a document's structured entries into one text. Sections without
/// entries contribute their text unchanged, so flat documents pass through.
inline std::string linearize_structured(const RawDocument& doc) {
  std::vector<std::string> parts;
  for (const auto& s : doc.sections) {
    std::string t = section_text(s);
    if (!t.empty()) parts.push_back(std::move(t));
  }
  return linearize_entries(parts);
}

/// Returns a copy of `doc` whose entries have been folded into section text.
inline RawDocument linearized(RawDocument doc) {
  for (auto& s : doc.sections) {
    s.text = section_text(s);
    s.entries.clear();
  }
  return doc;
}

/// Sizes of an equal split of `words` into ceil(words / max_words) parts;
/// the first `words % parts` parts get one extra word.
inline std::vector<std::size_t> equal_split_sizes(std::size_t words, std::size_t max_words) {
  if (max_words == 0) throw Error("max_words must be >= 1");
  if (words == 0) return {};
  std::size_t parts = (words + max_words - 1) / max_words;
  std::vector<std::size_t> sizes(parts, words / parts);
  for (std::size_t i = 0; i < words % parts; ++i) ++sizes[i];
  return sizes;
}

/// Splits each section into passages of at most `max_words` words.
/// Passage ids are "<doc_id>#<section>-<part>".
inline std::vector<Passage> chunk(const RawDocument& raw, std::size_t max_words = 200) {
  if (max_words == 0) throw Error("max_words must be >= 1");
  RawDocument doc = linearized(raw);
  std::vector<Passage> out;
  for (std::size_t si = 0; si < doc.sections.size(); ++si) {
    const Section& sec = doc.sections[si];
    Tokens words = split_words(sec.text);
    std::size_t offset = 0;
    auto sizes = equal_split_sizes(words.size(), max_words);
    for (std::size_t pi = 0; pi < sizes.size(); ++pi) {
      Passage p;
      p.id = doc.id + "#" + std::to_string(si) + "-" + std::to_string(pi);
      p.doc_id = doc.id;
      p.text.assign(words.begin() + static_cast<std::ptrdiff_t>(offset),
                    words.begin() + static_cast<std::ptrdiff_t>(offset + sizes[pi]));
      p.word_count = sizes[pi];
      p.source = doc.source;
      p.dump_date = doc.dump_date;
      p.title = doc.title;
      p.section_title = sec.title;
      offset += sizes[pi];
      out.push_back(std::move(p));
    }
  }
  return out;
}

inline DocStats doc_stats(const RawDocument& doc) {
  DocStats st;
  Tokens words = split_words(linearize_structured(doc));
  st.words = words.size();
  if (words.empty()) return st;
  std::size_t chars = 0, alnum = 0;
  std::unordered_set<std::string_view> distinct;
  for (const auto& w : words) {
    chars += w.size();
    for (unsigned char c : w) alnum += std::isalnum(c) ? 1 : 0;
    distinct.insert(w);
  }
  st.mean_word_length = static_cast<double>(chars) / static_cast<double>(words.size());
  st.alnum_ratio = static_cast<double>(alnum) / static_cast<double>(chars);
  st.repeated_token_ratio = 1.0 - static_cast<double>(distinct.size()) / static_cast<double>(words.size());
  return st;
}

inline bool quality_filter(const RawDocument& doc, const FilterConfig& cfg) {
  cfg.validate();
  DocStats st = doc_stats(doc);
  if (st.words == 0) return false;
  return st.words >= cfg.min_doc_length && st.mean_word_length <= cfg.max_mean_word_length &&
         st.alnum_ratio >= cfg.min_alnum_ratio && st.repeated_token_ratio <= cfg.max_repeated_token_ratio;
}

inline std::vector<Passage> exclude_self(std::span<const Passage> results, const Passage& origin) {
  std::vector<Passage> out;
  for (const auto& p : results)
    if (p.id != origin.id) out.push_back(p);
  return out;
}

// ---------------------------------------------------------------------------
// JSONL

inline RawDocument raw_document_from_json(const nlohmann::json& j) {
  RawDocument d;
  d.id = j.at("id").get<std::string>();
  if (d.id.empty()) throw Error("document id must be nonempty");
  d.title = j.value("title", "");
  d.source = parse_source(j.value("source", "wiki"));
  if (j.contains("dump_date") && !j["dump_date"].is_null()) d.dump_date = Date::parse(j["dump_date"].get<std::string>());
  if (d.source == Source::wiki && !d.dump_date) throw Error("wiki document '" + d.id + "' has no dump_date");
  for (const auto& s : j.value("sections", nlohmann::json::array())) {
    Section sec;
    sec.title = s.value("title", "");
    sec.text = s.value("text", "");
    if (s.contains("entries")) sec.entries = s["entries"].get<std::vector<std::string>>();
    d.sections.push_back(std::move(sec));
  }
  return d;
}

inline nlohmann::json to_json(const Passage& p) {
  nlohmann::json j;
  j["id"] = p.id;
  j["doc_id"] = p.doc_id;
  j["text"] = join(p.text, " ");
  j["source"] = to_string(p.source);
  j["dump_date"] = p.dump_date ? nlohmann::json(p.dump_date->str()) : nlohmann::json(nullptr);
  if (!p.title.empty()) j["title"] = p.title;
  if (!p.section_title.empty()) j["section_title"] = p.section_title;
  return j;
}

inline Passage passage_from_json(const nlohmann::json& j) {
  Passage p;
  p.id = j.at("id").get<std::string>();
  p.doc_id = j.value("doc_id", "");
  p.text = split_words(j.at("text").get<std::string>());
  p.word_count = p.text.size();
  p.source = parse_source(j.value("source", "wiki"));
  if (j.contains("dump_date") && !j["dump_date"].is_null()) p.dump_date = Date::parse(j["dump_date"].get<std::string>());
  p.title = j.value("title", "");
  p.section_title = j.value("section_title", "");
  return p;
}

/// Reads one JSON value per nonblank line.
template <typename F>
void for_each_jsonl(const std::string& path, F&& fn) {
  std::ifstream in(path);
  if (!in) throw IOError("cannot open '" + path + "'");
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
    fn(j);
  }
}

inline std::vector<RawDocument> read_documents(const std::string& path) {
  std::vector<RawDocument> docs;
  std::set<std::string> seen;
  for_each_jsonl(path, [&](const nlohmann::json& j) {
    docs.push_back(raw_document_from_json(j));
    if (!seen.insert(docs.back().id).second) throw Error("duplicate document id '" + docs.back().id + "'");
  });
  return docs;
}

inline std::vector<Passage> read_passages(const std::string& path) {
  std::vector<Passage> ps;
  for_each_jsonl(path, [&](const nlohmann::json& j) { ps.push_back(passage_from_json(j)); });
  return ps;
}

inline void write_passages(const std::string& path, std::span<const Passage> ps) {
  std::ofstream out(path);
  if (!out) throw IOError("cannot write '" + path + "'");
  for (const auto& p : ps) out << to_json(p).dump() << '\n';
  if (!out) throw IOError("write failed for '" + path + "'");
}

inline FilterConfig filter_config_from_json(const nlohmann::json& j) {
  FilterConfig c;
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (it.key() == "min_doc_length") c.min_doc_length = it->get<std::size_t>();
    else if (it.key() == "max_mean_word_length") c.max_mean_word_length = it->get<double>();
    else if (it.key() == "min_alnum_ratio") c.min_alnum_ratio = it->get<double>();
    else if (it.key() == "max_repeated_token_ratio") c.max_repeated_token_ratio = it->get<double>();
    else throw ConfigError(it.key(), "unknown filter config key");
  }
  c.validate();
  return c;
}

}  // namespace ralab
