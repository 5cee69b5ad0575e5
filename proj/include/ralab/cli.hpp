#pragma once

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ralab/corpus.hpp"
#include "ralab/cost_model.hpp"
#include "ralab/evalkit.hpp"
#include "ralab/index.hpp"
#include "ralab/lm_scorer.hpp"
#include "ralab/pq.hpp"
#include "ralab/pretext.hpp"
#include "ralab/retriever.hpp"
#include "ralab/trainer.hpp"

namespace ralab::cli {

inline constexpr std::string_view kToolVersion = "0.1.0";

namespace fs = std::filesystem;

// File names inside a run directory.
inline constexpr const char* kManifest = "manifest.json";
inline constexpr const char* kPassages = "passages.jsonl";
inline constexpr const char* kIndex = "index.ridx";
inline constexpr const char* kPQIndex = "index.pq";
inline constexpr const char* kCheckpoint = "encoder.ckpt";

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IOError("cannot open '" + path + "'");
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

inline void write_file(const fs::path& path, const std::string& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IOError("cannot write '" + path.string() + "'");
  out << data;
  if (!out) throw IOError("write failed for '" + path.string() + "'");
}

inline std::string hex64(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline std::string file_hash(const std::string& path) { return hex64(fnv1a(read_file(path))); }

inline void make_run_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IOError("cannot create run directory '" + dir.string() + "': " + ec.message());
}

/// Written once at the end of a run. Everything except `timings` is a pure
/// function of the arguments and inputs.
struct RunManifest {
  std::string subcommand;
  std::vector<std::string> args;
  nlohmann::json config = nlohmann::json::object();
  std::uint64_t seed = 0;
  std::string corpus_hash;
  std::uint64_t index_version = 0;
  std::vector<std::pair<std::string, double>> timings;

  nlohmann::json to_json() const {
    nlohmann::json t = nlohmann::json::object();
    for (const auto& [phase, secs] : timings) t[phase] = secs;
    return {{"tool", "ralab"},        {"tool_version", kToolVersion}, {"subcommand", subcommand},
            {"args", args},           {"config", config},             {"seed", seed},
            {"corpus_hash", corpus_hash}, {"index_version", index_version}, {"timings_seconds", t}};
  }

  void write(const fs::path& dir) const { write_file(dir / kManifest, to_json().dump(2) + "\n"); }
};

/// Accumulates wall-clock seconds per named phase.
class PhaseTimer {
 public:
  explicit PhaseTimer(RunManifest& m) : m_(m) {}
  template <typename F>
  auto operator()(const std::string& phase, F&& fn) {
    auto t0 = std::chrono::steady_clock::now();
    auto record = [&] {
      m_.timings.emplace_back(phase, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    };
    if constexpr (std::is_void_v<decltype(fn())>) {
      fn();
      record();
    } else {
      auto r = fn();
      record();
      return r;
    }
  }

 private:
  RunManifest& m_;
};

/// An index file plus the encoder and passages stored next to it.
struct IndexBundle {
  fs::path dir;
  std::optional<EmbeddingIndex> flat;
  std::optional<PQIndex> pq;
  EncoderParams encoder;
  std::vector<Passage> passages;

  std::uint64_t version() const { return flat ? flat->version() : pq->version; }

  std::optional<Date> dump_date() const {
    std::optional<Date> d;
    for (const auto& p : passages)
      if (p.dump_date && (!d || *d < *p.dump_date)) d = p.dump_date;
    return d;
  }
};

inline fs::path sidecar(const fs::path& index_path, const char* name) {
  fs::path p = index_path.parent_path() / name;
  if (!fs::exists(p)) throw IOError("missing '" + p.string() + "' next to index '" + index_path.string() + "'");
  return p;
}

inline IndexBundle load_bundle(const std::string& index_path, std::size_t shards, bool need_passages = true) {
  if (!fs::exists(index_path)) throw IOError("cannot open '" + index_path + "'");
  IndexBundle b;
  b.dir = fs::path(index_path).parent_path();
  if (is_pq_index_file(index_path)) b.pq = read_pq_index(index_path, shards);
  else b.flat = read_index(index_path, shards);
  b.encoder = load_checkpoint(sidecar(index_path, kCheckpoint).string());
  if (need_passages) b.passages = read_passages(sidecar(index_path, kPassages).string());
  return b;
}

inline std::vector<std::string> argv_vector(int argc, const char* const* argv) {
  std::vector<std::string> out;
  for (int i = 1; i < argc; ++i) out.emplace_back(argv[i]);
  return out;
}

inline std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// ---------------------------------------------------------------------------
// Subcommands

struct IngestArgs {
  std::string in, out, filter_config;
  std::size_t max_words = 200;
};

inline int run_ingest(const IngestArgs& a, RunManifest& m, std::ostream& log) {
  PhaseTimer time(m);
  FilterConfig fc;
  if (!a.filter_config.empty()) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(read_file(a.filter_config));
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError("filter-config", e.what());
    }
    fc = filter_config_from_json(j);
    m.config["filter"] = j;
  }
  if (a.max_words < 1) throw ConfigError("max-words", "must be >= 1");
  m.config["max_words"] = a.max_words;
  auto docs = time("read", [&] { return read_documents(a.in); });
  m.corpus_hash = file_hash(a.in);
  std::vector<Passage> passages;
  std::size_t kept = 0;
  time("chunk", [&] {
    for (const auto& d : docs) {
      if (!quality_filter(d, fc)) continue;
      ++kept;
      auto ps = chunk(d, a.max_words);
      passages.insert(passages.end(), ps.begin(), ps.end());
    }
  });
  make_run_dir(a.out);
  write_passages((fs::path(a.out) / kPassages).string(), passages);
  log << "kept " << kept << " of " << docs.size() << " documents, " << passages.size() << " passages\n";
  m.write(a.out);
  return 0;
}

struct BuildIndexArgs {
  std::string corpus, out, checkpoint, precision = "fp32";
  std::size_t dim = 64, shards = 1;
  std::uint64_t seed = 0;
};

inline int run_build_index(const BuildIndexArgs& a, RunManifest& m, std::ostream& log) {
  PhaseTimer time(m);
  auto passages = time("read", [&] { return read_passages(a.corpus); });
  m.corpus_hash = file_hash(a.corpus);
  m.seed = a.seed;
  Precision prec;
  try {
    prec = parse_precision(a.precision);
  } catch (const Error& e) {
    throw ConfigError("precision", e.what());
  }
  if (a.shards < 1) throw ConfigError("shards", "must be >= 1");
  EncoderParams enc;
  if (!a.checkpoint.empty()) {
    enc = load_checkpoint(a.checkpoint);
  } else {
    if (a.dim < 1) throw ConfigError("dim", "must be >= 1");
    enc = init_encoder(build_vocabulary(passages), a.dim, a.seed);
  }
  m.config = {{"dim", enc.dim}, {"shards", a.shards}, {"precision", a.precision}, {"checkpoint", a.checkpoint}};
  auto idx = time("embed", [&] { return build(passages, enc, a.shards, 0, prec); });
  make_run_dir(a.out);
  fs::path dir(a.out);
  time("write", [&] {
    write_index((dir / kIndex).string(), idx);
    save_checkpoint((dir / kCheckpoint).string(), enc);
    write_passages((dir / kPassages).string(), passages);
  });
  m.index_version = idx.version();
  log << "indexed " << idx.size() << " passages, dim " << idx.dim() << ", " << idx.memory_bytes() << " bytes\n";
  m.write(dir);
  return 0;
}

struct CompressArgs {
  std::string index, out;
  std::size_t m = 8, kc = 256, iterations = 20;
  std::uint64_t seed = 0;
};

inline int run_compress(const CompressArgs& a, RunManifest& man, std::ostream& log) {
  PhaseTimer time(man);
  if (is_pq_index_file(a.index)) throw ConfigError("index", "already compressed");
  auto idx = read_index(a.index);
  man.corpus_hash = file_hash(a.index);
  man.seed = a.seed;
  if (a.m < 1 || idx.dim() % a.m != 0) throw ConfigError("m", "must divide the index dimension " + std::to_string(idx.dim()));
  if (a.kc < 1 || a.kc > 65536) throw ConfigError("kc", "must lie in [1, 65536]");
  auto codec = time("train", [&] { return train_pq(idx, a.m, a.kc, a.iterations, a.seed); });
  auto pq = time("encode", [&] { return compress(idx, codec); });
  make_run_dir(a.out);
  fs::path dir(a.out);
  write_pq_index((dir / kPQIndex).string(), pq);
  fs::copy_file(sidecar(a.index, kCheckpoint), dir / kCheckpoint, fs::copy_options::overwrite_existing);
  fs::copy_file(sidecar(a.index, kPassages), dir / kPassages, fs::copy_options::overwrite_existing);
  auto mem = pq_memory(idx.size(), idx.dim(), idx.precision(), a.m, a.kc, true);
  man.index_version = pq.version;
  man.config = {{"m", a.m},
                {"kc", a.kc},
                {"iterations", a.iterations},
                {"uncompressed_bytes", mem.uncompressed_bytes},
                {"compressed_bytes", mem.compressed_bytes},
                {"ratio", mem.ratio()}};
  log << "compressed " << mem.uncompressed_bytes << " -> " << mem.compressed_bytes << " bytes (" << fmt("%.2f", mem.ratio())
      << "x)\n";
  man.write(dir);
  return 0;
}

struct SearchArgs {
  std::string index, queries_file, out;
  std::vector<std::string> queries;
  std::size_t k = 10;
};

inline int run_search(const SearchArgs& a, RunManifest& m, std::size_t threads, std::ostream& out) {
  PhaseTimer time(m);
  auto b = load_bundle(a.index, 1, false);
  m.index_version = b.version();
  m.corpus_hash = file_hash(a.index);
  std::vector<std::string> queries = a.queries;
  if (!a.queries_file.empty()) {
    std::istringstream in(read_file(a.queries_file));
    for (std::string line; std::getline(in, line);)
      if (!split_words(line).empty()) queries.push_back(line);
  }
  if (queries.empty()) throw ConfigError("query", "no queries given");
  std::string results;
  time("search", [&] {
    for (const auto& q : queries) {
      auto qf = to_float(encode_query(b.encoder, split_words(q)));
      auto hits = b.flat ? search(*b.flat, qf, a.k, threads) : pq_search(*b.pq, qf, a.k, threads);
      nlohmann::json j = {{"query", q}, {"hits", nlohmann::json::array()}};
      for (const auto& h : hits) j["hits"].push_back({{"id", h.id}, {"score", h.score}});
      results += j.dump() + "\n";
    }
  });
  out << results;
  if (!a.out.empty()) {
    make_run_dir(a.out);
    write_file(fs::path(a.out) / "results.jsonl", results);
    m.config = {{"k", a.k}};
    m.write(a.out);
  }
  return 0;
}

struct TrainArgs {
  std::string config, corpus, out, examples, mock_scorer;
  std::map<std::string, std::string> overrides;
};

inline int run_train(const TrainArgs& a, std::size_t threads, bool threads_set, RunManifest& m, std::ostream& log) {
  PhaseTimer time(m);
  TrainConfig cfg;
  if (!a.config.empty()) cfg = TrainConfig::parse(read_file(a.config));
  for (const auto& [key, value] : a.overrides) cfg.set(key, value);
  if (threads_set) cfg.threads = threads;
  cfg.validate();

  auto passages = time("read", [&] { return read_passages(a.corpus); });
  m.corpus_hash = file_hash(a.corpus);
  m.seed = cfg.seed;
  std::vector<PretextExample> examples;
  if (!a.examples.empty()) {
    for_each_jsonl(a.examples, [&](const nlohmann::json& j) { examples.push_back(example_from_json(j)); });
  } else {
    if (cfg.task == Task::supervised) throw ConfigError("task", "supervised training needs --examples");
    examples = examples_from_passages(passages, cfg.task, cfg.seed);
  }
  if (examples.empty()) throw ConfigError("task", "corpus yields no training examples");

  auto vocab = build_vocabulary(passages, examples);
  auto params = init_encoder(vocab, cfg.dim, cfg.seed);
  std::shared_ptr<const LMScorer> lm;
  if (!a.mock_scorer.empty()) lm = std::make_shared<MockScorer>(MockScorer::from_jsonl(a.mock_scorer));
  else lm = std::make_shared<OverlapLM>(vocab.size(), cfg.lambda);

  Trainer trainer(cfg, passages, std::move(params), lm);
  auto metrics = time("train", [&] { return trainer.run(examples); });
  const double recall = time("evaluate", [&] { return trainer.gold_recall_at_1(examples); });

  make_run_dir(a.out);
  fs::path dir(a.out);
  std::string csv = metrics_csv_header();
  for (const auto& s : metrics) csv += metrics_csv_row(s);
  write_file(dir / "metrics.csv", csv);
  write_file(dir / "config.txt", cfg.to_text());
  save_checkpoint((dir / kCheckpoint).string(), trainer.params());
  auto final_index = rebuild(trainer.index(), passages, trainer.params());
  write_index((dir / kIndex).string(), final_index);
  write_passages((dir / kPassages).string(), passages);

  m.index_version = final_index.version();
  std::istringstream cfg_lines(cfg.to_text());
  for (std::string line; std::getline(cfg_lines, line);) {
    auto eq = line.find(" = ");
    if (eq != std::string::npos) m.config[line.substr(0, eq)] = line.substr(eq + 3);
  }
  m.config["stale_warnings"] = trainer.stale_warnings();
  if (!metrics.empty())
    log << "steps " << metrics.size() << ", final loss " << fmt("%.6f", metrics.back().loss) << ", index version "
        << final_index.version() << "\n";
  if (recall > 0.0 || std::any_of(examples.begin(), examples.end(), [](const auto& e) { return !e.gold_passage_id.empty(); }))
    log << "gold recall@1 " << fmt("%.4f", recall) << "\n";
  m.write(dir);
  return 0;
}

struct EvaluateArgs {
  std::string task, index, mode = "standard", out;
  std::size_t k = 5;
  bool audit_leakage = false;
};

inline int run_evaluate(const EvaluateArgs& a, RunManifest& m, std::ostream& log) {
  PhaseTimer time(m);
  DebiasMode mode;
  try {
    mode = parse_debias_mode(a.mode);
  } catch (const Error& e) {
    throw ConfigError("mode", e.what());
  }
  auto b = load_bundle(a.index, 1);
  if (!b.flat) throw ConfigError("index", "evaluate needs an uncompressed index");
  m.corpus_hash = file_hash(a.task);
  m.index_version = b.version();
  m.config = {{"mode", a.mode}, {"k", a.k}, {"audit_leakage", a.audit_leakage}};
  RetrievalSource src;
  src.index = std::move(*b.flat);
  src.passages = std::move(b.passages);

  OverlapLM lm(b.encoder.vocab.size());
  OverlapChoiceScorer choice_scorer(lm);
  OverlapAnswerer answerer;

  struct Item {
    std::optional<ChoiceTask> choice;
    std::string question;
    std::vector<std::string> answers;
  };
  std::vector<Item> items;
  for_each_jsonl(a.task, [&](const nlohmann::json& j) {
    Item it;
    if (j.contains("options")) {
      it.choice = choice_task_from_json(j);
      it.question = it.choice->question;
    } else {
      it.question = j.at("question").get<std::string>();
      it.answers = j.at("answers").get<std::vector<std::string>>();
      if (it.answers.empty()) throw Error("QA task needs at least one answer");
    }
    items.push_back(std::move(it));
  });
  if (items.empty()) throw Error("task file '" + a.task + "' is empty");

  std::vector<EvalRecord> records(items.size());
  std::string predictions;
  std::size_t flagged_questions = 0;
  auto metric = [&](std::size_t i, std::span<const Passage> docs) -> double {
    const Item& it = items[i];
    if (it.choice) return debias_infer(*it.choice, choice_scorer, mode, docs).prediction == it.choice->gold ? 1.0 : 0.0;
    return exact_match_any(answerer.answer(split_words(it.question), docs), it.answers);
  };
  double em = 0.0, f1_sum = 0.0;
  time("evaluate", [&] {
    for (std::size_t i = 0; i < items.size(); ++i) {
      const Item& it = items[i];
      Tokens q = split_words(it.question);
      records[i].retrieved = retrieve_passages(src, b.encoder, q, a.k);
      nlohmann::json row = {{"question", it.question}};
      if (it.choice) {
        auto r = debias_infer(*it.choice, choice_scorer, mode, records[i].retrieved);
        row["prediction"] = r.prediction;
        row["posterior"] = r.posterior;
        row["correct"] = r.prediction == it.choice->gold;
        em += r.prediction == it.choice->gold ? 1.0 : 0.0;
      } else {
        auto pred = answerer.answer(q, records[i].retrieved);
        row["prediction"] = pred;
        row["em"] = exact_match_any(pred, it.answers);
        row["f1"] = f1_max(pred, it.answers);
        em += exact_match_any(pred, it.answers);
        f1_sum += f1_max(pred, it.answers);
      }
      if (a.audit_leakage) {
        auto rep = leakage_audit(q, records[i].retrieved);
        records[i].leaked = rep.passage_flags;
        row["leakage_overlap"] = rep.overlap;
        row["leaked"] = rep.flagged;
        flagged_questions += rep.flagged ? 1 : 0;
      } else {
        records[i].leaked.assign(records[i].retrieved.size(), false);
      }
      predictions += row.dump() + "\n";
    }
  });
  const double n = static_cast<double>(items.size());
  nlohmann::json summary = {{"examples", items.size()}, {"accuracy_or_em", em / n}, {"f1", f1_sum / n}};
  log << "examples " << items.size() << ", accuracy/EM " << fmt("%.4f", em / n) << "\n";
  if (a.audit_leakage) {
    auto rerun = time("filtered_rerun", [&] { return filtered_rerun(std::span<const EvalRecord>(records), metric); });
    summary["leakage"] = {{"flagged_questions", flagged_questions},
                          {"original", rerun.original},
                          {"filtered", rerun.filtered},
                          {"delta", rerun.delta()}};
    log << "leakage: " << flagged_questions << " flagged, filtered " << fmt("%.4f", rerun.filtered) << " (delta "
        << fmt("%+.4f", rerun.delta()) << ")\n";
  }
  if (!a.out.empty()) {
    make_run_dir(a.out);
    write_file(fs::path(a.out) / "predictions.jsonl", predictions);
    write_file(fs::path(a.out) / "metrics.json", summary.dump(2) + "\n");
    m.write(a.out);
  }
  return 0;
}

struct SwapArgs {
  std::string from, to, task, out, checkpoint;
  std::size_t k = 5;
};

inline int run_swap(const SwapArgs& a, RunManifest& m, std::ostream& log) {
  PhaseTimer time(m);
  auto from = load_bundle(a.from, 1);
  auto to = load_bundle(a.to, 1);
  if (!from.flat || !to.flat) throw ConfigError("index", "swap-index needs uncompressed indices");
  EncoderParams enc = a.checkpoint.empty() ? from.encoder : load_checkpoint(a.checkpoint);
  if (enc.dim != to.flat->dim()) throw ConfigError("to", "index dimension differs from the query encoder");
  auto da = from.dump_date(), db = to.dump_date();
  if (!da) throw ConfigError("from", "index passages carry no dump_date");
  if (!db) throw ConfigError("to", "index passages carry no dump_date");

  std::vector<TemporalQA> dataset;
  for_each_jsonl(a.task, [&](const nlohmann::json& j) { dataset.push_back(temporal_from_json(j)); });
  m.corpus_hash = file_hash(a.task);
  m.index_version = to.version();
  m.config = {{"k", a.k}, {"from_dump_date", da->str()}, {"to_dump_date", db->str()}};

  RetrievalSource sa, sb;
  sa.index = std::move(*from.flat);
  sa.passages = std::move(from.passages);
  sa.dump_date = *da;
  sb.index = std::move(*to.flat);
  sb.passages = std::move(to.passages);
  sb.dump_date = *db;
  OverlapAnswerer answerer;
  auto mat = time("evaluate", [&] { return temporal_swap_eval(dataset, sa, sb, enc, answerer, a.k); });

  nlohmann::json j = {{"years", mat.years}, {"accuracy", mat.accuracy}};
  log << "answers\\index " << mat.years[0] << " " << mat.years[1] << "\n";
  for (std::size_t r = 0; r < 2; ++r)
    log << mat.years[r] << " " << fmt("%.3f", mat.accuracy[r][0]) << " " << fmt("%.3f", mat.accuracy[r][1]) << "\n";
  if (!a.out.empty()) {
    make_run_dir(a.out);
    write_file(fs::path(a.out) / "swap_matrix.json", j.dump(2) + "\n");
    m.write(a.out);
  }
  return 0;
}

struct CostArgs {
  std::string n, b, k, r, l, pretr, plm, ratio;
};

inline int run_cost_model(const CostArgs& a, std::ostream& out) {
  auto num = [](const std::string& key, const std::string& v) {
    try {
      return parse_rational(v);
    } catch (const Error& e) {
      throw ConfigError(key, e.what());
    }
  };
  CostModelParams p;
  if (!a.ratio.empty()) {
    if (!a.pretr.empty() || !a.plm.empty()) throw ConfigError("ratio", "give either --ratio or --pretr/--plm");
    p.p_retr = num("ratio", a.ratio);
    p.p_lm = 1;
  } else {
    if (a.pretr.empty() || a.plm.empty()) throw ConfigError("pretr", "give --ratio or both --pretr and --plm");
    p.p_retr = num("pretr", a.pretr);
    p.p_lm = num("plm", a.plm);
  }
  p.k = num("k", a.k);
  const bool any_full = !a.n.empty() || !a.b.empty() || !a.r.empty();
  if (any_full && (a.n.empty() || a.b.empty() || a.r.empty()))
    throw ConfigError(a.n.empty() ? "n" : a.b.empty() ? "b" : "r", "full refresh needs --n, --b and --r together");
  auto pct = [](const Rational& v) { return fmt("%.1f%%", 100.0 * to_double(v)); };
  if (any_full) {
    p.n = num("n", a.n);
    p.b = num("b", a.b);
    p.r = num("r", a.r);
    Rational v = overhead_full_refresh(p);
    out << "overhead_full_refresh " << fmt("%.3f", to_double(v)) << " = " << v.str() << " (" << pct(v) << ")\n";
  } else {
    out << "overhead_full_refresh n/a (needs --n --b --r)\n";
  }
  if (!a.l.empty()) {
    p.l = num("l", a.l);
    p.n = 1;
    Rational v = overhead_rerank(p);
    out << "overhead_rerank " << fmt("%.3f", to_double(v)) << " = " << v.str() << " (" << pct(v) << ")\n";
  } else {
    out << "overhead_rerank n/a (needs --l)\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------

/// Parses and dispatches. Exit codes: 0 ok, 1 I/O or data error, 2 usage or
/// configuration error.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"ralab: retrieval-augmented training lab"};
  app.require_subcommand(1);
  app.fallthrough();
  std::size_t threads = 1;
  auto* threads_opt = app.add_option("--threads", threads, "Worker pool size bounding all parallelism")->check(CLI::PositiveNumber);
  app.set_version_flag("--version", std::string(kToolVersion));

  IngestArgs ingest;
  auto* c_ingest = app.add_subcommand("ingest", "Filter and chunk raw JSONL documents into passages");
  c_ingest->add_option("--in", ingest.in, "Raw documents (JSONL)")->required();
  c_ingest->add_option("--out", ingest.out, "Run directory")->required();
  c_ingest->add_option("--max-words", ingest.max_words, "Maximum words per passage")->capture_default_str();
  c_ingest->add_option("--filter-config", ingest.filter_config, "Quality filter thresholds (JSON)");

  BuildIndexArgs bi;
  auto* c_build = app.add_subcommand("build-index", "Embed passages into a flat index");
  c_build->add_option("--corpus", bi.corpus, "Passages (JSONL)")->required();
  c_build->add_option("--out", bi.out, "Run directory")->required();
  c_build->add_option("--checkpoint", bi.checkpoint, "Encoder checkpoint; a seeded encoder is created if absent");
  c_build->add_option("--dim", bi.dim, "Embedding dimension for a new encoder")->capture_default_str();
  c_build->add_option("--seed", bi.seed, "Seed for a new encoder")->capture_default_str();
  c_build->add_option("--shards", bi.shards, "Shard count")->capture_default_str();
  c_build->add_option("--precision", bi.precision, "fp32 or fp16")->capture_default_str();

  CompressArgs ca;
  auto* c_compress = app.add_subcommand("compress-index", "Product-quantize a flat index");
  c_compress->add_option("--index", ca.index, "Flat index file")->required();
  c_compress->add_option("--out", ca.out, "Run directory")->required();
  c_compress->add_option("--m", ca.m, "Sub-vectors per vector")->capture_default_str();
  c_compress->add_option("--kc", ca.kc, "Centroids per sub-space")->capture_default_str();
  c_compress->add_option("--iterations", ca.iterations, "k-means iterations")->capture_default_str();
  c_compress->add_option("--seed", ca.seed, "k-means seed")->capture_default_str();

  SearchArgs sa;
  auto* c_search = app.add_subcommand("search", "Query a flat or compressed index");
  c_search->add_option("--index", sa.index, "Index file")->required();
  c_search->add_option("--query", sa.queries, "Query text (repeatable)");
  c_search->add_option("--queries", sa.queries_file, "File with one query per line");
  c_search->add_option("--k", sa.k, "Results per query")->capture_default_str();
  c_search->add_option("--out", sa.out, "Optional run directory for results");

  TrainArgs ta;
  auto* c_train = app.add_subcommand("train", "Train the retriever against the reader");
  c_train->add_option("--config", ta.config, "Flat key = value config file");
  c_train->add_option("--corpus", ta.corpus, "Passages (JSONL)")->required();
  c_train->add_option("--out", ta.out, "Run directory")->required();
  c_train->add_option("--examples", ta.examples, "Supervised examples (JSONL)");
  c_train->add_option("--mock-scorer", ta.mock_scorer, "Replace the reader with a fixed per-document table (JSONL)");
  const std::vector<std::pair<std::string, std::string>> train_keys = {
      {"k", "Documents per query"},         {"l", "Re-rank pool"},
      {"r", "Refresh interval"},            {"b", "Batch size"},
      {"theta", "Retrieval temperature"},   {"theta_t", "Target temperature"},
      {"loss", "adist|emdr2|pdist|loop"},   {"mode", "fixed|query_side|rerank|full_refresh"},
      {"steps", "Training steps"},          {"seed", "Seed"},
      {"lr", "Learning rate"},              {"warmup", "Warmup steps"},
      {"dim", "Embedding dimension"},       {"lambda", "Reader smoothing weight"},
      {"emdr_token_level", "true|false"},   {"task", "prefix_lm|mlm|title_to_section|supervised"},
      {"shards", "Index shards"}};
  std::map<std::string, std::string> train_flags;
  for (const auto& [key, help] : train_keys) {
    std::string flag = "--" + key;
    std::replace(flag.begin() + 2, flag.end(), '_', '-');
    c_train->add_option(flag, train_flags[key], help + " (overrides the config file)");
  }

  EvaluateArgs ea;
  auto* c_eval = app.add_subcommand("evaluate", "Score choice or QA tasks with retrieval");
  c_eval->add_option("--task", ea.task, "Task JSONL")->required();
  c_eval->add_option("--index", ea.index, "Flat index file")->required();
  c_eval->add_option("--mode", ea.mode, "standard|cyclic4|all24")->capture_default_str();
  c_eval->add_option("--k", ea.k, "Retrieved passages per question")->capture_default_str();
  c_eval->add_flag("--audit-leakage", ea.audit_leakage, "Flag leaked passages and rerun without them");
  c_eval->add_option("--out", ea.out, "Optional run directory");

  SwapArgs sw;
  auto* c_swap = app.add_subcommand("swap-index", "Temporal index swap matrix");
  c_swap->add_option("--from", sw.from, "Index the reader was tuned with")->required();
  c_swap->add_option("--to", sw.to, "Index to swap in")->required();
  c_swap->add_option("--task", sw.task, "Temporal task JSONL")->required();
  c_swap->add_option("--checkpoint", sw.checkpoint, "Query encoder (default: the one next to --from)");
  c_swap->add_option("--k", sw.k, "Retrieved passages per question")->capture_default_str();
  c_swap->add_option("--out", sw.out, "Optional run directory");

  CostArgs co;
  auto* c_cost = app.add_subcommand("cost-model", "Retriever training overhead (exact arithmetic)");
  c_cost->add_option("--n", co.n, "Documents in the index");
  c_cost->add_option("--b", co.b, "Batch size");
  c_cost->add_option("--k", co.k, "Documents per query")->required();
  c_cost->add_option("--r", co.r, "Refresh interval");
  c_cost->add_option("--l", co.l, "Re-rank pool");
  c_cost->add_option("--pretr", co.pretr, "Retriever parameter count");
  c_cost->add_option("--plm", co.plm, "Reader parameter count");
  c_cost->add_option("--ratio", co.ratio, "P_retr / P_lm, instead of --pretr/--plm");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::CallForVersion& e) {
    out << kToolVersion << "\n";
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }

  RunManifest manifest;
  manifest.args = argv_vector(argc, argv);
  try {
    if (*c_ingest) {
      manifest.subcommand = "ingest";
      return run_ingest(ingest, manifest, err);
    }
    if (*c_build) {
      manifest.subcommand = "build-index";
      return run_build_index(bi, manifest, err);
    }
    if (*c_compress) {
      manifest.subcommand = "compress-index";
      return run_compress(ca, manifest, err);
    }
    if (*c_search) {
      manifest.subcommand = "search";
      return run_search(sa, manifest, threads, out);
    }
    if (*c_train) {
      manifest.subcommand = "train";
      for (const auto& [key, help] : train_keys)
        if (!train_flags[key].empty()) ta.overrides[key] = train_flags[key];
      return run_train(ta, threads, threads_opt->count() > 0, manifest, err);
    }
    if (*c_eval) {
      manifest.subcommand = "evaluate";
      return run_evaluate(ea, manifest, err);
    }
    if (*c_swap) {
      manifest.subcommand = "swap-index";
      return run_swap(sw, manifest, err);
    }
    if (*c_cost) return run_cost_model(co, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace ralab::cli
