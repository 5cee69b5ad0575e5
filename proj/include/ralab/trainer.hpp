#pragma once

#include <atomic>
#include <cstdio>
#include <future>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "ralab/cost_model.hpp"
#include "ralab/index.hpp"
#include "ralab/lm_scorer.hpp"
#include "ralab/losses.hpp"
#include "ralab/pretext.hpp"
#include "ralab/retriever.hpp"

namespace ralab {

/// How the index follows the retriever during training.
enum class IndexMode { fixed, query_side, rerank, full_refresh };

inline std::string_view to_string(IndexMode m) {
  switch (m) {
    case IndexMode::fixed: return "fixed";
    case IndexMode::query_side: return "query_side";
    case IndexMode::rerank: return "rerank";
    case IndexMode::full_refresh: return "full_refresh";
  }
  return "fixed";
}

inline IndexMode parse_index_mode(std::string_view s) {
  if (s == "fixed") return IndexMode::fixed;
  if (s == "query_side") return IndexMode::query_side;
  if (s == "rerank") return IndexMode::rerank;
  if (s == "full_refresh") return IndexMode::full_refresh;
  throw Error("unknown mode '" + std::string(s) + "'");
}

inline TrainMode encoder_mode(IndexMode m) {
  switch (m) {
    case IndexMode::fixed: return TrainMode::fixed;
    case IndexMode::query_side: return TrainMode::query_side;
    default: return TrainMode::full;
  }
}

struct TrainConfig {
  std::size_t k = 20;  // 0 runs closed-book: nothing is retrieved or trained
  std::size_t l = 200;
  std::size_t r = 1000;
  std::size_t b = 64;
  double theta = 0.1;
  double theta_t = 1.0;
  LossKind loss = LossKind::pdist;
  IndexMode mode = IndexMode::query_side;
  std::size_t steps = 100;
  std::uint64_t seed = 0;
  double lr = 1e-2;
  std::size_t warmup = 5;
  std::size_t dim = 64;
  double lambda = 0.5;
  bool emdr_token_level = false;
  Task task = Task::prefix_lm;
  std::size_t shards = 1;
  std::size_t threads = 1;

  void validate() const {
    if (b < 1) throw ConfigError("b", "batch size must be >= 1");
    if (mode == IndexMode::rerank && l < k) throw ConfigError("l", "re-rank pool must be >= k");
    if (mode == IndexMode::full_refresh && r < 1) throw ConfigError("r", "refresh interval must be >= 1");
    if (!(theta > 0.0)) throw ConfigError("theta", "must be positive");
    if (!(theta_t > 0.0)) throw ConfigError("theta_t", "must be positive");
    if (!(lr >= 0.0)) throw ConfigError("lr", "must be nonnegative");
    if (dim < 1) throw ConfigError("dim", "must be >= 1");
    if (!(lambda > 0.0 && lambda < 1.0)) throw ConfigError("lambda", "must lie in (0,1)");
    if (shards < 1) throw ConfigError("shards", "must be >= 1");
    if (threads < 1) throw ConfigError("threads", "must be >= 1");
    if (loss == LossKind::loop && k == 1) throw ConfigError("k", "loop needs k >= 2");
  }

  void set(const std::string& key, const std::string& value) {
    auto as_size = [&]() -> std::size_t {
      std::size_t v = 0;
      auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
      if (ec != std::errc{} || p != value.data() + value.size()) throw ConfigError(key, "expected an unsigned integer, got '" + value + "'");
      return v;
    };
    auto as_double = [&]() -> double {
      try {
        std::size_t used = 0;
        double v = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument("trailing");
        return v;
      } catch (const std::exception&) {
        throw ConfigError(key, "expected a number, got '" + value + "'");
      }
    };
    auto wrap = [&](auto&& fn) {
      try {
        fn();
      } catch (const ConfigError&) {
        throw;
      } catch (const Error& e) {
        throw ConfigError(key, e.what());
      }
    };
    if (key == "k") k = as_size();
    else if (key == "l") l = as_size();
    else if (key == "r") r = as_size();
    else if (key == "b") b = as_size();
    else if (key == "theta") theta = as_double();
    else if (key == "theta_t") theta_t = as_double();
    else if (key == "loss") wrap([&] { loss = parse_loss(value); });
    else if (key == "mode") wrap([&] { mode = parse_index_mode(value); });
    else if (key == "steps") steps = as_size();
    else if (key == "seed") seed = as_size();
    else if (key == "lr") lr = as_double();
    else if (key == "warmup") warmup = as_size();
    else if (key == "dim") dim = as_size();
    else if (key == "lambda") lambda = as_double();
    else if (key == "emdr_token_level") {
      if (value == "true" || value == "1") emdr_token_level = true;
      else if (value == "false" || value == "0") emdr_token_level = false;
      else throw ConfigError(key, "expected true or false");
    } else if (key == "task") wrap([&] { task = parse_task(value); });
    else if (key == "shards") shards = as_size();
    else if (key == "threads") threads = as_size();
    else throw ConfigError(key, "unknown key");
  }

  /// Flat `key = value` lines; `#` starts a comment.
  static TrainConfig parse(std::string_view text) { return parse(text, TrainConfig()); }

  /// Applies `text` on top of `cfg`.
  static TrainConfig parse(std::string_view text, TrainConfig cfg) {
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
      if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
      auto trim = [](std::string s) {
        auto b = s.find_first_not_of(" \t\r");
        auto e = s.find_last_not_of(" \t\r");
        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
      };
      line = trim(line);
      if (line.empty()) continue;
      auto eq = line.find('=');
      if (eq == std::string::npos) throw ConfigError(line, "expected 'key = value'");
      cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    cfg.validate();
    return cfg;
  }

  std::string to_text() const {
    std::ostringstream o;
    o.precision(17);
    o << "k = " << k << "\nl = " << l << "\nr = " << r << "\nb = " << b << "\ntheta = " << theta
      << "\ntheta_t = " << theta_t << "\nloss = " << to_string(loss) << "\nmode = " << to_string(mode)
      << "\nsteps = " << steps << "\nseed = " << seed << "\nlr = " << lr << "\nwarmup = " << warmup
      << "\ndim = " << dim << "\nlambda = " << lambda << "\nemdr_token_level = " << (emdr_token_level ? "true" : "false")
      << "\ntask = " << to_string(task) << "\nshards = " << shards << "\nthreads = " << threads << "\n";
    return o.str();
  }
};

enum class RefreshAction { none, full_rebuild, rerank_only };

inline RefreshAction refresh_policy(std::size_t step, const TrainConfig& cfg) {
  switch (cfg.mode) {
    case IndexMode::full_refresh: return step % cfg.r == 0 ? RefreshAction::full_rebuild : RefreshAction::none;
    case IndexMode::rerank: return RefreshAction::rerank_only;
    default: return RefreshAction::none;
  }
}

/// Linear warmup over `warmup` steps, then linear decay to zero at `steps`.
inline double learning_rate(std::size_t step, const TrainConfig& cfg) {
  double lr = cfg.lr;
  if (cfg.warmup > 0 && step < cfg.warmup) lr *= static_cast<double>(step + 1) / static_cast<double>(cfg.warmup);
  if (cfg.steps > 0) lr *= std::max(0.0, static_cast<double>(cfg.steps - std::min(step, cfg.steps)) / static_cast<double>(cfg.steps));
  return lr;
}

struct StepMetrics {
  std::size_t step = 0;
  double loss = 0.0;
  double recall_at_1 = 0.0;  // over batch examples with a known gold passage
  std::uint64_t index_version = 0;
};

inline std::string metrics_csv_header() { return "step,loss,recall_at_1,index_version\n"; }

inline std::string metrics_csv_row(const StepMetrics& m) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "%zu,%.9f,%.6f,%llu\n", m.step, m.loss, m.recall_at_1,
                static_cast<unsigned long long>(m.index_version));
  return buf;
}

/// Builds a vocabulary covering passages and example tokens.
inline Vocabulary build_vocabulary(std::span<const Passage> passages, std::span<const PretextExample> examples = {}) {
  Vocabulary v;
  for (const auto& p : passages) v.add_all(p.text);
  for (const auto& e : examples) {
    v.add_all(e.retrieval_query);
    v.add_all(e.output);
  }
  return v;
}

/// Owns the retriever parameters and the index; one `step` retrieves,
/// scores with the reader, builds the target and applies one SGD update.
class Trainer {
 public:
  Trainer(TrainConfig cfg, std::vector<Passage> passages, EncoderParams params, std::shared_ptr<const LMScorer> lm)
      : cfg_(std::move(cfg)), passages_(std::move(passages)), params_(std::move(params)), lm_(std::move(lm)), rng_(cfg_.seed) {
    cfg_.validate();
    if (!lm_) throw Error("trainer needs a reader");
    if (passages_.empty()) throw Error("trainer needs a nonempty corpus");
    for (std::size_t i = 0; i < passages_.size(); ++i)
      if (!by_id_.emplace(passages_[i].id, i).second) throw Error("duplicate passage id '" + passages_[i].id + "'");
    index_ = build(passages_, params_, cfg_.shards);
  }

  const TrainConfig& config() const { return cfg_; }
  const EncoderParams& params() const { return params_; }
  const EmbeddingIndex& index() const { return index_; }
  std::size_t current_step() const { return step_; }
  std::size_t stale_warnings() const { return stale_warnings_.load(); }
  const Passage& passage(const std::string& id) const { return passages_[by_id_.at(id)]; }

  /// Top-K for one example under the current mode: self-excluded, and for
  /// rerank mode re-embedded from the top-L of the (possibly stale) index.
  std::vector<Hit> retrieve(const PretextExample& ex) {
    if (cfg_.k == 0) return {};
    std::unordered_set<std::string> excluded(ex.excluded_ids.begin(), ex.excluded_ids.end());
    if (!ex.origin_passage_id.empty()) excluded.insert(ex.origin_passage_id);
    auto qf = to_float(encode_query(params_, ex.retrieval_query));
    const bool rerank = cfg_.mode == IndexMode::rerank;
    const std::size_t want = rerank ? cfg_.l : cfg_.k;
    auto hits = search(index_, qf, want + excluded.size(), cfg_.threads);
    std::erase_if(hits, [&](const Hit& h) { return excluded.count(h.id) != 0; });
    if (hits.size() > want) hits.resize(want);
    if (!rerank) return hits;

    // Re-embed the stale top-L with the current document tower.
    std::vector<std::pair<Hit, std::size_t>> fresh;
    for (std::size_t pos = 0; pos < hits.size(); ++pos) {
      auto d = to_float(encode_doc(params_, passage(hits[pos].id).text));
      fresh.push_back({Hit{hits[pos].id, dot(qf, d)}, pos});
    }
    std::sort(fresh.begin(), fresh.end(), [](const auto& a, const auto& b) { return hit_before(a.first, b.first); });
    if (fresh.size() > cfg_.k) fresh.resize(cfg_.k);
    // A re-ranked winner coming from the tail of the stale window suggests
    // the true top-K may lie outside it.
    const std::size_t tail = hits.size() > cfg_.k ? hits.size() - cfg_.k : 0;
    bool stale = false;
    std::vector<Hit> out;
    for (auto& [h, pos] : fresh) {
      stale = stale || (tail > 0 && pos >= tail);
      out.push_back(std::move(h));
    }
    if (stale) ++stale_warnings_;
    return out;
  }

  StepMetrics step(std::span<const PretextExample> batch) {
    StepMetrics m;
    m.step = step_;
    if (refresh_policy(step_, cfg_) == RefreshAction::full_rebuild && updates_since_build_ > 0) {
      index_ = rebuild(index_, passages_, params_);
      updates_since_build_ = 0;
    }
    m.index_version = index_.version();
    if (cfg_.k == 0 || batch.empty()) {
      ++step_;
      return m;
    }

    const TrainMode tmode = encoder_mode(cfg_.mode);
    std::vector<ExampleResult> results(batch.size());
    auto work = [&](std::size_t i) { results[i] = score_example(batch[i]); };
    if (cfg_.threads <= 1) {
      for (std::size_t i = 0; i < batch.size(); ++i) work(i);
    } else {
      for (std::size_t base = 0; base < batch.size(); base += cfg_.threads) {
        std::vector<std::future<void>> futs;
        for (std::size_t i = base; i < std::min(batch.size(), base + cfg_.threads); ++i)
          futs.push_back(std::async(std::launch::async, work, i));
        for (auto& f : futs) f.get();
      }
    }

    // Serialized accumulation keeps the update independent of thread count.
    EncoderGradient grad = EncoderGradient::zeros_like(params_);
    std::size_t with_gold = 0, hits_at_1 = 0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const auto& r = results[i];
      m.loss += r.loss;
      if (!batch[i].gold_passage_id.empty()) {
        ++with_gold;
        hits_at_1 += r.top1 == batch[i].gold_passage_id ? 1 : 0;
      }
      if (tmode != TrainMode::fixed && !r.doc_ids.empty()) {
        std::vector<TokenView> docs;
        for (const auto& id : r.doc_ids) docs.emplace_back(passage(id).text);
        backprop_scores(params_, batch[i].retrieval_query, docs, r.grad_scores, tmode, grad);
      }
    }
    m.loss /= static_cast<double>(batch.size());
    m.recall_at_1 = with_gold ? static_cast<double>(hits_at_1) / static_cast<double>(with_gold) : 0.0;
    if (tmode != TrainMode::fixed) {
      grad *= 1.0 / static_cast<double>(batch.size());
      apply_sgd(params_, grad, learning_rate(step_, cfg_), tmode);
      if (tmode == TrainMode::full) ++updates_since_build_;
    }
    ++step_;
    return m;
  }

  /// Runs cfg.steps steps on batches sampled (with replacement) from `pool`.
  std::vector<StepMetrics> run(std::span<const PretextExample> pool) {
    if (pool.empty()) throw Error("no training examples");
    std::vector<StepMetrics> out;
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    std::vector<PretextExample> batch;
    while (step_ < cfg_.steps) {
      batch.clear();
      for (std::size_t i = 0; i < cfg_.b; ++i) batch.push_back(pool[pick(rng_)]);
      out.push_back(step(batch));
    }
    return out;
  }

  /// Fraction of examples whose gold passage ranks first under exact search
  /// over freshly embedded documents.
  double gold_recall_at_1(std::span<const PretextExample> examples) const {
    EmbeddingIndex fresh = build(passages_, params_, cfg_.shards);
    std::size_t n = 0, hit = 0;
    for (const auto& ex : examples) {
      if (ex.gold_passage_id.empty()) continue;
      ++n;
      auto qf = to_float(encode_query(params_, ex.retrieval_query));
      auto hits = search(fresh, qf, 1 + ex.excluded_ids.size() + (ex.origin_passage_id.empty() ? 0 : 1));
      for (const auto& h : hits) {
        if (h.id == ex.origin_passage_id ||
            std::find(ex.excluded_ids.begin(), ex.excluded_ids.end(), h.id) != ex.excluded_ids.end())
          continue;
        hit += h.id == ex.gold_passage_id ? 1 : 0;
        break;
      }
    }
    return n ? static_cast<double>(hit) / static_cast<double>(n) : 0.0;
  }

 private:
  struct ExampleResult {
    double loss = 0.0;
    std::vector<std::string> doc_ids;
    std::vector<double> grad_scores;
    std::string top1;
  };

  ExampleResult score_example(const PretextExample& ex) {
    ExampleResult r;
    auto hits = retrieve(ex);
    if (hits.empty()) return r;
    r.top1 = hits.front().id;
    std::vector<Passage> docs;
    docs.reserve(hits.size());
    for (const auto& h : hits) {
      docs.push_back(passage(h.id));
      r.doc_ids.push_back(h.id);
    }
    Vector q = encode_query(params_, ex.retrieval_query);
    std::vector<double> scores;
    scores.reserve(docs.size());
    for (const auto& d : docs) scores.push_back(score(q, encode_doc(params_, d.text)));
    auto retr = retrieval_distribution(scores, cfg_.theta, r.doc_ids);

    LossValue lv;
    switch (cfg_.loss) {
      case LossKind::adist:
        lv = distill_step(adist_target(lm_->attention_relevance(ex.query, docs, ex.output), cfg_.theta_t), retr);
        break;
      case LossKind::pdist:
        lv = distill_step(pdist_target(lm_->per_doc_loglik(ex.query, docs, ex.output), cfg_.theta_t), retr);
        break;
      case LossKind::loop:
        if (docs.size() < 2) return r;
        lv = distill_step(loop_target(lm_->loo_logliks(ex.query, docs, ex.output), cfg_.theta_t), retr);
        break;
      case LossKind::emdr2:
        lv = cfg_.emdr_token_level
                 ? emdr2_token_objective(lm_->per_token_logliks(ex.query, docs, ex.output), retr.probs, cfg_.theta)
                 : emdr2_objective(lm_->per_doc_loglik(ex.query, docs, ex.output), retr.probs, cfg_.theta);
        // Report the minimized quantity.
        lv.value = -lv.value;
        break;
    }
    r.loss = lv.value;
    r.grad_scores = std::move(lv.grad_wrt_scores);
    return r;
  }

  TrainConfig cfg_;
  std::vector<Passage> passages_;
  std::unordered_map<std::string, std::size_t> by_id_;
  EncoderParams params_;
  std::shared_ptr<const LMScorer> lm_;
  EmbeddingIndex index_;
  std::mt19937_64 rng_;
  std::size_t step_ = 0;
  std::size_t updates_since_build_ = 0;
  std::atomic<std::size_t> stale_warnings_{0};
};

}  // namespace ralab
