#pragma once

#include <random>
#include <string>
#include <vector>

#include "ralab/corpus.hpp"
#include "ralab/evalkit.hpp"
#include "ralab/pretext.hpp"

// Synthetic corpora whose correct retrievals are known by construction.
namespace ralab::synthetic {

struct NeedleTask {
  std::vector<Passage> passages;
  std::vector<PretextExample> examples;
};

/// Passage i is keyed by a pair (a, b) on a grid and carries one answer
/// token that occurs nowhere else. Its query names the key with query-side
/// tokens (q_a, r_b) that never occur in any passage, so an untrained
/// retriever ranks the gold passage at chance; the output is the answer
/// token, which only the gold passage contains.
inline NeedleTask needle_task(std::size_t n, std::uint64_t seed = 0) {
  if (n == 0) throw Error("needle task needs n >= 1");
  std::size_t side = 1;
  while (side * side < n) ++side;
  NeedleTask t;
  std::vector<std::size_t> order(side * side);
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t a = order[i] / side, b = order[i] % side;
    char id[32];
    std::snprintf(id, sizeof id, "needle-%05zu", i);
    Passage p;
    p.id = id;
    p.doc_id = id;
    p.text = {"key_a" + std::to_string(a), "key_b" + std::to_string(b), "ans" + std::to_string(i)};
    p.word_count = p.text.size();
    p.source = Source::cc;
    t.passages.push_back(p);

    PretextExample ex;
    ex.task = Task::supervised;
    ex.query = {"q_a" + std::to_string(a), "q_b" + std::to_string(b)};
    ex.retrieval_query = ex.query;
    ex.output = {"ans" + std::to_string(i)};
    ex.gold_passage_id = p.id;
    t.examples.push_back(std::move(ex));
  }
  return t;
}

/// Two dumps of the same facts. Subject s has `relations` facts; in each
/// dump the passage for (s, r) reads "subj<s> rel<r> <answer>", where the
/// answer token differs between the dumps.
struct TemporalCorpora {
  std::vector<Passage> early, late;
  std::vector<TemporalQA> questions;
};

inline TemporalCorpora temporal_corpora(std::size_t subjects, std::size_t relations, Date early, Date late) {
  if (early == late) throw Error("temporal corpora need two distinct dump dates");
  TemporalCorpora t;
  for (std::size_t s = 0; s < subjects; ++s) {
    for (std::size_t r = 0; r < relations; ++r) {
      const std::string subj = "subj" + std::to_string(s), rel = "rel" + std::to_string(r);
      TemporalQA q;
      q.query = subj + " " + rel;
      for (auto [date, out] : {std::pair{early, &t.early}, std::pair{late, &t.late}}) {
        const std::string ans = "v" + std::to_string(date.year) + "_" + std::to_string(s) + "_" + std::to_string(r);
        Passage p;
        p.id = std::to_string(date.year) + "/" + subj + "/" + rel;
        p.doc_id = std::to_string(date.year) + "/" + subj;
        p.text = {subj, rel, ans};
        p.word_count = p.text.size();
        p.dump_date = date;
        out->push_back(std::move(p));
        q.answers_by_year[date.year] = ans;
      }
      t.questions.push_back(std::move(q));
    }
  }
  return t;
}

/// Questions of random words, each with an answer token. A `plant_fraction`
/// share of them is copied verbatim, answer included, into a "plant-<i>"
/// passage. Every question also gets a "fact-<i>" passage sharing a run of
/// fewer than half its tokens; only even-numbered facts carry the answer.
/// The rest is noise.
struct LeakageFixture {
  std::vector<Passage> passages;
  std::vector<Tokens> questions;
  std::vector<std::string> answers;
  std::vector<bool> planted;
};

inline LeakageFixture leakage_fixture(std::size_t n, double plant_fraction, std::uint64_t seed,
                                      std::size_t question_len = 12, std::size_t noise_per_question = 5) {
  if (question_len < 2) throw Error("questions need at least 2 tokens");
  LeakageFixture f;
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> word(0, 19999);
  auto words = [&](std::size_t len) {
    Tokens t;
    for (std::size_t i = 0; i < len; ++i) t.push_back("w" + std::to_string(word(rng)));
    return t;
  };
  auto add = [&](std::string id, Tokens text) {
    Passage p;
    p.id = id;
    p.doc_id = std::move(id);
    p.word_count = text.size();
    p.text = std::move(text);
    p.source = Source::cc;
    f.passages.push_back(std::move(p));
  };

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_planted = static_cast<std::size_t>(std::llround(plant_fraction * static_cast<double>(n)));
  f.planted.assign(n, false);
  for (std::size_t i = 0; i < std::min(n_planted, n); ++i) f.planted[order[i]] = true;

  const std::size_t near_run = (question_len - 1) / 2;
  for (std::size_t i = 0; i < n; ++i) {
    f.questions.push_back(words(question_len));
    f.answers.push_back("ans" + std::to_string(i));
    const Tokens& q = f.questions.back();
    if (f.planted[i]) {
      Tokens t = words(10);
      t.insert(t.end(), q.begin(), q.end());
      t.push_back(f.answers.back());
      Tokens tail = words(10);
      t.insert(t.end(), tail.begin(), tail.end());
      add("plant-" + std::to_string(i), std::move(t));
    }
    Tokens fact = words(10);
    fact.insert(fact.end(), q.begin(), q.begin() + static_cast<std::ptrdiff_t>(near_run));
    if (i % 2 == 0) fact.push_back(f.answers.back());
    Tokens tail = words(10);
    fact.insert(fact.end(), tail.begin(), tail.end());
    add("fact-" + std::to_string(i), std::move(fact));
    for (std::size_t j = 0; j < noise_per_question; ++j) add("noise-" + std::to_string(i) + "-" + std::to_string(j), words(40));
  }
  return f;
}

}  // namespace ralab::synthetic
