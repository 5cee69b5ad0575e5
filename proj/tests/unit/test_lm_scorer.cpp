#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "ralab/lm_scorer.hpp"

using namespace ralab;

namespace {

Passage doc(std::string id, Tokens text) {
  Passage p;
  p.id = std::move(id);
  p.text = std::move(text);
  return p;
}

std::vector<Passage> random_docs(std::mt19937_64& rng, std::size_t k, std::size_t vocab) {
  std::uniform_int_distribution<std::size_t> len(1, 12), word(0, vocab - 1);
  std::vector<Passage> docs;
  for (std::size_t i = 0; i < k; ++i) {
    Tokens t;
    for (std::size_t j = len(rng); j > 0; --j) t.push_back("w" + std::to_string(word(rng)));
    docs.push_back(doc("d" + std::to_string(i), t));
  }
  return docs;
}

}  // namespace

TEST(OverlapLMTest, HandComputedSingleDocument) {
  OverlapLM lm(10, 0.5);
  std::vector<Passage> docs = {doc("a", {"x", "x", "y", "z"})};
  // p(x) = 0.5 * 2/4 + 0.05, p(q) = 0.05
  const double want = std::log(0.3) + std::log(0.05);
  EXPECT_NEAR(lm.per_doc_loglik({}, docs, Tokens{"x", "q"})[0], want, 1e-15);
  EXPECT_NEAR(lm.joint_loglik({}, docs, Tokens{"x", "q"}), want, 1e-15);
  EXPECT_DOUBLE_EQ(lm.floor(), 0.05);
}

TEST(OverlapLMTest, AgreesWithRecountingOracle) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t vocab = 12;
    OverlapLM lm(vocab, 0.7);
    auto docs = random_docs(rng, 2 + trial % 5, vocab);
    Tokens out;
    for (int j = 0; j < 4; ++j) out.push_back("w" + std::to_string(rng() % vocab));
    auto per = lm.per_doc_loglik({}, docs, out);
    auto loo = lm.loo_logliks({}, docs, out);
    auto rel = lm.attention_relevance({}, docs, out);
    auto want_per = oracle::per_doc(docs, out, vocab, 0.7L);
    auto want_loo = oracle::leave_one_out(docs, out, vocab, 0.7L);
    auto want_rel = oracle::relevance(docs, out);
    for (std::size_t k = 0; k < docs.size(); ++k) {
      EXPECT_LT(oracle::rel_err(per[k], want_per[k]), 1e-12);
      EXPECT_LT(oracle::rel_err(loo[k], want_loo[k]), 1e-12);
      EXPECT_NEAR(rel[k], static_cast<double>(want_rel[k]), 1e-15);
    }
    std::vector<const Passage*> all;
    for (const auto& d : docs) all.push_back(&d);
    EXPECT_LT(oracle::rel_err(lm.joint_loglik({}, docs, out), oracle::unigram_loglik(all, out, vocab, 0.7L)), 1e-12);
  }
}

TEST(OverlapLMTest, TokenRowsSumToPerDocument) {
  std::mt19937_64 rng(3);
  OverlapLM lm(8);
  auto docs = random_docs(rng, 4, 8);
  Tokens out = {"w1", "w2", "w1", "w7"};
  auto rows = lm.per_token_logliks({}, docs, out);
  auto per = lm.per_doc_loglik({}, docs, out);
  ASSERT_EQ(rows.size(), 4u);
  for (std::size_t k = 0; k < 4; ++k) {
    ASSERT_EQ(rows[k].size(), out.size());
    double s = 0;
    for (double v : rows[k]) s += v;
    EXPECT_NEAR(s, per[k], 1e-12);
  }
}

TEST(OverlapLMTest, EmptyDocumentScoresAtTheFloor) {
  OverlapLM lm(4, 0.5);
  std::vector<Passage> docs = {doc("e", {})};
  EXPECT_NEAR(lm.per_doc_loglik({}, docs, Tokens{"a"})[0], std::log(0.125), 1e-15);
  EXPECT_EQ(lm.attention_relevance({}, docs, Tokens{"a"})[0], 0.0);
}

TEST(OverlapLMTest, Errors) {
  EXPECT_THROW(OverlapLM(0), Error);
  EXPECT_THROW(OverlapLM(5, 0.0), Error);
  EXPECT_THROW(OverlapLM(5, 1.0), Error);
  OverlapLM lm(5);
  std::vector<Passage> one = {doc("a", {"x"})};
  EXPECT_THROW(lm.loo_logliks({}, one, Tokens{"x"}), Error);
  EXPECT_THROW(lm.per_doc_loglik({}, one, Tokens{}), Error);
  EXPECT_THROW(lm.joint_loglik({}, std::vector<Passage>{}, Tokens{"x"}), Error);
}

TEST(MockScorerTest, LoadsFixtureAndMixesUniformly) {
  auto m = MockScorer::from_jsonl(std::string(RALAB_FIXTURES) + "/mock_scorer.jsonl");
  std::vector<Passage> docs = {doc("d0", {}), doc("d2", {})};
  auto per = m.per_doc_loglik({}, docs, {});
  EXPECT_EQ(per, (std::vector<double>{-1.0, -4.0}));
  EXPECT_NEAR(m.joint_loglik({}, docs, {}), std::log((std::exp(-1.0) + std::exp(-4.0)) / 2), 1e-15);
  EXPECT_EQ(m.attention_relevance({}, docs, {}), (std::vector<double>{0.5, 0.15}));
  // The base leave-one-out re-pools the remaining documents.
  auto loo = m.loo_logliks({}, docs, {});
  EXPECT_DOUBLE_EQ(loo[0], -4.0);
  EXPECT_DOUBLE_EQ(loo[1], -1.0);
  std::vector<Passage> unknown = {doc("zz", {})};
  EXPECT_THROW(m.per_doc_loglik({}, unknown, {}), Error);
  EXPECT_THROW(MockScorer::from_jsonl("/nonexistent.jsonl"), IOError);
}
