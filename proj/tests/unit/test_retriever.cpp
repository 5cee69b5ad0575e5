#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "oracles.hpp"
#include "ralab/retriever.hpp"

using namespace ralab;

namespace {

Vocabulary small_vocab(int n = 8) {
  Vocabulary v;
  for (int i = 0; i < n; ++i) v.add("t" + std::to_string(i));
  return v;
}

// Perturbs one parameter entry in place and evaluates the loss.
double kl_loss(const EncoderParams& p, const Tokens& q, const std::vector<Tokens>& docs,
               const std::vector<double>& target, double theta) {
  std::vector<double> s;
  for (const auto& d : docs) s.push_back(score(encode_query(p, q), encode_doc(p, d)));
  auto probs = oracle::softmax(s, theta);
  std::vector<oracle::LD> t(target.begin(), target.end());
  return static_cast<double>(oracle::kl(t, probs));
}

}  // namespace

TEST(VocabularyTest, ReservedRowsAndUnknowns) {
  Vocabulary v;
  EXPECT_EQ(v.size(), 2u);
  EXPECT_EQ(v.token(Vocabulary::kUnk), "[UNK]");
  EXPECT_EQ(v.token(Vocabulary::kMask), "[MASK]");
  auto id = v.add("hello");
  EXPECT_EQ(v.add("hello"), id);
  EXPECT_EQ(v.lookup("missing"), Vocabulary::kUnk);
  EXPECT_TRUE(v.contains("hello"));
}

TEST(Encoder, InitIsSeededAndTowersMatch) {
  auto a = init_encoder(small_vocab(), 6, 42);
  auto b = init_encoder(small_vocab(), 6, 42);
  auto c = init_encoder(small_vocab(), 6, 43);
  EXPECT_TRUE(a.query.table.isApprox(b.query.table, 0.0));
  EXPECT_FALSE(a.query.table.isApprox(c.query.table));
  EXPECT_TRUE(a.query.table == a.doc.table);
  EXPECT_LE(a.query.table.cwiseAbs().maxCoeff(), 1.0 / std::sqrt(6.0));
  ASSERT_TRUE(a.query.projection.has_value());
  EXPECT_TRUE(a.query.projection->isIdentity());
  EXPECT_THROW(init_encoder(small_vocab(), 0, 1), Error);
}

TEST(Encoder, MeanPoolingThenProjection) {
  auto p = init_encoder(small_vocab(), 2, 0);
  p.query.table.row(p.vocab.lookup("t0")) << 1.0, 0.0;
  p.query.table.row(p.vocab.lookup("t1")) << 0.0, 3.0;
  (*p.query.projection) << 2.0, 0.0, 0.0, 1.0;
  Vector e = encode_query(p, Tokens{"t0", "t1", "t1"});
  EXPECT_NEAR(e[0], 2.0 * (1.0 / 3.0), 1e-15);
  EXPECT_NEAR(e[1], 2.0, 1e-15);
  EXPECT_THROW(encode_query(p, Tokens{}), Error);
}

TEST(Encoder, ScoreDimensionMismatch) {
  Vector a(3), b(4);
  a.setOnes();
  b.setOnes();
  EXPECT_THROW(score(a, b), Error);
}

TEST(RetrievalDistributionTest, ContractsAndErrors) {
  std::vector<double> s = {0.3, 0.1, -0.2};
  auto r = retrieval_distribution(s, 0.1, {"a", "b", "c"});
  auto want = oracle::softmax(s, 0.1);
  for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(r.probs[k], static_cast<double>(want[k]), 1e-15);
  EXPECT_THROW(retrieval_distribution(s, 0.0), Error);
  EXPECT_THROW(retrieval_distribution(std::vector<double>{}, 0.1), Error);
  EXPECT_THROW(retrieval_distribution(std::vector<double>{std::nan("")}, 0.1), Error);
  EXPECT_THROW(retrieval_distribution(s, 0.1, {"a"}), Error);
}

// Every parameter of both towers against central differences.
TEST(Gradient, FullModeMatchesFiniteDifferences) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 5; ++trial) {
    auto p = init_encoder(small_vocab(), 3, 100 + trial);
    std::normal_distribution<double> g(0, 0.3);
    for (auto* t : {&p.query, &p.doc}) *t->projection += Matrix::NullaryExpr(3, 3, [&] { return g(rng); });
    Tokens q = {"t0", "t3", "t5"};
    std::vector<Tokens> docs = {{"t0", "t1"}, {"t3", "t3", "t7"}, {"t5", "t2", "t4", "t0"}};
    std::vector<double> target = {0.2, 0.5, 0.3};
    const double theta = 0.3;
    std::vector<TokenView> views(docs.begin(), docs.end());
    auto grad = retriever_gradient(p, q, views, target, theta, TrainMode::full);

    std::vector<double> analytic, numeric;
    auto probe = [&](Matrix& m, const Matrix& gm) {
      for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
          const double x0 = m(r, c);
          m(r, c) = x0 + 1e-5;
          const double fp = kl_loss(p, q, docs, target, theta);
          m(r, c) = x0 - 1e-5;
          const double fm = kl_loss(p, q, docs, target, theta);
          m(r, c) = x0;
          numeric.push_back((fp - fm) / 2e-5);
          analytic.push_back(gm(r, c));
        }
    };
    probe(p.query.table, grad.query_table);
    probe(*p.query.projection, *grad.query_projection);
    probe(p.doc.table, grad.doc_table);
    probe(*p.doc.projection, *grad.doc_projection);
    EXPECT_LT(oracle::norm_rel_err(analytic, numeric), 1e-6);
  }
}

TEST(Gradient, QuerySideLeavesDocumentsExactlyAlone) {
  auto p = init_encoder(small_vocab(), 4, 9);
  Tokens q = {"t1", "t2"};
  std::vector<Tokens> docs = {{"t1"}, {"t2", "t6"}};
  std::vector<TokenView> views(docs.begin(), docs.end());
  std::vector<double> target = {0.9, 0.1};
  auto g = retriever_gradient(p, q, views, target, 0.1, TrainMode::query_side);
  EXPECT_TRUE(g.doc_side_is_zero());
  EXPECT_GT(g.query_table.cwiseAbs().maxCoeff(), 0.0);

  const Matrix doc_before = p.doc.table;
  const Matrix query_before = p.query.table;
  apply_sgd(p, g, 0.5, TrainMode::query_side);
  EXPECT_TRUE(p.doc.table == doc_before);
  EXPECT_FALSE(p.query.table == query_before);
}

TEST(Gradient, FixedModeIsFrozen) {
  auto p = init_encoder(small_vocab(), 4, 9);
  std::vector<Tokens> docs = {{"t1"}};
  std::vector<TokenView> views(docs.begin(), docs.end());
  std::vector<double> target = {1.0};
  EXPECT_THROW(retriever_gradient(p, Tokens{"t1"}, views, target, 0.1, TrainMode::fixed), Error);
  auto before = p.query.table;
  apply_sgd(p, EncoderGradient::zeros_like(p), 1.0, TrainMode::fixed);
  EXPECT_TRUE(p.query.table == before);
}

TEST(Checkpoint, RoundTripIsFloat32Exact) {
  auto p = init_encoder(small_vocab(), 5, 1);
  p.doc.table(3, 2) += 0.25;
  auto path = (std::filesystem::temp_directory_path() / "ralab_test.ckpt").string();
  save_checkpoint(path, p);
  auto q = load_checkpoint(path);
  EXPECT_EQ(q.dim, 5u);
  ASSERT_EQ(q.vocab.size(), p.vocab.size());
  for (std::size_t i = 0; i < p.vocab.size(); ++i) EXPECT_EQ(q.vocab.token(i), p.vocab.token(i));
  EXPECT_TRUE(q.doc.table.isApprox(p.doc.table.cast<float>().cast<double>(), 0.0));
  EXPECT_TRUE(q.query.projection.has_value());
  std::filesystem::remove(path);
}

TEST(Checkpoint, CorruptFilesAreRejected) {
  auto path = (std::filesystem::temp_directory_path() / "ralab_bad.ckpt").string();
  {
    std::ofstream out(path, std::ios::binary);
    out << "NOPE1234";
  }
  EXPECT_THROW(load_checkpoint(path), IOError);
  auto p = init_encoder(small_vocab(), 5, 1);
  save_checkpoint(path, p);
  std::filesystem::resize_file(path, std::filesystem::file_size(path) - 7);
  EXPECT_THROW(load_checkpoint(path), IOError);
  EXPECT_THROW(load_checkpoint("/nonexistent/x.ckpt"), IOError);
  std::filesystem::remove(path);
}
