#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <set>

#include "properties.hpp"
#include "protolens/alignment.hpp"
#include "protolens/errors.hpp"
#include "support.hpp"

using namespace protolens;
using protolens::testing::random_matrix;
using protolens::testing::random_model;
using protolens::testing::random_vector;
using protolens::testing::tiny_dims;

namespace {

CandidatePool pool_of(const Eigen::MatrixXd& rows) {
  CandidatePool pool;
  for (Eigen::Index i = 0; i < rows.rows(); ++i)
    pool.candidates.push_back({"s" + std::to_string(i), rows.row(i).transpose()});
  return pool;
}

}  // namespace

TEST_SUITE("prototype_alignment") {

TEST_CASE("kmeans single point") {
  Eigen::MatrixXd one(1, 3);
  one << 1, 2, 3;
  const KMeansResult r = kmeans(one, 1, 10, 0);
  CHECK(r.centers == one);
  CHECK(r.assignments == std::vector<std::size_t>{0});
}

TEST_CASE("kmeans separates two tight blobs") {
  Rng rng(1);
  Eigen::MatrixXd pts(40, 2);
  std::vector<std::size_t> blob(40);
  for (Eigen::Index i = 0; i < 40; ++i) {
    blob[i] = rng.below(2);
    const double cx = blob[i] == 0 ? -5.0 : 5.0;
    pts(i, 0) = cx + 0.1 * rng.normal();
    pts(i, 1) = 0.1 * rng.normal();
  }
  const KMeansResult r = kmeans(pts, 2, 100, 3);
  // Cluster labels are arbitrary; membership must agree up to relabelling.
  const bool direct = r.assignments[0] == blob[0];
  for (std::size_t i = 0; i < 40; ++i) CHECK((r.assignments[i] == blob[i]) == direct);
}

TEST_CASE("kmeans is deterministic and its objective never rises") {
  Rng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::MatrixXd pts = random_matrix(rng, 60, 4);
    const std::size_t k = 1 + rng.below(8);
    const KMeansResult a = kmeans(pts, k, 100, 9);
    const KMeansResult b = kmeans(pts, k, 100, 9);
    CHECK(a.centers == b.centers);
    CHECK(a.assignments == b.assignments);
    REQUIRE_FALSE(a.objective.empty());
    for (std::size_t i = 1; i < a.objective.size(); ++i) CHECK(a.objective[i] <= a.objective[i - 1] + 1e-9);
  }
}

TEST_CASE("kmeans argument checks") {
  const Eigen::MatrixXd pts = Eigen::MatrixXd::Zero(3, 2);
  CHECK_THROWS_AS(kmeans(pts, 0, 10, 0), InvalidParameter);
  CHECK_THROWS_AS(kmeans(pts, 4, 10, 0), InvalidParameter);
}

TEST_CASE("kmeans with duplicate points leaves no cluster empty") {
  Eigen::MatrixXd pts = Eigen::MatrixXd::Zero(6, 2);
  pts.row(5) << 1, 1;
  const KMeansResult r = kmeans(pts, 3, 20, 4);
  CHECK(r.centers.allFinite());
  CHECK(r.assignments.size() == 6);
}

TEST_CASE("candidate pool keeps the members nearest the single center") {
  const Model model = random_model(tiny_dims(), 5);
  const std::vector<std::string> sentences{"alpha beta", "gamma delta", "epsilon", "zeta eta theta", "iota kappa"};
  const CandidatePool pool = build_candidate_pool(sentences, model.encoder, nullptr, 1, 2, 0);
  REQUIRE(pool.size() == 2);

  Eigen::MatrixXd vecs(5, 8);
  for (Eigen::Index i = 0; i < 5; ++i) vecs.row(i) = embed_sentence(model.encoder, nullptr, sentences[i]).transpose();
  const Eigen::RowVectorXd center = vecs.colwise().mean();
  std::vector<Eigen::Index> order(5);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return (vecs.row(a) - center).squaredNorm() < (vecs.row(b) - center).squaredNorm();
  });
  CHECK(pool.candidates[0].sentence == sentences[order[0]]);
  CHECK(pool.candidates[1].sentence == sentences[order[1]]);
}

TEST_CASE("candidate pool size and dedup") {
  const Model model = random_model(tiny_dims(), 6);
  std::vector<std::string> sentences;
  for (int i = 0; i < 30; ++i) sentences.push_back("sentence number " + std::to_string(i % 12));
  const CandidatePool pool = build_candidate_pool(sentences, model.encoder, nullptr, 3, 2, 1);
  CHECK(pool.size() <= 3 * 2);
  std::set<std::string> unique;
  for (const auto& c : pool.candidates) CHECK(unique.insert(c.sentence).second);
  CHECK_THROWS_AS(build_candidate_pool({"a", "a", "b"}, model.encoder, nullptr, 3, 2, 1), InvalidParameter);
}

TEST_CASE("candidate pool uses cached embeddings") {
  const Model model = random_model(tiny_dims(), 7);
  EmbeddingCache cache(8);
  cache.insert("cached", Eigen::VectorXd::Constant(8, 3.0));
  const CandidatePool pool = build_candidate_pool({"cached", "plain"}, model.encoder, &cache, 2, 1, 0);
  bool found = false;
  for (const auto& c : pool.candidates)
    if (c.sentence == "cached") found = c.vec == Eigen::VectorXd::Constant(8, 3.0);
  CHECK(found);
}

TEST_CASE("corpus_sentences splits every text") {
  CHECK(corpus_sentences({"One. Two!", "Three"}) == std::vector<std::string>{"One.", "Two!", "Three"});
}

TEST_CASE("representative_embedding") {
  Rng rng(3);
  const Eigen::MatrixXd three = random_matrix(rng, 3, 4);
  const Eigen::VectorXd p = random_vector(rng, 4);
  CHECK((representative_embedding(p, pool_of(three), 3).embedding - three.colwise().mean().transpose()).norm() < 1e-12);

  const Eigen::MatrixXd ten = random_matrix(rng, 10, 4);
  const CandidatePool pool = pool_of(ten);
  std::vector<Eigen::Index> order(10);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return cosine(ten.row(a).transpose(), p) > cosine(ten.row(b).transpose(), p);
  });
  const Representative one = representative_embedding(p, pool, 1);
  CHECK(one.embedding == ten.row(order[0]).transpose());
  const Representative top3 = representative_embedding(p, pool, 3);
  CHECK(top3.chosen == std::vector<std::size_t>{static_cast<std::size_t>(order[0]), static_cast<std::size_t>(order[1]),
                                                static_cast<std::size_t>(order[2])});
  const Eigen::VectorXd mean = (ten.row(order[0]) + ten.row(order[1]) + ten.row(order[2])).transpose() / 3.0;
  CHECK((top3.embedding - mean).norm() < 1e-12);

  CHECK(representative_embedding(p, pool, 50).chosen.size() == 10);
  CHECK_THROWS_AS(representative_embedding(p, CandidatePool{}, 3), InvalidParameter);
}

TEST_CASE("representative_embedding ties keep pool order") {
  Eigen::MatrixXd rows(3, 2);
  rows << 1, 0, 1, 0, 0, 1;
  const Representative r = representative_embedding(Eigen::Vector2d(1, 0), pool_of(rows), 1);
  CHECK(r.chosen == std::vector<std::size_t>{0});
}

TEST_CASE("align_prototype examples") {
  AlignmentConfig cfg;
  const Eigen::Vector3d p(0.1, -0.2, 0.3);
  const Eigen::Vector3d dir = Eigen::Vector3d(1, 2, -2) / 3.0;
  const Eigen::Vector3d at_tau = p + cfg.tau * dir;
  CHECK((align_prototype(p, at_tau, cfg) - at_tau).norm() < 1e-7);
  CHECK((align_prototype(p, p, cfg) - p).norm() < 1e-6);

  const double far = cfg.tau + 20.0 / cfg.gamma;
  const Eigen::Vector3d c = p + far * dir;
  CHECK(std::abs((align_prototype(p, c, cfg) - p).norm() - cfg.tau) < 1e-6);
}

TEST_CASE("align_prototype contract over random inputs") {
  const auto out = properties::alignment_contract(1000, 31);
  INFO(out.first);
  CHECK(out.ok());
}

TEST_CASE("align_all moves every prototype and logs it") {
  Model model = random_model(tiny_dims(), 8);
  Rng rng(9);
  const CandidatePool pool = pool_of(random_matrix(rng, 6, 8));
  const Model before = model;
  AlignmentConfig cfg;
  const auto log = align_all(model, pool, cfg, 4);
  REQUIRE(log.size() == 3);
  REQUIRE(model.alignment.size() == 3);
  for (std::size_t k = 0; k < 3; ++k) {
    const auto row = static_cast<Eigen::Index>(k);
    const Eigen::VectorXd p = before.bank.prototypes.row(row).transpose();
    const Representative rep = representative_embedding(p, pool, 3);
    const Eigen::VectorXd expected = align_prototype(p, rep.embedding, cfg);
    CHECK((model.bank.prototypes.row(row).transpose() - expected).norm() == 0.0);
    CHECK(log[k].prototype == k);
    CHECK(log[k].epoch == 4);
    CHECK(log[k].displacement == doctest::Approx((expected - p).norm()).epsilon(1e-12));
    REQUIRE(log[k].sentences.size() == 3);
    CHECK(log[k].sentences[0] == pool.candidates[rep.chosen[0]].sentence);
  }
}

TEST_CASE("align_all leaves prototypes already at their targets in place") {
  Model model = random_model(tiny_dims(), 10);
  CandidatePool pool = pool_of(model.bank.prototypes);
  AlignmentConfig cfg;
  cfg.top_candidates = 1;
  for (const auto& rec : align_all(model, pool, cfg, 1)) CHECK(rec.displacement < 1e-12);
}

TEST_CASE("alignment schedule and validation") {
  AlignmentConfig cfg;
  CHECK(cfg.due(1));
  CHECK(cfg.due(7));
  cfg.warmup_epochs = 3;
  cfg.period_epochs = 2;
  CHECK_FALSE(cfg.due(2));
  CHECK(cfg.due(3));
  CHECK_FALSE(cfg.due(4));
  CHECK(cfg.due(5));
  CHECK_NOTHROW(cfg.validate());
  cfg.tau = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = AlignmentConfig{};
  cfg.top_candidates = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

}  // TEST_SUITE
