#include <doctest.h>

#include "oracle.hpp"
#include "protolens/errors.hpp"
#include "protolens/prototype_model.hpp"
#include "support.hpp"

using namespace protolens;
using protolens::testing::random_matrix;
using protolens::testing::random_model;
using protolens::testing::random_vector;
using protolens::testing::tiny_dims;

TEST_SUITE("prototype_model") {

TEST_CASE("cosine examples") {
  Rng rng(1);
  const Eigen::VectorXd v = random_vector(rng, 7);
  CHECK(cosine(v, v) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(cosine(Eigen::Vector2d(1, 0), Eigen::Vector2d(0, 1)) == 0.0);
  CHECK(cosine(Eigen::VectorXd::Zero(7), v) == 0.0);
  CHECK(cosine(v, Eigen::VectorXd::Zero(7)) == 0.0);
}

TEST_CASE("cosine is invariant to positive scaling") {
  Rng rng(2);
  for (int i = 0; i < 200; ++i) {
    const Eigen::VectorXd u = random_vector(rng, 5), v = random_vector(rng, 5);
    const double a = std::exp(4.0 * rng.uniform() - 2.0);
    CHECK(std::abs(cosine(a * u, v) - cosine(u, v)) < 1e-6);
  }
}

TEST_CASE("cosine_backward matches central differences") {
  Rng rng(3);
  const Eigen::VectorXd u = random_vector(rng, 4), v = random_vector(rng, 4);
  Eigen::VectorXd du = Eigen::VectorXd::Zero(4), dv = Eigen::VectorXd::Zero(4);
  cosine_backward(u, v, 2.0, du, dv);
  for (Eigen::Index i = 0; i < 4; ++i) {
    Eigen::VectorXd up = u, um = u;
    up(i) += 1e-6;
    um(i) -= 1e-6;
    CHECK(du(i) == doctest::Approx(2.0 * (cosine(up, v) - cosine(um, v)) / 2e-6).epsilon(1e-6));
  }
}

TEST_CASE("similarity_curve") {
  Rng rng(4);
  const Eigen::VectorXd p = random_vector(rng, 8);
  const Eigen::MatrixXd same = p.transpose().replicate(4, 1);
  CHECK((similarity_curve(same, p).array() - 1.0).abs().maxCoeff() < 1e-6);

  Eigen::MatrixXd ortho = Eigen::MatrixXd::Zero(3, 2);
  ortho.col(1).setOnes();
  CHECK(similarity_curve(ortho, Eigen::Vector2d(1, 0)).isZero(0.0));

  const Eigen::MatrixXd rows = random_matrix(rng, 5, 8);
  const Eigen::VectorXd curve = similarity_curve(rows, p);
  for (Eigen::Index t = 0; t < 5; ++t) {
    double d = 0, a = 0, b = 0;
    for (Eigen::Index j = 0; j < 8; ++j) {
      d += rows(t, j) * p(j);
      a += rows(t, j) * rows(t, j);
      b += p(j) * p(j);
    }
    CHECK(curve(t) == doctest::Approx(d / (std::sqrt(a) * std::sqrt(b) + 1e-8)).epsilon(1e-12));
  }
}

TEST_CASE("rmsnorm examples") {
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(5);
  CHECK((rmsnorm(ones, ones).array() - 1.0).abs().maxCoeff() < 1e-3);
  const Eigen::VectorXd out = rmsnorm(Eigen::Vector2d(3, 4), Eigen::Vector2d(1, 1));
  CHECK(out(0) == doctest::Approx(0.8485).epsilon(1e-3));
  CHECK(out(1) == doctest::Approx(1.1314).epsilon(1e-3));
  CHECK(rmsnorm(Eigen::VectorXd::Zero(3), Eigen::VectorXd::Ones(3)).isZero(0.0));
}

TEST_CASE("rmsnorm preserves the argmax under positive scaling") {
  Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    const Eigen::VectorXd raw = random_vector(rng, 6);
    const Eigen::VectorXd gain = (random_vector(rng, 6).array().abs() + 0.1).matrix();
    const double a = 0.01 + 10.0 * rng.uniform();
    CHECK(argmax(rmsnorm(a * raw, gain)) == argmax(rmsnorm(raw, gain)));
  }
}

TEST_CASE("refine_embedding") {
  Rng rng(6);
  const Eigen::MatrixXd rows = random_matrix(rng, 4, 3);
  const Eigen::VectorXd mean = rows.colwise().mean().transpose();
  CHECK((refine_embedding(rows, Eigen::VectorXd::Ones(4)) - mean).norm() < 1e-8);
  Eigen::VectorXd hot = Eigen::VectorXd::Zero(4);
  hot(2) = 1.0;
  CHECK((refine_embedding(rows, hot) - rows.row(2).transpose()).norm() < 1e-7);
  CHECK(refine_embedding(rows, Eigen::VectorXd::Zero(4)).isZero(0.0));
}

TEST_CASE("predict examples") {
  PrototypeBank bank;
  bank.head_weights = Eigen::MatrixXd::Zero(2, 3);
  bank.head_bias = Eigen::VectorXd::Zero(2);
  const Eigen::VectorXd uniform = predict(bank, Eigen::Vector3d(1, -2, 3));
  CHECK(uniform(0) == 0.5);
  CHECK(uniform(1) == 0.5);

  PrototypeBank hand;
  hand.head_weights = Eigen::MatrixXd(2, 1);
  hand.head_weights << -2, 2;
  hand.head_bias = Eigen::VectorXd::Zero(2);
  CHECK(predict(hand, Eigen::VectorXd::Ones(1))(1) == doctest::Approx(0.9820).epsilon(1e-3));

  Rng rng(7);
  bank.head_weights = random_matrix(rng, 4, 3);
  bank.head_bias = random_vector(rng, 4);
  for (int i = 0; i < 50; ++i) CHECK(predict(bank, random_vector(rng, 3)).sum() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("predict is monotone in a similarity with a favourable weight") {
  Rng rng(8);
  PrototypeBank bank;
  bank.head_weights = random_matrix(rng, 2, 3);
  bank.head_bias = random_vector(rng, 2);
  bank.head_weights(1, 1) = bank.head_weights(0, 1) + 0.7;
  Eigen::VectorXd s = random_vector(rng, 3);
  double prev = -1.0;
  for (double x = -3.0; x <= 3.0; x += 0.25) {
    s(1) = x;
    const double p = predict(bank, s)(1);
    CHECK(p >= prev);
    prev = p;
  }
}

TEST_CASE("argmax ties go to the lower index") {
  CHECK(argmax(Eigen::Vector3d(1, 3, 3)) == 1);
  CHECK(argmax(Eigen::Vector2d(0.5, 0.5)) == 0);
}

TEST_CASE("forward shapes") {
  const Model model = random_model(tiny_dims(), 11);
  const ForwardResult r = forward(model, "one two three four five six seven eight");
  CHECK(r.prototypes.size() == 3);
  CHECK(r.raw.size() == 3);
  CHECK(r.normalized.size() == 3);
  CHECK(r.probabilities.size() == 2);
  CHECK(r.part_embeddings.rows() == 6);
  for (const auto& p : r.prototypes) CHECK(p.mask.soft.size() == 6);
}

TEST_CASE("single-part text gets the trapezoid value at position 1") {
  const Model model = random_model(tiny_dims(), 12);
  const ForwardResult r = forward(model, "just two");
  REQUIRE(r.part_embeddings.rows() == 1);
  for (const auto& p : r.prototypes) {
    const auto [mu, sigma] = select_component(p.mixture.params);
    REQUIRE(p.mask.soft.size() == 1);
    CHECK(p.mask.soft(0) == span_mask(mu, sigma, model.dims.smoothness, 1).soft(0));
  }
}

TEST_CASE("forward rejects texts longer than T_max") {
  const Model model = random_model(tiny_dims(), 13);
  CHECK_THROWS_AS(forward(model, "a b c d e f g h i j k l"), ConfigError);
}

TEST_CASE("forward equals the straight-line oracle") {
  for (const bool union_mask : {false, true}) {
    ModelDims dims = tiny_dims();
    dims.union_mask = union_mask;
    for (std::uint64_t seed : {21u, 22u, 23u}) {
      const Model model = random_model(dims, seed);
      for (const std::string text : {"the cat sat on the warm red mat", "short one", "a b c d e f g h"}) {
        const ForwardResult got = forward(model, text);
        const oracle::Result want = oracle::forward(model, text);
        for (std::size_t k = 0; k < 3; ++k) {
          const auto& p = got.prototypes[k];
          const auto& q = want.protos[k];
          for (std::size_t t = 0; t < q.curve.size(); ++t) {
            CHECK(std::abs(p.curve(static_cast<Eigen::Index>(t)) - q.curve[t]) < 1e-10);
            CHECK(std::abs(p.mask.soft(static_cast<Eigen::Index>(t)) - q.mask[t]) < 1e-10);
          }
          for (std::size_t m = 0; m < 2; ++m) {
            const auto i = static_cast<Eigen::Index>(m);
            CHECK(std::abs(p.mixture.params.mu(i) - q.mix.mu[m]) < 1e-10);
            CHECK(std::abs(p.mixture.params.sigma(i) - q.mix.sigma[m]) < 1e-10);
            CHECK(std::abs(p.mixture.params.pi_raw(i) - q.mix.pi_raw[m]) < 1e-10);
          }
          CHECK(std::abs(got.raw(static_cast<Eigen::Index>(k)) - want.raw[k]) < 1e-10);
          CHECK(std::abs(got.normalized(static_cast<Eigen::Index>(k)) - want.normalized[k]) < 1e-10);
        }
        for (std::size_t c = 0; c < 2; ++c)
          CHECK(std::abs(got.probabilities(static_cast<Eigen::Index>(c)) - want.probabilities[c]) < 1e-10);
      }
    }
  }
}

TEST_CASE("class_weight_of") {
  PrototypeBank bank;
  bank.head_weights = Eigen::MatrixXd(2, 2);
  bank.head_weights << 0.5, 1.0, 1.5, -1.0;
  CHECK(bank.class_weight_of(0) == 1.0);
  CHECK(bank.class_weight_of(1) == -2.0);
  bank.head_weights = Eigen::MatrixXd(3, 1);
  bank.head_weights << 0.1, 0.9, -0.3;
  CHECK(bank.class_weight_of(0) == 0.9);
}

TEST_CASE("dims validation and parameter count") {
  ModelDims d = tiny_dims();
  CHECK_NOTHROW(d.validate());
  const Model model(d);
  const std::size_t expected = 8 * 32 + 8 + (8 * 8 + 8) + (8 * 8 + 8) + 3 * (2 * 8 + 2) + 3 * 8 + 2 * 3 + 2 + 3;
  CHECK(parameter_count(model) == expected);
  CHECK(model.bank.rms_gain == Eigen::VectorXd::Ones(3));
  d.prototypes = 1;
  CHECK_THROWS_AS(d.validate(), ConfigError);
  d = tiny_dims();
  d.smoothness = 0.0;
  CHECK_THROWS_AS(d.validate(), ConfigError);
  d = tiny_dims();
  d.hash_dim = 4;
  CHECK_THROWS_AS(d.validate(), ConfigError);
}

}  // TEST_SUITE
