#include "protolens/experiments.hpp"

#include <algorithm>

#include "protolens/errors.hpp"
#include "protolens/rng.hpp"
#include "protolens/trainer.hpp"

namespace protolens {

std::vector<AblationArm> default_ablation_arms() {
  return {{"full", {false, false}}, {"no_diversity", {true, false}}, {"no_alignment", {false, true}}};
}

std::vector<AblationRow> run_ablation(const TrainConfig& cfg, const Corpora& data, const std::vector<AblationArm>& arms,
                                      const EmbeddingCache* cache) {
  std::vector<AblationRow> rows;
  for (const auto& arm : arms) {
    TrainConfig c = cfg;
    c.ablations = arm.flags;
    const TrainResult run = train(c, data.train, data.val, {cache, {}});
    rows.push_back({arm.name, evaluate(run.model, data.test).accuracy, mean_prototype_cosine(run.model)});
  }
  return rows;
}

SweepParam parse_sweep_param(const std::string& name) {
  if (name == "K") return SweepParam::K;
  if (name == "ngram" || name == "n_gram") return SweepParam::NGram;
  throw InvalidParameter("sweep parameter must be K or ngram, got \"" + name + "\"");
}

std::string to_string(SweepParam p) { return p == SweepParam::K ? "K" : "ngram"; }

std::vector<SweepPoint> sweep(const TrainConfig& cfg, const Corpora& data, SweepParam param,
                              const std::vector<std::size_t>& values, const EmbeddingCache* cache) {
  if (values.empty()) throw InvalidParameter("sweep: no values given");
  std::vector<SweepPoint> curve;
  for (const std::size_t v : values) {
    TrainConfig c = cfg;
    if (param == SweepParam::K) {
      c.K = v;
    } else {
      c.n_gram = v;
    }
    const TrainResult run = train(c, data.train, data.val, {cache, {}});
    curve.push_back({v, evaluate(run.model, data.test).accuracy});
  }
  return curve;
}

TrainConfig gradcheck_config() {
  TrainConfig c;
  c.d = 16;
  c.K = 3;
  c.M = 4;
  c.T_max = 16;
  c.hash_dim = 64;
  c.hidden = 16;
  c.n_gram = 3;
  c.span_init_sigma = 1.5;  // keeps the mask ramps (and their gradients) in play
  return c;
}

GradCheckSetup make_gradcheck_setup(const TrainConfig& cfg, std::uint64_t seed, std::size_t batch_size) {
  SyntheticOptions so;
  so.num_train = batch_size;
  so.num_test = 0;
  so.seed = seed;
  // tokens = noise + 3, parts = tokens - n + 1 <= T_max
  const std::size_t room = cfg.T_max + cfg.n_gram > 4 ? cfg.T_max + cfg.n_gram - 4 : 1;
  so.noise_length = std::clamp<std::size_t>(room, 1, 10);
  const SyntheticData data = generate_synthetic(so);

  TrainConfig c = cfg;
  c.seed = seed;
  GradCheckSetup setup;
  setup.model = initialize_model(c, 2, data.train.corpus, nullptr);
  Rng rng(seed ^ 0x5bd1e995ULL);
  for_each_block(setup.model, [&](const char*, auto& block) {
    for (Eigen::Index i = 0; i < block.size(); ++i) block.data()[i] += 0.05 * rng.normal();
  });
  setup.batch = prepare_corpus(data.train.corpus, setup.model.dims);
  setup.loss = c.loss;
  return setup;
}

Corpora synthetic_corpora(const SyntheticOptions& opts) {
  SyntheticData data = generate_synthetic(opts);
  return {std::move(data.train.corpus), std::move(data.val.corpus), std::move(data.test.corpus)};
}

}  // namespace protolens
