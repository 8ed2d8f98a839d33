#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "protolens/config.hpp"
#include "protolens/corpus.hpp"
#include "protolens/encoder.hpp"
#include "protolens/objectives.hpp"
#include "protolens/synthetic.hpp"

namespace protolens {

struct Corpora {
  Corpus train;
  Corpus val;
  Corpus test;
};

struct AblationArm {
  std::string name;
  AblationFlags flags;
};

/// full, no_diversity, no_alignment.
std::vector<AblationArm> default_ablation_arms();

struct AblationRow {
  std::string name;
  double test_accuracy = 0.0;
  double mean_prototype_cosine = 0.0;
};

/// One seeded run per arm; arms differ only in their ablation flags.
std::vector<AblationRow> run_ablation(const TrainConfig& cfg, const Corpora& data,
                                      const std::vector<AblationArm>& arms = default_ablation_arms(),
                                      const EmbeddingCache* cache = nullptr);

enum class SweepParam { K, NGram };

/// Throws InvalidParameter for names other than "K" and "ngram"/"n_gram".
SweepParam parse_sweep_param(const std::string& name);
std::string to_string(SweepParam p);

struct SweepPoint {
  std::size_t value = 0;
  double test_accuracy = 0.0;
};

/// One seeded run per value. Throws InvalidParameter on an empty value list.
std::vector<SweepPoint> sweep(const TrainConfig& cfg, const Corpora& data, SweepParam param,
                              const std::vector<std::size_t>& values, const EmbeddingCache* cache = nullptr);

/// Small double-precision configuration for gradient verification:
/// d=16, K=3, M=4, T_max=16, hash_dim=64, MLP width 16, trigrams.
TrainConfig gradcheck_config();

struct GradCheckSetup {
  Model model;
  std::vector<LabeledText> batch;
  LossConfig loss;
};

/// Seeded model and a synthetic minibatch of `batch_size` texts that fit T_max.
/// Every parameter is jittered so no gradient path sits at an exact zero.
GradCheckSetup make_gradcheck_setup(const TrainConfig& cfg, std::uint64_t seed, std::size_t batch_size = 4);

/// Train/val/test splits of the planted-phrase corpus.
Corpora synthetic_corpora(const SyntheticOptions& opts);

}  // namespace protolens
