#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include <json.hpp>

#include "protolens/config.hpp"
#include "protolens/corpus.hpp"
#include "protolens/encoder.hpp"
#include "protolens/objectives.hpp"
#include "protolens/prototype_model.hpp"

namespace protolens {

struct EpochStats {
  std::size_t epoch = 0;  // 1-based
  double learning_rate = 0.0;
  LossBreakdown loss;  // mean over the epoch's minibatches, weighted by batch size
  double val_accuracy = 0.0;
  bool aligned = false;
};

nlohmann::ordered_json history_to_json(const std::vector<EpochStats>& history);
std::vector<EpochStats> history_from_json(const nlohmann::json& j);

struct EvalResult {
  double accuracy = 0.0;
  std::vector<std::size_t> support;    // instances per true class
  std::vector<std::size_t> correct;    // correct predictions per true class
  std::vector<std::size_t> predicted;  // predictions per class
  std::size_t total = 0;
};

EvalResult evaluate(const Model& model, const Corpus& corpus);

/// Random encoder projection and mixture heads, prototypes copied from
/// uniformly sampled training-sentence embeddings, small random head weights.
Model initialize_model(const TrainConfig& cfg, std::size_t classes, const Corpus& train, const EmbeddingCache* cache);

struct TrainResult {
  Model model;
  std::vector<EpochStats> history;
};

struct TrainHooks {
  const EmbeddingCache* cache = nullptr;
  std::function<void(const EpochStats&)> on_epoch;
};

/// Seeded AdamW training with per-epoch alignment. Throws TrainingError when
/// a loss term turns non-finite and DataError on empty or single-class data.
TrainResult train(const TrainConfig& cfg, const Corpus& train_set, const Corpus& val_set, const TrainHooks& hooks = {});

/// Mean pairwise cosine between prototypes.
double mean_prototype_cosine(const Model& model);

std::vector<LabeledText> prepare_corpus(const Corpus& corpus, const ModelDims& dims);

}  // namespace protolens
