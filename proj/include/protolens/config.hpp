#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "protolens/alignment.hpp"
#include "protolens/objectives.hpp"
#include "protolens/prototype_model.hpp"

namespace protolens {

struct AblationFlags {
  bool no_diversity = false;
  bool no_alignment = false;

  bool operator==(const AblationFlags&) const = default;
};

struct TrainConfig {
  std::size_t K = 4;
  std::size_t M = 4;
  std::size_t n_gram = 5;
  std::size_t d = 32;
  std::size_t hash_dim = 2048;
  std::size_t T_max = 128;
  double R = 2.0;
  std::size_t hidden = 64;
  bool union_mask = false;

  std::size_t batch_size = 16;
  std::size_t epochs = 25;
  double learning_rate = 1e-4;
  std::size_t lr_decay_every = 10;
  double lr_decay_factor = 0.9;
  double weight_decay = 0.01;
  std::uint64_t seed = 0;

  double init_scale = 0.01;      // std of the encoder projection at init
  double head_init_scale = 0.1;  // std of the logistic head weights at init
  double span_init_sigma = 15.0;  // initial spread (parts) via the spread-head bias
  std::string embedding_cache;   // optional path

  AlignmentConfig alignment;
  LossConfig loss;
  AblationFlags ablations;

  /// Throws ConfigError on non-positive counts, learning rate or scales.
  void validate() const;

  ModelDims dims(std::size_t classes) const;

  /// Learning rate used during (1-based) epoch `epoch`.
  double learning_rate_for_epoch(std::size_t epoch) const;
  /// Learning rate once `completed` epochs have finished: lr0 * factor^floor(completed / every).
  double learning_rate_after(std::size_t completed) const;
};

/// Unknown keys and wrongly-typed values are ConfigErrors. Missing keys keep
/// their defaults.
TrainConfig config_from_json(const nlohmann::json& j);
nlohmann::ordered_json config_to_json(const TrainConfig& cfg);
TrainConfig load_config(const std::filesystem::path& path);

}  // namespace protolens
