#include "protolens/config.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include "protolens/errors.hpp"

namespace protolens {
namespace {

using nlohmann::json;

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (!allowed.contains(key)) throw ConfigError(where + ": unknown key \"" + key + "\"");
  }
}

template <typename T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  const json& v = j.at(key);
  try {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError(where + "." + key + ": expected a boolean");
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_unsigned()) throw ConfigError(where + "." + key + ": expected a non-negative integer");
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw ConfigError(where + "." + key + ": expected a number");
    } else {
      if (!v.is_string()) throw ConfigError(where + "." + key + ": expected a string");
    }
    out = v.get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

}  // namespace

void TrainConfig::validate() const {
  dims(2).validate();
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (lr_decay_every == 0) throw ConfigError("lr_decay_every must be positive");
  if (!(lr_decay_factor > 0.0)) throw ConfigError("lr_decay_factor must be positive");
  if (weight_decay < 0.0) throw ConfigError("weight_decay must be >= 0");
  if (!(init_scale > 0.0) || head_init_scale < 0.0) throw ConfigError("init scales must be positive");
  if (!(span_init_sigma > 0.0)) throw ConfigError("span_init_sigma must be positive");
  alignment.validate();
  loss.validate();
}

ModelDims TrainConfig::dims(std::size_t classes) const {
  ModelDims out;
  out.prototypes = K;
  out.classes = classes;
  out.embed_dim = d;
  out.hash_dim = hash_dim;
  out.components = M;
  out.hidden = hidden;
  out.t_max = T_max;
  out.n_gram = n_gram;
  out.smoothness = R;
  out.union_mask = union_mask;
  return out;
}

double TrainConfig::learning_rate_after(std::size_t completed) const {
  return learning_rate * std::pow(lr_decay_factor, static_cast<double>(completed / lr_decay_every));
}

double TrainConfig::learning_rate_for_epoch(std::size_t epoch) const {
  return learning_rate_after(epoch == 0 ? 0 : epoch - 1);
}

TrainConfig config_from_json(const json& j) {
  check_keys(j, {"K", "M", "n_gram", "d", "hash_dim", "T_max", "R", "hidden", "union_mask", "batch_size", "epochs",
                 "learning_rate", "lr_decay_every", "lr_decay_factor", "weight_decay", "seed", "init_scale",
                 "head_init_scale", "span_init_sigma", "embedding_cache", "alignment", "loss", "ablations"},
             "config");
  TrainConfig c;
  read(j, "K", c.K, "config");
  read(j, "M", c.M, "config");
  read(j, "n_gram", c.n_gram, "config");
  read(j, "d", c.d, "config");
  read(j, "hash_dim", c.hash_dim, "config");
  read(j, "T_max", c.T_max, "config");
  read(j, "R", c.R, "config");
  read(j, "hidden", c.hidden, "config");
  read(j, "union_mask", c.union_mask, "config");
  read(j, "batch_size", c.batch_size, "config");
  read(j, "epochs", c.epochs, "config");
  read(j, "learning_rate", c.learning_rate, "config");
  read(j, "lr_decay_every", c.lr_decay_every, "config");
  read(j, "lr_decay_factor", c.lr_decay_factor, "config");
  read(j, "weight_decay", c.weight_decay, "config");
  read(j, "seed", c.seed, "config");
  read(j, "init_scale", c.init_scale, "config");
  read(j, "head_init_scale", c.head_init_scale, "config");
  read(j, "span_init_sigma", c.span_init_sigma, "config");
  read(j, "embedding_cache", c.embedding_cache, "config");

  if (j.contains("alignment")) {
    const json& a = j.at("alignment");
    check_keys(a, {"tau", "gamma", "eps", "top_candidates", "period_epochs", "warmup_epochs", "clusters",
                   "per_cluster_top", "kmeans_iters"},
               "config.alignment");
    read(a, "tau", c.alignment.tau, "config.alignment");
    read(a, "gamma", c.alignment.gamma, "config.alignment");
    read(a, "eps", c.alignment.eps, "config.alignment");
    read(a, "top_candidates", c.alignment.top_candidates, "config.alignment");
    read(a, "period_epochs", c.alignment.period_epochs, "config.alignment");
    read(a, "warmup_epochs", c.alignment.warmup_epochs, "config.alignment");
    read(a, "clusters", c.alignment.clusters, "config.alignment");
    read(a, "per_cluster_top", c.alignment.per_cluster_top, "config.alignment");
    read(a, "kmeans_iters", c.alignment.kmeans_iters, "config.alignment");
  }
  if (j.contains("loss")) {
    const json& l = j.at("loss");
    check_keys(l, {"alpha", "beta", "lambda_l1", "eps_nll", "diversity_sign_corrected"}, "config.loss");
    read(l, "alpha", c.loss.alpha, "config.loss");
    read(l, "beta", c.loss.beta, "config.loss");
    read(l, "lambda_l1", c.loss.lambda_l1, "config.loss");
    read(l, "eps_nll", c.loss.eps_nll, "config.loss");
    read(l, "diversity_sign_corrected", c.loss.diversity_sign_corrected, "config.loss");
  }
  if (j.contains("ablations")) {
    const json& a = j.at("ablations");
    check_keys(a, {"no_diversity", "no_alignment"}, "config.ablations");
    read(a, "no_diversity", c.ablations.no_diversity, "config.ablations");
    read(a, "no_alignment", c.ablations.no_alignment, "config.ablations");
  }
  c.validate();
  return c;
}

nlohmann::ordered_json config_to_json(const TrainConfig& c) {
  nlohmann::ordered_json j;
  j["K"] = c.K;
  j["M"] = c.M;
  j["n_gram"] = c.n_gram;
  j["d"] = c.d;
  j["hash_dim"] = c.hash_dim;
  j["T_max"] = c.T_max;
  j["R"] = c.R;
  j["hidden"] = c.hidden;
  j["union_mask"] = c.union_mask;
  j["batch_size"] = c.batch_size;
  j["epochs"] = c.epochs;
  j["learning_rate"] = c.learning_rate;
  j["lr_decay_every"] = c.lr_decay_every;
  j["lr_decay_factor"] = c.lr_decay_factor;
  j["weight_decay"] = c.weight_decay;
  j["seed"] = c.seed;
  j["init_scale"] = c.init_scale;
  j["head_init_scale"] = c.head_init_scale;
  j["span_init_sigma"] = c.span_init_sigma;
  j["embedding_cache"] = c.embedding_cache;
  j["alignment"] = {{"tau", c.alignment.tau},
                    {"gamma", c.alignment.gamma},
                    {"eps", c.alignment.eps},
                    {"top_candidates", c.alignment.top_candidates},
                    {"period_epochs", c.alignment.period_epochs},
                    {"warmup_epochs", c.alignment.warmup_epochs},
                    {"clusters", c.alignment.clusters},
                    {"per_cluster_top", c.alignment.per_cluster_top},
                    {"kmeans_iters", c.alignment.kmeans_iters}};
  j["loss"] = {{"alpha", c.loss.alpha},
               {"beta", c.loss.beta},
               {"lambda_l1", c.loss.lambda_l1},
               {"eps_nll", c.loss.eps_nll},
               {"diversity_sign_corrected", c.loss.diversity_sign_corrected}};
  j["ablations"] = {{"no_diversity", c.ablations.no_diversity}, {"no_alignment", c.ablations.no_alignment}};
  return j;
}

TrainConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

}  // namespace protolens
