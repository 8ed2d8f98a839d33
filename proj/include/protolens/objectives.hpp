#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "protolens/prototype_model.hpp"
#include "protolens/span_extractor.hpp"

namespace protolens {

struct LossConfig {
  double alpha = 0.1;       // GMM-loss weight
  double beta = 1e-3;       // diversity weight
  double lambda_l1 = 1e-3;  // sparsity on raw stick weights
  double eps_nll = 1e-8;
  bool diversity_sign_corrected = true;

  /// Throws ConfigError on negative weights or a non-positive eps_nll.
  void validate() const;
};

struct LossBreakdown {
  double ce = 0.0;
  double gmm = 0.0;  // includes the L1 term
  double l1 = 0.0;
  double div = 0.0;
  double total = 0.0;
};

struct LabeledText {
  PreparedText text;
  std::size_t label = 0;
};

/// Curve-height position weights: (s_t - min s) normalised to sum 1, uniform
/// for a constant curve.
Eigen::VectorXd position_weights(const Eigen::VectorXd& curve);

/// -sum_t w_t log(sum_m pi_norm_m N(t | mu_m, sigma_m) + eps), t = 1..T.
double nll_loss(const Eigen::VectorXd& curve, const MixtureParams& params, double eps_nll);

/// Mean NLL over (instance, prototype) pairs plus lambda * mean sum_m |pi_raw_m|.
/// Throws InvalidParameter on an empty batch or mismatched lengths.
double gmm_loss(std::span<const Eigen::VectorXd> curves, std::span<const MixtureParams> params, const LossConfig& cfg);

/// Sum over pairs i < j of cos(p_i, p_j) (sign-corrected) or 1 - cos(p_i, p_j)
/// (literal). Throws InvalidParameter when K < 2.
double diversity_loss(const Eigen::MatrixXd& prototypes, bool sign_corrected);

/// -log(max(p_label, 1e-12)).
double cross_entropy(std::size_t label, const Eigen::VectorXd& probabilities);

/// A zero-valued model with the same shapes, used as a gradient accumulator.
Model zeros_like(const Model& model);

/// ce (batch mean) + alpha * gmm + beta * div.
LossBreakdown total_loss(const Model& model, std::span<const LabeledText> batch, const LossConfig& cfg);

/// total_loss plus its exact gradient, accumulated into `grad` (shaped like model).
LossBreakdown loss_and_gradient(const Model& model, std::span<const LabeledText> batch, const LossConfig& cfg,
                                Model& grad);

struct GradCheckReport {
  std::map<std::string, double> max_rel_error;  // per parameter block
  std::vector<std::string> failed;              // blocks over tolerance
  double max_error = 0.0;
  std::string worst_block;
  double tolerance = 0.0;
  std::size_t checked = 0;

  bool passed() const { return failed.empty(); }
  nlohmann::ordered_json to_json() const;
};

using LossFn = std::function<double(const Model&)>;
using GradFn = std::function<Model(const Model&)>;

/// Central differences over every trainable scalar against `gradient`.
/// relative error = |a - f| / max(|a|, |f|, 1e-8).
GradCheckReport grad_check(const Model& model, const LossFn& loss, const GradFn& gradient, double step = 1e-5,
                           double tolerance = 1e-4);

GradCheckReport grad_check(const Model& model, std::span<const LabeledText> batch, const LossConfig& cfg,
                           double step = 1e-5, double tolerance = 1e-4);

}  // namespace protolens
