#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "protolens/prototype_model.hpp"

namespace protolens {

struct AdamWOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

/// Moment state for one contiguous parameter block.
class AdamWState {
 public:
  AdamWState() = default;
  explicit AdamWState(std::size_t size) : m_(size, 0.0), v_(size, 0.0) {}

  /// Decoupled decay, then the bias-corrected adaptive step:
  ///   theta <- theta (1 - lr wd) - lr m_hat / (sqrt(v_hat) + eps)
  void update(std::span<double> params, std::span<const double> grad, double lr, const AdamWOptions& opts);

  void reset();
  std::size_t steps() const { return steps_; }

 private:
  std::vector<double> m_;
  std::vector<double> v_;
  std::size_t steps_ = 0;
};

/// One AdamWState per block of a Model, in for_each_block order.
class ModelOptimizer {
 public:
  ModelOptimizer(const Model& model, AdamWOptions opts);

  void step(Model& model, const Model& grad, double lr);
  /// Clears moments and step count of the named block.
  void reset_block(const std::string& name);
  const AdamWState& state(const std::string& name) const;

 private:
  AdamWOptions opts_;
  std::vector<std::string> names_;
  std::vector<AdamWState> states_;
};

}  // namespace protolens
