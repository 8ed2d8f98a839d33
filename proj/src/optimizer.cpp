#include "protolens/optimizer.hpp"

#include <algorithm>
#include <cmath>

#include "protolens/errors.hpp"

namespace protolens {

void AdamWState::update(std::span<double> params, std::span<const double> grad, double lr, const AdamWOptions& opts) {
  if (params.size() != m_.size() || grad.size() != m_.size()) {
    throw InvalidParameter("AdamW: parameter/gradient size mismatch");
  }
  ++steps_;
  const double c1 = 1.0 - std::pow(opts.beta1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(opts.beta2, static_cast<double>(steps_));
  const double decay = 1.0 - lr * opts.weight_decay;
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = opts.beta1 * m_[i] + (1.0 - opts.beta1) * grad[i];
    v_[i] = opts.beta2 * v_[i] + (1.0 - opts.beta2) * grad[i] * grad[i];
    const double m_hat = m_[i] / c1;
    const double v_hat = v_[i] / c2;
    params[i] = params[i] * decay - lr * m_hat / (std::sqrt(v_hat) + opts.eps);
  }
}

void AdamWState::reset() {
  std::fill(m_.begin(), m_.end(), 0.0);
  std::fill(v_.begin(), v_.end(), 0.0);
  steps_ = 0;
}

ModelOptimizer::ModelOptimizer(const Model& model, AdamWOptions opts) : opts_(opts) {
  for_each_block(model, [&](const char* name, const auto& block) {
    names_.emplace_back(name);
    states_.emplace_back(static_cast<std::size_t>(block.size()));
  });
}

void ModelOptimizer::step(Model& model, const Model& grad, double lr) {
  std::vector<std::span<const double>> grads;
  for_each_block(grad, [&](const char*, const auto& block) {
    grads.emplace_back(block.data(), static_cast<std::size_t>(block.size()));
  });
  std::size_t b = 0;
  for_each_block(model, [&](const char*, auto& block) {
    states_[b].update(std::span<double>(block.data(), static_cast<std::size_t>(block.size())), grads[b], lr, opts_);
    ++b;
  });
}

void ModelOptimizer::reset_block(const std::string& name) {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) {
      states_[i].reset();
      return;
    }
  }
  throw InvalidParameter("optimizer: unknown block " + name);
}

const AdamWState& ModelOptimizer::state(const std::string& name) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return states_[i];
  }
  throw InvalidParameter("optimizer: unknown block " + name);
}

}  // namespace protolens
