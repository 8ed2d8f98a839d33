#pragma once

#include <cstddef>
#include <optional>
#include <utility>

#include <Eigen/Dense>

namespace protolens {

class Rng;

/// Two-layer tanh MLP over the zero-padded similarity curve, followed by three
/// linear heads producing per-component mean, log-spread and stick logits.
struct MixtureHeadParams {
  std::size_t t_max = 0;
  std::size_t hidden = 0;
  std::size_t components = 0;  // M

  Eigen::MatrixXd w1;  // hidden x t_max
  Eigen::VectorXd b1;
  Eigen::MatrixXd w2;  // hidden x hidden
  Eigen::VectorXd b2;
  Eigen::MatrixXd w_mu;  // M x hidden
  Eigen::VectorXd b_mu;
  Eigen::MatrixXd w_sigma;
  Eigen::VectorXd b_sigma;
  Eigen::MatrixXd w_pi;
  Eigen::VectorXd b_pi;

  MixtureHeadParams() = default;
  /// All-zero parameters of the given shape.
  MixtureHeadParams(std::size_t t_max, std::size_t hidden, std::size_t components);

  /// Glorot-style uniform weights, zero biases.
  void init_random(Rng& rng);
};

struct MixtureParams {
  Eigen::VectorXd nu;       // stick fractions in (0, 1)
  Eigen::VectorXd pi_raw;   // nu_m * prod_{l<m} (1 - nu_l)
  Eigen::VectorXd pi_norm;  // pi_raw / sum(pi_raw)
  Eigen::VectorXd mu;       // in [0, T]
  Eigen::VectorXd sigma;    // > 0

  std::size_t size() const { return static_cast<std::size_t>(mu.size()); }
};

/// Pre-exp clamp on the spread head.
inline constexpr double kLogSigmaMin = -6.0;
inline constexpr double kLogSigmaMax = 3.0;

/// Intermediates of mixture_params kept for the backward pass.
struct MixtureTrace {
  std::size_t length = 0;  // T
  Eigen::VectorXd input;   // padded curve, t_max
  Eigen::VectorXd hidden1;  // tanh activations
  Eigen::VectorXd h;
  Eigen::VectorXd log_sigma;  // pre-clamp
  MixtureParams params;
};

/// Upstream gradients with respect to the mixture outputs.
struct MixtureGrad {
  Eigen::VectorXd mu;
  Eigen::VectorXd sigma;
  Eigen::VectorXd pi_raw;
  Eigen::VectorXd pi_norm;

  explicit MixtureGrad(std::size_t m)
      : mu(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m))),
        sigma(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m))),
        pi_raw(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m))),
        pi_norm(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m))) {}
};

std::pair<Eigen::VectorXd, Eigen::VectorXd> stick_break(const Eigen::VectorXd& nu);

/// Throws ConfigError when the curve is longer than heads.t_max.
MixtureTrace mixture_forward(const MixtureHeadParams& heads, const Eigen::VectorXd& curve);

MixtureParams mixture_params(const MixtureHeadParams& heads, const Eigen::VectorXd& curve);

/// Accumulates head gradients into `grad_heads` and returns dL/dcurve (length T).
Eigen::VectorXd mixture_backward(const MixtureHeadParams& heads, const MixtureTrace& trace, const MixtureGrad& upstream,
                                 MixtureHeadParams& grad_heads);

/// Throws InvalidParameter when sigma <= 0.
double gaussian_pdf(double x, double mu, double sigma);

/// Part positions are 1-based throughout: soft(t) is the mask at position t,
/// stored at index t - 1.
struct DiscreteSpan {
  std::size_t first = 0;  // 1-based, inclusive
  std::size_t last = 0;   // 1-based, inclusive

  bool operator==(const DiscreteSpan&) const = default;
};

struct SpanMask {
  Eigen::VectorXd soft;
  double anchor = 0.0;
  double spread = 0.0;
  double smoothness = 0.0;  // R
  std::optional<DiscreteSpan> discrete;
};

/// Trapezoid: clamp((R + sigma - |mu - t|) / R, 0, 1) at t = 1..T.
/// Throws InvalidParameter when R <= 0 or T == 0.
SpanMask span_mask(double mu, double sigma, double smoothness, std::size_t length);

/// Pointwise maximum of every component's trapezoid; anchor/spread report
/// the argmax-weight component.
SpanMask union_span_mask(const MixtureParams& params, double smoothness, std::size_t length);

/// Index of the largest raw weight, lowest index on ties.
std::size_t select_component_index(const MixtureParams& params);
std::pair<double, double> select_component(const MixtureParams& params);

/// Maximal run of positions with soft >= threshold that contains the part
/// nearest the anchor (or, failing that, the strongest part).
std::optional<DiscreteSpan> extract_discrete_span(const SpanMask& mask, double threshold = 0.5);

inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace protolens
