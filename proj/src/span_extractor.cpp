#include "protolens/span_extractor.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "protolens/errors.hpp"
#include "protolens/rng.hpp"

namespace protolens {
namespace {

using Eigen::Index;

Index idx(std::size_t i) { return static_cast<Index>(i); }

void glorot(Eigen::MatrixXd& w, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
  for (Index j = 0; j < w.cols(); ++j) {
    for (Index i = 0; i < w.rows(); ++i) w(i, j) = (2.0 * rng.uniform() - 1.0) * limit;
  }
}

}  // namespace

MixtureHeadParams::MixtureHeadParams(std::size_t t_max, std::size_t hidden, std::size_t components)
    : t_max(t_max),
      hidden(hidden),
      components(components),
      w1(Eigen::MatrixXd::Zero(idx(hidden), idx(t_max))),
      b1(Eigen::VectorXd::Zero(idx(hidden))),
      w2(Eigen::MatrixXd::Zero(idx(hidden), idx(hidden))),
      b2(Eigen::VectorXd::Zero(idx(hidden))),
      w_mu(Eigen::MatrixXd::Zero(idx(components), idx(hidden))),
      b_mu(Eigen::VectorXd::Zero(idx(components))),
      w_sigma(Eigen::MatrixXd::Zero(idx(components), idx(hidden))),
      b_sigma(Eigen::VectorXd::Zero(idx(components))),
      w_pi(Eigen::MatrixXd::Zero(idx(components), idx(hidden))),
      b_pi(Eigen::VectorXd::Zero(idx(components))) {}

void MixtureHeadParams::init_random(Rng& rng) {
  glorot(w1, rng);
  glorot(w2, rng);
  glorot(w_mu, rng);
  glorot(w_sigma, rng);
  glorot(w_pi, rng);
  b1.setZero();
  b2.setZero();
  b_mu.setZero();
  b_sigma.setZero();
  b_pi.setZero();
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> stick_break(const Eigen::VectorXd& nu) {
  const Index m = nu.size();
  Eigen::VectorXd raw(m);
  double remaining = 1.0;
  for (Index i = 0; i < m; ++i) {
    raw[i] = nu[i] * remaining;
    remaining *= 1.0 - nu[i];
  }
  const double total = raw.sum();
  Eigen::VectorXd norm = total > 0.0 ? Eigen::VectorXd(raw / total)
                                     : Eigen::VectorXd::Constant(m, 1.0 / static_cast<double>(m));
  return {std::move(raw), std::move(norm)};
}

MixtureTrace mixture_forward(const MixtureHeadParams& heads, const Eigen::VectorXd& curve) {
  const auto length = static_cast<std::size_t>(curve.size());
  if (length > heads.t_max) {
    throw ConfigError("similarity curve of length " + std::to_string(length) + " exceeds T_max = " +
                      std::to_string(heads.t_max));
  }
  MixtureTrace tr;
  tr.length = length;
  tr.input = Eigen::VectorXd::Zero(idx(heads.t_max));
  tr.input.head(curve.size()) = curve;

  const Index t = curve.size();
  tr.hidden1 = (heads.w1.leftCols(t) * curve + heads.b1).array().tanh().matrix();
  tr.h = heads.w2 * tr.hidden1 + heads.b2;

  const double scale = static_cast<double>(length);
  const Eigen::VectorXd z_mu = heads.w_mu * tr.h + heads.b_mu;
  tr.log_sigma = heads.w_sigma * tr.h + heads.b_sigma;
  const Eigen::VectorXd z_pi = heads.w_pi * tr.h + heads.b_pi;

  const Index m = idx(heads.components);
  auto& p = tr.params;
  p.mu.resize(m);
  p.sigma.resize(m);
  p.nu.resize(m);
  for (Index i = 0; i < m; ++i) {
    p.mu[i] = sigmoid(z_mu[i]) * scale;
    p.sigma[i] = std::exp(std::clamp(tr.log_sigma[i], kLogSigmaMin, kLogSigmaMax));
    p.nu[i] = sigmoid(z_pi[i]);
  }
  std::tie(p.pi_raw, p.pi_norm) = stick_break(p.nu);
  return tr;
}

MixtureParams mixture_params(const MixtureHeadParams& heads, const Eigen::VectorXd& curve) {
  return mixture_forward(heads, curve).params;
}

Eigen::VectorXd mixture_backward(const MixtureHeadParams& heads, const MixtureTrace& trace, const MixtureGrad& upstream,
                                 MixtureHeadParams& grad_heads) {
  const auto& p = trace.params;
  const Index m = p.nu.size();

  // pi_norm = pi_raw / S
  Eigen::VectorXd g_raw = upstream.pi_raw;
  const double total = p.pi_raw.sum();
  if (total > 0.0) {
    const double dot = upstream.pi_norm.dot(p.pi_norm);
    g_raw += ((upstream.pi_norm.array() - dot) / total).matrix();
  }

  // pi_m = nu_m * prod_{l<m} (1 - nu_l); products recomputed to avoid dividing by (1 - nu).
  Eigen::VectorXd g_nu = Eigen::VectorXd::Zero(m);
  for (Index j = 0; j < m; ++j) {
    double prefix = 1.0;
    for (Index l = 0; l < j; ++l) prefix *= 1.0 - p.nu[l];
    double acc = g_raw[j] * prefix;
    for (Index k = j + 1; k < m; ++k) {
      double prod = p.nu[k];
      for (Index l = 0; l < k; ++l) {
        if (l != j) prod *= 1.0 - p.nu[l];
      }
      acc -= g_raw[k] * prod;
    }
    g_nu[j] = acc;
  }

  const double scale = static_cast<double>(trace.length);
  Eigen::VectorXd dz_mu(m), dz_sigma(m), dz_pi(m);
  for (Index i = 0; i < m; ++i) {
    const double s = scale > 0.0 ? p.mu[i] / scale : 0.0;
    dz_mu[i] = upstream.mu[i] * scale * s * (1.0 - s);
    const bool inside = trace.log_sigma[i] > kLogSigmaMin && trace.log_sigma[i] < kLogSigmaMax;
    dz_sigma[i] = inside ? upstream.sigma[i] * p.sigma[i] : 0.0;
    dz_pi[i] = g_nu[i] * p.nu[i] * (1.0 - p.nu[i]);
  }

  grad_heads.w_mu.noalias() += dz_mu * trace.h.transpose();
  grad_heads.b_mu += dz_mu;
  grad_heads.w_sigma.noalias() += dz_sigma * trace.h.transpose();
  grad_heads.b_sigma += dz_sigma;
  grad_heads.w_pi.noalias() += dz_pi * trace.h.transpose();
  grad_heads.b_pi += dz_pi;

  const Eigen::VectorXd dh =
      heads.w_mu.transpose() * dz_mu + heads.w_sigma.transpose() * dz_sigma + heads.w_pi.transpose() * dz_pi;
  grad_heads.w2.noalias() += dh * trace.hidden1.transpose();
  grad_heads.b2 += dh;

  const Eigen::VectorXd dz1 =
      ((heads.w2.transpose() * dh).array() * (1.0 - trace.hidden1.array().square())).matrix();
  const Index t = idx(trace.length);
  grad_heads.w1.leftCols(t).noalias() += dz1 * trace.input.head(t).transpose();
  grad_heads.b1 += dz1;
  return heads.w1.leftCols(t).transpose() * dz1;
}

double gaussian_pdf(double x, double mu, double sigma) {
  if (!(sigma > 0.0)) throw InvalidParameter("gaussian_pdf: sigma must be positive");
  const double z = (x - mu) / sigma;
  return std::exp(-0.5 * z * z) / (sigma * std::sqrt(2.0 * std::numbers::pi));
}

SpanMask span_mask(double mu, double sigma, double smoothness, std::size_t length) {
  if (!(smoothness > 0.0)) throw InvalidParameter("span_mask: R must be positive");
  if (length == 0) throw InvalidParameter("span_mask: T must be >= 1");
  SpanMask mask;
  mask.anchor = mu;
  mask.spread = sigma;
  mask.smoothness = smoothness;
  mask.soft.resize(idx(length));
  for (std::size_t t = 1; t <= length; ++t) {
    const double v = (smoothness + sigma - std::abs(mu - static_cast<double>(t))) / smoothness;
    mask.soft[idx(t - 1)] = std::min(std::max(v, 0.0), 1.0);
  }
  return mask;
}

std::size_t select_component_index(const MixtureParams& params) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < params.size(); ++i) {
    if (params.pi_raw[idx(i)] > params.pi_raw[idx(best)]) best = i;
  }
  return best;
}

std::pair<double, double> select_component(const MixtureParams& params) {
  const std::size_t m = select_component_index(params);
  return {params.mu[idx(m)], params.sigma[idx(m)]};
}

SpanMask union_span_mask(const MixtureParams& params, double smoothness, std::size_t length) {
  const std::size_t best = select_component_index(params);
  SpanMask out = span_mask(params.mu[idx(best)], params.sigma[idx(best)], smoothness, length);
  for (std::size_t m = 0; m < params.size(); ++m) {
    if (m == best) continue;
    const SpanMask other = span_mask(params.mu[idx(m)], params.sigma[idx(m)], smoothness, length);
    out.soft = out.soft.cwiseMax(other.soft);
  }
  return out;
}

std::optional<DiscreteSpan> extract_discrete_span(const SpanMask& mask, double threshold) {
  const auto length = static_cast<std::size_t>(mask.soft.size());
  if (length == 0) return std::nullopt;
  auto clears = [&](std::size_t t) { return mask.soft[idx(t - 1)] >= threshold; };

  const double nearest = std::round(std::clamp(mask.anchor, 1.0, static_cast<double>(length)));
  std::size_t seed = static_cast<std::size_t>(nearest);
  if (!clears(seed)) {
    Index strongest = 0;
    mask.soft.maxCoeff(&strongest);
    seed = static_cast<std::size_t>(strongest) + 1;
    if (!clears(seed)) return std::nullopt;
  }
  std::size_t first = seed;
  std::size_t last = seed;
  while (first > 1 && clears(first - 1)) --first;
  while (last < length && clears(last + 1)) ++last;
  return DiscreteSpan{first, last};
}

}  // namespace protolens
