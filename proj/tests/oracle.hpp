#pragma once

// Straight-line recomputation of the forward pass and the training loss with
// plain loops over std::vector. Shares nothing with the library beyond reading
// parameter values and splitting text into tokens.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "protolens/objectives.hpp"
#include "protolens/prototype_model.hpp"
#include "protolens/text.hpp"

namespace protolens::oracle {

using Vec = std::vector<double>;
using Mat = std::vector<Vec>;

inline Mat to_mat(const Eigen::MatrixXd& m) {
  Mat out(static_cast<std::size_t>(m.rows()), Vec(static_cast<std::size_t>(m.cols())));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) out[i][j] = m(i, j);
  return out;
}

inline Vec to_vec(const Eigen::VectorXd& v) { return Vec(v.data(), v.data() + v.size()); }

inline std::uint64_t hash(const std::string& s) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline double dot(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double cos_sim(const Vec& a, const Vec& b) {
  const double na = std::sqrt(dot(a, a));
  const double nb = std::sqrt(dot(b, b));
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot(a, b) / (na * nb + 1e-8);
}

inline Vec affine(const Mat& w, const Vec& x, const Vec& b) {
  Vec out(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    double s = b[i];
    for (std::size_t j = 0; j < x.size(); ++j) s += w[i][j] * x[j];
    out[i] = s;
  }
  return out;
}

inline double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline double normal_pdf(double x, double mu, double sigma) {
  const double pi = 3.14159265358979323846;
  return std::exp(-(x - mu) * (x - mu) / (2.0 * sigma * sigma)) / (sigma * std::sqrt(2.0 * pi));
}

struct Mixture {
  Vec nu, pi_raw, pi_norm, mu, sigma;
};

struct PrototypeResult {
  Vec curve;
  Mixture mix;
  Vec mask;
  double raw = 0.0;
};

struct Result {
  std::vector<PrototypeResult> protos;
  Vec raw, normalized, probabilities;
};

inline Result forward(const Model& model, const std::string& text) {
  const ModelDims& d = model.dims;
  const Mat proj = to_mat(model.encoder.projection);
  const Vec proj_b = to_vec(model.encoder.projection_bias);
  const Mat protos = to_mat(model.bank.prototypes);
  const Mat w1 = to_mat(model.heads.w1), w2 = to_mat(model.heads.w2);
  const Mat w_mu = to_mat(model.heads.w_mu), w_sigma = to_mat(model.heads.w_sigma), w_pi = to_mat(model.heads.w_pi);
  const Vec b1 = to_vec(model.heads.b1), b2 = to_vec(model.heads.b2);
  const Vec b_mu = to_vec(model.heads.b_mu), b_sigma = to_vec(model.heads.b_sigma), b_pi = to_vec(model.heads.b_pi);

  // Parts and their embeddings.
  const Tokens toks = tokenize(text);
  const std::size_t n = d.n_gram;
  const std::size_t T = toks.size() < n ? 1 : toks.size() - n + 1;
  const std::size_t width = std::min(n, toks.size());
  Mat parts(T);
  for (std::size_t t = 0; t < T; ++t) {
    Vec bag(d.hash_dim, 0.0);
    for (std::size_t i = t; i < t + width; ++i) bag[hash(toks[i]) % d.hash_dim] += 1.0 / static_cast<double>(width);
    parts[t] = affine(proj, bag, proj_b);
  }

  Result r;
  for (std::size_t k = 0; k < d.prototypes; ++k) {
    PrototypeResult pr;
    for (std::size_t t = 0; t < T; ++t) pr.curve.push_back(cos_sim(parts[t], protos[k]));

    Vec x(d.t_max, 0.0);
    std::copy(pr.curve.begin(), pr.curve.end(), x.begin());
    Vec h1 = affine(w1, x, b1);
    for (double& v : h1) v = std::tanh(v);
    const Vec h = affine(w2, h1, b2);
    const Vec zm = affine(w_mu, h, b_mu), zs = affine(w_sigma, h, b_sigma), zp = affine(w_pi, h, b_pi);
    double rest = 1.0, total = 0.0;
    for (std::size_t m = 0; m < d.components; ++m) {
      pr.mix.mu.push_back(logistic(zm[m]) * static_cast<double>(T));
      pr.mix.sigma.push_back(std::exp(std::min(3.0, std::max(-6.0, zs[m]))));
      pr.mix.nu.push_back(logistic(zp[m]));
      pr.mix.pi_raw.push_back(pr.mix.nu[m] * rest);
      rest *= 1.0 - pr.mix.nu[m];
      total += pr.mix.pi_raw[m];
    }
    for (double p : pr.mix.pi_raw) pr.mix.pi_norm.push_back(p / total);

    std::size_t best = 0;
    for (std::size_t m = 1; m < d.components; ++m)
      if (pr.mix.pi_raw[m] > pr.mix.pi_raw[best]) best = m;
    const double R = d.smoothness;
    for (std::size_t t = 1; t <= T; ++t) {
      auto trapezoid = [&](std::size_t m) {
        const double v = (R + pr.mix.sigma[m] - std::abs(pr.mix.mu[m] - static_cast<double>(t))) / R;
        return std::min(1.0, std::max(0.0, v));
      };
      double v = trapezoid(best);
      if (d.union_mask)
        for (std::size_t m = 0; m < d.components; ++m) v = std::max(v, trapezoid(m));
      pr.mask.push_back(v);
    }

    Vec z(d.embed_dim, 0.0);
    double mass = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
      mass += pr.mask[t];
      for (std::size_t j = 0; j < d.embed_dim; ++j) z[j] += pr.mask[t] * parts[t][j];
    }
    for (double& v : z) v /= mass + 1e-8;
    pr.raw = cos_sim(z, protos[k]);
    r.raw.push_back(pr.raw);
    r.protos.push_back(std::move(pr));
  }

  double ms = 0.0;
  for (double v : r.raw) ms += v * v;
  ms /= static_cast<double>(r.raw.size());
  for (std::size_t k = 0; k < r.raw.size(); ++k)
    r.normalized.push_back(model.bank.rms_gain[static_cast<Eigen::Index>(k)] * r.raw[k] / std::sqrt(ms + 1e-6));

  const Vec logits = affine(to_mat(model.bank.head_weights), r.normalized, to_vec(model.bank.head_bias));
  const double top = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double l : logits) z += std::exp(l - top);
  for (double l : logits) r.probabilities.push_back(std::exp(l - top) / z);
  return r;
}

inline double nll(const PrototypeResult& pr, double eps) {
  const std::size_t T = pr.curve.size();
  const double lo = *std::min_element(pr.curve.begin(), pr.curve.end());
  double mass = 0.0;
  for (double s : pr.curve) mass += s - lo;
  double loss = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    const double w = mass > 0.0 ? (pr.curve[t] - lo) / mass : 1.0 / static_cast<double>(T);
    double density = 0.0;
    for (std::size_t m = 0; m < pr.mix.mu.size(); ++m)
      density += pr.mix.pi_norm[m] * normal_pdf(static_cast<double>(t + 1), pr.mix.mu[m], pr.mix.sigma[m]);
    loss -= w * std::log(density + eps);
  }
  return loss;
}

inline LossBreakdown total_loss(const Model& model, const std::vector<std::pair<std::string, std::size_t>>& batch,
                                const LossConfig& cfg) {
  LossBreakdown out;
  double nll_sum = 0.0, l1_sum = 0.0;
  std::size_t pairs = 0;
  for (const auto& [text, label] : batch) {
    const Result r = forward(model, text);
    out.ce += -std::log(std::max(r.probabilities[label], 1e-12));
    for (const auto& pr : r.protos) {
      nll_sum += nll(pr, cfg.eps_nll);
      for (double p : pr.mix.pi_raw) l1_sum += std::abs(p);
      ++pairs;
    }
  }
  out.ce /= static_cast<double>(batch.size());
  out.l1 = cfg.lambda_l1 * l1_sum / static_cast<double>(pairs);
  out.gmm = nll_sum / static_cast<double>(pairs) + out.l1;

  const Mat protos = to_mat(model.bank.prototypes);
  for (std::size_t i = 0; i < protos.size(); ++i)
    for (std::size_t j = i + 1; j < protos.size(); ++j) {
      const double c = cos_sim(protos[i], protos[j]);
      out.div += cfg.diversity_sign_corrected ? c : 1.0 - c;
    }
  out.total = out.ce + cfg.alpha * out.gmm + cfg.beta * out.div;
  return out;
}

}  // namespace protolens::oracle
