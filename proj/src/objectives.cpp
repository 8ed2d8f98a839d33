#include "protolens/objectives.hpp"

#include <algorithm>
#include <cmath>

#include "protolens/errors.hpp"

namespace protolens {
namespace {

using Eigen::Index;

Index idx(std::size_t i) { return static_cast<Index>(i); }

constexpr double kProbFloor = 1e-12;

struct NllTerms {
  Eigen::VectorXd weights;  // w_t
  Eigen::MatrixXd density;  // T x M, N(t | mu_m, sigma_m)
  Eigen::VectorXd mixture;  // f_t
  double loss = 0.0;
};

NllTerms nll_terms(const Eigen::VectorXd& curve, const MixtureParams& params, double eps_nll) {
  NllTerms out;
  const Index length = curve.size();
  const Index m = static_cast<Index>(params.size());
  out.weights = position_weights(curve);
  out.density.resize(length, m);
  out.mixture = Eigen::VectorXd::Zero(length);
  for (Index t = 0; t < length; ++t) {
    const double pos = static_cast<double>(t + 1);
    for (Index j = 0; j < m; ++j) {
      out.density(t, j) = gaussian_pdf(pos, params.mu[j], params.sigma[j]);
      out.mixture[t] += params.pi_norm[j] * out.density(t, j);
    }
    out.loss -= out.weights[t] * std::log(out.mixture[t] + eps_nll);
  }
  return out;
}

// Backward of scale * nll_loss into the curve and the mixture outputs.
void nll_backward(const Eigen::VectorXd& curve, const MixtureParams& params, const NllTerms& terms, double eps_nll,
                  double scale, Eigen::VectorXd& dcurve, MixtureGrad& dmix) {
  const Index length = curve.size();
  const Index m = static_cast<Index>(params.size());
  Eigen::VectorXd dw(length);
  for (Index t = 0; t < length; ++t) {
    const double pos = static_cast<double>(t + 1);
    const double denom = terms.mixture[t] + eps_nll;
    dw[t] = -scale * std::log(denom);
    const double df = -scale * terms.weights[t] / denom;
    if (df == 0.0) continue;
    for (Index j = 0; j < m; ++j) {
      const double n = terms.density(t, j);
      const double sigma = params.sigma[j];
      const double diff = pos - params.mu[j];
      dmix.pi_norm[j] += df * n;
      const double a = df * params.pi_norm[j] * n;
      dmix.mu[j] += a * diff / (sigma * sigma);
      dmix.sigma[j] += a * (diff * diff / (sigma * sigma * sigma) - 1.0 / sigma);
    }
  }

  Index lo = 0;
  const double min_s = curve.minCoeff(&lo);
  // minCoeff may pick any minimal index; pin the lowest one.
  for (Index t = 0; t < length; ++t) {
    if (curve[t] == min_s) {
      lo = t;
      break;
    }
  }
  const double total = (curve.array() - min_s).sum();
  if (!(total > 0.0)) return;  // uniform weights carry no curve gradient
  const double mean_dw = dw.dot(terms.weights);
  double sum_dv = 0.0;
  for (Index j = 0; j < length; ++j) {
    const double dv = (dw[j] - mean_dw) / total;
    dcurve[j] += dv;
    sum_dv += dv;
  }
  dcurve[lo] -= sum_dv;
}

}  // namespace

void LossConfig::validate() const {
  if (alpha < 0.0 || beta < 0.0 || lambda_l1 < 0.0) throw ConfigError("loss: alpha, beta, lambda_l1 must be >= 0");
  if (!(eps_nll > 0.0)) throw ConfigError("loss: eps_nll must be positive");
}

Eigen::VectorXd position_weights(const Eigen::VectorXd& curve) {
  const Index length = curve.size();
  const double min_s = curve.minCoeff();
  Eigen::VectorXd shifted = (curve.array() - min_s).matrix();
  const double total = shifted.sum();
  if (!(total > 0.0)) return Eigen::VectorXd::Constant(length, 1.0 / static_cast<double>(length));
  return shifted / total;
}

double nll_loss(const Eigen::VectorXd& curve, const MixtureParams& params, double eps_nll) {
  return nll_terms(curve, params, eps_nll).loss;
}

double gmm_loss(std::span<const Eigen::VectorXd> curves, std::span<const MixtureParams> params, const LossConfig& cfg) {
  if (curves.empty()) throw InvalidParameter("gmm_loss: empty batch");
  if (curves.size() != params.size()) throw InvalidParameter("gmm_loss: curves and params differ in length");
  double nll = 0.0;
  double l1 = 0.0;
  for (std::size_t i = 0; i < curves.size(); ++i) {
    nll += nll_loss(curves[i], params[i], cfg.eps_nll);
    l1 += params[i].pi_raw.cwiseAbs().sum();
  }
  const auto n = static_cast<double>(curves.size());
  return nll / n + cfg.lambda_l1 * l1 / n;
}

double diversity_loss(const Eigen::MatrixXd& prototypes, bool sign_corrected) {
  const Index k = prototypes.rows();
  if (k < 2) throw InvalidParameter("diversity_loss: need at least two prototypes");
  double sum = 0.0;
  for (Index i = 0; i < k; ++i) {
    for (Index j = i + 1; j < k; ++j) {
      const double c = cosine(prototypes.row(i).transpose(), prototypes.row(j).transpose());
      sum += sign_corrected ? c : 1.0 - c;
    }
  }
  return sum;
}

double cross_entropy(std::size_t label, const Eigen::VectorXd& probabilities) {
  return -std::log(std::max(probabilities[idx(label)], kProbFloor));
}

Model zeros_like(const Model& model) {
  Model out = model;
  for_each_block(out, [](const char*, auto& block) { block.setZero(); });
  out.alignment.clear();
  return out;
}

namespace {

LossBreakdown evaluate(const Model& model, std::span<const LabeledText> batch, const LossConfig& cfg, Model* grad) {
  if (batch.empty()) throw InvalidParameter("loss: empty batch");
  const auto& dims = model.dims;
  const std::size_t k_count = dims.prototypes;
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  const double inv_pairs = inv_b / static_cast<double>(k_count);
  const double r = dims.smoothness;

  LossBreakdown lb;
  double nll_sum = 0.0;
  double l1_sum = 0.0;

  for (const auto& ex : batch) {
    const ForwardResult fw = forward(model, ex.text);
    const double ce = cross_entropy(ex.label, fw.probabilities);
    lb.ce += ce * inv_b;

    std::vector<NllTerms> nll(k_count);
    for (std::size_t k = 0; k < k_count; ++k) {
      const auto& pt = fw.prototypes[k];
      nll[k] = nll_terms(pt.curve, pt.mixture.params, cfg.eps_nll);
      nll_sum += nll[k].loss;
      l1_sum += pt.mixture.params.pi_raw.cwiseAbs().sum();
    }
    if (grad == nullptr) continue;

    // Logistic head.
    Eigen::VectorXd dlogits = fw.probabilities;
    if (fw.probabilities[idx(ex.label)] >= kProbFloor) {
      dlogits[idx(ex.label)] -= 1.0;
      dlogits *= inv_b;
    } else {
      dlogits.setZero();
    }
    grad->bank.head_weights.noalias() += dlogits * fw.normalized.transpose();
    grad->bank.head_bias += dlogits;
    const Eigen::VectorXd dnorm = model.bank.head_weights.transpose() * dlogits;

    // RMSNorm across the K raw similarities.
    const Eigen::VectorXd& raw = fw.raw;
    const Eigen::VectorXd& gain = model.bank.rms_gain;
    const double kd = static_cast<double>(k_count);
    const double rms = std::sqrt(raw.squaredNorm() / kd + kRmsEps);
    grad->bank.rms_gain += (dnorm.array() * raw.array() / rms).matrix();
    const double coupling = (dnorm.array() * gain.array() * raw.array()).sum() / (rms * rms * rms * kd);
    const Eigen::VectorXd draw = (dnorm.array() * gain.array() / rms - coupling * raw.array()).matrix();

    const Index length = fw.part_embeddings.rows();
    Eigen::MatrixXd dparts = Eigen::MatrixXd::Zero(length, fw.part_embeddings.cols());

    for (std::size_t k = 0; k < k_count; ++k) {
      const auto& pt = fw.prototypes[k];
      const auto& mp = pt.mixture.params;
      const Eigen::VectorXd proto = model.bank.prototypes.row(idx(k)).transpose();
      Eigen::VectorXd dproto = Eigen::VectorXd::Zero(proto.size());

      // raw_k = cos(Z_k, p_k)
      Eigen::VectorXd dz = Eigen::VectorXd::Zero(proto.size());
      cosine_backward(pt.refined, proto, draw[idx(k)], dz, dproto);

      // Z = sum m_t e_t / (sum m_t + eps)
      const Eigen::VectorXd& soft = pt.mask.soft;
      const double mass = soft.sum() + kMaskEps;
      Eigen::VectorXd dmask(length);
      for (Index t = 0; t < length; ++t) {
        dmask[t] = dz.dot(fw.part_embeddings.row(t).transpose() - pt.refined) / mass;
        dparts.row(t) += (soft[t] / mass) * dz.transpose();
      }

      // Trapezoid mask -> (mu, sigma) of the component owning each position.
      MixtureGrad dmix(mp.size());
      for (Index t = 0; t < length; ++t) {
        const double pos = static_cast<double>(t + 1);
        std::size_t owner = pt.component;
        double q = (r + mp.sigma[idx(owner)] - std::abs(mp.mu[idx(owner)] - pos)) / r;
        if (dims.union_mask) {
          double best = std::clamp(q, 0.0, 1.0);
          for (std::size_t m = 0; m < mp.size(); ++m) {
            const double qm = (r + mp.sigma[idx(m)] - std::abs(mp.mu[idx(m)] - pos)) / r;
            if (std::clamp(qm, 0.0, 1.0) > best) {
              best = std::clamp(qm, 0.0, 1.0);
              owner = m;
              q = qm;
            }
          }
        }
        if (q <= 0.0 || q >= 1.0) continue;
        const double diff = mp.mu[idx(owner)] - pos;
        const double sign = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
        dmix.sigma[idx(owner)] += dmask[t] / r;
        dmix.mu[idx(owner)] -= dmask[t] * sign / r;
      }

      // GMM loss: alpha * (mean NLL + lambda * mean L1).
      Eigen::VectorXd dcurve = Eigen::VectorXd::Zero(length);
      if (cfg.alpha != 0.0) {
        nll_backward(pt.curve, mp, nll[k], cfg.eps_nll, cfg.alpha * inv_pairs, dcurve, dmix);
        for (std::size_t m = 0; m < mp.size(); ++m) {
          const double v = mp.pi_raw[idx(m)];
          const double sign = v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0);
          dmix.pi_raw[idx(m)] += cfg.alpha * cfg.lambda_l1 * inv_pairs * sign;
        }
      }

      dcurve += mixture_backward(model.heads, pt.mixture, dmix, grad->heads);

      // s_t = cos(e_t, p_k)
      for (Index t = 0; t < length; ++t) {
        if (dcurve[t] == 0.0) continue;
        Eigen::VectorXd de = Eigen::VectorXd::Zero(proto.size());
        cosine_backward(fw.part_embeddings.row(t).transpose(), proto, dcurve[t], de, dproto);
        dparts.row(t) += de.transpose();
      }
      grad->bank.prototypes.row(idx(k)) += dproto.transpose();
    }

    // e_t = P x_t + b (zero for an empty part).
    for (Index t = 0; t < length; ++t) {
      const auto& feats = ex.text.features[static_cast<std::size_t>(t)];
      if (feats.empty()) continue;
      grad->encoder.projection_bias += dparts.row(t).transpose();
      for (const auto& [bucket, weight] : feats) {
        grad->encoder.projection.col(idx(bucket)) += weight * dparts.row(t).transpose();
      }
    }
  }

  lb.l1 = cfg.lambda_l1 * l1_sum * inv_pairs;
  lb.gmm = nll_sum * inv_pairs + lb.l1;
  lb.div = cfg.beta != 0.0 ? diversity_loss(model.bank.prototypes, cfg.diversity_sign_corrected) : 0.0;
  lb.total = lb.ce + cfg.alpha * lb.gmm + cfg.beta * lb.div;

  if (grad != nullptr && cfg.beta != 0.0) {
    // Literal form is sum (1 - cos): same pairs, opposite sign.
    const double g = cfg.beta * (cfg.diversity_sign_corrected ? 1.0 : -1.0);
    const Index k = model.bank.prototypes.rows();
    for (Index i = 0; i < k; ++i) {
      for (Index j = i + 1; j < k; ++j) {
        Eigen::VectorXd di = Eigen::VectorXd::Zero(model.bank.prototypes.cols());
        Eigen::VectorXd dj = Eigen::VectorXd::Zero(model.bank.prototypes.cols());
        cosine_backward(model.bank.prototypes.row(i).transpose(), model.bank.prototypes.row(j).transpose(), g, di, dj);
        grad->bank.prototypes.row(i) += di.transpose();
        grad->bank.prototypes.row(j) += dj.transpose();
      }
    }
  }
  return lb;
}

}  // namespace

LossBreakdown total_loss(const Model& model, std::span<const LabeledText> batch, const LossConfig& cfg) {
  return evaluate(model, batch, cfg, nullptr);
}

LossBreakdown loss_and_gradient(const Model& model, std::span<const LabeledText> batch, const LossConfig& cfg,
                                Model& grad) {
  return evaluate(model, batch, cfg, &grad);
}

nlohmann::ordered_json GradCheckReport::to_json() const {
  nlohmann::ordered_json j;
  j["passed"] = passed();
  j["tolerance"] = tolerance;
  j["max_error"] = max_error;
  j["worst_block"] = worst_block;
  j["checked"] = checked;
  j["max_rel_error"] = nlohmann::ordered_json::object();
  for (const auto& [name, err] : max_rel_error) j["max_rel_error"][name] = err;
  j["failed"] = failed;
  return j;
}

GradCheckReport grad_check(const Model& model, const LossFn& loss, const GradFn& gradient, double step,
                           double tolerance) {
  GradCheckReport report;
  report.tolerance = tolerance;
  const Model analytic = gradient(model);

  // Gather block names and sizes once, then perturb scalar by scalar.
  std::vector<std::pair<std::string, Index>> blocks;
  for_each_block(model, [&](const char* name, const auto& block) { blocks.emplace_back(name, block.size()); });
  std::vector<const double*> grads;
  for_each_block(analytic, [&](const char*, const auto& block) { grads.push_back(block.data()); });

  Model probe = model;
  std::vector<double*> values;
  for_each_block(probe, [&](const char*, auto& block) { values.push_back(block.data()); });

  for (std::size_t b = 0; b < blocks.size(); ++b) {
    double worst = 0.0;
    for (Index i = 0; i < blocks[b].second; ++i) {
      double& theta = values[b][i];
      const double saved = theta;
      theta = saved + step;
      const double up = loss(probe);
      theta = saved - step;
      const double down = loss(probe);
      theta = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double exact = grads[b][i];
      const double denom = std::max({std::abs(exact), std::abs(numeric), 1e-8});
      worst = std::max(worst, std::abs(exact - numeric) / denom);
      ++report.checked;
    }
    report.max_rel_error[blocks[b].first] = worst;
    if (report.worst_block.empty() || worst > report.max_error) {
      report.max_error = worst;
      report.worst_block = blocks[b].first;
    }
    if (!(worst < tolerance)) report.failed.push_back(blocks[b].first);
  }
  return report;
}

GradCheckReport grad_check(const Model& model, std::span<const LabeledText> batch, const LossConfig& cfg, double step,
                           double tolerance) {
  return grad_check(
      model, [&](const Model& m) { return total_loss(m, batch, cfg).total; },
      [&](const Model& m) {
        Model g = zeros_like(m);
        loss_and_gradient(m, batch, cfg, g);
        return g;
      },
      step, tolerance);
}

}  // namespace protolens
