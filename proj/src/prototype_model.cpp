#include "protolens/prototype_model.hpp"

#include <cmath>

#include "protolens/errors.hpp"

namespace protolens {
namespace {

using Eigen::Index;

Index idx(std::size_t i) { return static_cast<Index>(i); }

}  // namespace

void ModelDims::validate() const {
  if (prototypes < 2) throw ConfigError("K must be >= 2");
  if (classes < 2) throw ConfigError("need at least 2 classes");
  if (embed_dim < 1) throw ConfigError("d must be >= 1");
  if (hash_dim < embed_dim) throw ConfigError("hash_dim must be >= d");
  if (components < 1) throw ConfigError("M must be >= 1");
  if (hidden < 1) throw ConfigError("MLP width must be >= 1");
  if (t_max < 1) throw ConfigError("T_max must be >= 1");
  if (n_gram < 1) throw ConfigError("n_gram must be >= 1");
  if (!(smoothness > 0.0)) throw ConfigError("R must be positive");
}

double PrototypeBank::class_weight_of(std::size_t k) const {
  const Index col = idx(k);
  if (head_weights.rows() == 2) return head_weights(1, col) - head_weights(0, col);
  return head_weights.col(col).maxCoeff();
}

Model::Model(const ModelDims& d)
    : dims(d), encoder(d.hash_dim, d.embed_dim), heads(d.t_max, d.hidden, d.components) {
  bank.prototypes = Eigen::MatrixXd::Zero(idx(d.prototypes), idx(d.embed_dim));
  bank.head_weights = Eigen::MatrixXd::Zero(idx(d.classes), idx(d.prototypes));
  bank.head_bias = Eigen::VectorXd::Zero(idx(d.classes));
  bank.rms_gain = Eigen::VectorXd::Ones(idx(d.prototypes));
}

std::size_t parameter_count(const Model& model) {
  std::size_t n = 0;
  for_each_block(model, [&](const char*, const auto& block) { n += static_cast<std::size_t>(block.size()); });
  return n;
}

double cosine(const Eigen::Ref<const Eigen::VectorXd>& u, const Eigen::Ref<const Eigen::VectorXd>& v) {
  const double nu = u.norm();
  const double nv = v.norm();
  if (nu == 0.0 || nv == 0.0) return 0.0;
  return u.dot(v) / (nu * nv + kCosineEps);
}

void cosine_backward(const Eigen::Ref<const Eigen::VectorXd>& u, const Eigen::Ref<const Eigen::VectorXd>& v, double g,
                     Eigen::Ref<Eigen::VectorXd> du, Eigen::Ref<Eigen::VectorXd> dv) {
  const double nu = u.norm();
  const double nv = v.norm();
  if (nu == 0.0 || nv == 0.0 || g == 0.0) return;
  const double denom = nu * nv + kCosineEps;
  const double dot = u.dot(v);
  // d/du [u.v / (|u||v| + eps)] = v / D - (u.v) |v| u / (|u| D^2)
  const double c = dot / (denom * denom);
  du += g * (v / denom - (c * nv / nu) * u);
  dv += g * (u / denom - (c * nu / nv) * v);
}

Eigen::VectorXd similarity_curve(const Eigen::MatrixXd& part_embeddings, const Eigen::VectorXd& prototype) {
  Eigen::VectorXd curve(part_embeddings.rows());
  for (Index t = 0; t < part_embeddings.rows(); ++t) curve[t] = cosine(part_embeddings.row(t).transpose(), prototype);
  return curve;
}

Eigen::VectorXd rmsnorm(const Eigen::VectorXd& raw, const Eigen::VectorXd& gain) {
  const double rms = std::sqrt(raw.squaredNorm() / static_cast<double>(raw.size()) + kRmsEps);
  return (gain.array() * raw.array() / rms).matrix();
}

Eigen::VectorXd refine_embedding(const Eigen::MatrixXd& part_embeddings, const Eigen::VectorXd& mask) {
  const Eigen::VectorXd weighted = part_embeddings.transpose() * mask;
  return weighted / (mask.sum() + kMaskEps);
}

Eigen::VectorXd predict(const PrototypeBank& bank, const Eigen::VectorXd& normalized_similarities) {
  Eigen::VectorXd logits = bank.head_weights * normalized_similarities + bank.head_bias;
  logits.array() -= logits.maxCoeff();
  Eigen::VectorXd probs = logits.array().exp().matrix();
  return probs / probs.sum();
}

std::size_t argmax(const Eigen::VectorXd& v) {
  std::size_t best = 0;
  for (Index i = 1; i < v.size(); ++i) {
    if (v[i] > v[idx(best)]) best = static_cast<std::size_t>(i);
  }
  return best;
}

PreparedText prepare_text(std::string_view text, const ModelDims& dims) {
  PreparedText out;
  out.text = std::string(text);
  out.tokenized = tokenize_with_offsets(text);
  out.parts = partition_ngrams(out.tokenized.tokens, dims.n_gram);
  out.features.reserve(out.parts.size());
  for (const auto& part : out.parts.parts) {
    out.features.push_back(bucket_features(out.tokenized.tokens, part.start, part.end, dims.hash_dim));
  }
  return out;
}

ForwardResult forward(const Model& model, const PreparedText& input) {
  const auto& dims = model.dims;
  const std::size_t length = input.parts.size();
  if (length > dims.t_max) {
    throw ConfigError("text has " + std::to_string(length) + " parts, more than T_max = " + std::to_string(dims.t_max));
  }

  ForwardResult out;
  out.part_embeddings.resize(idx(length), idx(dims.embed_dim));
  for (std::size_t t = 0; t < length; ++t) {
    out.part_embeddings.row(idx(t)) = embed_features(model.encoder, input.features[t]).transpose();
  }

  out.raw.resize(idx(dims.prototypes));
  out.prototypes.reserve(dims.prototypes);
  for (std::size_t k = 0; k < dims.prototypes; ++k) {
    PrototypeTrace pt;
    const Eigen::VectorXd proto = model.bank.prototypes.row(idx(k)).transpose();
    pt.curve = similarity_curve(out.part_embeddings, proto);
    pt.mixture = mixture_forward(model.heads, pt.curve);
    pt.component = select_component_index(pt.mixture.params);
    const auto& mp = pt.mixture.params;
    pt.mask = dims.union_mask
                  ? union_span_mask(mp, dims.smoothness, length)
                  : span_mask(mp.mu[idx(pt.component)], mp.sigma[idx(pt.component)], dims.smoothness, length);
    pt.mask.discrete = extract_discrete_span(pt.mask);
    pt.refined = refine_embedding(out.part_embeddings, pt.mask.soft);
    pt.raw_similarity = cosine(pt.refined, proto);
    out.raw[idx(k)] = pt.raw_similarity;
    out.prototypes.push_back(std::move(pt));
  }

  out.normalized = rmsnorm(out.raw, model.bank.rms_gain);
  out.probabilities = predict(model.bank, out.normalized);
  out.prediction = argmax(out.probabilities);
  return out;
}

ForwardResult forward(const Model& model, std::string_view text) { return forward(model, prepare_text(text, model.dims)); }

}  // namespace protolens
