#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "protolens/encoder.hpp"
#include "protolens/span_extractor.hpp"
#include "protolens/text.hpp"

namespace protolens {

inline constexpr double kCosineEps = 1e-8;
inline constexpr double kRmsEps = 1e-6;
inline constexpr double kMaskEps = 1e-8;

/// Every shape and structural hyperparameter of a model.
struct ModelDims {
  std::size_t prototypes = 4;  // K
  std::size_t classes = 2;     // C
  std::size_t embed_dim = 32;  // d
  std::size_t hash_dim = 2048;
  std::size_t components = 4;  // M
  std::size_t hidden = 64;     // MLP width
  std::size_t t_max = 128;
  std::size_t n_gram = 5;
  double smoothness = 2.0;  // R, in part-index units
  bool union_mask = false;  // max over components instead of the argmax component

  bool operator==(const ModelDims&) const = default;

  /// Throws ConfigError on any inconsistent value.
  void validate() const;
};

struct PrototypeBank {
  Eigen::MatrixXd prototypes;    // K x d
  Eigen::MatrixXd head_weights;  // C x K
  Eigen::VectorXd head_bias;     // C
  Eigen::VectorXd rms_gain;      // K

  /// For two classes, the logit margin contributed toward class 1 per unit of
  /// similarity. With more classes, the largest per-class weight.
  double class_weight_of(std::size_t k) const;
};

/// One prototype's most recent alignment outcome.
struct AlignmentRecord {
  std::size_t prototype = 0;
  std::vector<std::string> sentences;  // chosen candidates, most similar first
  double displacement = 0.0;
  std::size_t epoch = 0;
};

struct Model {
  ModelDims dims;
  EncoderParams encoder;
  MixtureHeadParams heads;
  PrototypeBank bank;
  std::vector<AlignmentRecord> alignment;  // empty until the first alignment

  Model() = default;
  /// Zero-initialised parameters, unit RMSNorm gains.
  explicit Model(const ModelDims& dims);

  bool aligned() const { return !alignment.empty(); }
};

/// Visits each trainable block in the fixed declared order used by the
/// optimizer, gradient checks and checkpoints.
template <typename M, typename F>
  requires std::is_same_v<std::remove_const_t<M>, Model>
void for_each_block(M& model, F&& fn) {
  fn("encoder.projection", model.encoder.projection);
  fn("encoder.bias", model.encoder.projection_bias);
  fn("heads.w1", model.heads.w1);
  fn("heads.b1", model.heads.b1);
  fn("heads.w2", model.heads.w2);
  fn("heads.b2", model.heads.b2);
  fn("heads.w_mu", model.heads.w_mu);
  fn("heads.b_mu", model.heads.b_mu);
  fn("heads.w_sigma", model.heads.w_sigma);
  fn("heads.b_sigma", model.heads.b_sigma);
  fn("heads.w_pi", model.heads.w_pi);
  fn("heads.b_pi", model.heads.b_pi);
  fn("bank.prototypes", model.bank.prototypes);
  fn("bank.head_weights", model.bank.head_weights);
  fn("bank.head_bias", model.bank.head_bias);
  fn("bank.rms_gain", model.bank.rms_gain);
}

std::size_t parameter_count(const Model& model);

/// u.v / (|u||v| + eps); 0 when either vector is all zeros.
double cosine(const Eigen::Ref<const Eigen::VectorXd>& u, const Eigen::Ref<const Eigen::VectorXd>& v);

/// Adds g * dcos/du and g * dcos/dv.
void cosine_backward(const Eigen::Ref<const Eigen::VectorXd>& u, const Eigen::Ref<const Eigen::VectorXd>& v, double g,
                     Eigen::Ref<Eigen::VectorXd> du, Eigen::Ref<Eigen::VectorXd> dv);

/// Entry t is cosine(part_embeddings.row(t), prototype).
Eigen::VectorXd similarity_curve(const Eigen::MatrixXd& part_embeddings, const Eigen::VectorXd& prototype);

/// gain_k * raw_k / sqrt(mean(raw^2) + eps).
Eigen::VectorXd rmsnorm(const Eigen::VectorXd& raw, const Eigen::VectorXd& gain);

/// Mask-weighted mean of the rows: sum_t m_t e_t / (sum_t m_t + eps).
Eigen::VectorXd refine_embedding(const Eigen::MatrixXd& part_embeddings, const Eigen::VectorXd& mask);

/// softmax(W s + b).
Eigen::VectorXd predict(const PrototypeBank& bank, const Eigen::VectorXd& normalized_similarities);

/// Tokenization, partition and hashed features; independent of parameters.
struct PreparedText {
  std::string text;
  TokenizedText tokenized;
  PartSequence parts;
  std::vector<BucketFeatures> features;  // one per part
};

PreparedText prepare_text(std::string_view text, const ModelDims& dims);

struct PrototypeTrace {
  Eigen::VectorXd curve;  // T
  MixtureTrace mixture;
  std::size_t component = 0;  // argmax-weight component
  SpanMask mask;
  Eigen::VectorXd refined;  // Z
  double raw_similarity = 0.0;
};

/// Prediction plus every intermediate of the forward pass.
struct ForwardResult {
  Eigen::MatrixXd part_embeddings;  // T x d
  std::vector<PrototypeTrace> prototypes;
  Eigen::VectorXd raw;         // K cosine similarities
  Eigen::VectorXd normalized;  // after RMSNorm
  Eigen::VectorXd probabilities;
  std::size_t prediction = 0;  // argmax, lowest class on ties
};

ForwardResult forward(const Model& model, const PreparedText& input);
ForwardResult forward(const Model& model, std::string_view text);

/// Argmax with ties broken toward the lower index.
std::size_t argmax(const Eigen::VectorXd& v);

}  // namespace protolens
