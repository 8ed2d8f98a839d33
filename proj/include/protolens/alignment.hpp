#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "protolens/encoder.hpp"
#include "protolens/prototype_model.hpp"

namespace protolens {

struct AlignmentConfig {
  double tau = 0.5;    // movement threshold
  double gamma = 10.0;  // transition smoothness
  double eps = 1e-8;
  std::size_t top_candidates = 3;
  std::size_t period_epochs = 1;
  std::size_t warmup_epochs = 1;
  std::size_t clusters = 0;  // 0 means one cluster per prototype
  std::size_t per_cluster_top = 50;
  std::size_t kmeans_iters = 100;

  /// Throws ConfigError unless tau, gamma, eps > 0 and the counts are positive.
  void validate() const;

  /// True when alignment should run at the end of (1-based) epoch `epoch`.
  bool due(std::size_t epoch) const;
};

struct KMeansResult {
  Eigen::MatrixXd centers;  // k x d
  std::vector<std::size_t> assignments;
  std::vector<double> objective;  // sum of squared distances after each assignment pass
  std::size_t iterations = 0;
};

/// Lloyd's algorithm with k-means++ seeding. Rows of `points` are the vectors.
/// Throws InvalidParameter when k == 0 or k > rows.
KMeansResult kmeans(const Eigen::MatrixXd& points, std::size_t k, std::size_t max_iters, std::uint64_t seed);

struct Candidate {
  std::string sentence;
  Eigen::VectorXd vec;
};

struct CandidatePool {
  std::vector<Candidate> candidates;
  std::size_t clusters = 0;
  std::size_t per_cluster_top = 0;

  bool empty() const { return candidates.empty(); }
  std::size_t size() const { return candidates.size(); }
};

/// Dedupes sentences by text, embeds them (cache first), clusters, and keeps
/// the per_cluster_top members of each cluster nearest its center.
/// Throws InvalidParameter when there are fewer unique sentences than clusters.
CandidatePool build_candidate_pool(const std::vector<std::string>& sentences, const EncoderParams& encoder,
                                   const EmbeddingCache* cache, std::size_t clusters, std::size_t per_cluster_top,
                                   std::uint64_t seed, std::size_t max_iters = 100);

/// Every sentence of every text, in corpus order.
std::vector<std::string> corpus_sentences(const std::vector<std::string>& texts);

struct Representative {
  Eigen::VectorXd embedding;           // c
  std::vector<std::size_t> chosen;     // pool indices, most similar first
};

/// Mean of the `top` pool vectors most cosine-similar to the prototype.
Representative representative_embedding(const Eigen::VectorXd& prototype, const CandidatePool& pool, std::size_t top);

/// w = sigmoid(gamma (|c - p| - tau)); p' = w (p + tau u) + (1 - w) c.
Eigen::VectorXd align_prototype(const Eigen::VectorXd& p, const Eigen::VectorXd& c, const AlignmentConfig& cfg);

/// Moves every prototype and replaces model.alignment with the new records.
std::vector<AlignmentRecord> align_all(Model& model, const CandidatePool& pool, const AlignmentConfig& cfg,
                                       std::size_t epoch);

}  // namespace protolens
