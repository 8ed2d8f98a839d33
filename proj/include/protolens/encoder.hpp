#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "protolens/text.hpp"

namespace protolens {

/// 64-bit FNV-1a over the UTF-8 bytes of `s`.
std::uint64_t fnv1a64(std::string_view s);

/// Sparse bag of buckets: (bucket, count / token_count), sorted by bucket.
using BucketFeatures = std::vector<std::pair<std::size_t, double>>;

BucketFeatures bucket_features(const Tokens& tokens, std::size_t begin, std::size_t end, std::size_t hash_dim);

/// Feature-hashing encoder with a trainable affine projection H -> d.
struct EncoderParams {
  std::size_t hash_dim = 0;
  std::size_t embed_dim = 0;
  Eigen::MatrixXd projection;       // d x H
  Eigen::VectorXd projection_bias;  // d

  EncoderParams() = default;
  EncoderParams(std::size_t hash_dim, std::size_t embed_dim);

  /// Throws ConfigError unless d >= 1, H >= d, and shapes/values are consistent.
  void validate() const;
};

/// Projects precomputed features; empty features give the zero vector.
Eigen::VectorXd embed_features(const EncoderParams& params, const BucketFeatures& features);

/// Bag-of-buckets average followed by the projection. [] -> zero vector.
Eigen::VectorXd embed_text(const EncoderParams& params, const Tokens& tokens);

/// Row t is embed_text of part t.
Eigen::MatrixXd embed_parts(const EncoderParams& params, const PartSequence& parts);

/// Exact-match table of precomputed sentence embeddings.
class EmbeddingCache {
 public:
  EmbeddingCache() = default;
  explicit EmbeddingCache(std::size_t dim) : dim_(dim) {}

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return entries_.size(); }

  /// Throws InvalidParameter when the vector length differs from dim().
  void insert(std::string text, Eigen::VectorXd vec);
  std::optional<Eigen::VectorXd> lookup(std::string_view text) const;

  /// Throws ConfigError when dim() != model_dim.
  void check_dim(std::size_t model_dim) const;

 private:
  std::size_t dim_ = 0;
  std::unordered_map<std::string, Eigen::VectorXd> entries_;
};

/// First line {"dim": d}, then one {"text": ..., "vec": [...]} per line.
EmbeddingCache load_cache(const std::filesystem::path& path);
EmbeddingCache parse_cache(const std::string& contents, const std::string& source = "<memory>");

/// Whole-sentence embedding: cache hit if a cache is given, hash encoding otherwise.
Eigen::VectorXd embed_sentence(const EncoderParams& params, const EmbeddingCache* cache, std::string_view sentence);

}  // namespace protolens
