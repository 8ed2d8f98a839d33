#include "protolens/encoder.hpp"

#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "protolens/errors.hpp"

namespace protolens {

std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 14695981039346656037ULL;
  for (const char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  return h;
}

BucketFeatures bucket_features(const Tokens& tokens, std::size_t begin, std::size_t end, std::size_t hash_dim) {
  if (end <= begin) return {};
  std::map<std::size_t, double> counts;
  for (std::size_t i = begin; i < end; ++i) counts[fnv1a64(tokens[i]) % hash_dim] += 1.0;
  const double total = static_cast<double>(end - begin);
  BucketFeatures out;
  out.reserve(counts.size());
  for (const auto& [bucket, count] : counts) out.emplace_back(bucket, count / total);
  return out;
}

EncoderParams::EncoderParams(std::size_t hash_dim, std::size_t embed_dim)
    : hash_dim(hash_dim),
      embed_dim(embed_dim),
      projection(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(embed_dim), static_cast<Eigen::Index>(hash_dim))),
      projection_bias(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(embed_dim))) {}

void EncoderParams::validate() const {
  if (embed_dim < 1) throw ConfigError("encoder: embed_dim must be >= 1");
  if (hash_dim < embed_dim) throw ConfigError("encoder: hash_dim must be >= embed_dim");
  if (projection.rows() != static_cast<Eigen::Index>(embed_dim) ||
      projection.cols() != static_cast<Eigen::Index>(hash_dim) ||
      projection_bias.size() != static_cast<Eigen::Index>(embed_dim)) {
    throw ConfigError("encoder: parameter shapes do not match dimensions");
  }
  if (!projection.allFinite() || !projection_bias.allFinite()) throw ConfigError("encoder: non-finite projection");
}

Eigen::VectorXd embed_features(const EncoderParams& params, const BucketFeatures& features) {
  if (features.empty()) return Eigen::VectorXd::Zero(static_cast<Eigen::Index>(params.embed_dim));
  Eigen::VectorXd e = params.projection_bias;
  for (const auto& [bucket, weight] : features) e += weight * params.projection.col(static_cast<Eigen::Index>(bucket));
  return e;
}

Eigen::VectorXd embed_text(const EncoderParams& params, const Tokens& tokens) {
  return embed_features(params, bucket_features(tokens, 0, tokens.size(), params.hash_dim));
}

Eigen::MatrixXd embed_parts(const EncoderParams& params, const PartSequence& parts) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(parts.size()), static_cast<Eigen::Index>(params.embed_dim));
  for (std::size_t t = 0; t < parts.size(); ++t) {
    out.row(static_cast<Eigen::Index>(t)) = embed_text(params, tokenize(parts.parts[t].text)).transpose();
  }
  return out;
}

void EmbeddingCache::insert(std::string text, Eigen::VectorXd vec) {
  if (vec.size() != static_cast<Eigen::Index>(dim_)) {
    throw InvalidParameter("embedding cache: vector of length " + std::to_string(vec.size()) +
                           " does not match dim " + std::to_string(dim_));
  }
  entries_.insert_or_assign(std::move(text), std::move(vec));
}

std::optional<Eigen::VectorXd> EmbeddingCache::lookup(std::string_view text) const {
  const auto it = entries_.find(std::string(text));
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void EmbeddingCache::check_dim(std::size_t model_dim) const {
  if (dim_ != model_dim) {
    throw ConfigError("embedding cache dim " + std::to_string(dim_) + " does not match model d = " +
                      std::to_string(model_dim));
  }
}

EmbeddingCache parse_cache(const std::string& contents, const std::string& source) {
  std::istringstream in(contents);
  std::string line;
  std::size_t line_no = 0;
  std::optional<EmbeddingCache> cache;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = source + ":" + std::to_string(line_no);
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError(where + ": malformed JSON (" + e.what() + ")");
    }
    if (!cache) {
      if (!obj.is_object() || !obj.contains("dim") || !obj["dim"].is_number_unsigned() || obj["dim"].get<std::size_t>() == 0) {
        throw DataError(where + ": first line must be {\"dim\": d} with d >= 1");
      }
      cache.emplace(obj["dim"].get<std::size_t>());
      continue;
    }
    if (!obj.is_object() || !obj.contains("text") || !obj["text"].is_string()) {
      throw DataError(where + ": missing string field \"text\"");
    }
    if (!obj.contains("vec") || !obj["vec"].is_array()) throw DataError(where + ": missing array field \"vec\"");
    const auto& arr = obj["vec"];
    if (arr.size() != cache->dim()) {
      throw DataError(where + ": vector has " + std::to_string(arr.size()) + " entries, expected " +
                      std::to_string(cache->dim()));
    }
    Eigen::VectorXd v(static_cast<Eigen::Index>(arr.size()));
    for (std::size_t i = 0; i < arr.size(); ++i) {
      if (!arr[i].is_number()) throw DataError(where + ": non-numeric vector entry");
      v[static_cast<Eigen::Index>(i)] = arr[i].get<double>();
    }
    cache->insert(obj["text"].get<std::string>(), std::move(v));
  }
  if (!cache) throw DataError(source + ": empty embedding cache (missing dim header)");
  return std::move(*cache);
}

EmbeddingCache load_cache(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open embedding cache " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_cache(buf.str(), path.string());
}

Eigen::VectorXd embed_sentence(const EncoderParams& params, const EmbeddingCache* cache, std::string_view sentence) {
  if (cache != nullptr) {
    if (auto hit = cache->lookup(sentence)) return *hit;
  }
  return embed_text(params, tokenize(sentence));
}

}  // namespace protolens
