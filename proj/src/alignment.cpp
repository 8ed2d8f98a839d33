#include "protolens/alignment.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <unordered_set>

#include "protolens/errors.hpp"
#include "protolens/rng.hpp"

namespace protolens {
namespace {

using Eigen::Index;

Index idx(std::size_t i) { return static_cast<Index>(i); }

double sq_dist(const Eigen::MatrixXd& a, Index i, const Eigen::MatrixXd& b, Index j) {
  return (a.row(i) - b.row(j)).squaredNorm();
}

}  // namespace

void AlignmentConfig::validate() const {
  if (!(tau > 0.0) || !(gamma > 0.0) || !(eps > 0.0)) throw ConfigError("alignment: tau, gamma, eps must be positive");
  if (top_candidates < 1) throw ConfigError("alignment: top_candidates must be >= 1");
  if (period_epochs < 1) throw ConfigError("alignment: period_epochs must be >= 1");
  if (per_cluster_top < 1) throw ConfigError("alignment: per_cluster_top must be >= 1");
}

bool AlignmentConfig::due(std::size_t epoch) const {
  return epoch >= warmup_epochs && (epoch - warmup_epochs) % period_epochs == 0;
}

KMeansResult kmeans(const Eigen::MatrixXd& points, std::size_t k, std::size_t max_iters, std::uint64_t seed) {
  const auto n = static_cast<std::size_t>(points.rows());
  if (k == 0) throw InvalidParameter("kmeans: k must be >= 1");
  if (k > n) throw InvalidParameter("kmeans: k = " + std::to_string(k) + " exceeds " + std::to_string(n) + " points");

  Rng rng(seed);
  KMeansResult res;
  res.centers.resize(idx(k), points.cols());

  // k-means++ seeding
  res.centers.row(0) = points.row(idx(rng.below(n)));
  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
  for (std::size_t c = 1; c < k; ++c) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      nearest[i] = std::min(nearest[i], sq_dist(points, idx(i), res.centers, idx(c - 1)));
      total += nearest[i];
    }
    std::size_t pick = 0;
    if (total > 0.0) {
      double target = rng.uniform() * total;
      for (pick = 0; pick + 1 < n; ++pick) {
        target -= nearest[pick];
        if (target < 0.0) break;
      }
    } else {
      pick = rng.below(n);
    }
    res.centers.row(idx(c)) = points.row(idx(pick));
  }

  res.assignments.assign(n, k);  // k marks "unassigned" so the first pass always counts as a change
  for (std::size_t iter = 0; iter < std::max<std::size_t>(max_iters, 1); ++iter) {
    bool changed = false;
    double objective = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = 0;
      double best_d = sq_dist(points, idx(i), res.centers, 0);
      for (std::size_t c = 1; c < k; ++c) {
        const double d = sq_dist(points, idx(i), res.centers, idx(c));
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (res.assignments[i] != best) changed = true;
      res.assignments[i] = best;
      objective += best_d;
    }
    res.objective.push_back(objective);
    res.iterations = iter + 1;
    if (!changed) break;

    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(idx(k), points.cols());
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      sums.row(idx(res.assignments[i])) += points.row(idx(i));
      ++counts[res.assignments[i]];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] > 0) {
        res.centers.row(idx(c)) = sums.row(idx(c)) / static_cast<double>(counts[c]);
        continue;
      }
      // Empty cluster: take the point farthest from its own center.
      std::size_t far = 0;
      double far_d = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double d = sq_dist(points, idx(i), res.centers, idx(res.assignments[i]));
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      res.centers.row(idx(c)) = points.row(idx(far));
      res.assignments[far] = c;
    }
  }
  return res;
}

std::vector<std::string> corpus_sentences(const std::vector<std::string>& texts) {
  std::vector<std::string> out;
  for (const auto& t : texts) {
    auto s = split_sentences(t);
    out.insert(out.end(), std::make_move_iterator(s.begin()), std::make_move_iterator(s.end()));
  }
  return out;
}

CandidatePool build_candidate_pool(const std::vector<std::string>& sentences, const EncoderParams& encoder,
                                   const EmbeddingCache* cache, std::size_t clusters, std::size_t per_cluster_top,
                                   std::uint64_t seed, std::size_t max_iters) {
  if (clusters == 0) throw InvalidParameter("candidate pool: clusters must be >= 1");
  if (per_cluster_top == 0) throw InvalidParameter("candidate pool: per_cluster_top must be >= 1");
  std::vector<std::string> unique;
  std::unordered_set<std::string> seen;
  for (const auto& s : sentences) {
    if (seen.insert(s).second) unique.push_back(s);
  }
  if (unique.size() < clusters) {
    throw InvalidParameter("candidate pool: " + std::to_string(unique.size()) + " unique sentences for " +
                           std::to_string(clusters) + " clusters");
  }

  Eigen::MatrixXd vecs(idx(unique.size()), idx(encoder.embed_dim));
  for (std::size_t i = 0; i < unique.size(); ++i) {
    vecs.row(idx(i)) = embed_sentence(encoder, cache, unique[i]).transpose();
  }
  const KMeansResult km = kmeans(vecs, clusters, max_iters, seed);

  CandidatePool pool;
  pool.clusters = clusters;
  pool.per_cluster_top = per_cluster_top;
  for (std::size_t c = 0; c < clusters; ++c) {
    std::vector<std::pair<double, std::size_t>> members;
    for (std::size_t i = 0; i < unique.size(); ++i) {
      if (km.assignments[i] == c) members.emplace_back(sq_dist(vecs, idx(i), km.centers, idx(c)), i);
    }
    std::stable_sort(members.begin(), members.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    const std::size_t keep = std::min(per_cluster_top, members.size());
    for (std::size_t j = 0; j < keep; ++j) {
      const std::size_t i = members[j].second;
      pool.candidates.push_back({unique[i], vecs.row(idx(i)).transpose()});
    }
  }
  return pool;
}

Representative representative_embedding(const Eigen::VectorXd& prototype, const CandidatePool& pool, std::size_t top) {
  if (pool.empty()) throw InvalidParameter("representative_embedding: empty candidate pool");
  if (top == 0) throw InvalidParameter("representative_embedding: top must be >= 1");
  std::vector<std::pair<double, std::size_t>> scored;
  scored.reserve(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) scored.emplace_back(cosine(pool.candidates[i].vec, prototype), i);
  std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) { return a.first > b.first; });

  const std::size_t keep = std::min(top, scored.size());
  Representative rep;
  rep.embedding = Eigen::VectorXd::Zero(prototype.size());
  for (std::size_t j = 0; j < keep; ++j) {
    rep.chosen.push_back(scored[j].second);
    rep.embedding += pool.candidates[scored[j].second].vec;
  }
  rep.embedding /= static_cast<double>(keep);
  return rep;
}

Eigen::VectorXd align_prototype(const Eigen::VectorXd& p, const Eigen::VectorXd& c, const AlignmentConfig& cfg) {
  const Eigen::VectorXd delta = c - p;
  const double dist = delta.norm();
  const Eigen::VectorXd unit = delta / (dist + cfg.eps);
  const double w = sigmoid(cfg.gamma * (dist - cfg.tau));
  return w * (p + cfg.tau * unit) + (1.0 - w) * c;
}

std::vector<AlignmentRecord> align_all(Model& model, const CandidatePool& pool, const AlignmentConfig& cfg,
                                       std::size_t epoch) {
  std::vector<AlignmentRecord> log;
  for (std::size_t k = 0; k < model.dims.prototypes; ++k) {
    const Eigen::VectorXd p = model.bank.prototypes.row(idx(k)).transpose();
    const Representative rep = representative_embedding(p, pool, cfg.top_candidates);
    const Eigen::VectorXd moved = align_prototype(p, rep.embedding, cfg);

    AlignmentRecord rec;
    rec.prototype = k;
    rec.epoch = epoch;
    rec.displacement = (moved - p).norm();
    for (const std::size_t i : rep.chosen) rec.sentences.push_back(pool.candidates[i].sentence);
    log.push_back(std::move(rec));

    model.bank.prototypes.row(idx(k)) = moved.transpose();
  }
  model.alignment = log;
  return log;
}

}  // namespace protolens
