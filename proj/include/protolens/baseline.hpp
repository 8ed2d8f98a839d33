#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "protolens/corpus.hpp"

namespace protolens {

/// Unigram TF-IDF with smoothed idf = ln((1 + N) / (1 + df)) + 1 and
/// L2-normalised rows. Out-of-vocabulary tokens are dropped.
class TfidfVectorizer {
 public:
  void fit(const Corpus& corpus);
  Eigen::VectorXd transform(const std::string& text) const;

  std::size_t vocabulary_size() const { return vocab_.size(); }
  double idf(const std::string& token) const;

 private:
  std::unordered_map<std::string, std::size_t> vocab_;
  std::vector<double> idf_;
};

struct BaselineOptions {
  std::size_t epochs = 100;  // full-batch
  double learning_rate = 0.5;
  double weight_decay = 0.0;
  double l2 = 1e-3;  // coupled penalty 0.5 * l2 * |W|^2 added to the mean loss
  double init_scale = 0.01;
};

struct BaselineResult {
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
};

/// Softmax regression on TF-IDF features trained with AdamW.
/// Throws DataError when the training corpus has fewer than two classes.
BaselineResult baseline_tfidf_logreg(const Corpus& train, const Corpus& test, std::uint64_t seed,
                                     const BaselineOptions& opts = {});

}  // namespace protolens
