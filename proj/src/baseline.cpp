#include "protolens/baseline.hpp"

#include <cmath>
#include <set>

#include "protolens/errors.hpp"
#include "protolens/optimizer.hpp"
#include "protolens/prototype_model.hpp"
#include "protolens/rng.hpp"
#include "protolens/text.hpp"

namespace protolens {

void TfidfVectorizer::fit(const Corpus& corpus) {
  vocab_.clear();
  std::vector<std::size_t> df;
  for (const auto& inst : corpus) {
    const Tokens toks = tokenize(inst.text);
    const std::set<std::string> unique(toks.begin(), toks.end());
    for (const auto& tok : unique) {
      auto [it, inserted] = vocab_.emplace(tok, vocab_.size());
      if (inserted) df.push_back(0);
      ++df[it->second];
    }
  }
  const auto n = static_cast<double>(corpus.size());
  idf_.resize(df.size());
  for (std::size_t i = 0; i < df.size(); ++i) idf_[i] = std::log((1.0 + n) / (1.0 + static_cast<double>(df[i]))) + 1.0;
}

double TfidfVectorizer::idf(const std::string& token) const {
  const auto it = vocab_.find(token);
  return it == vocab_.end() ? 0.0 : idf_[it->second];
}

Eigen::VectorXd TfidfVectorizer::transform(const std::string& text) const {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(vocab_.size()));
  for (const auto& tok : tokenize(text)) {
    const auto it = vocab_.find(tok);
    if (it != vocab_.end()) x[static_cast<Eigen::Index>(it->second)] += 1.0;
  }
  for (Eigen::Index i = 0; i < x.size(); ++i) x[i] *= idf_[static_cast<std::size_t>(i)];
  const double norm = x.norm();
  if (norm > 0.0) x /= norm;
  return x;
}

BaselineResult baseline_tfidf_logreg(const Corpus& train, const Corpus& test, std::uint64_t seed,
                                     const BaselineOptions& opts) {
  const std::size_t classes = num_classes(train);
  std::set<std::size_t> present;
  for (const auto& inst : train) present.insert(inst.label);
  if (present.size() < 2) throw DataError("baseline: training corpus must contain at least two classes");

  TfidfVectorizer vec;
  vec.fit(train);
  const auto features = static_cast<Eigen::Index>(vec.vocabulary_size());
  const auto c = static_cast<Eigen::Index>(classes);

  Eigen::MatrixXd x(static_cast<Eigen::Index>(train.size()), features);
  for (std::size_t i = 0; i < train.size(); ++i) x.row(static_cast<Eigen::Index>(i)) = vec.transform(train[i].text).transpose();

  Rng rng(seed);
  Eigen::MatrixXd w(c, features);
  for (Eigen::Index j = 0; j < w.cols(); ++j) {
    for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = opts.init_scale * rng.normal();
  }
  Eigen::VectorXd b = Eigen::VectorXd::Zero(c);

  AdamWOptions adam;
  adam.weight_decay = opts.weight_decay;
  AdamWState w_state(static_cast<std::size_t>(w.size()));
  AdamWState b_state(static_cast<std::size_t>(b.size()));

  const double inv_n = 1.0 / static_cast<double>(train.size());
  for (std::size_t epoch = 0; epoch < opts.epochs; ++epoch) {
    Eigen::MatrixXd logits = (x * w.transpose()).rowwise() + b.transpose();  // N x C
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
      logits.row(i).array() -= logits.row(i).maxCoeff();
      logits.row(i) = logits.row(i).array().exp().matrix();
      logits.row(i) /= logits.row(i).sum();
      logits(i, static_cast<Eigen::Index>(train[static_cast<std::size_t>(i)].label)) -= 1.0;
    }
    logits *= inv_n;  // now dL/dlogits
    const Eigen::MatrixXd gw = logits.transpose() * x + opts.l2 * w;
    const Eigen::VectorXd gb = logits.colwise().sum().transpose();
    w_state.update(std::span<double>(w.data(), static_cast<std::size_t>(w.size())),
                   std::span<const double>(gw.data(), static_cast<std::size_t>(gw.size())), opts.learning_rate, adam);
    b_state.update(std::span<double>(b.data(), static_cast<std::size_t>(b.size())),
                   std::span<const double>(gb.data(), static_cast<std::size_t>(gb.size())), opts.learning_rate, adam);
  }

  auto accuracy = [&](const Corpus& corpus) {
    if (corpus.empty()) return 0.0;
    std::size_t hits = 0;
    for (const auto& inst : corpus) {
      const Eigen::VectorXd logits = w * vec.transform(inst.text) + b;
      if (argmax(logits) == inst.label) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(corpus.size());
  };
  return {accuracy(train), accuracy(test)};
}

}  // namespace protolens
