#include "protolens/trainer.hpp"

#include <cmath>
#include <numeric>
#include <set>

#include "protolens/alignment.hpp"
#include "protolens/errors.hpp"
#include "protolens/optimizer.hpp"
#include "protolens/rng.hpp"

namespace protolens {
namespace {

using Eigen::Index;

Index idx(std::size_t i) { return static_cast<Index>(i); }

void fill_normal(Eigen::Ref<Eigen::MatrixXd> m, double scale, Rng& rng) {
  for (Index j = 0; j < m.cols(); ++j) {
    for (Index i = 0; i < m.rows(); ++i) m(i, j) = scale * rng.normal();
  }
}

std::vector<std::string> texts_of(const Corpus& corpus) {
  std::vector<std::string> out;
  out.reserve(corpus.size());
  for (const auto& inst : corpus) out.push_back(inst.text);
  return out;
}

void check_finite(const LossBreakdown& lb, std::size_t epoch, std::size_t step) {
  const auto where = " at epoch " + std::to_string(epoch) + ", step " + std::to_string(step);
  if (!std::isfinite(lb.ce)) throw TrainingError("non-finite loss term 'ce'" + where);
  if (!std::isfinite(lb.gmm)) throw TrainingError("non-finite loss term 'gmm'" + where);
  if (!std::isfinite(lb.div)) throw TrainingError("non-finite loss term 'div'" + where);
  if (!std::isfinite(lb.total)) throw TrainingError("non-finite loss term 'total'" + where);
}

}  // namespace

nlohmann::ordered_json history_to_json(const std::vector<EpochStats>& history) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& e : history) {
    nlohmann::ordered_json j;
    j["epoch"] = e.epoch;
    j["learning_rate"] = e.learning_rate;
    j["ce"] = e.loss.ce;
    j["gmm"] = e.loss.gmm;
    j["l1"] = e.loss.l1;
    j["div"] = e.loss.div;
    j["total"] = e.loss.total;
    j["val_accuracy"] = e.val_accuracy;
    j["aligned"] = e.aligned;
    arr.push_back(std::move(j));
  }
  return arr;
}

std::vector<EpochStats> history_from_json(const nlohmann::json& j) {
  std::vector<EpochStats> out;
  for (const auto& e : j) {
    EpochStats s;
    s.epoch = e.at("epoch").get<std::size_t>();
    s.learning_rate = e.at("learning_rate").get<double>();
    s.loss.ce = e.at("ce").get<double>();
    s.loss.gmm = e.at("gmm").get<double>();
    s.loss.l1 = e.at("l1").get<double>();
    s.loss.div = e.at("div").get<double>();
    s.loss.total = e.at("total").get<double>();
    s.val_accuracy = e.at("val_accuracy").get<double>();
    s.aligned = e.at("aligned").get<bool>();
    out.push_back(s);
  }
  return out;
}

std::vector<LabeledText> prepare_corpus(const Corpus& corpus, const ModelDims& dims) {
  std::vector<LabeledText> out;
  out.reserve(corpus.size());
  for (const auto& inst : corpus) out.push_back({prepare_text(inst.text, dims), inst.label});
  return out;
}

EvalResult evaluate(const Model& model, const Corpus& corpus) {
  EvalResult res;
  const std::size_t classes = model.dims.classes;
  res.support.assign(classes, 0);
  res.correct.assign(classes, 0);
  res.predicted.assign(classes, 0);
  std::size_t hits = 0;
  for (const auto& inst : corpus) {
    const std::size_t pred = forward(model, inst.text).prediction;
    if (inst.label < classes) ++res.support[inst.label];
    ++res.predicted[pred];
    if (pred == inst.label) {
      ++hits;
      ++res.correct[pred];
    }
  }
  res.total = corpus.size();
  res.accuracy = corpus.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(corpus.size());
  return res;
}

Model initialize_model(const TrainConfig& cfg, std::size_t classes, const Corpus& train, const EmbeddingCache* cache) {
  const ModelDims dims = cfg.dims(classes);
  dims.validate();
  Model model(dims);
  Rng rng(cfg.seed);
  fill_normal(model.encoder.projection, cfg.init_scale, rng);
  model.heads.init_random(rng);
  model.heads.b_sigma.setConstant(
      std::clamp(std::log(cfg.span_init_sigma), kLogSigmaMin + 1e-3, kLogSigmaMax - 1e-3));

  const auto sentences = corpus_sentences(texts_of(train));
  if (sentences.empty()) throw DataError("training corpus has no sentences");
  for (std::size_t k = 0; k < dims.prototypes; ++k) {
    const std::string& s = sentences[rng.below(sentences.size())];
    model.bank.prototypes.row(idx(k)) = embed_sentence(model.encoder, cache, s).transpose();
  }
  fill_normal(model.bank.head_weights, cfg.head_init_scale, rng);
  return model;
}

double mean_prototype_cosine(const Model& model) {
  const Index k = model.bank.prototypes.rows();
  double sum = 0.0;
  std::size_t pairs = 0;
  for (Index i = 0; i < k; ++i) {
    for (Index j = i + 1; j < k; ++j) {
      sum += cosine(model.bank.prototypes.row(i).transpose(), model.bank.prototypes.row(j).transpose());
      ++pairs;
    }
  }
  return pairs == 0 ? 0.0 : sum / static_cast<double>(pairs);
}

TrainResult train(const TrainConfig& cfg, const Corpus& train_set, const Corpus& val_set, const TrainHooks& hooks) {
  cfg.validate();
  if (train_set.empty()) throw DataError("training corpus is empty");
  if (val_set.empty()) throw DataError("validation corpus is empty");
  std::set<std::size_t> labels;
  for (const auto& inst : train_set) labels.insert(inst.label);
  if (labels.size() < 2) throw DataError("training corpus must contain at least two classes");
  const std::size_t classes = std::max(num_classes(train_set), num_classes(val_set));
  if (hooks.cache != nullptr) hooks.cache->check_dim(cfg.d);

  TrainResult result;
  result.model = initialize_model(cfg, classes, train_set, hooks.cache);
  Model& model = result.model;

  LossConfig loss_cfg = cfg.loss;
  if (cfg.ablations.no_diversity) loss_cfg.beta = 0.0;

  const auto prepared = prepare_corpus(train_set, model.dims);
  const auto sentences = corpus_sentences(texts_of(train_set));
  const std::size_t clusters = cfg.alignment.clusters == 0 ? cfg.K : cfg.alignment.clusters;

  AdamWOptions opts;
  opts.weight_decay = cfg.weight_decay;
  ModelOptimizer optimizer(model, opts);

  // Separate stream so the shuffle order does not depend on how many draws initialisation used.
  Rng shuffle_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(prepared.size());
  std::iota(order.begin(), order.end(), 0);

  Model grad = zeros_like(model);
  std::vector<LabeledText> batch;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const double lr = cfg.learning_rate_for_epoch(epoch);
    shuffle_rng.shuffle(std::span<std::size_t>(order));

    EpochStats stats;
    stats.epoch = epoch;
    stats.learning_rate = lr;
    std::size_t step = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      batch.clear();
      for (std::size_t i = start; i < end; ++i) batch.push_back(prepared[order[i]]);

      for_each_block(grad, [](const char*, auto& block) { block.setZero(); });
      const LossBreakdown lb = loss_and_gradient(model, batch, loss_cfg, grad);
      check_finite(lb, epoch, ++step);
      optimizer.step(model, grad, lr);

      const double w = static_cast<double>(end - start) / static_cast<double>(order.size());
      stats.loss.ce += w * lb.ce;
      stats.loss.gmm += w * lb.gmm;
      stats.loss.l1 += w * lb.l1;
      stats.loss.div += w * lb.div;
      stats.loss.total += w * lb.total;
    }

    if (!cfg.ablations.no_alignment && cfg.alignment.due(epoch)) {
      const CandidatePool pool = build_candidate_pool(sentences, model.encoder, hooks.cache, clusters,
                                                      cfg.alignment.per_cluster_top, cfg.seed + epoch,
                                                      cfg.alignment.kmeans_iters);
      align_all(model, pool, cfg.alignment, epoch);
      optimizer.reset_block("bank.prototypes");
      stats.aligned = true;
    }

    stats.val_accuracy = evaluate(model, val_set).accuracy;
    result.history.push_back(stats);
    if (hooks.on_epoch) hooks.on_epoch(stats);
  }
  return result;
}

}  // namespace protolens
