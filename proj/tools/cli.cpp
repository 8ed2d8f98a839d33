#include "cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "protolens/baseline.hpp"
#include "protolens/checkpoint.hpp"
#include "protolens/config.hpp"
#include "protolens/errors.hpp"
#include "protolens/experiments.hpp"
#include "protolens/report.hpp"
#include "protolens/synthetic.hpp"
#include "protolens/trainer.hpp"

namespace protolens::cli {
namespace {

namespace fs = std::filesystem;

/// Applies PROTOLENS_SEED when set.
void apply_seed_override(TrainConfig& cfg) {
  if (const char* env = std::getenv("PROTOLENS_SEED"); env != nullptr && *env != '\0') {
    try {
      std::size_t used = 0;
      const unsigned long long v = std::stoull(env, &used);
      if (used != std::string(env).size()) throw std::invalid_argument(env);
      cfg.seed = v;
    } catch (const std::exception&) {
      throw ConfigError(std::string("PROTOLENS_SEED must be a non-negative integer, got \"") + env + "\"");
    }
  }
}

TrainConfig read_config(const std::string& path) {
  TrainConfig cfg = path.empty() ? TrainConfig{} : load_config(path);
  apply_seed_override(cfg);
  return cfg;
}

std::optional<EmbeddingCache> read_cache(const TrainConfig& cfg) {
  if (cfg.embedding_cache.empty()) return std::nullopt;
  EmbeddingCache cache = load_cache(cfg.embedding_cache);
  cache.check_dim(cfg.d);
  return cache;
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") != std::string::npos) lines.push_back(line);
  }
  return lines;
}

std::string fmt(double v, int precision = 4) {
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(precision);
  s << v;
  return s.str();
}

struct Options {
  std::string config, train, val, test, out, ckpt, data, text, file, format = "text", out_dir, param;
  std::vector<std::size_t> values;
  std::size_t top = 0;
  double threshold = 0.5;
  std::uint64_t seed = 0;
  std::size_t seeds = 1;
  std::size_t num_train = 400, num_val = 100, num_test = 100, vocab = 200, noise = 30;
  std::vector<std::string> phrases0 = {"truly awful plot"}, phrases1 = {"really great acting"};
};

int cmd_train(const Options& o, std::ostream& out) {
  const TrainConfig cfg = read_config(o.config);
  const auto cache = read_cache(cfg);
  const Corpus train_set = load_corpus(o.train);
  const Corpus val_set = load_corpus(o.val);
  TrainHooks hooks;
  hooks.cache = cache ? &*cache : nullptr;
  hooks.on_epoch = [&](const EpochStats& e) {
    out << "epoch " << e.epoch << "  lr " << e.learning_rate << "  ce " << fmt(e.loss.ce) << "  gmm "
        << fmt(e.loss.gmm) << "  div " << fmt(e.loss.div) << "  total " << fmt(e.loss.total) << "  val_acc "
        << fmt(e.val_accuracy) << (e.aligned ? "  aligned" : "") << "\n";
  };
  TrainResult res = train(cfg, train_set, val_set, hooks);
  save_checkpoint({std::move(res.model), config_to_json(cfg), std::move(res.history)}, o.out);
  out << "saved " << o.out << "\n";
  return kExitOk;
}

int cmd_eval(const Options& o, std::ostream& out) {
  const Checkpoint ckpt = load_checkpoint(o.ckpt);
  const EvalResult r = evaluate(ckpt.model, load_corpus(o.data));
  out << "accuracy " << fmt(r.accuracy) << "\n";
  for (std::size_t c = 0; c < r.support.size(); ++c) {
    out << "class " << c << "  support " << r.support[c] << "  correct " << r.correct[c] << "  predicted "
        << r.predicted[c] << "\n";
  }
  return kExitOk;
}

int cmd_explain(const Options& o, std::ostream& out) {
  if (o.text.empty() == o.file.empty()) throw CLI::ValidationError("explain", "exactly one of --text or --file is required");
  const RenderFormat format = parse_render_format(o.format);
  const Checkpoint ckpt = load_checkpoint(o.ckpt);
  const std::vector<std::string> texts = o.text.empty() ? read_lines(o.file) : std::vector<std::string>{o.text};
  if (format == RenderFormat::Json && !o.file.empty()) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& t : texts) arr.push_back(report_to_json(explain_instance(ckpt.model, t, o.threshold), o.top));
    out << arr.dump(2) << "\n";
    return kExitOk;
  }
  for (std::size_t i = 0; i < texts.size(); ++i) {
    if (i > 0) out << "\n";
    out << render(explain_instance(ckpt.model, texts[i], o.threshold), format, o.top);
  }
  return kExitOk;
}

int cmd_prototypes(const Options& o, std::ostream& out) {
  const Checkpoint ckpt = load_checkpoint(o.ckpt);
  out << render_table(prototype_table(ckpt.model), parse_render_format(o.format));
  return kExitOk;
}

Corpora read_corpora(const Options& o) {
  if (o.train.empty() && o.val.empty() && o.test.empty()) {
    SyntheticOptions so;
    so.seed = o.seed;
    so.num_val = o.num_val;
    return synthetic_corpora(so);
  }
  if (o.train.empty() || o.val.empty() || o.test.empty()) {
    throw CLI::ValidationError("data", "--train, --val and --test must be given together");
  }
  return {load_corpus(o.train), load_corpus(o.val), load_corpus(o.test)};
}

int cmd_ablate(const Options& o, std::ostream& out) {
  const TrainConfig base = read_config(o.config);
  const auto cache = read_cache(base);
  const Corpora data = read_corpora(o);
  out << "seed  arm            test_acc  mean_proto_cos\n";
  for (std::size_t s = 0; s < o.seeds; ++s) {
    TrainConfig cfg = base;
    cfg.seed = base.seed + s;
    for (const auto& row : run_ablation(cfg, data, default_ablation_arms(), cache ? &*cache : nullptr)) {
      char line[128];
      std::snprintf(line, sizeof(line), "%-5llu %-14s %-9s %s\n", static_cast<unsigned long long>(cfg.seed),
                    row.name.c_str(), fmt(row.test_accuracy).c_str(), fmt(row.mean_prototype_cosine).c_str());
      out << line;
    }
  }
  return kExitOk;
}

int cmd_sweep(const Options& o, std::ostream& out) {
  const TrainConfig cfg = read_config(o.config);
  const auto cache = read_cache(cfg);
  const SweepParam param = parse_sweep_param(o.param);
  const Corpora data = read_corpora(o);
  out << to_string(param) << "  test_acc\n";
  for (const auto& p : sweep(cfg, data, param, o.values, cache ? &*cache : nullptr)) {
    out << p.value << "  " << fmt(p.test_accuracy) << "\n";
  }
  return kExitOk;
}

int cmd_synth(const Options& o, std::ostream& out) {
  SyntheticOptions so;
  so.num_train = o.num_train;
  so.num_val = o.num_val;
  so.num_test = o.num_test;
  so.vocab_size = o.vocab;
  so.noise_length = o.noise;
  so.planted_phrases = {o.phrases0, o.phrases1};
  so.seed = o.seed;
  const SyntheticData data = generate_synthetic(so);
  fs::create_directories(o.out_dir);
  const fs::path dir(o.out_dir);
  auto write_split = [&](const SyntheticSplit& split, const std::string& name) {
    save_corpus(split.corpus, dir / (name + ".jsonl"));
    std::ofstream spans(dir / (name + "_spans.jsonl"), std::ios::binary);
    if (!spans) throw DataError("cannot write " + (dir / (name + "_spans.jsonl")).string());
    for (const auto& a : split.spans) {
      nlohmann::ordered_json j;
      j["index"] = a.index;
      j["token_start"] = a.token_start;
      j["token_end"] = a.token_end;
      j["phrase"] = a.phrase;
      spans << j.dump() << "\n";
    }
  };
  write_split(data.train, "train");
  write_split(data.val, "val");
  write_split(data.test, "test");
  out << "wrote " << data.train.corpus.size() << " train, " << data.val.corpus.size() << " val, "
      << data.test.corpus.size() << " test instances to " << o.out_dir << "\n";
  return kExitOk;
}

int cmd_gradcheck(const Options& o, std::ostream& out) {
  TrainConfig cfg = o.config.empty() ? gradcheck_config() : load_config(o.config);
  std::uint64_t seed = o.seed;
  if (std::getenv("PROTOLENS_SEED") != nullptr) {
    apply_seed_override(cfg);
    seed = cfg.seed;
  }
  const GradCheckSetup setup = make_gradcheck_setup(cfg, seed);
  const GradCheckReport report = grad_check(setup.model, setup.batch, setup.loss);
  if (o.format == "json") {
    out << report.to_json().dump(2) << "\n";
  } else {
    for (const auto& [name, e] : report.max_rel_error) {
      char line[128];
      std::snprintf(line, sizeof(line), "%-20s %.3e%s\n", name.c_str(), e, e < report.tolerance ? "" : "  FAIL");
      out << line;
    }
    char line[128];
    std::snprintf(line, sizeof(line), "max relative error %.3e (%s), %zu parameters checked\n", report.max_error,
                  report.worst_block.c_str(), report.checked);
    out << line;
  }
  return report.passed() ? kExitOk : kExitData;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Prototype-based interpretable text classifier"};
  app.name(args.empty() ? "protolens" : fs::path(args[0]).filename().string());
  app.require_subcommand(1);
  Options o;

  auto* train = app.add_subcommand("train", "Train a model and write a checkpoint");
  train->add_option("--config", o.config, "JSON config (defaults when omitted)")->check(CLI::ExistingFile);
  train->add_option("--train", o.train, "training corpus (JSON Lines)")->required();
  train->add_option("--val", o.val, "validation corpus")->required();
  train->add_option("--out", o.out, "checkpoint path")->required();

  auto* eval = app.add_subcommand("eval", "Accuracy of a checkpoint on a corpus");
  eval->add_option("--ckpt", o.ckpt)->required();
  eval->add_option("--data", o.data)->required();

  auto* explain = app.add_subcommand("explain", "Per-prototype spans and scores for texts");
  explain->add_option("--ckpt", o.ckpt)->required();
  explain->add_option("--text", o.text, "a single text");
  explain->add_option("--file", o.file, "one text per line");
  explain->add_option("--format", o.format, "text or json")->check(CLI::IsMember({"text", "json"}));
  explain->add_option("--top", o.top, "list only the N most similar prototypes (0 = all)");
  explain->add_option("--threshold", o.threshold, "mask threshold for discrete spans")->check(CLI::Range(0.0, 1.0));

  auto* protos = app.add_subcommand("prototypes", "Aligned sentence and class weight per prototype");
  protos->add_option("--ckpt", o.ckpt)->required();
  protos->add_option("--format", o.format)->check(CLI::IsMember({"text", "json"}));

  auto* ablate = app.add_subcommand("ablate", "full vs no_diversity vs no_alignment");
  ablate->add_option("--config", o.config)->check(CLI::ExistingFile);
  ablate->add_option("--train", o.train);
  ablate->add_option("--val", o.val);
  ablate->add_option("--test", o.test);
  ablate->add_option("--seeds", o.seeds, "number of consecutive seeds")->check(CLI::PositiveNumber);
  ablate->add_option("--synth-seed", o.seed, "synthetic corpus seed when no data paths are given");

  auto* sweep = app.add_subcommand("sweep", "Accuracy as a function of K or n-gram size");
  sweep->add_option("--config", o.config)->check(CLI::ExistingFile);
  sweep->add_option("--param", o.param)->required()->check(CLI::IsMember({"K", "ngram", "n_gram"}));
  sweep->add_option("--values", o.values)->required()->expected(1, -1);
  sweep->add_option("--train", o.train);
  sweep->add_option("--val", o.val);
  sweep->add_option("--test", o.test);
  sweep->add_option("--synth-seed", o.seed, "synthetic corpus seed when no data paths are given");

  auto* synth = app.add_subcommand("synth", "Write a planted-phrase corpus");
  synth->add_option("--out-dir", o.out_dir)->required();
  synth->add_option("--seed", o.seed);
  synth->add_option("--num-train", o.num_train);
  synth->add_option("--num-val", o.num_val);
  synth->add_option("--num-test", o.num_test);
  synth->add_option("--vocab", o.vocab)->check(CLI::PositiveNumber);
  synth->add_option("--noise-length", o.noise);
  synth->add_option("--class0", o.phrases0, "planted phrases of class 0");
  synth->add_option("--class1", o.phrases1, "planted phrases of class 1");

  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of every analytic gradient");
  gradcheck->add_option("--config", o.config)->check(CLI::ExistingFile);
  gradcheck->add_option("--seed", o.seed);
  gradcheck->add_option("--format", o.format)->check(CLI::IsMember({"text", "json"}));

  std::vector<const char*> argv;
  argv.reserve(args.size());
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n";
    const auto subs = app.get_subcommands();
    err << (subs.empty() ? app.help() : subs.front()->help());
    return kExitUsage;
  }

  try {
    if (*train) return cmd_train(o, out);
    if (*eval) return cmd_eval(o, out);
    if (*explain) return cmd_explain(o, out);
    if (*protos) return cmd_prototypes(o, out);
    if (*ablate) return cmd_ablate(o, out);
    if (*sweep) return cmd_sweep(o, out);
    if (*synth) return cmd_synth(o, out);
    if (*gradcheck) return cmd_gradcheck(o, out);
  } catch (const CLI::ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace protolens::cli
