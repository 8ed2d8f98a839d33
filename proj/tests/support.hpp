#pragma once

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <Eigen/Dense>

#include "protolens/config.hpp"
#include "protolens/prototype_model.hpp"
#include "protolens/synthetic.hpp"
#include "protolens/rng.hpp"

namespace protolens::testing {

/// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("protolens_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  out << contents;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

inline Eigen::VectorXd random_vector(Rng& rng, Eigen::Index n, double scale = 1.0) {
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = scale * rng.normal();
  return v;
}

inline Eigen::MatrixXd random_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double scale = 1.0) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = scale * rng.normal();
  return m;
}

/// Model of the given shape with every parameter drawn from N(0, scale^2);
/// RMSNorm gains are drawn around 1.
inline Model random_model(const ModelDims& dims, std::uint64_t seed, double scale = 0.5) {
  Model model(dims);
  Rng rng(seed);
  for_each_block(model, [&](const std::string& name, auto& block) {
    for (Eigen::Index i = 0; i < block.size(); ++i) block.data()[i] = scale * rng.normal();
    if (name == "bank.rms_gain") block.array() += 1.0;
  });
  return model;
}

/// d=8, K=3, M=2, trigrams; an eight-token text gives T=6.
inline ModelDims tiny_dims() {
  ModelDims d;
  d.prototypes = 3;
  d.classes = 2;
  d.embed_dim = 8;
  d.hash_dim = 32;
  d.components = 2;
  d.hidden = 8;
  d.t_max = 8;
  d.n_gram = 3;
  d.smoothness = 1.5;
  return d;
}

/// A few-second training setup on a short planted-phrase corpus.
inline TrainConfig small_config() {
  TrainConfig cfg;
  cfg.K = 3;
  cfg.M = 3;
  cfg.n_gram = 3;
  cfg.d = 16;
  cfg.hash_dim = 256;
  cfg.T_max = 32;
  cfg.hidden = 16;
  cfg.epochs = 3;
  cfg.batch_size = 8;
  cfg.learning_rate = 1e-3;
  cfg.span_init_sigma = 4.0;
  cfg.alignment.per_cluster_top = 10;
  return cfg;
}

inline SyntheticOptions small_synthetic(std::uint64_t seed) {
  SyntheticOptions opts;
  opts.num_train = 60;
  opts.num_val = 20;
  opts.num_test = 20;
  opts.noise_length = 12;
  opts.vocab_size = 50;
  opts.seed = seed;
  return opts;
}

}  // namespace protolens::testing
