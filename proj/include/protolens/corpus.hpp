#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

namespace protolens {

struct Instance {
  std::string text;
  std::size_t label = 0;

  bool operator==(const Instance&) const = default;
};

using Corpus = std::vector<Instance>;

/// Reads JSON Lines with keys "text" and "label". Blank lines are skipped.
/// Throws DataError naming the 1-based line number or the missing field.
Corpus load_corpus(const std::filesystem::path& path);

/// Parses corpus JSON Lines already in memory; `source` labels error messages.
Corpus parse_corpus(const std::string& contents, const std::string& source = "<memory>");

void save_corpus(const Corpus& corpus, const std::filesystem::path& path);

/// max label + 1, or 0 for an empty corpus.
std::size_t num_classes(const Corpus& corpus);

}  // namespace protolens
