#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "protolens/corpus.hpp"

namespace protolens {

/// Planted-phrase corpus: every instance is uniform filler noise with exactly
/// one phrase of its class inserted. Labels are therefore perfectly
/// predictable by scanning for the phrases.
struct SyntheticOptions {
  std::size_t num_train = 400;
  std::size_t num_val = 0;
  std::size_t num_test = 100;
  std::size_t vocab_size = 200;  // filler vocabulary size
  std::size_t noise_length = 30;
  /// planted_phrases[c] lists the phrases of class c.
  std::vector<std::vector<std::string>> planted_phrases = {{"truly awful plot"}, {"really great acting"}};
  std::uint64_t seed = 0;
};

/// Token range [token_start, token_end) of the planted phrase in one instance.
struct SpanAnnotation {
  std::size_t index = 0;  // instance index within its split
  std::size_t token_start = 0;
  std::size_t token_end = 0;
  std::string phrase;

  bool operator==(const SpanAnnotation&) const = default;
};

struct SyntheticSplit {
  Corpus corpus;
  std::vector<SpanAnnotation> spans;
};

struct SyntheticData {
  SyntheticSplit train;
  SyntheticSplit val;
  SyntheticSplit test;
};

/// Throws InvalidParameter when a phrase is listed under two classes, when a
/// class has no phrases, or when fewer than two classes are given.
SyntheticData generate_synthetic(const SyntheticOptions& opts);

/// Filler words are "w0" .. "w{vocab_size-1}".
std::string filler_word(std::size_t i);

}  // namespace protolens
