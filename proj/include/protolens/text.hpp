#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace protolens {

using Tokens = std::vector<std::string>;

/// Lowercases, splits on whitespace, and detaches ASCII punctuation into
/// single-character tokens. Non-ASCII bytes are kept as word characters.
Tokens tokenize(std::string_view text);

/// Byte range [begin, end) of a token in the original text.
struct TokenOffset {
  std::size_t begin = 0;
  std::size_t end = 0;
};

struct TokenizedText {
  Tokens tokens;
  std::vector<TokenOffset> offsets;
};

/// Same tokens as tokenize(), plus where each came from.
TokenizedText tokenize_with_offsets(std::string_view text);

struct Part {
  std::size_t start = 0;  // first token index
  std::size_t end = 0;    // one past the last token index
  std::string text;       // tokens joined by single spaces
};

/// Stride-1 windows of n tokens. Fewer than n tokens gives one part covering
/// everything, so T = max(1, token_count - n + 1).
struct PartSequence {
  std::vector<Part> parts;
  std::size_t n = 1;

  std::size_t size() const { return parts.size(); }
};

PartSequence partition_ngrams(const Tokens& tokens, std::size_t n);

/// Splits on '.', '!' and '?', trimming whitespace and dropping empty pieces.
/// The terminator stays attached to its sentence.
std::vector<std::string> split_sentences(std::string_view text);

std::string join_tokens(const Tokens& tokens, std::size_t begin, std::size_t end);

}  // namespace protolens
