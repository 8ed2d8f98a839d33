#include "protolens/text.hpp"

#include <algorithm>
#include <cctype>

#include "protolens/errors.hpp"

namespace protolens {
namespace {

bool is_space(unsigned char c) { return std::isspace(c) != 0; }

// Only ASCII punctuation is detached; UTF-8 continuation bytes are >= 0x80.
bool is_punct(unsigned char c) { return c < 0x80 && std::ispunct(c) != 0; }

char lower(unsigned char c) { return c < 0x80 ? static_cast<char>(std::tolower(c)) : static_cast<char>(c); }

}  // namespace

TokenizedText tokenize_with_offsets(std::string_view text) {
  TokenizedText out;
  std::size_t i = 0;
  while (i < text.size()) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (is_space(c)) {
      ++i;
      continue;
    }
    if (is_punct(c)) {
      out.tokens.emplace_back(1, static_cast<char>(c));
      out.offsets.push_back({i, i + 1});
      ++i;
      continue;
    }
    const std::size_t begin = i;
    std::string word;
    while (i < text.size()) {
      const auto w = static_cast<unsigned char>(text[i]);
      if (is_space(w) || is_punct(w)) break;
      word.push_back(lower(w));
      ++i;
    }
    out.tokens.push_back(std::move(word));
    out.offsets.push_back({begin, i});
  }
  return out;
}

Tokens tokenize(std::string_view text) { return tokenize_with_offsets(text).tokens; }

std::string join_tokens(const Tokens& tokens, std::size_t begin, std::size_t end) {
  std::string out;
  for (std::size_t i = begin; i < end; ++i) {
    if (i > begin) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

PartSequence partition_ngrams(const Tokens& tokens, std::size_t n) {
  if (n == 0) throw InvalidParameter("partition_ngrams: n-gram size must be >= 1");
  PartSequence seq;
  seq.n = n;
  if (tokens.size() <= n) {
    seq.parts.push_back({0, tokens.size(), join_tokens(tokens, 0, tokens.size())});
    return seq;
  }
  const std::size_t count = tokens.size() - n + 1;
  seq.parts.reserve(count);
  for (std::size_t t = 0; t < count; ++t) {
    seq.parts.push_back({t, t + n, join_tokens(tokens, t, t + n)});
  }
  return seq;
}

std::vector<std::string> split_sentences(std::string_view text) {
  std::vector<std::string> out;
  auto flush = [&](std::size_t begin, std::size_t end) {
    while (begin < end && is_space(static_cast<unsigned char>(text[begin]))) ++begin;
    while (end > begin && is_space(static_cast<unsigned char>(text[end - 1]))) --end;
    if (end > begin) out.emplace_back(text.substr(begin, end - begin));
  };
  std::size_t start = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c == '.' || c == '!' || c == '?') {
      // Runs like "?!" or "..." end a single sentence.
      std::size_t j = i + 1;
      while (j < text.size() && (text[j] == '.' || text[j] == '!' || text[j] == '?')) ++j;
      flush(start, j);
      start = j;
      i = j - 1;
    }
  }
  flush(start, text.size());
  // A sentence made only of terminators carries no content.
  std::erase_if(out, [](const std::string& s) {
    return std::all_of(s.begin(), s.end(), [](char c) { return c == '.' || c == '!' || c == '?'; });
  });
  return out;
}

}  // namespace protolens
