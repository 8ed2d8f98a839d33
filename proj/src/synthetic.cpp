#include "protolens/synthetic.hpp"

#include <map>

#include "protolens/errors.hpp"
#include "protolens/rng.hpp"
#include "protolens/text.hpp"

namespace protolens {

std::string filler_word(std::size_t i) { return "w" + std::to_string(i); }

namespace {

SyntheticSplit make_split(const SyntheticOptions& opts, std::size_t count, Rng& rng) {
  const std::size_t classes = opts.planted_phrases.size();
  std::vector<std::size_t> labels(count);
  for (std::size_t i = 0; i < count; ++i) labels[i] = i % classes;
  rng.shuffle(std::span<std::size_t>(labels));

  SyntheticSplit split;
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t label = labels[i];
    const auto& phrases = opts.planted_phrases[label];
    const std::string& phrase = phrases[rng.below(phrases.size())];
    const Tokens phrase_tokens = tokenize(phrase);

    Tokens noise(opts.noise_length);
    for (auto& tok : noise) tok = filler_word(rng.below(opts.vocab_size));
    const std::size_t pos = rng.below(opts.noise_length + 1);

    Tokens all(noise.begin(), noise.begin() + static_cast<std::ptrdiff_t>(pos));
    all.insert(all.end(), phrase_tokens.begin(), phrase_tokens.end());
    all.insert(all.end(), noise.begin() + static_cast<std::ptrdiff_t>(pos), noise.end());

    split.corpus.push_back({join_tokens(all, 0, all.size()), label});
    split.spans.push_back({i, pos, pos + phrase_tokens.size(), join_tokens(phrase_tokens, 0, phrase_tokens.size())});
  }
  return split;
}

}  // namespace

SyntheticData generate_synthetic(const SyntheticOptions& opts) {
  if (opts.planted_phrases.size() < 2) throw InvalidParameter("generate_synthetic: need at least two classes");
  if (opts.vocab_size == 0) throw InvalidParameter("generate_synthetic: vocab_size must be positive");
  std::map<std::string, std::size_t> owner;
  for (std::size_t c = 0; c < opts.planted_phrases.size(); ++c) {
    if (opts.planted_phrases[c].empty()) {
      throw InvalidParameter("generate_synthetic: class " + std::to_string(c) + " has no planted phrases");
    }
    for (const auto& phrase : opts.planted_phrases[c]) {
      const Tokens toks = tokenize(phrase);
      if (toks.empty()) throw InvalidParameter("generate_synthetic: empty planted phrase");
      const std::string key = join_tokens(toks, 0, toks.size());
      auto [it, inserted] = owner.emplace(key, c);
      if (!inserted && it->second != c) {
        throw InvalidParameter("generate_synthetic: phrase \"" + key + "\" planted in classes " +
                               std::to_string(it->second) + " and " + std::to_string(c));
      }
    }
  }

  Rng rng(opts.seed);
  SyntheticData data;
  data.train = make_split(opts, opts.num_train, rng);
  data.val = make_split(opts, opts.num_val, rng);
  data.test = make_split(opts, opts.num_test, rng);
  return data;
}

}  // namespace protolens
