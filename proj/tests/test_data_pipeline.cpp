#include <doctest.h>

#include <algorithm>
#include <set>

#include "protolens/corpus.hpp"
#include "protolens/errors.hpp"
#include "protolens/synthetic.hpp"
#include "protolens/text.hpp"
#include "support.hpp"

using namespace protolens;
using protolens::testing::TempDir;

namespace {

std::vector<std::string> part_texts(const PartSequence& ps) {
  std::vector<std::string> out;
  for (const auto& p : ps.parts) out.push_back(p.text);
  return out;
}

std::size_t expected_parts(std::size_t tokens, std::size_t n) {
  return tokens < n ? 1 : tokens - n + 1;
}

}  // namespace

TEST_SUITE("data_pipeline") {

TEST_CASE("tokenize lowercases and detaches punctuation") {
  CHECK(tokenize("The movie was great!") == Tokens{"the", "movie", "was", "great", "!"});
  CHECK(tokenize("").empty());
  CHECK(tokenize("A  B") == Tokens{"a", "b"});
  CHECK(tokenize("  \t\n ").empty());
  CHECK(tokenize("don't,stop") == Tokens{"don", "'", "t", ",", "stop"});
}

TEST_CASE("token offsets index the original bytes") {
  const std::string text = "Hello,  World!";
  const TokenizedText tt = tokenize_with_offsets(text);
  REQUIRE(tt.tokens.size() == tt.offsets.size());
  CHECK(tt.tokens == Tokens{"hello", ",", "world", "!"});
  CHECK(text.substr(tt.offsets[2].begin, tt.offsets[2].end - tt.offsets[2].begin) == "World");
}

TEST_CASE("partition_ngrams windows") {
  const Tokens abcd{"a", "b", "c", "d"};
  const PartSequence two = partition_ngrams(abcd, 2);
  CHECK(part_texts(two) == std::vector<std::string>{"a b", "b c", "c d"});
  CHECK(two.size() == 3);
  CHECK(two.parts[1].start == 1);
  CHECK(two.parts[1].end == 3);

  const PartSequence short_text = partition_ngrams({"a", "b"}, 5);
  CHECK(part_texts(short_text) == std::vector<std::string>{"a b"});

  CHECK(partition_ngrams(abcd, 1).size() == abcd.size());
  CHECK(partition_ngrams({}, 3).size() == 1);
  CHECK_THROWS_AS(partition_ngrams(abcd, 0), InvalidParameter);
}

TEST_CASE("partition reconstructs every token and matches the count formula") {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t len = rng.below(20);
    const std::size_t n = 1 + rng.below(7);
    Tokens toks;
    for (std::size_t i = 0; i < len; ++i) toks.push_back("t" + std::to_string(rng.below(5)));
    const PartSequence ps = partition_ngrams(toks, n);
    REQUIRE(ps.size() == expected_parts(len, n));
    std::vector<int> covered(len, 0);
    for (const auto& p : ps.parts) {
      CHECK(p.end - p.start == std::min(n, len));
      CHECK(p.text == join_tokens(toks, p.start, p.end));
      for (std::size_t i = p.start; i < p.end; ++i) covered[i]++;
    }
    CHECK(std::all_of(covered.begin(), covered.end(), [](int c) { return c >= 1; }));
  }
}

TEST_CASE("split_sentences") {
  CHECK(split_sentences("One. Two! Three?") == std::vector<std::string>{"One.", "Two!", "Three?"});
  CHECK(split_sentences("Wait?! no trailing") == std::vector<std::string>{"Wait?!", "no trailing"});
  CHECK(split_sentences("...").empty());
  CHECK(split_sentences("").empty());
}

TEST_CASE("parse_corpus") {
  const Corpus c = parse_corpus("{\"text\":\"good\",\"label\":1}\n\n{\"text\":\"bad\",\"label\":0}\n");
  REQUIRE(c.size() == 2);
  CHECK(c[0] == Instance{"good", 1});
  CHECK(c[1] == Instance{"bad", 0});
  CHECK(num_classes(c) == 2);
  CHECK(num_classes(parse_corpus("{\"text\":\"x\",\"label\":3}")) == 4);
}

TEST_CASE("parse_corpus errors name the line and field") {
  auto message_of = [](const std::string& contents) {
    try {
      parse_corpus(contents, "f.jsonl");
    } catch (const DataError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  const std::string missing_text = message_of("{\"text\":\"a\",\"label\":0}\n{\"label\":1}\n");
  CHECK(missing_text.find("f.jsonl:2") != std::string::npos);
  CHECK(missing_text.find("\"text\"") != std::string::npos);
  CHECK(message_of("{\"text\":\"a\"}").find("\"label\"") != std::string::npos);
  CHECK(message_of("{\"text\":\"a\",\"label\":0}\n{not json\n").find("f.jsonl:2") != std::string::npos);
  CHECK(message_of("{\"text\":\"a\",\"label\":-1}") != "");
  CHECK(message_of("{\"text\":\"a\",\"label\":\"x\"}") != "");
}

TEST_CASE("load_corpus round trip and missing file") {
  TempDir dir;
  const Corpus c{{"first \"quoted\"", 0}, {"second", 1}};
  save_corpus(c, dir / "c.jsonl");
  CHECK(load_corpus(dir / "c.jsonl") == c);
  CHECK_THROWS_AS(load_corpus(dir / "missing.jsonl"), DataError);
}

TEST_CASE("generate_synthetic is deterministic and well-formed") {
  SyntheticOptions opts;
  opts.seed = 5;
  opts.num_val = 20;
  const SyntheticData a = generate_synthetic(opts);
  const SyntheticData b = generate_synthetic(opts);
  CHECK(a.train.corpus == b.train.corpus);
  CHECK(a.test.corpus == b.test.corpus);
  CHECK(a.train.spans == b.train.spans);

  REQUIRE(a.train.corpus.size() == 400);
  CHECK(a.test.corpus.size() == 100);
  CHECK(a.val.corpus.size() == 20);
  std::size_t ones = 0;
  for (const auto& inst : a.train.corpus) ones += inst.label;
  CHECK(ones >= 199);
  CHECK(ones <= 201);

  opts.seed = 6;
  CHECK(generate_synthetic(opts).train.corpus != a.train.corpus);
}

TEST_CASE("synthetic annotations locate the planted phrase") {
  SyntheticOptions opts;
  opts.seed = 1;
  const SyntheticData data = generate_synthetic(opts);
  for (const SyntheticSplit* split : {&data.train, &data.test}) {
    REQUIRE(split->spans.size() == split->corpus.size());
    for (const auto& a : split->spans) {
      const Instance& inst = split->corpus[a.index];
      const Tokens toks = tokenize(inst.text);
      CHECK(toks.size() == opts.noise_length + 3);
      CHECK(join_tokens(toks, a.token_start, a.token_end) == a.phrase);
      CHECK(a.phrase == opts.planted_phrases[inst.label][0]);
    }
  }
}

TEST_CASE("phrase-scanning rule predicts every synthetic label") {
  SyntheticOptions opts;
  opts.seed = 9;
  opts.planted_phrases = {{"truly awful plot", "so very dull"}, {"really great acting"}};
  const SyntheticData data = generate_synthetic(opts);
  for (const auto& inst : data.train.corpus) {
    std::size_t predicted = 99;
    for (std::size_t c = 0; c < opts.planted_phrases.size(); ++c)
      for (const auto& ph : opts.planted_phrases[c])
        if (inst.text.find(ph) != std::string::npos) predicted = c;
    CHECK(predicted == inst.label);
  }
}

TEST_CASE("generate_synthetic rejects bad phrase sets") {
  SyntheticOptions opts;
  opts.planted_phrases = {{"same phrase"}, {"same phrase"}};
  CHECK_THROWS_AS(generate_synthetic(opts), InvalidParameter);
  opts.planted_phrases = {{"a b"}, {}};
  CHECK_THROWS_AS(generate_synthetic(opts), InvalidParameter);
  opts.planted_phrases = {{"a b"}};
  CHECK_THROWS_AS(generate_synthetic(opts), InvalidParameter);
}

}  // TEST_SUITE
