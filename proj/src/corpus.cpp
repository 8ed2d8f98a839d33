#include "protolens/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "protolens/errors.hpp"

namespace protolens {
namespace {

bool blank(const std::string& s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c) != 0; });
}

}  // namespace

Corpus parse_corpus(const std::string& contents, const std::string& source) {
  Corpus corpus;
  std::istringstream in(contents);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line)) continue;
    const std::string where = source + ":" + std::to_string(line_no);
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError(where + ": malformed JSON (" + e.what() + ")");
    }
    if (!obj.is_object()) throw DataError(where + ": expected a JSON object");
    if (!obj.contains("text")) throw DataError(where + ": missing field \"text\"");
    if (!obj.contains("label")) throw DataError(where + ": missing field \"label\"");
    if (!obj["text"].is_string()) throw DataError(where + ": field \"text\" must be a string");
    if (!obj["label"].is_number_unsigned()) {
      throw DataError(where + ": field \"label\" must be a non-negative integer");
    }
    Instance inst{obj["text"].get<std::string>(), obj["label"].get<std::size_t>()};
    if (blank(inst.text)) throw DataError(where + ": field \"text\" is empty");
    corpus.push_back(std::move(inst));
  }
  return corpus;
}

Corpus load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open corpus " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_corpus(buf.str(), path.string());
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write corpus " + path.string());
  for (const auto& inst : corpus) {
    nlohmann::ordered_json obj;
    obj["text"] = inst.text;
    obj["label"] = inst.label;
    out << obj.dump() << '\n';
  }
}

std::size_t num_classes(const Corpus& corpus) {
  std::size_t c = 0;
  for (const auto& inst : corpus) c = std::max(c, inst.label + 1);
  return c;
}

}  // namespace protolens
