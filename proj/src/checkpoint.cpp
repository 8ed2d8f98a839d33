#include "protolens/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "protolens/errors.hpp"

namespace protolens {
namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_blob(std::string& out, const std::string& blob) {
  put_u64(out, blob.size());
  out += blob;
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) throw DataError(std::string("checkpoint truncated while reading ") + what);
  }

  std::uint64_t u(int width, const char* what) {
    need(static_cast<std::size_t>(width), what);
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + static_cast<std::size_t>(i)])) << (8 * i);
    }
    pos_ += static_cast<std::size_t>(width);
    return v;
  }

  std::string blob(const char* what) {
    const std::uint64_t n = u(8, what);
    need(n, what);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  std::string raw(std::size_t n, const char* what) {
    need(n, what);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

nlohmann::json parse_section(const std::string& text, const char* what) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(std::string("checkpoint: corrupt ") + what + " (" + e.what() + ")");
  }
}

}  // namespace

nlohmann::ordered_json dims_to_json(const ModelDims& d) {
  nlohmann::ordered_json j;
  j["K"] = d.prototypes;
  j["C"] = d.classes;
  j["d"] = d.embed_dim;
  j["hash_dim"] = d.hash_dim;
  j["M"] = d.components;
  j["hidden"] = d.hidden;
  j["T_max"] = d.t_max;
  j["n_gram"] = d.n_gram;
  j["R"] = d.smoothness;
  j["union_mask"] = d.union_mask;
  return j;
}

ModelDims dims_from_json(const nlohmann::json& j) {
  ModelDims d;
  d.prototypes = j.at("K").get<std::size_t>();
  d.classes = j.at("C").get<std::size_t>();
  d.embed_dim = j.at("d").get<std::size_t>();
  d.hash_dim = j.at("hash_dim").get<std::size_t>();
  d.components = j.at("M").get<std::size_t>();
  d.hidden = j.at("hidden").get<std::size_t>();
  d.t_max = j.at("T_max").get<std::size_t>();
  d.n_gram = j.at("n_gram").get<std::size_t>();
  d.smoothness = j.at("R").get<double>();
  d.union_mask = j.at("union_mask").get<bool>();
  return d;
}

nlohmann::ordered_json alignment_to_json(const std::vector<AlignmentRecord>& log) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& r : log) {
    nlohmann::ordered_json j;
    j["prototype"] = r.prototype;
    j["epoch"] = r.epoch;
    j["displacement"] = r.displacement;
    j["sentences"] = r.sentences;
    arr.push_back(std::move(j));
  }
  return arr;
}

std::vector<AlignmentRecord> alignment_from_json(const nlohmann::json& j) {
  std::vector<AlignmentRecord> out;
  for (const auto& e : j) {
    AlignmentRecord r;
    r.prototype = e.at("prototype").get<std::size_t>();
    r.epoch = e.at("epoch").get<std::size_t>();
    r.displacement = e.at("displacement").get<double>();
    r.sentences = e.at("sentences").get<std::vector<std::string>>();
    out.push_back(std::move(r));
  }
  return out;
}

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  nlohmann::ordered_json header;
  header["dims"] = dims_to_json(ckpt.model.dims);
  header["blocks"] = nlohmann::ordered_json::array();
  for_each_block(ckpt.model, [&](const char* name, const auto& block) {
    header["blocks"].push_back({{"name", name}, {"size", block.size()}});
  });
  header["config"] = ckpt.config;

  std::string out(kCheckpointMagic, sizeof(kCheckpointMagic));
  put_u32(out, kCheckpointVersion);
  put_blob(out, header.dump());
  for_each_block(ckpt.model, [&](const char*, const auto& block) {
    for (Eigen::Index i = 0; i < block.size(); ++i) put_u64(out, std::bit_cast<std::uint64_t>(block.data()[i]));
  });
  put_blob(out, alignment_to_json(ckpt.model.alignment).dump());
  put_blob(out, history_to_json(ckpt.history).dump());
  return out;
}

Checkpoint deserialize_checkpoint(const std::string& bytes) {
  Reader in(bytes);
  if (in.raw(4, "magic") != std::string(kCheckpointMagic, 4)) throw DataError("checkpoint: bad magic bytes");
  const auto version = static_cast<std::uint32_t>(in.u(4, "version"));
  if (version != kCheckpointVersion) {
    throw DataError("checkpoint: unsupported format version " + std::to_string(version) + " (expected " +
                    std::to_string(kCheckpointVersion) + ")");
  }
  const std::string header_text = in.blob("header");
  const nlohmann::json header = parse_section(header_text, "header");

  Checkpoint ckpt;
  try {
    const ModelDims dims = dims_from_json(header.at("dims"));
    dims.validate();
    ckpt.model = Model(dims);
    // Reparsed with key order kept so a reload serializes to the same bytes.
    ckpt.config = nlohmann::ordered_json::parse(header_text).at("config");
    const auto& table = header.at("blocks");
    std::size_t b = 0;
    for_each_block(ckpt.model, [&](const char* name, const auto& block) {
      if (b >= table.size() || table[b].at("name").get<std::string>() != name ||
          table[b].at("size").get<std::int64_t>() != block.size()) {
        throw DataError(std::string("checkpoint: block table does not match dimensions at ") + name);
      }
      ++b;
    });
    if (b != table.size()) throw DataError("checkpoint: unexpected extra parameter blocks");
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("checkpoint: corrupt header (") + e.what() + ")");
  } catch (const ConfigError& e) {
    throw DataError(std::string("checkpoint: invalid dimensions (") + e.what() + ")");
  }

  for_each_block(ckpt.model, [&](const char*, auto& block) {
    for (Eigen::Index i = 0; i < block.size(); ++i) block.data()[i] = std::bit_cast<double>(in.u(8, "parameters"));
  });
  try {
    ckpt.model.alignment = alignment_from_json(parse_section(in.blob("alignment log"), "alignment log"));
    ckpt.history = history_from_json(parse_section(in.blob("history"), "history"));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("checkpoint: corrupt trailer (") + e.what() + ")");
  }
  if (!in.done()) throw DataError("checkpoint: trailing bytes after history");
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const std::string bytes = serialize_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return deserialize_checkpoint(buf.str());
}

}  // namespace protolens
