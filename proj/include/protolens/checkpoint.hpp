#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "protolens/prototype_model.hpp"
#include "protolens/trainer.hpp"

namespace protolens {

inline constexpr char kCheckpointMagic[4] = {'P', 'L', 'N', 'S'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  Model model;
  nlohmann::ordered_json config = nlohmann::ordered_json::object();
  std::vector<EpochStats> history;
};

/// Layout: "PLNS", u32 version, u64 length + JSON header (dims, block table,
/// config echo), parameter blocks as little-endian f64 in declared order,
/// u64 length + JSON alignment log, u64 length + JSON history.
std::string serialize_checkpoint(const Checkpoint& ckpt);
/// Throws DataError on bad magic, version mismatch, truncation or shape mismatch.
Checkpoint deserialize_checkpoint(const std::string& bytes);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

nlohmann::ordered_json alignment_to_json(const std::vector<AlignmentRecord>& log);
std::vector<AlignmentRecord> alignment_from_json(const nlohmann::json& j);

nlohmann::ordered_json dims_to_json(const ModelDims& dims);
ModelDims dims_from_json(const nlohmann::json& j);

}  // namespace protolens
