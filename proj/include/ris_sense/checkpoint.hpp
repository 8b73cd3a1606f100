#pragma once

#include <cstdint>
#include <filesystem>
#include <json.hpp>

#include "ris_sense/model.hpp"

namespace ris::nn {

/// Checkpoint layout (all integers little-endian):
///
///   offset 0   4 bytes   magic "CCNN"
///   offset 4   uint32    format version (currently 1)
///   offset 8   uint32    header length H in bytes
///   offset 12  H bytes   UTF-8 JSON header
///   then       float32   payload: every tensor of parameter_names() in
///                        order, then every tensor of buffer_names()
///
/// The header lists architecture, tensor names and shapes, the parameter
/// count, the stored value count, the seed and free-form training metadata.
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointInfo {
    std::uint32_t version = kCheckpointVersion;
    nlohmann::json header;
};

void save_checkpoint(const CcnnModel& model, const std::filesystem::path& path, std::uint64_t seed,
                     const nlohmann::json& training = nlohmann::json::object());

CcnnModel load_checkpoint(const std::filesystem::path& path);
CheckpointInfo read_checkpoint_info(const std::filesystem::path& path);

nlohmann::json architecture_to_json(const Architecture& arch);
Architecture architecture_from_json(const nlohmann::json& j);

}  // namespace ris::nn
