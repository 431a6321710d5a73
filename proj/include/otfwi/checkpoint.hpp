#pragma once

#include <filesystem>
#include <string>

#include "otfwi/diffusion.hpp"
#include "otfwi/score_net.hpp"

namespace otfwi {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Prior {
  ScoreNet net;
  FieldScaler scaler;
};

/// Byte layout is described in docs/checkpoint.md. Weights are stored as
/// little-endian float32, so a net must already be float-representable.
std::string serialize_checkpoint(const ScoreNet& net, const FieldScaler& scaler);
Prior parse_checkpoint(const std::string& bytes);

void save_checkpoint(const std::filesystem::path& path, const ScoreNet& net, const FieldScaler& scaler);
Prior load_checkpoint(const std::filesystem::path& path);

}  // namespace otfwi
