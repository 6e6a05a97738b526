#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include "refocus/flow/velocity_net.hpp"

namespace refocus::flow {

inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Layout, all integers little-endian u32:
//   "RFCKPT\0\0" | version | descriptor length | descriptor JSON | d_emb |
//   parameter count | per parameter: name length, name, rank, dims, f32 data
// Values are stored as little-endian IEEE binary32.
std::string serialize_checkpoint(const ConvVelocityNet& model);
ConvVelocityNet deserialize_checkpoint(const std::string& bytes);

void save_checkpoint(const std::filesystem::path& path, const ConvVelocityNet& model);
ConvVelocityNet load_checkpoint(const std::filesystem::path& path);

std::string architecture_to_json(const NetArchitecture& arch);
NetArchitecture architecture_from_json(const std::string& text);

}  // namespace refocus::flow
