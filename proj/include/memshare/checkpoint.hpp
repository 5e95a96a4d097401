#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "memshare/nn.hpp"

namespace memshare::nn {

// Versioned binary container: magic, format version, a JSON descriptor
// string, then the parameter arrays in declared order as little-endian
// 64-bit floats. Shapes and block names live in the sidecar manifest
// ("<file>.manifest.json").
inline constexpr char kCheckpointMagic[8] = {'M', 'E', 'M', 'S', 'H', 'N', 'N', '1'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(
    const std::filesystem::path& path, const std::string& descriptor_json,
    const std::vector<std::pair<std::string, const ParamMatrix*>>& blocks);

struct LoadedCheckpoint {
  std::string descriptor;
  std::vector<std::string> names;
  std::vector<ParamMatrix> blocks;
};

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

// Copies loaded blocks into an existing parameter list, validating names and
// shapes; throws IncompatibilityError with expected-vs-found shapes.
void restore_params(const LoadedCheckpoint& ck,
                    const std::vector<std::pair<std::string, ParamMatrix*>>& dest);

}  // namespace memshare::nn
