#include "memshare/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "memshare/errors.hpp"

namespace memshare::nn {

namespace {

void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

void put_f64(std::ostream& os, double d) {
  std::uint64_t bits;
  std::memcpy(&bits, &d, 8);
  put_u64(os, bits);
}

std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

std::uint64_t get_u64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

double get_f64(std::istream& is) {
  const std::uint64_t bits = get_u64(is);
  double d;
  std::memcpy(&d, &bits, 8);
  return d;
}

std::filesystem::path manifest_path(const std::filesystem::path& p) {
  return std::filesystem::path(p.string() + ".manifest.json");
}

}  // namespace

void save_checkpoint(
    const std::filesystem::path& path, const std::string& descriptor_json,
    const std::vector<std::pair<std::string, const ParamMatrix*>>& blocks) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot open checkpoint for writing: " + path.string());
  os.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  put_u32(os, kCheckpointVersion);
  put_u32(os, static_cast<std::uint32_t>(descriptor_json.size()));
  os.write(descriptor_json.data(), static_cast<std::streamsize>(descriptor_json.size()));
  put_u32(os, static_cast<std::uint32_t>(blocks.size()));
  nlohmann::json manifest;
  manifest["format"] = "memshare-checkpoint";
  manifest["version"] = kCheckpointVersion;
  manifest["descriptor"] = nlohmann::json::parse(descriptor_json);
  manifest["blocks"] = nlohmann::json::array();
  for (const auto& [name, mat] : blocks) {
    put_u64(os, static_cast<std::uint64_t>(mat->values.size()));
    for (double v : mat->values) put_f64(os, v);
    manifest["blocks"].push_back(
        {{"name", name}, {"rows", mat->rows}, {"cols", mat->cols}});
  }
  if (!os) throw ConfigError("checkpoint write failed: " + path.string());
  std::ofstream ms(manifest_path(path));
  if (!ms) throw ConfigError("cannot write checkpoint manifest for " + path.string());
  ms << manifest.dump(2) << "\n";
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot open checkpoint: " + path.string());
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kCheckpointMagic, 8) != 0) {
    throw ConfigError("not a memshare checkpoint: " + path.string());
  }
  const std::uint32_t version = get_u32(is);
  if (version != kCheckpointVersion) {
    throw ConfigError("unsupported checkpoint version " + std::to_string(version));
  }
  const std::uint32_t desc_len = get_u32(is);
  std::string descriptor(desc_len, '\0');
  is.read(descriptor.data(), desc_len);
  const std::uint32_t n_blocks = get_u32(is);

  std::ifstream ms(manifest_path(path));
  if (!ms) throw ConfigError("missing checkpoint manifest for " + path.string());
  nlohmann::json manifest = nlohmann::json::parse(ms);

  LoadedCheckpoint out;
  out.descriptor = descriptor;
  const auto& blocks = manifest.at("blocks");
  if (blocks.size() != n_blocks) {
    throw ConfigError("checkpoint manifest block count mismatch: " + path.string());
  }
  for (std::uint32_t i = 0; i < n_blocks; ++i) {
    const std::uint64_t count = get_u64(is);
    ParamMatrix m;
    m.rows = blocks[i].at("rows").get<int>();
    m.cols = blocks[i].at("cols").get<int>();
    if (static_cast<std::uint64_t>(m.rows) * m.cols != count) {
      throw ConfigError("checkpoint block size does not match manifest shape");
    }
    m.values.resize(count);
    for (std::uint64_t j = 0; j < count; ++j) m.values[j] = get_f64(is);
    out.names.push_back(blocks[i].at("name").get<std::string>());
    out.blocks.push_back(std::move(m));
  }
  if (!is) throw ConfigError("truncated checkpoint: " + path.string());
  return out;
}

void restore_params(const LoadedCheckpoint& ck,
                    const std::vector<std::pair<std::string, ParamMatrix*>>& dest) {
  if (ck.blocks.size() != dest.size()) {
    throw IncompatibilityError("checkpoint has " + std::to_string(ck.blocks.size()) +
                               " blocks, expected " + std::to_string(dest.size()));
  }
  for (size_t i = 0; i < dest.size(); ++i) {
    const auto& [name, mat] = dest[i];
    if (ck.names[i] != name) {
      throw IncompatibilityError("checkpoint block " + std::to_string(i) + " is '" +
                                 ck.names[i] + "', expected '" + name + "'");
    }
    if (ck.blocks[i].rows != mat->rows || ck.blocks[i].cols != mat->cols) {
      throw IncompatibilityError(
          "checkpoint block '" + name + "' shape " +
          std::to_string(ck.blocks[i].rows) + "x" + std::to_string(ck.blocks[i].cols) +
          ", expected " + std::to_string(mat->rows) + "x" + std::to_string(mat->cols));
    }
    *mat = ck.blocks[i];
  }
}

}  // namespace memshare::nn
