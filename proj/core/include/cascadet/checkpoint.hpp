#pragma once

// Parameter checkpoint file.
//
// Layout (all integers unsigned 32-bit little-endian):
//   magic    8 bytes  "CSDTCKPT"
//   version  u32      currently 1
//   count    u32      number of parameters
//   count times:
//     name_len u32, name bytes (no terminator)
//     rank     u32, then rank extents (u32 each)
//     product(extents) IEEE-754 binary32 values, little-endian
//
// Records appear in the order they were given to save_checkpoint.

#include <filesystem>
#include <string>
#include <vector>

#include "cascadet/tensor.hpp"

namespace cascadet {

inline constexpr char kCheckpointMagic[8] = {'C', 'S', 'D', 'T', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct ParamRecord {
  std::string name;
  Shape shape;
  std::vector<float> values;

  bool operator==(const ParamRecord&) const = default;
};

std::vector<char> encode_checkpoint(const std::vector<ParamRecord>& params);
std::vector<ParamRecord> decode_checkpoint(const std::vector<char>& bytes);

void save_checkpoint(const std::filesystem::path& path, const std::vector<ParamRecord>& params);
std::vector<ParamRecord> load_checkpoint(const std::filesystem::path& path);

}  // namespace cascadet
