#pragma once

// Named-tensor checkpoint container. Layout (all integers little-endian):
//
//   bytes 0..7   magic "SWNFCKPT"
//   u32          version (1)
//   u32          reserved (0)
//   u64          config length, followed by that many bytes of config echo
//                (key=value lines)
//   u64          tensor count
//   per tensor:  u32 name length; name bytes; u32 dtype (0 = f32, 1 = f64);
//                u32 rank; u64 dims[rank]; u64 payload offset; u64 payload
//                bytes
//   u64          payload total bytes
//   payload blob (offsets relative to the blob start)

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "swinforge/common.hpp"

namespace swinforge {

enum class CheckpointDtype : uint32_t { f32 = 0, f64 = 1 };

struct CheckpointTensor {
    CheckpointDtype dtype = CheckpointDtype::f32;
    std::vector<int64_t> shape;
    std::vector<uint8_t> bytes;
};

struct Checkpoint {
    std::string config;  // key=value lines
    std::vector<std::pair<std::string, CheckpointTensor>> tensors;

    const CheckpointTensor* find(const std::string& name) const;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

// key=value line helpers for config echoes.
std::map<std::string, std::string> parse_kv(const std::string& text);

}  // namespace swinforge
