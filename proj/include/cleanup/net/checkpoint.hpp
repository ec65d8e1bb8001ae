#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cleanup/net/policy_net.hpp"
#include "cleanup/reputation/reputation.hpp"

namespace cleanup::net {

/// Everything needed to resume or evaluate one agent.
///
/// File layout (little-endian):
///   "CLNCKPT\0"  u32 version  u32 meta_len  meta (JSON)
///   u32 tensor_count, then per tensor: u32 name_len, name, u32 rows, u32 cols, f32[rows*cols]
/// Network tensors use their layout names; optimizer accumulators are
/// prefixed with "rmsprop/".
struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  int agent_id = 0;
  std::string condition;
  reputation::ReputationParams reputation;
  NetConfig net;
  std::int64_t steps_consumed = 0;
  std::int64_t updates = 0;
  std::vector<float> params;
  std::vector<float> accumulators;

  bool operator==(const Checkpoint&) const = default;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Checkpoints in `dir` named agent_*.ckpt, ordered by agent id.
std::vector<Checkpoint> load_checkpoint_dir(const std::filesystem::path& dir);

}  // namespace cleanup::net
