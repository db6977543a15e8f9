#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "marco/policy.hpp"

namespace marco {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Optimizer moments stored alongside the weights so training can resume.
struct OptimizerState {
  std::uint64_t step = 0;
  std::vector<ad::Matrix> first_moment;
  std::vector<ad::Matrix> second_moment;
};

struct Checkpoint {
  Policy policy;
  /// Number of completed training episodes (per phase for constructive runs).
  std::uint64_t episode = 0;
  /// 1 or 2 for constructive policies, 0 otherwise.
  int phase = 0;
  OptimizerState optimizer;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Binary format, little-endian throughout:
///   magic "MARCOCKP", u32 version, u8 problem, u8 kind, u8 layout, u8 attention,
///   i32 embed_dim, layers, heads, ffn_hidden, f64 tanh_clip,
///   u64 episode, i32 phase, u32 parameter count,
///   per parameter: u32 name length, name bytes, i32 rows, i32 cols, u8 trainable,
///                  rows*cols f32 values (row-major),
///   u64 optimizer step, u8 has_moments, then (if set) the moments in parameter
///   order as f32 arrays of the same shapes.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

void save_policy(const Policy& policy, const std::filesystem::path& path);
Policy load_policy(const std::filesystem::path& path);

}  // namespace marco
