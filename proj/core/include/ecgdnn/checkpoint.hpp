#pragma once

#include <string>

#include "ecgdnn/densenet.hpp"

namespace ecgdnn {

// Checkpoint file, binary, little-endian:
//   magic "ECGM" | version u32
//   config block: field count u32, per field u16 key len + key, u16 value
//     len + value (decimal strings; doubles use %.17g so they round-trip)
//   seed u64
//   tensor table: count u32, per tensor u16 name len + name, unit id u8,
//     trainable u8, dtype u8 (0 = f32), ndim u8, dims u32 x ndim, raw values

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(Model& model, const std::string& path);

/// Rebuilds the model from its config block and restores every tensor,
/// trainable flag, and the seed. Throws CorruptCheckpoint on any mismatch.
Model load_checkpoint(const std::string& path);

}  // namespace ecgdnn
