#pragma once

#include <string>

#include "ismo/nn.hpp"

namespace ismo {

// Checkpoint file: little-endian binary container of named double tensors
// plus the config hash of the run that produced it.
//   magic "ISMOCKPT", u32 version, u64 config_hash, u32 tensor count,
//   then per tensor: u32 name_len, name bytes, u32 ndim, i32 dims..., f64 data.
void save_checkpoint(const std::string& path, nn::Module& module, std::uint64_t config_hash);

// Loads into an already-constructed module of matching architecture.
// Returns the stored config hash.
std::uint64_t load_checkpoint(const std::string& path, nn::Module& module);

}  // namespace ismo
