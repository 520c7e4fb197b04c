#pragma once

#include <string>
#include <utility>
#include <vector>

#include "config.hpp"
#include "params.hpp"

namespace denssiam {

// Optimizer counters; per-parameter velocities live in the ParamStore.
struct TrainState {
  std::uint64_t step = 0;
  int epoch = 0;
};

// Checkpoint file layout:
//   "DSMC" | u32 version (LE) | u64 manifest length (LE) | manifest | payload
// The manifest is UTF-8 JSON: an ordered tensor list
// {name, shape, dtype, byte_offset, byte_len}, the effective config echo,
// optimizer counters, and a CRC32 of the payload. The payload is raw
// little-endian f32 data in manifest order. Parameter values serialize under
// their own names; velocities of trainable parameters serialize as
// "optimizer.velocity.<name>".
void save_checkpoint(const std::string& path, const ParamStoreF& store,
                     const TrainState& state, const Config& cfg);

struct LoadedCheckpoint {
  Config config;
  TrainState state;
  std::vector<std::pair<std::string, TensorF>> tensors;  // manifest order
};

// Distinct FormatErrors for: bad magic, bad version, malformed manifest,
// manifest/payload inconsistency (naming the tensor), truncated payload,
// and checksum mismatch.
LoadedCheckpoint load_checkpoint(const std::string& path);

// Copies loaded values and velocities onto the store; every store parameter
// must be present with a matching shape and no loaded tensor may be left
// over (FormatError naming the offender).
void restore_store(ParamStoreF& store, const LoadedCheckpoint& ckpt);

}  // namespace denssiam
