#pragma once

#include <cstdint>
#include <string>

#include "boxseg/instance.hpp"
#include "boxseg/model_config.hpp"
#include "boxseg/param_store.hpp"

namespace boxseg {

struct CheckpointMeta {
  std::uint32_t stage = 0;  // 0 detector, 1 semantic, 2 instance
  std::uint64_t step = 0;
  std::uint64_t rng_state = 0;
};

// Binary format, little-endian, tensors ordered by name:
//   "BSCK" | u32 version | u32 stage | u64 step | u64 rng_state |
//   u32 n_tensors | { u32 name_len | name | u32 rank | i32 dims[rank] |
//                     f32 data[numel] }*
// Readback of a freshly written file is bit-exact; malformed input fails
// with the offending byte offset.
void save_checkpoint(const ParamStore& params, const CheckpointMeta& meta,
                     const std::string& path);

struct LoadedCheckpoint {
  ParamStore params;
  CheckpointMeta meta;
};
LoadedCheckpoint load_checkpoint(const std::string& path);

// Reads the architecture back out of parameter shapes so evaluation does not
// need a separate config file. `image_size` is left at its default; callers
// set it from the images they feed in.
ModelConfig infer_model_config(const ParamStore& params);
// Mask grid size k of the instance head, from its channel count 2*k*k.
int infer_ps_grid(const ParamStore& params);

}  // namespace boxseg
