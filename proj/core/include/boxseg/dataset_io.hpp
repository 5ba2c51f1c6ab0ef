#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "boxseg/synth.hpp"

namespace boxseg {

// On-disk layout, one triple per sample index i (zero-padded to 5 digits):
//   NNNNN.ppm       RGB image
//   NNNNN.inst.pgm  per-pixel instance index, 0 = background
//   NNNNN.json      {"schema_version":1,"has_mask":...,"instances":[
//                      {"class":c,"box":[x_min,y_min,x_max,y_max]},...]}
// Files not matching this pattern are ignored on read.
void write_dataset(const std::vector<SynthSample>& samples,
                   const std::string& dir);
std::vector<SynthSample> read_dataset(const std::string& dir);

// Marks ceil(mask_fraction * n) samples as mask-carrying, chosen by seeded
// shuffle and then repaired so every class in `num_classes` appears in at
// least one marked sample. Throws if a class is absent from the corpus
// entirely (the message lists the missing classes).
std::vector<bool> make_split(const std::vector<SynthSample>& samples,
                             double mask_fraction, int num_classes,
                             std::uint64_t seed);

}  // namespace boxseg
