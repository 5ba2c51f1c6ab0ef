#pragma once

#include <vector>

#include "boxseg/image_io.hpp"
#include "boxseg/pipeline.hpp"

namespace boxseg {

// Class colors blended onto labelled pixels at 50% opacity; background
// pixels pass through untouched. An all-background label map returns the
// input bit-for-bit.
ImageU8 render_semantic(const ImageU8& image, const LabelMap& labels);

// Each instance mask blended at 50% opacity in its class color, plus a
// solid one-pixel box outline. Overlap resolution follows list order, later
// entries on top. No predictions returns the input bit-for-bit.
ImageU8 render_instances(const ImageU8& image,
                         const std::vector<InstancePrediction>& preds);

}  // namespace boxseg
