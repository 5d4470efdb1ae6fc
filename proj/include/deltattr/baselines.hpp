// Non-gradient attributors used as comparison points: single-point feature
// occlusion through the prediction-change wrapper, and a seeded random
// control for ranking experiments.
#pragma once

#include "deltattr/core.hpp"

namespace deltattr {

// Feature occlusion: for each cell in the attribution range, replace it with
// the previous step's value on the same feature (the earliest row keeps its
// own value and scores zero) and record the drop in the wrapper output for
// the target class.
AttributionMap occlusion_attribute(const Classifier& f, const TimeSeries& series,
                                   const WindowSpec& spec, const ChangeTarget& target);

// I.i.d. uniform [-1, 1] attributions from a seeded stream.
AttributionMap random_attribute(const TimeSeries& series, const WindowSpec& spec,
                                const ChangeTarget& target, uint64_t seed);

}  // namespace deltattr
