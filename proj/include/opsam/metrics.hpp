#pragma once

#include <string>

#include "opsam/tensor.hpp"

namespace opsam {

struct Overlap {
    double iou = 0.0;
    double dice = 0.0;
};

/// IoU = |A∩B|/|A∪B|, Dice = 2|A∩B|/(|A|+|B|); both 1 when both masks are empty.
Overlap iou_dice(const MaskGrid& pred, const MaskGrid& gt);

struct EvalRecord {
    std::string query_id;
    double iou = 0.0;
    double dice = 0.0;
    int rounds = 0;
    int prompts = 0;
    double wall_ms = 0.0;
};

} // namespace opsam
