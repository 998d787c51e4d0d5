#include "opsam/metrics.hpp"

namespace opsam {

Overlap iou_dice(const MaskGrid& pred, const MaskGrid& gt) {
    const std::size_t inter = intersection_count(pred, gt); // checks shapes
    const std::size_t a = pred.count(), b = gt.count();
    const std::size_t uni = a + b - inter;
    if (uni == 0) return {1.0, 1.0};
    return {double(inter) / double(uni), 2.0 * double(inter) / double(a + b)};
}

} // namespace opsam
