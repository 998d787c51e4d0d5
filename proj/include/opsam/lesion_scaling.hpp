#pragma once

#include <utility>

#include "opsam/tensor.hpp"

namespace opsam {

struct ImageMask {
    ImageRGB image;
    MaskGrid mask;
};

/// The original support plus its enlarged-lesion and shrunken-lesion variants.
struct SupportBundle {
    ImageMask ori;
    ImageMask xl;
    ImageMask xs;
    double scale_xl = 1.5;
    double scale_xs = 0.5;
};

/// Centroid of the mask's foreground pixels as (row, col).
std::pair<double, double> mask_centroid(const MaskGrid& mask);

/// Resamples the lesion by `factor` about its centroid (nearest neighbour) and
/// pastes it back at the same centroid, clipped to the frame. Pixels that the
/// new lesion does not cover keep their original values.
ImageMask scale_lesion(const ImageRGB& img, const MaskGrid& mask, double factor);

/// Fills `hole` by repeated neighbour averaging: each sweep, every hole pixel
/// with at least one known 4-neighbour takes the rounded mean of those
/// neighbours, then all of them become known together.
ImageRGB inpaint_ring(const ImageRGB& img, const MaskGrid& hole);

SupportBundle build_support_bundle(const ImageRGB& img, const MaskGrid& mask, double scale_xl = 1.5,
                                   double scale_xs = 0.5);

} // namespace opsam
