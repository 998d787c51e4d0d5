#include "opsam/lesion_scaling.hpp"

#include <array>
#include <cmath>
#include <string>

namespace opsam {

namespace {

void require_paired(const ImageRGB& img, const MaskGrid& mask) {
    if (img.height != mask.height || img.width != mask.width)
        throw ContractViolation("image and mask shapes differ");
}

} // namespace

std::pair<double, double> mask_centroid(const MaskGrid& mask) {
    double sy = 0.0, sx = 0.0;
    std::size_t n = 0;
    for (int y = 0; y < mask.height; ++y)
        for (int x = 0; x < mask.width; ++x)
            if (mask(y, x)) {
                sy += y;
                sx += x;
                ++n;
            }
    if (n == 0) throw ContractViolation("mask_centroid: mask is empty");
    return {sy / double(n), sx / double(n)};
}

ImageMask scale_lesion(const ImageRGB& img, const MaskGrid& mask, double factor) {
    require_paired(img, mask);
    if (!(factor > 0.0) || !std::isfinite(factor)) throw ContractViolation("scale_lesion: factor must be > 0");
    const auto [cy, cx] = mask_centroid(mask);

    ImageMask out{img, MaskGrid(mask.height, mask.width)};
    for (int y = 0; y < mask.height; ++y) {
        const int sy = static_cast<int>(std::floor(cy + (y - cy) / factor + 0.5));
        if (sy < 0 || sy >= mask.height) continue;
        for (int x = 0; x < mask.width; ++x) {
            const int sx = static_cast<int>(std::floor(cx + (x - cx) / factor + 0.5));
            if (sx < 0 || sx >= mask.width || !mask(sy, sx)) continue;
            out.mask(y, x) = 1;
            const std::uint8_t* src = img.pixel(sy, sx);
            std::uint8_t* dst = out.image.pixel(y, x);
            dst[0] = src[0];
            dst[1] = src[1];
            dst[2] = src[2];
        }
    }
    if (out.mask.empty())
        throw ContractViolation("scale_lesion: factor " + std::to_string(factor) + " shrinks the lesion below one pixel");
    return out;
}

ImageRGB inpaint_ring(const ImageRGB& img, const MaskGrid& hole) {
    if (img.height != hole.height || img.width != hole.width)
        throw ContractViolation("inpaint_ring: hole must match the image shape");
    if (hole.count() == hole.data.size()) throw ContractViolation("inpaint_ring: hole covers the entire frame");

    ImageRGB out = img;
    MaskGrid unknown = hole;
    std::size_t remaining = unknown.count();
    constexpr std::array<std::array<int, 2>, 4> kNeighbours{{{-1, 0}, {1, 0}, {0, -1}, {0, 1}}};

    struct Fill {
        int y, x;
        std::array<std::uint8_t, 3> rgb;
    };
    std::vector<Fill> layer;
    while (remaining > 0) {
        layer.clear();
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x) {
                if (!unknown(y, x)) continue;
                std::array<int, 3> sum{};
                int known = 0;
                for (auto [dy, dx] : kNeighbours) {
                    const int ny = y + dy, nx = x + dx;
                    if (!unknown.contains(ny, nx) || unknown(ny, nx)) continue;
                    const std::uint8_t* p = out.pixel(ny, nx);
                    for (int c = 0; c < 3; ++c) sum[c] += p[c];
                    ++known;
                }
                if (known == 0) continue;
                Fill f{y, x, {}};
                for (int c = 0; c < 3; ++c) f.rgb[c] = static_cast<std::uint8_t>((sum[c] + known / 2) / known);
                layer.push_back(f);
            }
        for (const Fill& f : layer) {
            std::uint8_t* p = out.pixel(f.y, f.x);
            p[0] = f.rgb[0];
            p[1] = f.rgb[1];
            p[2] = f.rgb[2];
            unknown(f.y, f.x) = 0;
        }
        remaining -= layer.size();
    }
    return out;
}

SupportBundle build_support_bundle(const ImageRGB& img, const MaskGrid& mask, double scale_xl, double scale_xs) {
    require_paired(img, mask);
    if (!(scale_xl > 1.0 && scale_xs > 0.0 && scale_xs < 1.0))
        throw ContractViolation("build_support_bundle: need scale_xl > 1 > scale_xs > 0");

    SupportBundle b;
    b.scale_xl = scale_xl;
    b.scale_xs = scale_xs;
    b.ori = {img, mask};
    b.xl = scale_lesion(img, mask, scale_xl);
    ImageMask shrunk = scale_lesion(img, mask, scale_xs);
    shrunk.image = inpaint_ring(shrunk.image, mask_minus(mask, shrunk.mask));
    b.xs = std::move(shrunk);
    return b;
}

} // namespace opsam
