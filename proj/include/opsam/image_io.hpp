#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "opsam/tensor.hpp"

namespace opsam {

/// PNG or JPEG, any channel count, returned as 8-bit RGB.
ImageRGB read_image(const std::filesystem::path& path);
/// Single- or multi-channel image; a pixel is foreground when any channel is nonzero.
MaskGrid read_mask(const std::filesystem::path& path);

void write_image_png(const std::filesystem::path& path, const ImageRGB& image);
/// 8-bit single channel, foreground written as 255.
void write_mask_png(const std::filesystem::path& path, const MaskGrid& mask);
/// Binary PGM (P5), value round(p * 255) per cell.
void write_prior_pgm(const std::filesystem::path& path, const Prior& prior);

std::vector<std::uint8_t> encode_png(const ImageRGB& image);
std::vector<std::uint8_t> encode_png(const MaskGrid& mask);
ImageRGB decode_image(std::span<const std::uint8_t> bytes);
MaskGrid decode_mask(std::span<const std::uint8_t> bytes);

} // namespace opsam
