#pragma once

#include <cstdint>
#include <vector>

#include "opsam/backends.hpp"

namespace opsam {

struct SceneOptions {
    int height = 128;
    int width = 128;
    int blobs = 1; // 0 gives an all-background scene
    double min_radius = 11.0;
    double max_radius = 20.0;
};

/// Rendered test scene: lesion-coloured blobs on a shaded background.
struct SyntheticScene {
    std::uint64_t seed = 0;
    ImageRGB image;
    MaskGrid gt_mask;
    std::vector<MaskGrid> blobs; // one mask per blob, disjoint and non-touching
};

SyntheticScene make_scene(std::uint64_t seed, const SceneOptions& opts = {});

/// Reference colours used by the renderer; the synthetic encoder classifies
/// pixels by whichever is nearer.
inline constexpr std::uint8_t kLesionRGB[3] = {168, 48, 58};
inline constexpr std::uint8_t kTissueRGB[3] = {226, 164, 142};

struct SyntheticEncoderConfig {
    int patch = 4;
    int dim = 32;
    double noise_sigma = 0.1;
    std::uint64_t seed = 7;

    bool operator==(const SyntheticEncoderConfig&) const = default;
};

/// Class-conditional encoder: each patch embeds as the lesion/tissue prototype
/// mix given by its pixel colours, plus seeded Gaussian noise, renormalized.
/// The four embedding kinds apply distinct fixed linear mixings.
class SyntheticEncoder final : public EncoderBackend {
  public:
    explicit SyntheticEncoder(SyntheticEncoderConfig cfg = {});

    EncoderCapabilities capabilities() const override;
    EncodedImage encode(const ImageRGB& image, std::span<const EmbeddingKind> kinds) const override;

    const SyntheticEncoderConfig& config() const { return cfg_; }
    /// Fraction of lesion-coloured pixels in each patch.
    Prior lesion_fraction(const ImageRGB& image) const;

  private:
    SyntheticEncoderConfig cfg_;
    std::vector<double> lesion_proto_;
    std::vector<double> tissue_proto_;
    std::array<Matrix, 4> mixing_;
};

std::uint64_t hash_image(const ImageRGB& image);

} // namespace opsam
