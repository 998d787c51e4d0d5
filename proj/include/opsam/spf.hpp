#pragma once

#include <array>
#include <string_view>

#include "opsam/tensor.hpp"

namespace opsam {

enum class ScaleTag { ori, xl, xs };

inline constexpr std::array<ScaleTag, 3> kScaleTags{ScaleTag::ori, ScaleTag::xl, ScaleTag::xs};

std::string_view to_string(ScaleTag t);

struct SpfConfig {
    double tau = 0.5;

    void validate() const;
    bool operator==(const SpfConfig&) const = default;
};

struct ReverseTransferReport {
    ScaleTag size_tag = ScaleTag::ori;
    Prior p_rev;
    double c_iou = 0.0;
    double weight = 0.0;
};

/// Mean cosine similarity of the query patches selected by (p > tau) against
/// every support patch, min-max normalized onto the support grid. An empty
/// selection yields all zeros.
Prior reverse_transfer(const Prior& p, const FeatureMap& fq, const FeatureMap& fs, double tau);

/// IoU of (p_rev > tau) against (ms_r > 0.5) where each intersection cell
/// counts with weight p_rev. Empty union scores 0.
double confidence_iou(const Prior& p_rev, const Prior& ms_r, double tau);

/// w_i = c_i / sum(c); all-zero input falls back to uniform thirds.
std::array<double, 3> adaptive_weights(const std::array<double, 3>& c);

/// Pointwise convex combination of the three priors.
Prior fuse_priors(const std::array<const Prior*, 3>& priors, const std::array<double, 3>& weights);

} // namespace opsam
