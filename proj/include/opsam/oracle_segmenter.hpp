#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>

#include "opsam/backends.hpp"

namespace opsam {

/// Test segmenter that answers prompts from a hidden ground-truth mask.
///
/// The mask is the union of 4-connected GT components holding a positive
/// prompt, minus components holding a negative prompt. A positive prompt on
/// background adds a radius-3 disk of false positive unless a negative prompt
/// falls inside that disk. The reported IoU is the true IoU against the GT.
class OracleSegmenter final : public SegmenterBackend {
  public:
    using GroundTruthLookup = std::function<std::optional<MaskGrid>(std::string_view session_id)>;

    static constexpr int kFalsePositiveRadius = 3;

    explicit OracleSegmenter(GroundTruthLookup lookup);
    /// Convenience for a single known scene; every session sees `gt`.
    explicit OracleSegmenter(MaskGrid gt);

    std::unique_ptr<SegmenterSession> open_session(const ImageRGB& image, std::string_view session_id) const override;

  private:
    GroundTruthLookup lookup_;
};

/// Pure form of the oracle's answer, used by the session and by tests.
SegmenterResult oracle_segment(const MaskGrid& hidden_gt, const PromptList& prompts);

} // namespace opsam
