#include "opsam/oracle_segmenter.hpp"

#include <set>
#include <string>

#include "opsam/metrics.hpp"

namespace opsam {

namespace {

bool in_disk(const PromptPoint& centre, int y, int x) {
    const int dy = y - centre.y, dx = x - centre.x;
    return dy * dy + dx * dx <= OracleSegmenter::kFalsePositiveRadius * OracleSegmenter::kFalsePositiveRadius;
}

class OracleSession final : public SegmenterSession {
  public:
    explicit OracleSession(MaskGrid gt) : gt_(std::move(gt)) {}
    SegmenterResult predict(const PromptList& prompts) override { return oracle_segment(gt_, prompts); }

  private:
    MaskGrid gt_;
};

} // namespace

SegmenterResult oracle_segment(const MaskGrid& hidden_gt, const PromptList& prompts) {
    SegmenterResult out{MaskGrid(hidden_gt.height, hidden_gt.width), 0.0};
    for (const PromptPoint& p : prompts)
        if (!hidden_gt.contains(p.y, p.x))
            throw ContractViolation("oracle_segment: prompt (" + std::to_string(p.x) + "," + std::to_string(p.y) +
                                    ") is outside the image");

    const ComponentLabels comps = label_components(hidden_gt);
    auto label_at = [&](const PromptPoint& p) { return comps.labels[static_cast<std::size_t>(p.y) * hidden_gt.width + p.x]; };

    std::set<int> keep, drop;
    std::vector<PromptPoint> background_hits, negatives;
    bool any_positive = false;
    for (const PromptPoint& p : prompts) {
        const int id = label_at(p);
        if (p.label == PromptLabel::positive) {
            any_positive = true;
            if (id) keep.insert(id);
            else background_hits.push_back(p);
        } else {
            negatives.push_back(p);
            if (id) drop.insert(id);
        }
    }
    if (!any_positive) return out;

    for (std::size_t i = 0; i < comps.labels.size(); ++i) {
        const int id = comps.labels[i];
        if (id && keep.contains(id) && !drop.contains(id)) out.mask.data[i] = 1;
    }
    const int r = OracleSegmenter::kFalsePositiveRadius;
    for (const PromptPoint& c : background_hits) {
        bool suppressed = false;
        for (const PromptPoint& n : negatives) suppressed = suppressed || in_disk(c, n.y, n.x);
        if (suppressed) continue;
        for (int y = c.y - r; y <= c.y + r; ++y)
            for (int x = c.x - r; x <= c.x + r; ++x)
                if (out.mask.contains(y, x) && in_disk(c, y, x)) out.mask(y, x) = 1;
    }
    out.predicted_iou = iou_dice(out.mask, hidden_gt).iou;
    return out;
}

OracleSegmenter::OracleSegmenter(GroundTruthLookup lookup) : lookup_(std::move(lookup)) {}

OracleSegmenter::OracleSegmenter(MaskGrid gt)
    : lookup_([gt = std::move(gt)](std::string_view) { return std::optional<MaskGrid>(gt); }) {}

std::unique_ptr<SegmenterSession> OracleSegmenter::open_session(const ImageRGB& image,
                                                                std::string_view session_id) const {
    std::optional<MaskGrid> gt = lookup_(session_id);
    if (!gt) throw BackendError("oracle segmenter has no ground truth for '" + std::string(session_id) + "'");
    if (gt->height != image.height || gt->width != image.width)
        throw ShapeError("oracle ground truth for '" + std::string(session_id) + "' does not match the image shape");
    return std::make_unique<OracleSession>(std::move(*gt));
}

} // namespace opsam
