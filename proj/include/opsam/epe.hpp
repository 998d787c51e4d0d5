#pragma once

#include <iosfwd>
#include <string_view>
#include <vector>

#include "opsam/backends.hpp"
#include "opsam/tensor.hpp"

namespace opsam {

struct Pixel {
    int y = 0;
    int x = 0;
    bool operator==(const Pixel&) const = default;
};

/// Foreground pixel farthest (Euclidean) from any background pixel, where the
/// frame border counts as background. Ties go to the smallest row, then column.
Pixel edt_center(const MaskGrid& m);

/// Exact squared Euclidean distance of every pixel to the nearest background
/// pixel, the frame border included. Background pixels map to 0.
std::vector<long long> squared_distance_transform(const MaskGrid& m);

/// Centre of the tight bounding box (rounded down). May land on background.
Pixel bbc_center(const MaskGrid& m);

/// |m ∩ p_t| / |p_t|, or 1 when p_t is empty.
double coverage(const MaskGrid& m, const MaskGrid& p_t);

enum class PromptCenter { edt, bbc };
std::string_view to_string(PromptCenter c);

struct EpeConfig {
    double theta_tight = 0.7;
    double theta_loose = 0.5;
    double score_thresh = 0.85;
    int neg_area_thresh = 0; // in prior cells; 0 selects 5% of the loose-prior area, at least 16
    int max_rounds = 5;
    PromptCenter center = PromptCenter::edt;

    void validate() const;
    int resolve_neg_area_thresh(double loose_cells) const;
    bool operator==(const EpeConfig&) const = default;
};

enum class EpeAction { init, cover_gap, expand_loose, negative_remediation };
std::string_view to_string(EpeAction a);

enum class EpeStop { converged, round_budget, no_fresh_prompt, empty_prior };
std::string_view to_string(EpeStop s);

struct EpeRound {
    EpeAction action = EpeAction::init;
    PromptPoint prompt;
    MaskGrid mask;
    double cov = 0.0;
    double iou = 0.0;
    bool retained = true;
};

struct EpeTrace {
    std::vector<EpeRound> rounds;
    PromptList prompts;
    MaskGrid final_mask;
    int prompting_rounds = 0; // init + cover_gap + expand_loose
    int remediations = 0;
    int neg_area_thresh = 0; // prior cells
    EpeStop stop = EpeStop::converged;
};

struct EucSegResult {
    MaskGrid mask;
    double cov = 0.0;
    double iou = 0.0;
};

/// Appends a prompt at the centre of `prior_in`, queries the segmenter with the
/// whole cumulative list, and scores the mask against the tight prior.
EucSegResult euc_seg(const MaskGrid& prior_in, PromptList& prompts, PromptLabel label, SegmenterSession& segmenter,
                     const MaskGrid& p_t, PromptCenter center = PromptCenter::edt);

/// Iterative prompting driven by a prior already at image resolution.
/// `cell_area` is the pixel area of one prior cell; the spill test and the
/// negative-area threshold are counted in cells.
EpeTrace epe_run(const Prior& pixel_prior, SegmenterSession& segmenter, const EpeConfig& cfg, double cell_area = 1.0);

/// Upsamples a patch-level prior onto the query's pixels, then runs the loop.
EpeTrace epe_run(const ImageRGB& query, const Prior& prior, const PatchLayout& layout, SegmenterSession& segmenter,
                 const EpeConfig& cfg);

/// One JSON object per round: {round, action, prompt:{x,y,label}, cov, iou, retained}.
void write_trace_jsonl(std::ostream& os, const EpeTrace& trace);

} // namespace opsam
