#pragma once

#include <array>
#include <string>

#include "opsam/backends.hpp"
#include "opsam/cpg.hpp"
#include "opsam/epe.hpp"
#include "opsam/lesion_scaling.hpp"
#include "opsam/spf.hpp"

namespace opsam {

struct PipelineConfig {
    CpgConfig cpg;
    SpfConfig spf;
    EpeConfig epe;
    double scale_xl = 1.5;
    double scale_xs = 0.5;

    void validate() const;
    bool operator==(const PipelineConfig&) const = default;
};

/// One support variant after encoding: its features and pooled mask.
struct EncodedSupport {
    ScaleTag tag = ScaleTag::ori;
    FeatureMap features;
    Prior mask_patches;
};

/// Support bundle encoded once and reused for every query of a run.
struct PreparedSupport {
    std::array<EncodedSupport, 3> scales; // ori, xl, xs
};

PreparedSupport prepare_support(const SupportBundle& support, const EncoderBackend& encoder, const CpgConfig& cfg);

struct QueryResult {
    MaskGrid mask;
    EpeTrace trace;
    PatchLayout layout;
    std::array<Prior, 3> priors; // per scale, before fusion
    std::array<ReverseTransferReport, 3> reports;
    Prior fused_prior;
};

/// Priors for the query from each support scale, their reverse-transfer scores,
/// and the fused prior; no segmenter involved.
struct FusedPrior {
    PatchLayout layout;
    std::array<Prior, 3> priors;
    std::array<ReverseTransferReport, 3> reports;
    Prior fused;
};

FusedPrior fuse_query_prior(const PreparedSupport& support, const EncodedImage& query, const PipelineConfig& cfg);

/// CPG per scale, SPF fusion, then EPE against a fresh segmenter session.
/// Backend failures are rethrown annotated with `query_id`.
QueryResult run_query(const PreparedSupport& support, const ImageRGB& query, std::string_view query_id,
                      const EncoderBackend& encoder, const SegmenterBackend& segmenter, const PipelineConfig& cfg);

QueryResult run_query(const SupportBundle& support, const ImageRGB& query, std::string_view query_id,
                      const EncoderBackend& encoder, const SegmenterBackend& segmenter, const PipelineConfig& cfg);

} // namespace opsam
