#include "opsam/pipeline.hpp"

#include <string>

namespace opsam {

void PipelineConfig::validate() const {
    cpg.validate();
    spf.validate();
    epe.validate();
    if (!(scale_xl > 1.0)) throw ConfigError("scaling.xl must be > 1");
    if (!(scale_xs > 0.0 && scale_xs < 1.0)) throw ConfigError("scaling.xs must lie in (0,1)");
}

PreparedSupport prepare_support(const SupportBundle& support, const EncoderBackend& encoder, const CpgConfig& cfg) {
    const std::array<const ImageMask*, 3> variants{&support.ori, &support.xl, &support.xs};
    const std::array<EmbeddingKind, 1> kinds{cfg.embedding_kind};
    PreparedSupport out;
    for (std::size_t i = 0; i < 3; ++i) {
        EncodedImage enc = encoder.encode(variants[i]->image, kinds);
        out.scales[i].tag = kScaleTags[i];
        out.scales[i].features = enc.embeddings.get(cfg.embedding_kind);
        out.scales[i].mask_patches = resize_mask_to_patches(variants[i]->mask, enc.layout);
        if (out.scales[i].mask_patches.size() != out.scales[i].features.patches())
            throw ShapeError("encoder patch grid does not match its declared layout");
    }
    return out;
}

FusedPrior fuse_query_prior(const PreparedSupport& support, const EncodedImage& query, const PipelineConfig& cfg) {
    const FeatureMap& fq = query.embeddings.get(cfg.cpg.embedding_kind);
    if (fq.h != query.layout.h || fq.w != query.layout.w)
        throw ShapeError("encoder patch grid does not match its declared layout");
    const Matrix s_self = self_correlation_from_attention(query.embeddings, cfg.cpg);

    FusedPrior out;
    out.layout = query.layout;
    std::array<double, 3> c_iou{};
    for (std::size_t i = 0; i < 3; ++i) {
        const EncodedSupport& s = support.scales[i];
        out.priors[i] = generate_prior(fq, s.features, s.mask_patches, s_self, cfg.cpg);
        ReverseTransferReport& rep = out.reports[i];
        rep.size_tag = s.tag;
        rep.p_rev = reverse_transfer(out.priors[i], fq, s.features, cfg.spf.tau);
        rep.c_iou = confidence_iou(rep.p_rev, s.mask_patches, cfg.spf.tau);
        c_iou[i] = rep.c_iou;
    }
    const auto weights = adaptive_weights(c_iou);
    for (std::size_t i = 0; i < 3; ++i) out.reports[i].weight = weights[i];
    out.fused = fuse_priors({&out.priors[0], &out.priors[1], &out.priors[2]}, weights);
    return out;
}

QueryResult run_query(const PreparedSupport& support, const ImageRGB& query, std::string_view query_id,
                      const EncoderBackend& encoder, const SegmenterBackend& segmenter, const PipelineConfig& cfg) {
    cfg.validate();
    try {
        const std::array<EmbeddingKind, 1> kinds{cfg.cpg.embedding_kind};
        FusedPrior fused = fuse_query_prior(support, encoder.encode(query, kinds), cfg);
        auto session = segmenter.open_session(query, query_id);
        QueryResult out;
        out.trace = epe_run(query, fused.fused, fused.layout, *session, cfg.epe);
        out.mask = out.trace.final_mask;
        out.layout = fused.layout;
        out.priors = std::move(fused.priors);
        out.reports = std::move(fused.reports);
        out.fused_prior = std::move(fused.fused);
        return out;
    } catch (const BackendError& e) {
        throw BackendError("query '" + std::string(query_id) + "': " + e.what());
    }
}

QueryResult run_query(const SupportBundle& support, const ImageRGB& query, std::string_view query_id,
                      const EncoderBackend& encoder, const SegmenterBackend& segmenter, const PipelineConfig& cfg) {
    return run_query(prepare_support(support, encoder, cfg.cpg), query, query_id, encoder, segmenter, cfg);
}

} // namespace opsam
