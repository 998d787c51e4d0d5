#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

#include "opsam/tensor.hpp"

namespace opsam {

enum class EmbeddingKind { query, key, value, feats };

inline constexpr std::array<EmbeddingKind, 4> kAllEmbeddingKinds{EmbeddingKind::query, EmbeddingKind::key,
                                                                 EmbeddingKind::value, EmbeddingKind::feats};

std::string_view to_string(EmbeddingKind k);
std::optional<EmbeddingKind> parse_embedding_kind(std::string_view s);

/// Embeddings from the encoder's last attention block; a backend fills only
/// the kinds it was asked for.
struct EmbeddingSet {
    std::array<std::optional<FeatureMap>, 4> maps;

    const FeatureMap& get(EmbeddingKind k) const; // throws BackendError when missing
    bool has(EmbeddingKind k) const { return maps[static_cast<std::size_t>(k)].has_value(); }
    void set(EmbeddingKind k, FeatureMap f) { maps[static_cast<std::size_t>(k)] = std::move(f); }
};

struct CpgConfig {
    int rho = 2;
    int sinkhorn_iters = 50;
    EmbeddingKind embedding_kind = EmbeddingKind::value;

    void validate() const;
    bool operator==(const CpgConfig&) const = default;
};

/// S_corr[i][j] = <fq_i, fs_j> / sqrt(D). Query patches index rows.
Matrix cross_correlation(const FeatureMap& fq, const FeatureMap& fs);

/// Alternating row/column normalization followed by symmetrization (M + M^T)/2.
/// Negative entries are clamped to zero first.
Matrix sinkhorn_normalize(const Matrix& s, int iters);

/// Self-correlation of the configured embedding kind, clamped and Sinkhorn-normalized.
Matrix self_correlation_from_attention(const EmbeddingSet& qkv, const CpgConfig& cfg);

/// p = S_self^rho * S_corr * ms_r, reshaped to the query grid and min-max normalized.
/// `ms_r` is the support mask pooled onto the support's patch grid.
Prior generate_prior(const FeatureMap& fq, const FeatureMap& fs, const Prior& ms_r, const Matrix& s_self,
                     const CpgConfig& cfg);

} // namespace opsam
