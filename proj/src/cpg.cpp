#include "opsam/cpg.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace opsam {

std::string_view to_string(EmbeddingKind k) {
    switch (k) {
    case EmbeddingKind::query: return "query";
    case EmbeddingKind::key: return "key";
    case EmbeddingKind::value: return "value";
    case EmbeddingKind::feats: return "feats";
    }
    return "?";
}

std::optional<EmbeddingKind> parse_embedding_kind(std::string_view s) {
    for (auto k : kAllEmbeddingKinds)
        if (to_string(k) == s) return k;
    return std::nullopt;
}

const FeatureMap& EmbeddingSet::get(EmbeddingKind k) const {
    const auto& m = maps[static_cast<std::size_t>(k)];
    if (!m) throw BackendError("encoder did not supply '" + std::string(to_string(k)) + "' embeddings");
    return *m;
}

void CpgConfig::validate() const {
    if (rho < 0) throw ConfigError("cpg.rho must be >= 0");
    if (sinkhorn_iters < 1) throw ConfigError("cpg.sinkhorn_iters must be >= 1");
}

Matrix cross_correlation(const FeatureMap& fq, const FeatureMap& fs) {
    if (fq.dim != fs.dim)
        throw ContractViolation("cross_correlation: embedding dims differ (" + std::to_string(fq.dim) + " vs " +
                                std::to_string(fs.dim) + ")");
    const double scale = 1.0 / std::sqrt(static_cast<double>(fq.dim));
    Matrix out(fq.patches(), fs.patches());
    for (std::size_t i = 0; i < fq.patches(); ++i) {
        auto qi = fq.rows.row(i);
        for (std::size_t j = 0; j < fs.patches(); ++j) out(i, j) = dot(qi, fs.rows.row(j)) * scale;
    }
    return out;
}

Matrix sinkhorn_normalize(const Matrix& s, int iters) {
    if (s.rows() != s.cols()) throw ContractViolation("sinkhorn_normalize: matrix must be square");
    if (iters < 1) throw ContractViolation("sinkhorn_normalize: iters must be >= 1");
    const std::size_t n = s.rows();
    Matrix m(n, n);
    for (std::size_t i = 0; i < n * n; ++i) m.data()[i] = std::max(0.0, s.data()[i]);

    std::vector<double> col_sum(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto r = m.row(i);
        if (std::all_of(r.begin(), r.end(), [](double v) { return v == 0.0; }))
            throw ContractViolation("sinkhorn_normalize: row " + std::to_string(i) + " is zero after clamping");
        for (std::size_t j = 0; j < n; ++j) col_sum[j] += r[j];
    }
    for (std::size_t j = 0; j < n; ++j)
        if (col_sum[j] == 0.0)
            throw ContractViolation("sinkhorn_normalize: column " + std::to_string(j) + " is zero after clamping");

    // Alternating row/column normalization kept as diagonal scalings u, v of
    // the clamped matrix; the scaled matrix is materialized once at the end.
    std::vector<double> u(n, 1.0), v(n, 1.0);
    for (int it = 0; it < iters; ++it) {
        for (std::size_t i = 0; i < n; ++i) {
            auto r = m.row(i);
            double sum = 0.0;
            for (std::size_t j = 0; j < n; ++j) sum += r[j] * v[j];
            u[i] = 1.0 / sum;
        }
        std::fill(col_sum.begin(), col_sum.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            auto r = m.row(i);
            for (std::size_t j = 0; j < n; ++j) col_sum[j] += u[i] * r[j];
        }
        for (std::size_t j = 0; j < n; ++j) v[j] = 1.0 / col_sum[j];
    }
    for (std::size_t i = 0; i < n; ++i) {
        auto r = m.row(i);
        for (std::size_t j = 0; j < n; ++j) r[j] *= u[i] * v[j];
    }

    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const double avg = 0.5 * (m(i, j) + m(j, i));
            m(i, j) = avg;
            m(j, i) = avg;
        }
    return m;
}

Matrix self_correlation_from_attention(const EmbeddingSet& qkv, const CpgConfig& cfg) {
    cfg.validate();
    const FeatureMap& f = qkv.get(cfg.embedding_kind);
    for (auto k : kAllEmbeddingKinds) {
        if (!qkv.has(k)) continue;
        const FeatureMap& other = qkv.get(k);
        if (other.h != f.h || other.w != f.w || other.dim != f.dim)
            throw ContractViolation("self_correlation_from_attention: embedding kinds disagree on shape");
    }
    return sinkhorn_normalize(cross_correlation(f, f), cfg.sinkhorn_iters);
}

Prior generate_prior(const FeatureMap& fq, const FeatureMap& fs, const Prior& ms_r, const Matrix& s_self,
                     const CpgConfig& cfg) {
    cfg.validate();
    if (ms_r.size() != fs.patches())
        throw ContractViolation("generate_prior: support mask has " + std::to_string(ms_r.size()) +
                                " cells but support features have " + std::to_string(fs.patches()) + " patches");
    if (s_self.rows() != fq.patches() || s_self.cols() != fq.patches())
        throw ContractViolation("generate_prior: self-correlation does not match the query patch count");

    if (fq.dim != fs.dim) throw ContractViolation("generate_prior: embedding dims differ");
    // S_corr * m computed as fq * (fs^T m) / sqrt(D) without forming S_corr.
    const auto d = static_cast<std::size_t>(fq.dim);
    std::vector<double> agg(d, 0.0);
    for (std::size_t j = 0; j < fs.patches(); ++j) {
        auto sj = fs.rows.row(j);
        for (std::size_t c = 0; c < d; ++c) agg[c] += sj[c] * ms_r.data[j];
    }
    const double scale = 1.0 / std::sqrt(static_cast<double>(fq.dim));
    std::vector<double> p(fq.patches());
    for (std::size_t i = 0; i < fq.patches(); ++i) p[i] = dot(fq.rows.row(i), agg) * scale;
    for (int k = 0; k < cfg.rho; ++k) p = matvec(s_self, p);
    return minmax_normalize(Prior(fq.h, fq.w, std::move(p)));
}

} // namespace opsam
