#include "opsam/spf.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace opsam {

std::string_view to_string(ScaleTag t) {
    switch (t) {
    case ScaleTag::ori: return "ori";
    case ScaleTag::xl: return "xl";
    case ScaleTag::xs: return "xs";
    }
    return "?";
}

void SpfConfig::validate() const {
    if (!(tau > 0.0 && tau < 1.0)) throw ConfigError("spf.tau must lie in (0,1)");
}

Prior reverse_transfer(const Prior& p, const FeatureMap& fq, const FeatureMap& fs, double tau) {
    if (p.size() != fq.patches()) throw ContractViolation("reverse_transfer: prior does not match query patches");
    if (fq.dim != fs.dim) throw ContractViolation("reverse_transfer: embedding dims differ");

    Prior rev(fs.h, fs.w);
    std::vector<std::size_t> selected;
    for (std::size_t i = 0; i < p.size(); ++i)
        if (p.data[i] > tau) selected.push_back(i);
    if (selected.empty()) return rev;

    // Normalize once; cosine of normalized rows is their dot product.
    auto unit_rows = [](const FeatureMap& f) {
        Matrix u = f.rows;
        for (std::size_t r = 0; r < u.rows(); ++r) {
            auto row = u.row(r);
            const double n = std::sqrt(dot(row, row));
            for (double& v : row) v = n > 0.0 ? v / n : 0.0;
        }
        return u;
    };
    const Matrix uq = unit_rows(fq);
    const Matrix us = unit_rows(fs);
    for (std::size_t j = 0; j < fs.patches(); ++j) {
        double acc = 0.0;
        for (std::size_t i : selected) acc += dot(uq.row(i), us.row(j));
        rev.data[j] = acc / double(selected.size());
    }
    return minmax_normalize(rev);
}

double confidence_iou(const Prior& p_rev, const Prior& ms_r, double tau) {
    if (p_rev.h != ms_r.h || p_rev.w != ms_r.w) throw ContractViolation("confidence_iou: grids differ");
    double inter = 0.0;
    std::size_t uni = 0;
    for (std::size_t i = 0; i < p_rev.size(); ++i) {
        const bool a = p_rev.data[i] > tau;
        const bool b = ms_r.data[i] > 0.5;
        if (a && b) inter += p_rev.data[i];
        if (a || b) ++uni;
    }
    return uni == 0 ? 0.0 : inter / double(uni);
}

std::array<double, 3> adaptive_weights(const std::array<double, 3>& c) {
    const double sum = c[0] + c[1] + c[2];
    if (!(sum > 0.0)) return {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
    return {c[0] / sum, c[1] / sum, c[2] / sum};
}

Prior fuse_priors(const std::array<const Prior*, 3>& priors, const std::array<double, 3>& weights) {
    const Prior& first = *priors[0];
    for (const Prior* p : priors)
        if (p->h != first.h || p->w != first.w) throw ContractViolation("fuse_priors: prior grids differ");
    const double wsum = weights[0] + weights[1] + weights[2];
    if (std::abs(wsum - 1.0) > 1e-9) throw ContractViolation("fuse_priors: weights must sum to 1");

    Prior out(first.h, first.w);
    for (std::size_t i = 0; i < out.size(); ++i) {
        double v = 0.0, lo = priors[0]->data[i], hi = lo;
        for (int k = 0; k < 3; ++k) {
            const double x = priors[k]->data[i];
            v += weights[k] * x;
            lo = std::min(lo, x);
            hi = std::max(hi, x);
        }
        // rounding can push a convex combination an ulp past its inputs
        out.data[i] = std::clamp(v, lo, hi);
    }
    return out;
}

} // namespace opsam
