#include "opsam/epe.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <string>

#include <json.hpp>

namespace opsam {

namespace {

// Lower envelope of parabolas (Felzenszwalb & Huttenlocher), one line at a time.
// Foreground enters as kFar; the padded border guarantees every line has a
// background sample, so outputs are exact small integers.
constexpr double kFar = 1e13;

void distance_1d(const std::vector<double>& f, std::vector<double>& d, std::vector<int>& v, std::vector<double>& z) {
    const int n = static_cast<int>(f.size());
    constexpr double inf = std::numeric_limits<double>::infinity();
    int k = 0;
    v[0] = 0;
    z[0] = -inf;
    z[1] = inf;
    for (int q = 1; q < n; ++q) {
        auto meet = [&](int p) { return ((f[q] + double(q) * q) - (f[p] + double(p) * p)) / (2.0 * (q - p)); };
        double s = meet(v[k]);
        while (s <= z[k]) s = meet(v[--k]); // z[0] = -inf stops the walk
        ++k;
        v[k] = q;
        z[k] = s;
        z[k + 1] = inf;
    }
    k = 0;
    for (int q = 0; q < n; ++q) {
        while (z[k + 1] < q) ++k;
        const double dq = q - v[k];
        d[q] = dq * dq + f[v[k]];
    }
}

void require_nonempty(const MaskGrid& m, const char* who) {
    if (m.height < 1 || m.width < 1 || m.empty()) throw ContractViolation(std::string(who) + ": mask is empty");
}

} // namespace

std::vector<long long> squared_distance_transform(const MaskGrid& m) {
    // Work on a grid padded by one background pixel on every side.
    const int H = m.height + 2, W = m.width + 2;
    std::vector<double> grid(static_cast<std::size_t>(H) * W, 0.0);
    for (int y = 0; y < m.height; ++y)
        for (int x = 0; x < m.width; ++x)
            if (m(y, x)) grid[static_cast<std::size_t>(y + 1) * W + x + 1] = kFar;

    const int n = std::max(H, W);
    std::vector<double> f(n), d(n), z(n + 1);
    std::vector<int> v(n);

    f.resize(H);
    d.resize(H);
    for (int x = 0; x < W; ++x) {
        for (int y = 0; y < H; ++y) f[y] = grid[static_cast<std::size_t>(y) * W + x];
        distance_1d(f, d, v, z);
        for (int y = 0; y < H; ++y) grid[static_cast<std::size_t>(y) * W + x] = d[y];
    }
    f.resize(W);
    d.resize(W);
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) f[x] = grid[static_cast<std::size_t>(y) * W + x];
        distance_1d(f, d, v, z);
        for (int x = 0; x < W; ++x) grid[static_cast<std::size_t>(y) * W + x] = d[x];
    }

    std::vector<long long> out(static_cast<std::size_t>(m.height) * m.width);
    for (int y = 0; y < m.height; ++y)
        for (int x = 0; x < m.width; ++x)
            out[static_cast<std::size_t>(y) * m.width + x] =
                std::llround(grid[static_cast<std::size_t>(y + 1) * W + x + 1]);
    return out;
}

Pixel edt_center(const MaskGrid& m) {
    require_nonempty(m, "edt_center");
    const auto dist = squared_distance_transform(m);
    Pixel best{};
    long long best_d = -1;
    for (int y = 0; y < m.height; ++y)
        for (int x = 0; x < m.width; ++x) {
            const long long dd = dist[static_cast<std::size_t>(y) * m.width + x];
            if (m(y, x) && dd > best_d) {
                best_d = dd;
                best = {y, x};
            }
        }
    return best;
}

Pixel bbc_center(const MaskGrid& m) {
    require_nonempty(m, "bbc_center");
    int y0 = m.height, y1 = -1, x0 = m.width, x1 = -1;
    for (int y = 0; y < m.height; ++y)
        for (int x = 0; x < m.width; ++x)
            if (m(y, x)) {
                y0 = std::min(y0, y);
                y1 = std::max(y1, y);
                x0 = std::min(x0, x);
                x1 = std::max(x1, x);
            }
    return {(y0 + y1) / 2, (x0 + x1) / 2};
}

double coverage(const MaskGrid& m, const MaskGrid& p_t) {
    const std::size_t total = p_t.count();
    if (total == 0) return 1.0;
    return double(intersection_count(m, p_t)) / double(total);
}

std::string_view to_string(PromptCenter c) { return c == PromptCenter::edt ? "edt" : "bbc"; }

std::string_view to_string(EpeAction a) {
    switch (a) {
    case EpeAction::init: return "init";
    case EpeAction::cover_gap: return "cover_gap";
    case EpeAction::expand_loose: return "expand_loose";
    case EpeAction::negative_remediation: return "negative_remediation";
    }
    return "?";
}

std::string_view to_string(EpeStop s) {
    switch (s) {
    case EpeStop::converged: return "converged";
    case EpeStop::round_budget: return "round_budget";
    case EpeStop::no_fresh_prompt: return "no_fresh_prompt";
    case EpeStop::empty_prior: return "empty_prior";
    }
    return "?";
}

void EpeConfig::validate() const {
    if (!(theta_loose > 0.0 && theta_loose < theta_tight && theta_tight < 1.0))
        throw ConfigError("epe thresholds must satisfy 0 < theta_loose < theta_tight < 1");
    if (!(score_thresh > 0.0 && score_thresh <= 1.0)) throw ConfigError("epe.score_thresh must lie in (0,1]");
    if (neg_area_thresh < 0) throw ConfigError("epe.neg_area_thresh must be >= 1, or 0 for automatic");
    if (max_rounds < 1) throw ConfigError("epe.max_rounds must be >= 1");
}

int EpeConfig::resolve_neg_area_thresh(double loose_cells) const {
    if (neg_area_thresh > 0) return neg_area_thresh;
    return std::max(16, static_cast<int>(std::lround(0.05 * loose_cells)));
}

EucSegResult euc_seg(const MaskGrid& prior_in, PromptList& prompts, PromptLabel label, SegmenterSession& segmenter,
                     const MaskGrid& p_t, PromptCenter center) {
    require_nonempty(prior_in, "euc_seg");
    const Pixel c = center == PromptCenter::edt ? edt_center(prior_in) : bbc_center(prior_in);
    prompts.push_back({c.x, c.y, label});
    SegmenterResult r = segmenter.predict(prompts);
    if (!r.mask.same_shape(p_t))
        throw ShapeError("segmenter returned a " + std::to_string(r.mask.height) + "x" + std::to_string(r.mask.width) +
                         " mask for a " + std::to_string(p_t.height) + "x" + std::to_string(p_t.width) + " image");
    EucSegResult out;
    out.cov = coverage(r.mask, p_t);
    out.iou = r.predicted_iou;
    out.mask = std::move(r.mask);
    return out;
}

EpeTrace epe_run(const Prior& pixel_prior, SegmenterSession& segmenter, const EpeConfig& cfg, double cell_area) {
    if (!(cell_area >= 1.0)) throw ContractViolation("epe_run: cell_area must be >= 1");
    cfg.validate();
    const MaskGrid p_t = threshold(pixel_prior, cfg.theta_tight);
    const MaskGrid p_l = threshold(pixel_prior, cfg.theta_loose);

    EpeTrace trace;
    trace.final_mask = MaskGrid(pixel_prior.h, pixel_prior.w);
    trace.neg_area_thresh = cfg.resolve_neg_area_thresh(double(p_l.count()) / cell_area);

    auto center_of = [&](const MaskGrid& m) {
        return cfg.center == PromptCenter::edt ? edt_center(m) : bbc_center(m);
    };
    auto run = [&](const MaskGrid& region, PromptLabel label, EpeAction action) {
        const std::size_t round_no = trace.rounds.size();
        EucSegResult r;
        try {
            r = euc_seg(region, trace.prompts, label, segmenter, p_t, cfg.center);
        } catch (const BackendError& e) {
            throw BackendError("EPE round " + std::to_string(round_no) + " (" + std::string(to_string(action)) +
                               "): " + e.what());
        }
        trace.rounds.push_back({action, trace.prompts.back(), std::move(r.mask), r.cov, r.iou, true});
    };
    // A mask spilling too far outside the loose prior is dropped and answered
    // with a negative prompt on the spill. Area already held by retained
    // rounds was vetted when it was accepted and is not counted again.
    auto remediate_if_noisy = [&] {
        EpeRound& last = trace.rounds.back();
        if (trace.remediations >= cfg.max_rounds) return;
        MaskGrid accepted(p_l.height, p_l.width);
        for (std::size_t i = 0; i + 1 < trace.rounds.size(); ++i)
            if (trace.rounds[i].retained) accepted = mask_or(accepted, trace.rounds[i].mask);
        const MaskGrid spill = mask_minus(mask_minus(last.mask, p_l), accepted);
        if (double(spill.count()) < trace.neg_area_thresh * cell_area) return;
        last.retained = false;
        run(spill, PromptLabel::negative, EpeAction::negative_remediation);
        ++trace.remediations;
    };
    auto converged = [&] {
        const EpeRound& last = trace.rounds.back();
        return last.cov >= cfg.score_thresh && last.iou >= cfg.score_thresh;
    };
    auto already_prompted = [&](Pixel c) {
        return std::any_of(trace.prompts.begin(), trace.prompts.end(), [&](const PromptPoint& p) {
            return p.x == c.x && p.y == c.y && p.label == PromptLabel::positive;
        });
    };

    const MaskGrid& seed = p_t.empty() ? p_l : p_t;
    if (seed.empty()) {
        trace.stop = EpeStop::empty_prior;
        return trace;
    }
    run(seed, PromptLabel::positive, EpeAction::init);
    trace.prompting_rounds = 1;
    remediate_if_noisy();

    trace.stop = EpeStop::round_budget;
    while (!converged()) {
        if (trace.prompting_rounds >= cfg.max_rounds) break;
        const EpeRound& prev = trace.rounds.back();
        const bool gap = prev.cov < cfg.score_thresh;

        // The tight gap falls back to the loose one when its centre would only
        // repeat an earlier prompt; a repeated prompt cannot change the answer.
        struct Candidate {
            EpeAction action;
            MaskGrid region;
        };
        std::vector<Candidate> candidates;
        if (gap) candidates.push_back({EpeAction::cover_gap, mask_minus(p_t, prev.mask)});
        candidates.push_back({EpeAction::expand_loose, mask_minus(p_l, prev.mask)});

        const Candidate* chosen = nullptr;
        for (const Candidate& c : candidates)
            if (!c.region.empty() && !already_prompted(center_of(c.region))) {
                chosen = &c;
                break;
            }
        if (!chosen) {
            trace.stop = EpeStop::no_fresh_prompt;
            break;
        }
        run(chosen->region, PromptLabel::positive, chosen->action);
        ++trace.prompting_rounds;
        remediate_if_noisy();
    }
    if (converged()) trace.stop = EpeStop::converged;

    for (const EpeRound& r : trace.rounds)
        if (r.retained) trace.final_mask = mask_or(trace.final_mask, r.mask);
    return trace;
}

EpeTrace epe_run(const ImageRGB& query, const Prior& prior, const PatchLayout& layout, SegmenterSession& segmenter,
                 const EpeConfig& cfg) {
    return epe_run(upsample_nearest(prior, layout, query.height, query.width), segmenter, cfg,
                   std::max(1.0, layout.cell_h * layout.cell_w));
}

void write_trace_jsonl(std::ostream& os, const EpeTrace& trace) {
    for (std::size_t i = 0; i < trace.rounds.size(); ++i) {
        const EpeRound& r = trace.rounds[i];
        nlohmann::ordered_json j;
        j["round"] = i;
        j["action"] = to_string(r.action);
        j["prompt"] = {{"x", r.prompt.x}, {"y", r.prompt.y}, {"label", static_cast<int>(r.prompt.label)}};
        j["cov"] = r.cov;
        j["iou"] = r.iou;
        j["retained"] = r.retained;
        os << j.dump() << '\n';
    }
}

} // namespace opsam
