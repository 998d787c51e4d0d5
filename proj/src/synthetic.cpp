#include "opsam/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace opsam {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint8_t to_u8(double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

void normalize(std::span<double> v) {
    double n = 0.0;
    for (double x : v) n += x * x;
    n = std::sqrt(n);
    if (n > 0.0)
        for (double& x : v) x /= n;
}

struct BlobShape {
    double cy, cx, radius;
    double a2, p2, a3, p3;

    bool inside(double y, double x) const {
        const double dy = y - cy, dx = x - cx;
        const double theta = std::atan2(dy, dx);
        const double r = radius * (1.0 + a2 * std::sin(2.0 * theta + p2) + a3 * std::sin(3.0 * theta + p3));
        return dy * dy + dx * dx <= r * r;
    }
};

MaskGrid rasterize(const BlobShape& b, int h, int w) {
    MaskGrid m(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) m(y, x) = b.inside(y, x) ? 1 : 0;
    return m;
}

// True when some pixel of `a` lies within Chebyshev distance `gap` of `b`.
bool too_close(const MaskGrid& a, const MaskGrid& b, int gap) {
    for (int y = 0; y < a.height; ++y)
        for (int x = 0; x < a.width; ++x) {
            if (!a(y, x)) continue;
            for (int dy = -gap; dy <= gap; ++dy)
                for (int dx = -gap; dx <= gap; ++dx)
                    if (b.contains(y + dy, x + dx) && b(y + dy, x + dx)) return true;
        }
    return false;
}

} // namespace

std::uint64_t hash_image(const ImageRGB& image) {
    std::uint64_t h = 1469598103934665603ULL; // FNV-1a
    auto mix = [&h](std::uint64_t v) {
        h ^= v;
        h *= 1099511628211ULL;
    };
    mix(static_cast<std::uint64_t>(image.height));
    mix(static_cast<std::uint64_t>(image.width));
    for (std::uint8_t b : image.data) mix(b);
    return h;
}

SyntheticScene make_scene(std::uint64_t seed, const SceneOptions& opts) {
    if (opts.blobs < 0 || opts.min_radius < 2.0 || opts.max_radius < opts.min_radius)
        throw ContractViolation("make_scene: invalid scene options");
    std::mt19937_64 rng(splitmix64(seed));
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    SyntheticScene scene;
    scene.seed = seed;
    scene.gt_mask = MaskGrid(opts.height, opts.width);

    for (int b = 0; b < opts.blobs; ++b) {
        bool placed = false;
        for (int attempt = 0; attempt < 200 && !placed; ++attempt) {
            BlobShape s{};
            s.radius = opts.min_radius + (opts.max_radius - opts.min_radius) * unit(rng);
            const double margin = s.radius * 1.3 + 2.0;
            if (2 * margin >= std::min(opts.height, opts.width)) throw ContractViolation("make_scene: blobs do not fit");
            s.cy = margin + (opts.height - 2 * margin) * unit(rng);
            s.cx = margin + (opts.width - 2 * margin) * unit(rng);
            s.a2 = 0.15 * unit(rng);
            s.a3 = 0.10 * unit(rng);
            s.p2 = 2.0 * std::numbers::pi * unit(rng);
            s.p3 = 2.0 * std::numbers::pi * unit(rng);
            MaskGrid m = rasterize(s, opts.height, opts.width);
            if (m.empty() || label_components(m).count != 1) continue;
            if (too_close(m, scene.gt_mask, 3)) continue;
            scene.gt_mask = mask_or(scene.gt_mask, m);
            scene.blobs.push_back(std::move(m));
            placed = true;
        }
        if (!placed) throw ContractViolation("make_scene: could not place non-touching blobs");
    }

    // Smooth shading plus a little pixel jitter.
    const double fy = 0.5 + unit(rng), fx = 0.5 + unit(rng), phase = 2.0 * std::numbers::pi * unit(rng);
    std::uniform_int_distribution<int> jitter(-3, 3);
    scene.image = ImageRGB(opts.height, opts.width);
    for (int y = 0; y < opts.height; ++y)
        for (int x = 0; x < opts.width; ++x) {
            const double wave =
                std::sin(2.0 * std::numbers::pi * (fy * y / opts.height + fx * x / opts.width) + phase);
            const bool lesion = scene.gt_mask(y, x);
            const std::uint8_t* base = lesion ? kLesionRGB : kTissueRGB;
            const double amp = lesion ? 8.0 : 12.0;
            std::uint8_t* px = scene.image.pixel(y, x);
            for (int c = 0; c < 3; ++c) px[c] = to_u8(base[c] + amp * wave + jitter(rng));
        }
    return scene;
}

SyntheticEncoder::SyntheticEncoder(SyntheticEncoderConfig cfg) : cfg_(cfg) {
    if (cfg_.dim < 4) throw ContractViolation("SyntheticEncoder: dim must be >= 4");
    if (cfg_.patch < 1) throw ContractViolation("SyntheticEncoder: patch must be >= 1");
    if (!(cfg_.noise_sigma >= 0.0)) throw ContractViolation("SyntheticEncoder: noise_sigma must be >= 0");

    std::mt19937_64 rng(splitmix64(cfg_.seed ^ 0x5eedULL));
    std::normal_distribution<double> gauss(0.0, 1.0);
    const auto d = static_cast<std::size_t>(cfg_.dim);
    lesion_proto_.resize(d);
    tissue_proto_.resize(d);
    for (auto& v : lesion_proto_) v = gauss(rng);
    for (auto& v : tissue_proto_) v = gauss(rng);
    normalize(lesion_proto_);
    // Orthogonal prototypes keep the two classes cleanly apart.
    const double overlap = dot(lesion_proto_, tissue_proto_);
    for (std::size_t i = 0; i < d; ++i) tissue_proto_[i] -= overlap * lesion_proto_[i];
    normalize(tissue_proto_);

    // query, key, value, feats
    constexpr std::array<double, 4> strength{0.7, 0.9, 0.0, 0.35};
    for (std::size_t k = 0; k < 4; ++k) {
        Matrix m = Matrix::identity(d);
        const double s = strength[k] / std::sqrt(double(d));
        for (double& v : m.data()) v += s * gauss(rng);
        mixing_[k] = std::move(m);
    }
}

EncoderCapabilities SyntheticEncoder::capabilities() const {
    return {cfg_.patch, 0, cfg_.dim, {kAllEmbeddingKinds.begin(), kAllEmbeddingKinds.end()}, 0, "synthetic"};
}

Prior SyntheticEncoder::lesion_fraction(const ImageRGB& image) const {
    const int h = (image.height + cfg_.patch - 1) / cfg_.patch;
    const int w = (image.width + cfg_.patch - 1) / cfg_.patch;
    Prior frac(h, w);
    std::vector<int> total(frac.size(), 0);
    for (int y = 0; y < image.height; ++y)
        for (int x = 0; x < image.width; ++x) {
            const std::uint8_t* p = image.pixel(y, x);
            int dl = 0, dt = 0;
            for (int c = 0; c < 3; ++c) {
                dl += (p[c] - kLesionRGB[c]) * (p[c] - kLesionRGB[c]);
                dt += (p[c] - kTissueRGB[c]) * (p[c] - kTissueRGB[c]);
            }
            const std::size_t cell = static_cast<std::size_t>(y / cfg_.patch) * w + x / cfg_.patch;
            frac.data[cell] += dl < dt ? 1.0 : 0.0;
            ++total[cell];
        }
    for (std::size_t i = 0; i < frac.size(); ++i) frac.data[i] /= total[i];
    return frac;
}

EncodedImage SyntheticEncoder::encode(const ImageRGB& image, std::span<const EmbeddingKind> kinds) const {
    const Prior frac = lesion_fraction(image);
    const auto d = static_cast<std::size_t>(cfg_.dim);

    std::mt19937_64 rng(splitmix64(cfg_.seed ^ hash_image(image)));
    std::normal_distribution<double> gauss(0.0, 1.0);
    Matrix base(frac.size(), d);
    for (std::size_t i = 0; i < frac.size(); ++i) {
        auto row = base.row(i);
        for (std::size_t j = 0; j < d; ++j)
            row[j] = frac.data[i] * lesion_proto_[j] + (1.0 - frac.data[i]) * tissue_proto_[j] +
                     cfg_.noise_sigma * gauss(rng);
        normalize(row);
    }

    EncodedImage out;
    out.layout = {frac.h, frac.w, double(cfg_.patch), double(cfg_.patch)};
    for (EmbeddingKind k : kinds) {
        const Matrix& mix = mixing_[static_cast<std::size_t>(k)];
        FeatureMap f(frac.h, frac.w, cfg_.dim);
        for (std::size_t i = 0; i < frac.size(); ++i) {
            auto dst = f.rows.row(i);
            for (std::size_t r = 0; r < d; ++r) dst[r] = dot(mix.row(r), base.row(i));
            normalize(dst);
        }
        out.embeddings.set(k, std::move(f));
    }
    return out;
}

} // namespace opsam
