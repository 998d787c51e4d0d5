#include "opsam/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace opsam {

namespace {

void require(bool ok, const char* what) {
    if (!ok) throw ContractViolation(what);
}

void require_same_shape(const MaskGrid& a, const MaskGrid& b) {
    if (!a.same_shape(b))
        throw ContractViolation("mask shape mismatch: " + std::to_string(a.height) + "x" + std::to_string(a.width) +
                                " vs " + std::to_string(b.height) + "x" + std::to_string(b.width));
}

template <class Op>
MaskGrid combine(const MaskGrid& a, const MaskGrid& b, Op op) {
    require_same_shape(a, b);
    MaskGrid out(a.height, a.width);
    for (std::size_t i = 0; i < a.data.size(); ++i) out.data[i] = op(a.data[i], b.data[i]) ? 1 : 0;
    return out;
}

// Overlap of each unit pixel interval [k, k+1) with cell [start, start+len).
struct Span1D {
    int first = 0;
    std::vector<double> weights;
};

Span1D overlap(double start, double len, int extent) {
    Span1D s;
    const double end = start + len;
    const int lo = std::max(0, static_cast<int>(std::floor(start)));
    const int hi = std::min(extent, static_cast<int>(std::ceil(end)));
    s.first = lo;
    for (int k = lo; k < hi; ++k) {
        const double wgt = std::min(end, double(k + 1)) - std::max(start, double(k));
        s.weights.push_back(std::max(0.0, wgt));
    }
    return s;
}

} // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill) : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    require(data_.size() == rows_ * cols_, "matrix data size does not match rows*cols");
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix Matrix::transposed() const {
    Matrix t(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
        for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
    return t;
}

ImageRGB::ImageRGB(int h, int w, std::uint8_t fill) : height(h), width(w) {
    require(h >= 1 && w >= 1, "image dimensions must be positive");
    data.assign(static_cast<std::size_t>(h) * w * 3, fill);
}

MaskGrid::MaskGrid(int h, int w, std::uint8_t fill) : height(h), width(w) {
    require(h >= 1 && w >= 1, "mask dimensions must be positive");
    require(fill <= 1, "mask values must be 0 or 1");
    data.assign(static_cast<std::size_t>(h) * w, fill);
}

std::size_t MaskGrid::count() const {
    return static_cast<std::size_t>(std::count(data.begin(), data.end(), std::uint8_t{1}));
}

MaskGrid mask_and(const MaskGrid& a, const MaskGrid& b) {
    return combine(a, b, [](auto x, auto y) { return x && y; });
}
MaskGrid mask_or(const MaskGrid& a, const MaskGrid& b) {
    return combine(a, b, [](auto x, auto y) { return x || y; });
}
MaskGrid mask_minus(const MaskGrid& a, const MaskGrid& b) {
    return combine(a, b, [](auto x, auto y) { return x && !y; });
}
MaskGrid mask_not(const MaskGrid& a) {
    MaskGrid out = a;
    for (auto& v : out.data) v = v ? 0 : 1;
    return out;
}

std::size_t intersection_count(const MaskGrid& a, const MaskGrid& b) {
    require_same_shape(a, b);
    std::size_t n = 0;
    for (std::size_t i = 0; i < a.data.size(); ++i) n += (a.data[i] && b.data[i]) ? 1 : 0;
    return n;
}

ComponentLabels label_components(const MaskGrid& m) {
    ComponentLabels out;
    out.labels.assign(m.data.size(), 0);
    std::vector<std::size_t> stack;
    for (std::size_t start = 0; start < m.data.size(); ++start) {
        if (!m.data[start] || out.labels[start]) continue;
        const int id = ++out.count;
        out.labels[start] = id;
        stack.push_back(start);
        while (!stack.empty()) {
            const std::size_t i = stack.back();
            stack.pop_back();
            const int y = static_cast<int>(i / m.width), x = static_cast<int>(i % m.width);
            const int ny[4] = {y - 1, y + 1, y, y};
            const int nx[4] = {x, x, x - 1, x + 1};
            for (int k = 0; k < 4; ++k) {
                if (!m.contains(ny[k], nx[k])) continue;
                const std::size_t j = static_cast<std::size_t>(ny[k]) * m.width + nx[k];
                if (m.data[j] && !out.labels[j]) {
                    out.labels[j] = id;
                    stack.push_back(j);
                }
            }
        }
    }
    return out;
}

FeatureMap::FeatureMap(int h_, int w_, int dim_) : h(h_), w(w_), dim(dim_) {
    require(h >= 1 && w >= 1 && dim >= 1, "feature map dimensions must be positive");
    rows = Matrix(patches(), static_cast<std::size_t>(dim));
}

FeatureMap::FeatureMap(int h_, int w_, int dim_, std::vector<double> data) : h(h_), w(w_), dim(dim_) {
    require(h >= 1 && w >= 1 && dim >= 1, "feature map dimensions must be positive");
    rows = Matrix(patches(), static_cast<std::size_t>(dim), std::move(data));
    for (double v : rows.data()) require(std::isfinite(v), "feature map contains a non-finite value");
}

Prior::Prior(int h_, int w_, double fill) : h(h_), w(w_), data(static_cast<std::size_t>(h_) * w_, fill) {
    require(h >= 1 && w >= 1, "prior dimensions must be positive");
}

Prior::Prior(int h_, int w_, std::vector<double> d) : h(h_), w(w_), data(std::move(d)) {
    require(h >= 1 && w >= 1, "prior dimensions must be positive");
    require(data.size() == static_cast<std::size_t>(h) * w, "prior data size does not match h*w");
}

PatchLayout PatchLayout::uniform(int image_h, int image_w, int h, int w) {
    require(h >= 1 && w >= 1 && h <= image_h && w <= image_w, "patch grid must be no finer than the image");
    return {h, w, double(image_h) / h, double(image_w) / w};
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows())
        throw ContractViolation("matmul inner dimension mismatch: " + std::to_string(a.cols()) + " vs " +
                                std::to_string(b.rows()));
    Matrix out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto dst = out.row(i);
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            auto src = b.row(k);
            for (std::size_t j = 0; j < b.cols(); ++j) dst[j] += aik * src[j];
        }
    }
    return out;
}

std::vector<double> matvec(const Matrix& a, std::span<const double> x) {
    if (a.cols() != x.size())
        throw ContractViolation("matvec dimension mismatch: " + std::to_string(a.cols()) + " vs " +
                                std::to_string(x.size()));
    std::vector<double> out(a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) out[i] = dot(a.row(i), x);
    return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
    require(a.size() == b.size(), "dot product length mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
    const double na = std::sqrt(dot(a, a));
    const double nb = std::sqrt(dot(b, b));
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot(a, b) / (na * nb);
}

Prior resize_mask_to_patches(const MaskGrid& m, int h, int w) {
    require(h >= 1 && w >= 1 && h <= m.height && w <= m.width, "patch grid must be no finer than the mask");
    return resize_mask_to_patches(m, PatchLayout::uniform(m.height, m.width, h, w));
}

Prior resize_mask_to_patches(const MaskGrid& m, const PatchLayout& layout) {
    require(layout.h >= 1 && layout.w >= 1 && layout.cell_h > 0 && layout.cell_w > 0, "invalid patch layout");
    Prior out(layout.h, layout.w);
    const double cell_area = layout.cell_h * layout.cell_w;
    std::vector<Span1D> cols(layout.w);
    for (int c = 0; c < layout.w; ++c) cols[c] = overlap(c * layout.cell_w, layout.cell_w, m.width);
    for (int r = 0; r < layout.h; ++r) {
        const Span1D rs = overlap(r * layout.cell_h, layout.cell_h, m.height);
        for (int c = 0; c < layout.w; ++c) {
            const Span1D& cs = cols[c];
            double acc = 0.0;
            for (std::size_t i = 0; i < rs.weights.size(); ++i) {
                const int y = rs.first + static_cast<int>(i);
                double row_acc = 0.0;
                for (std::size_t j = 0; j < cs.weights.size(); ++j)
                    if (m(y, cs.first + static_cast<int>(j))) row_acc += cs.weights[j];
                acc += rs.weights[i] * row_acc;
            }
            out(r, c) = std::clamp(acc / cell_area, 0.0, 1.0);
        }
    }
    return out;
}

MaskGrid threshold(const Prior& p, double t) {
    MaskGrid out(p.h, p.w);
    for (std::size_t i = 0; i < p.data.size(); ++i) out.data[i] = p.data[i] > t ? 1 : 0;
    return out;
}

Prior minmax_normalize(const Prior& p) {
    const auto [lo, hi] = std::minmax_element(p.data.begin(), p.data.end());
    Prior out(p.h, p.w);
    if (*hi == *lo) return out;
    const double lo_v = *lo;
    const double range = *hi - *lo;
    for (std::size_t i = 0; i < p.data.size(); ++i) out.data[i] = std::clamp((p.data[i] - lo_v) / range, 0.0, 1.0);
    return out;
}

Prior upsample_nearest(const Prior& p, const PatchLayout& layout, int image_h, int image_w) {
    require(p.h == layout.h && p.w == layout.w, "prior does not match the patch layout");
    Prior out(image_h, image_w);
    std::vector<int> col_of(image_w);
    for (int x = 0; x < image_w; ++x)
        col_of[x] = std::min(layout.w - 1, static_cast<int>(std::floor((x + 0.5) / layout.cell_w)));
    for (int y = 0; y < image_h; ++y) {
        const int r = std::min(layout.h - 1, static_cast<int>(std::floor((y + 0.5) / layout.cell_h)));
        for (int x = 0; x < image_w; ++x) out(y, x) = p(r, col_of[x]);
    }
    return out;
}

} // namespace opsam
