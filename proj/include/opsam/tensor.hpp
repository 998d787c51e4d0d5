#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "opsam/errors.hpp"

namespace opsam {

/// Dense row-major matrix of doubles.
class Matrix {
  public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    static Matrix identity(std::size_t n);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }

    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }

    const std::vector<double>& data() const { return data_; }
    std::vector<double>& data() { return data_; }

    Matrix transposed() const;

    bool operator==(const Matrix&) const = default;

  private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// 8-bit RGB image, interleaved channels.
struct ImageRGB {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> data; // height * width * 3

    ImageRGB() = default;
    ImageRGB(int h, int w, std::uint8_t fill = 0);

    std::uint8_t* pixel(int y, int x) { return data.data() + (static_cast<std::size_t>(y) * width + x) * 3; }
    const std::uint8_t* pixel(int y, int x) const { return data.data() + (static_cast<std::size_t>(y) * width + x) * 3; }

    bool operator==(const ImageRGB&) const = default;
};

/// Binary mask, one byte per pixel holding 0 or 1.
struct MaskGrid {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> data;

    MaskGrid() = default;
    MaskGrid(int h, int w, std::uint8_t fill = 0);

    std::uint8_t operator()(int y, int x) const { return data[static_cast<std::size_t>(y) * width + x]; }
    std::uint8_t& operator()(int y, int x) { return data[static_cast<std::size_t>(y) * width + x]; }

    bool contains(int y, int x) const { return y >= 0 && x >= 0 && y < height && x < width; }
    std::size_t count() const;
    bool empty() const { return count() == 0; }
    bool same_shape(const MaskGrid& o) const { return height == o.height && width == o.width; }

    bool operator==(const MaskGrid&) const = default;
};

MaskGrid mask_and(const MaskGrid& a, const MaskGrid& b);
MaskGrid mask_or(const MaskGrid& a, const MaskGrid& b);
MaskGrid mask_not(const MaskGrid& a);
/// a ∧ ¬b
MaskGrid mask_minus(const MaskGrid& a, const MaskGrid& b);
std::size_t intersection_count(const MaskGrid& a, const MaskGrid& b);

/// 4-connected component labels: 0 for background, 1..count for components,
/// numbered in row-major order of their first pixel.
struct ComponentLabels {
    std::vector<int> labels;
    int count = 0;
};
ComponentLabels label_components(const MaskGrid& m);

/// Patch-level embeddings: (h*w) rows of dimension D, row index = r*w + c.
struct FeatureMap {
    int h = 0;
    int w = 0;
    int dim = 0;
    Matrix rows;

    FeatureMap() = default;
    FeatureMap(int h, int w, int dim);
    FeatureMap(int h, int w, int dim, std::vector<double> data);

    std::size_t patches() const { return static_cast<std::size_t>(h) * w; }
};

/// Real-valued grid over the patch lattice. Normalized priors live in [0,1].
struct Prior {
    int h = 0;
    int w = 0;
    std::vector<double> data;

    Prior() = default;
    Prior(int h, int w, double fill = 0.0);
    Prior(int h, int w, std::vector<double> data);

    double operator()(int r, int c) const { return data[static_cast<std::size_t>(r) * w + c]; }
    double& operator()(int r, int c) { return data[static_cast<std::size_t>(r) * w + c]; }
    std::size_t size() const { return data.size(); }

    bool operator==(const Prior&) const = default;
};

/// How a patch lattice sits over the original image. Patch (r, c) covers the
/// pixel rectangle [r*cell_h, (r+1)*cell_h) x [c*cell_w, (c+1)*cell_w); cells
/// may extend past the image (letterbox padding), which counts as background.
struct PatchLayout {
    int h = 0;
    int w = 0;
    double cell_h = 1.0;
    double cell_w = 1.0;

    static PatchLayout uniform(int image_h, int image_w, int h, int w);
    bool operator==(const PatchLayout&) const = default;
};

Matrix matmul(const Matrix& a, const Matrix& b);
std::vector<double> matvec(const Matrix& a, std::span<const double> x);

double dot(std::span<const double> a, std::span<const double> b);
/// Cosine similarity; 0 when either vector has zero norm.
double cosine_similarity(std::span<const double> a, std::span<const double> b);

/// Area (mean) pooling of a mask onto an h x w patch grid, keeping fractions.
Prior resize_mask_to_patches(const MaskGrid& m, int h, int w);
Prior resize_mask_to_patches(const MaskGrid& m, const PatchLayout& layout);

/// Cell is 1 iff value > t (strict).
MaskGrid threshold(const Prior& p, double t);

/// Affine map onto [0,1]; a constant grid maps to all zeros.
Prior minmax_normalize(const Prior& p);

/// Nearest-neighbour lookup of every image pixel into the patch lattice.
Prior upsample_nearest(const Prior& p, const PatchLayout& layout, int image_h, int image_w);

} // namespace opsam
