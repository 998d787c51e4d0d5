#include "opsam/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

namespace opsam {

namespace {

ImageRGB from_mat(const cv::Mat& raw, const std::string& what) {
    if (raw.empty()) throw Error("cannot decode image " + what);
    cv::Mat m = raw;
    if (m.depth() != CV_8U) m.convertTo(m, CV_8U, m.depth() == CV_16U ? 1.0 / 257.0 : 1.0);
    cv::Mat rgb;
    switch (m.channels()) {
    case 1: cv::cvtColor(m, rgb, cv::COLOR_GRAY2RGB); break;
    case 3: cv::cvtColor(m, rgb, cv::COLOR_BGR2RGB); break;
    case 4: cv::cvtColor(m, rgb, cv::COLOR_BGRA2RGB); break;
    default: throw Error("unsupported channel count in " + what);
    }
    ImageRGB out(rgb.rows, rgb.cols);
    for (int y = 0; y < rgb.rows; ++y) std::copy_n(rgb.ptr<std::uint8_t>(y), rgb.cols * 3, out.pixel(y, 0));
    return out;
}

MaskGrid mask_from_mat(const cv::Mat& raw, const std::string& what) {
    if (raw.empty()) throw Error("cannot decode mask " + what);
    std::vector<cv::Mat> planes;
    cv::split(raw, planes);
    cv::Mat any = cv::Mat::zeros(raw.rows, raw.cols, CV_8U);
    for (const cv::Mat& p : planes) any |= (p != 0);
    MaskGrid out(raw.rows, raw.cols);
    for (int y = 0; y < raw.rows; ++y) {
        const std::uint8_t* row = any.ptr<std::uint8_t>(y);
        for (int x = 0; x < raw.cols; ++x) out(y, x) = row[x] ? 1 : 0;
    }
    return out;
}

cv::Mat to_mat(const ImageRGB& image) {
    cv::Mat rgb(image.height, image.width, CV_8UC3, const_cast<std::uint8_t*>(image.data.data()));
    cv::Mat bgr;
    cv::cvtColor(rgb, bgr, cv::COLOR_RGB2BGR);
    return bgr;
}

cv::Mat to_mat(const MaskGrid& mask) {
    cv::Mat m(mask.height, mask.width, CV_8U);
    for (int y = 0; y < mask.height; ++y)
        for (int x = 0; x < mask.width; ++x) m.at<std::uint8_t>(y, x) = mask(y, x) ? 255 : 0;
    return m;
}

std::vector<std::uint8_t> png_bytes(const cv::Mat& m) {
    std::vector<std::uint8_t> buf;
    if (!cv::imencode(".png", m, buf)) throw Error("PNG encoding failed");
    return buf;
}

void write_file(const std::filesystem::path& path, const cv::Mat& m) {
    if (!path.parent_path().empty()) std::filesystem::create_directories(path.parent_path());
    if (!cv::imwrite(path.string(), m)) throw Error("cannot write " + path.string());
}

cv::Mat decode_bytes(std::span<const std::uint8_t> bytes) {
    if (bytes.empty()) return {};
    const cv::Mat buf(1, static_cast<int>(bytes.size()), CV_8U, const_cast<std::uint8_t*>(bytes.data()));
    return cv::imdecode(buf, cv::IMREAD_UNCHANGED);
}

} // namespace

ImageRGB read_image(const std::filesystem::path& path) {
    return from_mat(cv::imread(path.string(), cv::IMREAD_UNCHANGED), path.string());
}

MaskGrid read_mask(const std::filesystem::path& path) {
    return mask_from_mat(cv::imread(path.string(), cv::IMREAD_UNCHANGED), path.string());
}

void write_image_png(const std::filesystem::path& path, const ImageRGB& image) { write_file(path, to_mat(image)); }

void write_mask_png(const std::filesystem::path& path, const MaskGrid& mask) { write_file(path, to_mat(mask)); }

void write_prior_pgm(const std::filesystem::path& path, const Prior& prior) {
    if (!path.parent_path().empty()) std::filesystem::create_directories(path.parent_path());
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error("cannot write " + path.string());
    os << "P5\n" << prior.w << ' ' << prior.h << "\n255\n";
    for (double v : prior.data) os.put(static_cast<char>(std::clamp(std::lround(v * 255.0), 0L, 255L)));
}

std::vector<std::uint8_t> encode_png(const ImageRGB& image) { return png_bytes(to_mat(image)); }

std::vector<std::uint8_t> encode_png(const MaskGrid& mask) { return png_bytes(to_mat(mask)); }

ImageRGB decode_image(std::span<const std::uint8_t> bytes) { return from_mat(decode_bytes(bytes), "from memory"); }

MaskGrid decode_mask(std::span<const std::uint8_t> bytes) { return mask_from_mat(decode_bytes(bytes), "from memory"); }

} // namespace opsam
