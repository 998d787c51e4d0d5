#include "opsam/remote.hpp"

#include <algorithm>
#include <cmath>

#include <httplib.h>
#include <opencv2/core.hpp>
#include <opencv2/imgproc.hpp>

#include "opsam/codec.hpp"
#include "opsam/image_io.hpp"
#include "opsam/wire.hpp"

namespace opsam {

Letterbox Letterbox::fit(int src_h, int src_w, int size) {
    if (src_h < 1 || src_w < 1 || size < 1) throw ContractViolation("Letterbox::fit: sizes must be positive");
    const double s = double(size) / std::max(src_h, src_w);
    Letterbox lb;
    lb.size = size;
    lb.src_h = src_h;
    lb.src_w = src_w;
    lb.scaled_h = std::clamp(static_cast<int>(std::lround(src_h * s)), 1, size);
    lb.scaled_w = std::clamp(static_cast<int>(std::lround(src_w * s)), 1, size);
    return lb;
}

ImageRGB Letterbox::apply(const ImageRGB& image) const {
    if (image.height != src_h || image.width != src_w) throw ContractViolation("Letterbox::apply: image size mismatch");
    const cv::Mat src(image.height, image.width, CV_8UC3, const_cast<std::uint8_t*>(image.data.data()));
    cv::Mat scaled;
    const bool shrinking = scaled_h < src_h || scaled_w < src_w;
    cv::resize(src, scaled, cv::Size(scaled_w, scaled_h), 0, 0, shrinking ? cv::INTER_AREA : cv::INTER_LINEAR);
    ImageRGB out(size, size);
    for (int y = 0; y < scaled_h; ++y) std::copy_n(scaled.ptr<std::uint8_t>(y), scaled_w * 3, out.pixel(y, 0));
    return out;
}

PromptPoint Letterbox::map(const PromptPoint& p) const {
    PromptPoint q = p;
    q.x = std::clamp(static_cast<int>(std::floor((p.x + 0.5) * scale_x())), 0, scaled_w - 1);
    q.y = std::clamp(static_cast<int>(std::floor((p.y + 0.5) * scale_y())), 0, scaled_h - 1);
    return q;
}

MaskGrid Letterbox::unapply(const MaskGrid& canvas_mask) const {
    if (canvas_mask.height != size || canvas_mask.width != size)
        throw ShapeError("letterboxed mask is " + std::to_string(canvas_mask.height) + "x" +
                         std::to_string(canvas_mask.width) + ", expected " + std::to_string(size) + "x" +
                         std::to_string(size));
    MaskGrid out(src_h, src_w);
    for (int y = 0; y < src_h; ++y) {
        const int cy = std::min(scaled_h - 1, static_cast<int>(std::floor((y + 0.5) * scale_y())));
        for (int x = 0; x < src_w; ++x) {
            const int cx = std::min(scaled_w - 1, static_cast<int>(std::floor((x + 0.5) * scale_x())));
            out(y, x) = canvas_mask(cy, cx);
        }
    }
    return out;
}

PatchLayout Letterbox::layout(int grid) const {
    const double cell = double(size) / grid;
    return {grid, grid, cell / scale_y(), cell / scale_x()};
}

RemoteClient::RemoteClient(std::string base_url, RemoteOptions options)
    : base_url_(std::move(base_url)), options_(options) {
    const auto scheme = base_url_.find("://");
    if (scheme == std::string::npos || base_url_.compare(0, scheme, "http") != 0)
        throw ConfigError("remote backend URL must start with http:// (got '" + base_url_ + "')");
    const auto path = base_url_.find('/', scheme + 3);
    scheme_host_ = base_url_.substr(0, path);
    if (path != std::string::npos) prefix_ = base_url_.substr(path);
    while (!prefix_.empty() && prefix_.back() == '/') prefix_.pop_back();
}

std::string RemoteClient::request(const std::string& method, const std::string& path, const std::string* body) const {
    httplib::Client cli(scheme_host_);
    cli.set_connection_timeout(options_.timeout_seconds);
    cli.set_read_timeout(options_.timeout_seconds);
    cli.set_write_timeout(options_.timeout_seconds);

    auto once = [&]() -> std::string {
        const std::string url = prefix_ + path;
        httplib::Result res = body ? cli.Post(url, *body, "application/json") : cli.Get(url);
        if (!res) throw TransportError(method + " " + base_url_ + path + ": " + httplib::to_string(res.error()));
        if (res->status != 200) wire::raise_http_error(res->status, res->body);
        return res->body;
    };
    std::string reply = once();
    if (options_.verify_repeat) {
        const std::string again = once();
        if (sha256_hex(reply) != sha256_hex(again))
            throw ProtocolError(method + " " + path + ": identical requests produced different replies");
    }
    return reply;
}

std::string RemoteClient::post(const std::string& path, const std::string& body) const {
    return request("POST", path, &body);
}

std::string RemoteClient::get(const std::string& path) const { return request("GET", path, nullptr); }

EncoderCapabilities RemoteClient::capabilities() const {
    std::lock_guard lock(caps_mutex_);
    if (!caps_) caps_ = wire::parse_capabilities(get("/v1/capabilities"));
    return *caps_;
}

bool RemoteClient::echo_matches(std::span<const std::uint8_t> payload) const {
    const auto back = wire::parse_echo_reply(post("/v1/echo", wire::echo_request(payload)));
    return sha256_hex(back) == sha256_hex(payload);
}

EncodedImage RemoteEncoder::encode(const ImageRGB& image, std::span<const EmbeddingKind> kinds) const {
    const EncoderCapabilities caps = client_.capabilities();
    for (EmbeddingKind k : kinds)
        if (std::find(caps.kinds.begin(), caps.kinds.end(), k) == caps.kinds.end())
            throw BackendError("remote encoder does not offer '" + std::string(to_string(k)) + "' embeddings");

    const Letterbox lb = Letterbox::fit(image.height, image.width, caps.input_size);
    wire::EncodeReply reply =
        wire::parse_encode_reply(client_.post("/v1/encode", wire::encode_request(encode_png(lb.apply(image)), kinds)), kinds);
    const int grid = caps.input_size / caps.patch;
    if (reply.h != grid || reply.w != grid || reply.dim != caps.dim)
        throw ShapeError("encode reply is " + std::to_string(reply.h) + "x" + std::to_string(reply.w) + "x" +
                         std::to_string(reply.dim) + ", capabilities promise " + std::to_string(grid) + "x" +
                         std::to_string(grid) + "x" + std::to_string(caps.dim));
    return {lb.layout(grid), std::move(reply.embeddings)};
}

namespace {

class RemoteSession final : public SegmenterSession {
  public:
    RemoteSession(const RemoteClient& client, const ImageRGB& image, std::string id, int input)
        : client_(client), id_(std::move(id)), lb_(Letterbox::fit(image.height, image.width, input)),
          png_(encode_png(lb_.apply(image))) {}

    SegmenterResult predict(const PromptList& prompts) override {
        PromptList mapped;
        mapped.reserve(prompts.size());
        for (const PromptPoint& p : prompts) {
            if (p.y < 0 || p.x < 0 || p.y >= lb_.src_h || p.x >= lb_.src_w)
                throw ContractViolation("prompt outside the image");
            mapped.push_back(lb_.map(p));
        }
        std::optional<std::span<const std::uint8_t>> image;
        if (!sent_image_) image = png_;
        SegmenterResult r = wire::parse_segment_reply(client_.post("/v1/segment", wire::segment_request(id_, image, mapped)));
        sent_image_ = true;
        if (r.mask.height == lb_.src_h && r.mask.width == lb_.src_w && (lb_.size != lb_.src_h || lb_.size != lb_.src_w))
            return r; // server already mapped back to the source size
        r.mask = lb_.unapply(r.mask);
        return r;
    }

  private:
    const RemoteClient& client_;
    std::string id_;
    Letterbox lb_;
    std::vector<std::uint8_t> png_;
    bool sent_image_ = false;
};

} // namespace

std::unique_ptr<SegmenterSession> RemoteSegmenter::open_session(const ImageRGB& image, std::string_view session_id) const {
    const EncoderCapabilities caps = client_.capabilities();
    return std::make_unique<RemoteSession>(client_, image, std::string(session_id), caps.segmenter_input);
}

} // namespace opsam
