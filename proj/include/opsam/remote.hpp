#pragma once

#include <mutex>
#include <optional>
#include <string>

#include "opsam/backends.hpp"

namespace opsam {

/// Placement of an H x W image inside a size x size canvas: scaled to fit,
/// anchored top-left, zero padding on the bottom and right.
struct Letterbox {
    int size = 0;
    int src_h = 0;
    int src_w = 0;
    int scaled_h = 0;
    int scaled_w = 0;

    static Letterbox fit(int src_h, int src_w, int size);
    double scale_y() const { return double(scaled_h) / src_h; }
    double scale_x() const { return double(scaled_w) / src_w; }

    ImageRGB apply(const ImageRGB& image) const;
    PromptPoint map(const PromptPoint& p) const;
    /// Crops the canvas-sized mask back to the scaled region and resamples it
    /// (nearest) to the source size.
    MaskGrid unapply(const MaskGrid& canvas_mask) const;
    /// Patch lattice of an n x n grid over the canvas, in source pixels.
    PatchLayout layout(int grid) const;
};

struct RemoteOptions {
    int timeout_seconds = 120;
    /// Send every request twice and require identical reply bodies.
    bool verify_repeat = false;
};

/// HTTP transport for the model server's JSON protocol.
class RemoteClient {
  public:
    explicit RemoteClient(std::string base_url, RemoteOptions options = {});

    const std::string& base_url() const { return base_url_; }
    std::string post(const std::string& path, const std::string& body) const;
    std::string get(const std::string& path) const;

    /// Fetched once and cached.
    EncoderCapabilities capabilities() const;
    /// Sends `payload` to the echo endpoint and compares SHA-256 digests.
    bool echo_matches(std::span<const std::uint8_t> payload) const;

  private:
    std::string request(const std::string& method, const std::string& path, const std::string* body) const;

    std::string scheme_host_;
    std::string prefix_;
    std::string base_url_;
    RemoteOptions options_;
    mutable std::mutex caps_mutex_;
    mutable std::optional<EncoderCapabilities> caps_;
};

class RemoteEncoder final : public EncoderBackend {
  public:
    explicit RemoteEncoder(const RemoteClient& client) : client_(client) {}
    EncoderCapabilities capabilities() const override { return client_.capabilities(); }
    EncodedImage encode(const ImageRGB& image, std::span<const EmbeddingKind> kinds) const override;

  private:
    const RemoteClient& client_;
};

class RemoteSegmenter final : public SegmenterBackend {
  public:
    explicit RemoteSegmenter(const RemoteClient& client) : client_(client) {}
    std::unique_ptr<SegmenterSession> open_session(const ImageRGB& image, std::string_view session_id) const override;

  private:
    const RemoteClient& client_;
};

} // namespace opsam
