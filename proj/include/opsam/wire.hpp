#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "opsam/backends.hpp"

namespace opsam::wire {

inline constexpr int kProtocolVersion = 1;

std::string float32le_b64(std::span<const double> values);
/// Throws ProtocolError on bad base64 and ShapeError when the value count differs.
std::vector<double> parse_float32le_b64(const std::string& b64, std::size_t expected_count);

std::string encode_request(std::span<const std::uint8_t> image_png, std::span<const EmbeddingKind> kinds);
std::string segment_request(const std::string& session_id, std::optional<std::span<const std::uint8_t>> image_png,
                            const PromptList& prompts);
std::string echo_request(std::span<const std::uint8_t> payload);

struct EncodeReply {
    int h = 0;
    int w = 0;
    int dim = 0;
    EmbeddingSet embeddings;
};

/// Each parser throws ProtocolVersionError when the reply declares another
/// protocol, ProtocolError for malformed content, ShapeError for size mismatches.
EncodeReply parse_encode_reply(const std::string& body, std::span<const EmbeddingKind> kinds);
SegmenterResult parse_segment_reply(const std::string& body);
EncoderCapabilities parse_capabilities(const std::string& body);
std::vector<std::uint8_t> parse_echo_reply(const std::string& body);

/// Error text from a non-200 reply, checking its protocol field first.
[[noreturn]] void raise_http_error(int status, const std::string& body);

} // namespace opsam::wire
