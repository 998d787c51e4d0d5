#include "opsam/wire.hpp"

#include <bit>
#include <cmath>
#include <cstring>

#include <json.hpp>

#include "opsam/codec.hpp"
#include "opsam/image_io.hpp"

namespace opsam::wire {

using nlohmann::json;

namespace {

static_assert(std::endian::native == std::endian::little, "float payloads assume a little-endian host");

json parse_body(const std::string& body) {
    json j = json::parse(body, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw ProtocolError("reply is not a JSON object");
    if (j.contains("protocol")) {
        const json& p = j["protocol"];
        if (!p.is_number_integer()) throw ProtocolError("reply 'protocol' is not an integer");
        if (p.get<int>() != kProtocolVersion)
            throw ProtocolVersionError("server speaks protocol " + p.dump() + ", client speaks " +
                                       std::to_string(kProtocolVersion));
    }
    return j;
}

int positive_int(const json& j, const char* key) {
    if (!j.contains(key) || !j[key].is_number_integer()) throw ProtocolError(std::string("reply lacks integer '") + key + "'");
    const long long v = j[key].get<long long>();
    if (v < 1 || v > (1 << 20)) throw ShapeError(std::string("reply '") + key + "' out of range: " + std::to_string(v));
    return static_cast<int>(v);
}

const std::string& string_field(const json& j, const char* key) {
    if (!j.contains(key) || !j[key].is_string()) throw ProtocolError(std::string("reply lacks string '") + key + "'");
    return j[key].get_ref<const std::string&>();
}

std::vector<std::uint8_t> b64_field(const json& j, const char* key) {
    auto bytes = base64_decode(string_field(j, key));
    if (!bytes) throw ProtocolError(std::string("reply '") + key + "' is not valid base64");
    return std::move(*bytes);
}

json kinds_json(std::span<const EmbeddingKind> kinds) {
    json arr = json::array();
    for (EmbeddingKind k : kinds) arr.push_back(std::string(to_string(k)));
    return arr;
}

} // namespace

std::string float32le_b64(std::span<const double> values) {
    std::vector<std::uint8_t> bytes(values.size() * 4);
    for (std::size_t i = 0; i < values.size(); ++i) {
        const float f = static_cast<float>(values[i]);
        std::memcpy(bytes.data() + 4 * i, &f, 4);
    }
    return base64_encode(bytes);
}

std::vector<double> parse_float32le_b64(const std::string& b64, std::size_t expected_count) {
    auto bytes = base64_decode(b64);
    if (!bytes) throw ProtocolError("float payload is not valid base64");
    if (bytes->size() != expected_count * 4)
        throw ShapeError("float payload holds " + std::to_string(bytes->size()) + " bytes, expected " +
                         std::to_string(expected_count * 4));
    std::vector<double> out(expected_count);
    for (std::size_t i = 0; i < expected_count; ++i) {
        float f;
        std::memcpy(&f, bytes->data() + 4 * i, 4);
        if (!std::isfinite(f)) throw ProtocolError("float payload holds a non-finite value at index " + std::to_string(i));
        out[i] = f;
    }
    return out;
}

std::string encode_request(std::span<const std::uint8_t> image_png, std::span<const EmbeddingKind> kinds) {
    json j;
    j["protocol"] = kProtocolVersion;
    j["image_png_b64"] = base64_encode(image_png);
    j["embedding_kinds"] = kinds_json(kinds);
    return j.dump();
}

std::string segment_request(const std::string& session_id, std::optional<std::span<const std::uint8_t>> image_png,
                            const PromptList& prompts) {
    json j;
    j["protocol"] = kProtocolVersion;
    j["session_id"] = session_id;
    if (image_png) j["image_png_b64"] = base64_encode(*image_png);
    json arr = json::array();
    for (const PromptPoint& p : prompts) arr.push_back({{"x", p.x}, {"y", p.y}, {"label", static_cast<int>(p.label)}});
    j["prompts"] = std::move(arr);
    return j.dump();
}

std::string echo_request(std::span<const std::uint8_t> payload) {
    json j;
    j["protocol"] = kProtocolVersion;
    j["payload_b64"] = base64_encode(payload);
    return j.dump();
}

EncodeReply parse_encode_reply(const std::string& body, std::span<const EmbeddingKind> kinds) {
    const json j = parse_body(body);
    EncodeReply out;
    out.h = positive_int(j, "h");
    out.w = positive_int(j, "w");
    out.dim = positive_int(j, "d");
    const std::size_t count = static_cast<std::size_t>(out.h) * out.w * out.dim;
    for (EmbeddingKind k : kinds) {
        const std::string key = std::string(to_string(k)) + "_f32le_b64";
        out.embeddings.set(k, FeatureMap(out.h, out.w, out.dim, parse_float32le_b64(string_field(j, key.c_str()), count)));
    }
    return out;
}

SegmenterResult parse_segment_reply(const std::string& body) {
    const json j = parse_body(body);
    if (!j.contains("predicted_iou") || !j["predicted_iou"].is_number())
        throw ProtocolError("reply lacks numeric 'predicted_iou'");
    const double iou = j["predicted_iou"].get<double>();
    if (!(iou >= 0.0 && iou <= 1.0)) throw ProtocolError("reply 'predicted_iou' outside [0,1]");
    const auto png = b64_field(j, "mask_png_b64");
    SegmenterResult out;
    try {
        out.mask = decode_mask(png);
    } catch (const Error& e) {
        throw ProtocolError(std::string("reply mask: ") + e.what());
    }
    out.predicted_iou = iou;
    return out;
}

EncoderCapabilities parse_capabilities(const std::string& body) {
    const json j = parse_body(body);
    EncoderCapabilities c;
    c.patch = positive_int(j, "patch");
    c.input_size = positive_int(j, "input_size");
    c.dim = positive_int(j, "d");
    c.segmenter_input = positive_int(j, "segmenter_input");
    if (c.input_size % c.patch != 0) throw ShapeError("capabilities: input_size is not a multiple of patch");
    if (!j.contains("kinds") || !j["kinds"].is_array()) throw ProtocolError("capabilities lack 'kinds'");
    for (const json& k : j["kinds"]) {
        if (!k.is_string()) throw ProtocolError("capabilities 'kinds' holds a non-string");
        auto kind = parse_embedding_kind(k.get<std::string>());
        if (!kind) throw ProtocolError("capabilities name unknown embedding kind '" + k.get<std::string>() + "'");
        c.kinds.push_back(*kind);
    }
    if (j.contains("value_source") && j["value_source"].is_string()) c.value_source = j["value_source"].get<std::string>();
    return c;
}

std::vector<std::uint8_t> parse_echo_reply(const std::string& body) { return b64_field(parse_body(body), "payload_b64"); }

void raise_http_error(int status, const std::string& body) {
    std::string detail;
    const json j = json::parse(body, nullptr, false);
    if (j.is_object()) {
        parse_body(body); // version mismatch outranks the status
        if (j.contains("error") && j["error"].is_string()) detail = ": " + j["error"].get<std::string>();
    }
    const std::string msg = "HTTP " + std::to_string(status) + detail;
    if (status >= 500) throw TransportError(msg);
    throw ProtocolError(msg);
}

} // namespace opsam::wire
