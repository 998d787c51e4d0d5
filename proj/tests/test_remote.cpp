#include <doctest.h>

#include <atomic>
#include <cmath>
#include <map>
#include <mutex>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "opsam/codec.hpp"
#include "opsam/image_io.hpp"
#include "opsam/remote.hpp"
#include "opsam/wire.hpp"
#include "testing.hpp"

using namespace opsam;
using nlohmann::json;

namespace {

constexpr int kInput = 64, kPatch = 4, kGrid = kInput / kPatch, kDim = 8;

double fake_feature(const ImageRGB& img, int cell, int c) {
    const int cy = cell / kGrid, cx = cell % kGrid;
    const std::uint8_t* px = img.pixel(cy * kPatch, cx * kPatch);
    return c < 3 ? px[c] / 255.0 : std::sin(0.1 * cell + c);
}

// Model-server stand-in speaking the JSON protocol, with switches for faults.
struct FakeServer {
    enum class Fault { none, version, bad_base64, wrong_grid, http500, http400, nondeterministic, source_size_mask };

    httplib::Server svr;
    std::thread thread;
    int port = 0;

    std::mutex mu;
    Fault fault = Fault::none;
    int requests = 0;
    int capability_requests = 0;
    ImageRGB last_encoded;
    std::map<std::string, ImageRGB> sessions;
    std::vector<json> segment_bodies;

    FakeServer() {
        svr.Get(R"((/api)?/v1/capabilities)", [this](const httplib::Request&, httplib::Response& res) {
            std::lock_guard lock(mu);
            ++requests;
            ++capability_requests;
            json j{{"protocol", 1}, {"patch", kPatch}, {"input_size", kInput}, {"d", kDim}, {"segmenter_input", kInput},
                   {"kinds", {"query", "key", "value"}}, {"value_source", "fake"}};
            reply(res, j);
        });
        svr.Post(R"((/api)?/v1/echo)", [this](const httplib::Request& req, httplib::Response& res) {
            std::lock_guard lock(mu);
            ++requests;
            const json in = json::parse(req.body);
            reply(res, {{"protocol", 1}, {"payload_b64", in.at("payload_b64")}});
        });
        svr.Post(R"((/api)?/v1/encode)", [this](const httplib::Request& req, httplib::Response& res) {
            std::lock_guard lock(mu);
            ++requests;
            const json in = json::parse(req.body);
            if (in.at("protocol") != 1) return error(res, 400, "bad protocol");
            const auto png = base64_decode(in.at("image_png_b64").get<std::string>());
            last_encoded = decode_image(*png);
            if (last_encoded.height != kInput || last_encoded.width != kInput) return error(res, 400, "bad size");
            const int grid = fault == Fault::wrong_grid ? kGrid - 1 : kGrid;
            json j{{"protocol", 1}, {"h", grid}, {"w", grid}, {"d", kDim}};
            std::vector<double> values(static_cast<std::size_t>(grid) * grid * kDim);
            for (int i = 0; i < grid * grid; ++i)
                for (int c = 0; c < kDim; ++c) values[static_cast<std::size_t>(i) * kDim + c] = fake_feature(last_encoded, i, c);
            for (const json& k : in.at("embedding_kinds"))
                j[k.get<std::string>() + "_f32le_b64"] = fault == Fault::bad_base64 ? "@@@@" : wire::float32le_b64(values);
            reply(res, j);
        });
        svr.Post(R"((/api)?/v1/segment)", [this](const httplib::Request& req, httplib::Response& res) {
            std::lock_guard lock(mu);
            ++requests;
            const json in = json::parse(req.body);
            segment_bodies.push_back(in);
            const std::string id = in.at("session_id");
            if (in.contains("image_png_b64"))
                sessions[id] = decode_image(*base64_decode(in.at("image_png_b64").get<std::string>()));
            if (!sessions.contains(id)) return error(res, 400, "unknown session");
            // Canvas-sized mask: 5x5 square centred on every positive prompt.
            MaskGrid m(kInput, kInput);
            for (const json& p : in.at("prompts")) {
                if (p.at("label") != 1) continue;
                const int x = p.at("x"), y = p.at("y");
                for (int dy = -2; dy <= 2; ++dy)
                    for (int dx = -2; dx <= 2; ++dx)
                        if (m.contains(y + dy, x + dx)) m(y + dy, x + dx) = 1;
            }
            if (fault == Fault::source_size_mask) m = MaskGrid(48, 32);
            reply(res, {{"protocol", 1}, {"predicted_iou", 0.75}, {"mask_png_b64", base64_encode(encode_png(m))}});
        });

        port = svr.bind_to_any_port("127.0.0.1");
        REQUIRE(port > 0);
        thread = std::thread([this] { svr.listen_after_bind(); });
        svr.wait_until_ready();
    }
    ~FakeServer() {
        svr.stop();
        thread.join();
    }

    std::string url(const std::string& prefix = "") const { return "http://127.0.0.1:" + std::to_string(port) + prefix; }

    void set(Fault f) {
        std::lock_guard lock(mu);
        fault = f;
    }

  private:
    void reply(httplib::Response& res, json j) {
        switch (fault) {
        case Fault::version: j["protocol"] = 2; break;
        case Fault::http500: return error(res, 500, "boom");
        case Fault::http400: return error(res, 400, "bad request");
        case Fault::nondeterministic: j["nonce"] = requests; break;
        default: break;
        }
        res.set_content(j.dump(), "application/json");
    }
    void error(httplib::Response& res, int status, const std::string& msg) {
        res.status = status;
        res.set_content(json{{"protocol", 1}, {"error", msg}}.dump(), "application/json");
    }
};

const std::array<EmbeddingKind, 2> kQK{EmbeddingKind::query, EmbeddingKind::key};

} // namespace

TEST_CASE("float32le payloads") {
    const std::vector<double> v{0.0, 1.0, -2.5, 0.1, 1e-8};
    const auto back = wire::parse_float32le_b64(wire::float32le_b64(v), v.size());
    for (std::size_t i = 0; i < v.size(); ++i) CHECK(back[i] == double(float(v[i])));
    // 1.0f little-endian is 00 00 80 3f.
    CHECK(wire::float32le_b64(std::vector<double>{1.0}) == "AACAPw==");
    CHECK_THROWS_AS(wire::parse_float32le_b64(wire::float32le_b64(v), 4), ShapeError);
    CHECK_THROWS_AS(wire::parse_float32le_b64("AAC", 1), ProtocolError);
    CHECK_THROWS_AS(wire::parse_float32le_b64(wire::float32le_b64(std::vector<double>{NAN}), 1), ProtocolError);
    CHECK_THROWS_AS(wire::parse_float32le_b64(wire::float32le_b64(std::vector<double>{INFINITY}), 1), ProtocolError);
}

TEST_CASE("request bodies") {
    const std::vector<std::uint8_t> png{1, 2, 3};
    const json enc = json::parse(wire::encode_request(png, kQK));
    CHECK(enc.at("protocol") == 1);
    CHECK(enc.at("image_png_b64") == "AQID");
    CHECK(enc.at("embedding_kinds") == json{"query", "key"});

    const PromptList prompts{{3, 4, PromptLabel::positive}, {5, 6, PromptLabel::negative}};
    const json seg = json::parse(wire::segment_request("s1", std::nullopt, prompts));
    CHECK(seg.at("session_id") == "s1");
    CHECK_FALSE(seg.contains("image_png_b64"));
    CHECK(seg.at("prompts") == json{{{"x", 3}, {"y", 4}, {"label", 1}}, {{"x", 5}, {"y", 6}, {"label", 0}}});
    CHECK(json::parse(wire::segment_request("s1", std::span<const std::uint8_t>(png), {})).at("image_png_b64") == "AQID");
    CHECK(json::parse(wire::echo_request(png)).at("payload_b64") == "AQID");
}

TEST_CASE("reply parsers") {
    CHECK_THROWS_AS(wire::parse_capabilities("not json"), ProtocolError);
    CHECK_THROWS_AS(wire::parse_capabilities("[1]"), ProtocolError);
    const json caps{{"protocol", 1}, {"patch", 16}, {"input_size", 1024}, {"d", 256}, {"segmenter_input", 1024},
                    {"kinds", {"query", "value"}}};
    const EncoderCapabilities c = wire::parse_capabilities(caps.dump());
    CHECK(c.patch == 16);
    CHECK(c.kinds == std::vector<EmbeddingKind>{EmbeddingKind::query, EmbeddingKind::value});
    json odd = caps;
    odd["input_size"] = 1000;
    CHECK_THROWS_AS(wire::parse_capabilities(odd.dump()), ShapeError);
    odd = caps;
    odd["kinds"] = {"pixels"};
    CHECK_THROWS_AS(wire::parse_capabilities(odd.dump()), ProtocolError);
    odd = caps;
    odd["protocol"] = 3;
    CHECK_THROWS_AS(wire::parse_capabilities(odd.dump()), ProtocolVersionError);
    odd = caps;
    odd.erase("d");
    CHECK_THROWS_AS(wire::parse_capabilities(odd.dump()), ProtocolError);

    const std::string mask_b64 = base64_encode(encode_png(MaskGrid(4, 4)));
    CHECK(wire::parse_segment_reply(json{{"protocol", 1}, {"predicted_iou", 0.5}, {"mask_png_b64", mask_b64}}.dump())
              .predicted_iou == 0.5);
    CHECK_THROWS_AS(wire::parse_segment_reply(json{{"protocol", 1}, {"predicted_iou", 1.5}, {"mask_png_b64", mask_b64}}.dump()),
                    ProtocolError);
    CHECK_THROWS_AS(wire::parse_segment_reply(json{{"protocol", 1}, {"predicted_iou", 0.5}, {"mask_png_b64", "AQID"}}.dump()),
                    ProtocolError);

    const json enc{{"protocol", 1}, {"h", 2}, {"w", 2}, {"d", 2}, {"query_f32le_b64", wire::float32le_b64(std::vector<double>(8, 0.5))}};
    const std::array<EmbeddingKind, 1> q{EmbeddingKind::query};
    CHECK(wire::parse_encode_reply(enc.dump(), q).embeddings.get(EmbeddingKind::query).rows(1, 1) == 0.5);
    CHECK_THROWS_AS(wire::parse_encode_reply(enc.dump(), kQK), ProtocolError);
    json zero = enc;
    zero["h"] = 0;
    CHECK_THROWS_AS(wire::parse_encode_reply(zero.dump(), q), ShapeError);

    CHECK_THROWS_AS(wire::raise_http_error(503, "{}"), TransportError);
    CHECK_THROWS_AS(wire::raise_http_error(422, "oops"), ProtocolError);
    CHECK_THROWS_AS(wire::raise_http_error(422, R"({"protocol":2})"), ProtocolVersionError);
}

TEST_CASE("letterbox geometry") {
    const Letterbox lb = Letterbox::fit(48, 32, 64);
    CHECK(lb.scaled_h == 64);
    CHECK(lb.scaled_w == 43);
    CHECK(lb.map({10, 20, PromptLabel::positive}) == PromptPoint{14, 27, PromptLabel::positive});
    CHECK(lb.map({31, 47, PromptLabel::negative}) == PromptPoint{42, 63, PromptLabel::negative});
    const PatchLayout l = lb.layout(16);
    CHECK(l.cell_h == doctest::Approx(3.0));
    CHECK(l.cell_w == doctest::Approx(4.0 * 32.0 / 43.0));
    CHECK_THROWS_AS(lb.unapply(MaskGrid(64, 63)), ShapeError);

    gen::Rng rng(8);
    for (int t = 0; t < 100; ++t) {
        const int h = gen::uniform_int(rng, 1, 200), w = gen::uniform_int(rng, 1, 200), s = gen::uniform_int(rng, 8, 128);
        const Letterbox b = Letterbox::fit(h, w, s);
        CHECK(std::max(b.scaled_h, b.scaled_w) == s);
        MaskGrid canvas(s, s);
        for (int y = 0; y < b.scaled_h; ++y)
            for (int x = 0; x < b.scaled_w; ++x) canvas(y, x) = 1;
        CHECK(b.unapply(canvas).count() == static_cast<std::size_t>(h) * w);
        const PromptPoint p = b.map({gen::uniform_int(rng, 0, w - 1), gen::uniform_int(rng, 0, h - 1)});
        CHECK(p.x >= 0);
        CHECK(p.x < b.scaled_w);
        CHECK(p.y >= 0);
        CHECK(p.y < b.scaled_h);
    }
    const ImageRGB img = gen::random_image(rng, 48, 32);
    const ImageRGB boxed = lb.apply(img);
    for (int y = 0; y < 64; ++y)
        for (int x = 43; x < 64; ++x) CHECK(boxed.pixel(y, x)[0] == 0);
}

TEST_CASE("client URL handling") {
    CHECK_THROWS_AS(RemoteClient("ftp://host"), ConfigError);
    CHECK_THROWS_AS(RemoteClient("localhost:8000"), ConfigError);
    CHECK_NOTHROW(RemoteClient("http://localhost:8000/api/"));
}

TEST_CASE("echo and capabilities") {
    FakeServer server;
    const RemoteClient client(server.url());
    gen::Rng rng(9);
    for (std::size_t n : {0u, 1u, 3u, 100000u}) {
        std::vector<std::uint8_t> payload(n);
        for (auto& b : payload) b = static_cast<std::uint8_t>(rng());
        CHECK(client.echo_matches(payload));
    }
    const EncoderCapabilities a = client.capabilities(), b = client.capabilities();
    CHECK(a.input_size == kInput);
    CHECK(a.value_source == "fake");
    CHECK(b.dim == kDim);
    CHECK(server.capability_requests == 1);

    const RemoteClient prefixed(server.url("/api/"));
    CHECK(prefixed.capabilities().patch == kPatch);
}

TEST_CASE("remote encoder") {
    FakeServer server;
    const RemoteClient client(server.url());
    const RemoteEncoder enc(client);
    gen::Rng rng(10);
    const ImageRGB img = gen::random_image(rng, 48, 32);
    const EncodedImage out = enc.encode(img, kQK);
    CHECK(out.layout.h == kGrid);
    CHECK(out.layout.cell_h == doctest::Approx(3.0));
    CHECK(server.last_encoded == Letterbox::fit(48, 32, kInput).apply(img));
    const FeatureMap& q = out.embeddings.get(EmbeddingKind::query);
    REQUIRE(q.dim == kDim);
    for (int i = 0; i < kGrid * kGrid; ++i)
        for (int c = 0; c < kDim; ++c)
            CHECK(q.rows(static_cast<std::size_t>(i), static_cast<std::size_t>(c)) ==
                  double(float(fake_feature(server.last_encoded, i, c))));
    CHECK_FALSE(out.embeddings.has(EmbeddingKind::value));

    const std::array<EmbeddingKind, 1> feats{EmbeddingKind::feats};
    CHECK_THROWS_AS(enc.encode(img, feats), BackendError);
}

TEST_CASE("remote segmenter session") {
    FakeServer server;
    const RemoteClient client(server.url());
    const RemoteSegmenter seg(client);
    gen::Rng rng(11);
    const ImageRGB img = gen::random_image(rng, 48, 32);
    const Letterbox lb = Letterbox::fit(48, 32, kInput);
    auto session = seg.open_session(img, "q7");

    const PromptList first{{10, 20, PromptLabel::positive}};
    const SegmenterResult r1 = session->predict(first);
    CHECK(r1.predicted_iou == 0.75);
    REQUIRE(r1.mask.height == 48);
    REQUIRE(r1.mask.width == 32);
    MaskGrid canvas(kInput, kInput);
    for (int y = 25; y <= 29; ++y)
        for (int x = 12; x <= 16; ++x) canvas(y, x) = 1;
    CHECK(r1.mask == lb.unapply(canvas));
    CHECK(r1.mask(20, 10) == 1);

    const PromptList second{{10, 20, PromptLabel::positive}, {0, 0, PromptLabel::negative}};
    session->predict(second);
    REQUIRE(server.segment_bodies.size() == 2);
    CHECK(server.segment_bodies[0].contains("image_png_b64"));
    CHECK_FALSE(server.segment_bodies[1].contains("image_png_b64"));
    CHECK(server.segment_bodies[1].at("prompts") ==
          json{{{"x", 14}, {"y", 27}, {"label", 1}}, {{"x", 0}, {"y", 0}, {"label", 0}}});
    CHECK(server.sessions.at("q7") == lb.apply(img));

    CHECK_THROWS_AS(session->predict({{32, 0, PromptLabel::positive}}), ContractViolation);

    server.set(FakeServer::Fault::source_size_mask);
    CHECK(session->predict(first).mask.same_shape(r1.mask));
}

TEST_CASE("remote failures map to typed errors") {
    FakeServer server;
    const RemoteClient client(server.url());
    client.capabilities();
    const RemoteEncoder enc(client);
    const ImageRGB img(kInput, kInput);

    server.set(FakeServer::Fault::version);
    CHECK_THROWS_AS(enc.encode(img, kQK), ProtocolVersionError);
    server.set(FakeServer::Fault::bad_base64);
    CHECK_THROWS_AS(enc.encode(img, kQK), ProtocolError);
    server.set(FakeServer::Fault::wrong_grid);
    CHECK_THROWS_AS(enc.encode(img, kQK), ShapeError);
    server.set(FakeServer::Fault::http500);
    CHECK_THROWS_AS(enc.encode(img, kQK), TransportError);
    server.set(FakeServer::Fault::http400);
    try {
        enc.encode(img, kQK);
        FAIL("expected ProtocolError");
    } catch (const TransportError&) {
        FAIL("4xx must not be a transport error");
    } catch (const ProtocolError& e) {
        CHECK(std::string(e.what()).find("bad request") != std::string::npos);
    }
    server.set(FakeServer::Fault::none);
    CHECK_NOTHROW(enc.encode(img, kQK));
}

TEST_CASE("unreachable server") {
    int port = 0;
    {
        httplib::Server probe;
        port = probe.bind_to_any_port("127.0.0.1");
    }
    RemoteOptions opt;
    opt.timeout_seconds = 2;
    const RemoteClient client("http://127.0.0.1:" + std::to_string(port), opt);
    CHECK_THROWS_AS(client.capabilities(), TransportError);
    CHECK_THROWS_AS(RemoteEncoder(client).encode(ImageRGB(4, 4), kQK), TransportError);
}

TEST_CASE("repeat verification") {
    FakeServer server;
    RemoteOptions opt;
    opt.verify_repeat = true;
    const RemoteClient client(server.url(), opt);
    const std::vector<std::uint8_t> payload{1, 2, 3};
    CHECK(client.echo_matches(payload));
    CHECK(server.requests == 2);
    server.set(FakeServer::Fault::nondeterministic);
    CHECK_THROWS_AS(client.echo_matches(payload), ProtocolError);

    const RemoteClient plain(server.url());
    CHECK_NOTHROW(plain.echo_matches(payload));
}
