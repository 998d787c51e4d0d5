#include "opsam/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <vector>

namespace opsam {

namespace {

std::string fmt(double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

template <class T>
T parse_number(const std::string& key, const std::string& v) {
    T out{};
    const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
    if (r.ec != std::errc{} || r.ptr != v.data() + v.size())
        throw ConfigError("config key '" + key + "': cannot parse '" + v + "' as a number");
    return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError("config key '" + key + "': expected true or false, got '" + v + "'");
}

struct Key {
    const char* name;
    std::function<std::string(const RunConfig&)> get;
    std::function<void(RunConfig&, const std::string&)> set;
};

#define OPSAM_NUM(NAME, FIELD, TYPE)                                                                              \
    Key {                                                                                                        \
        NAME, [](const RunConfig& c) { return num_text(c.FIELD); },                                              \
            [](RunConfig& c, const std::string& v) { c.FIELD = parse_number<TYPE>(NAME, v); }                    \
    }
#define OPSAM_STR(NAME, FIELD)                                                                                    \
    Key {                                                                                                        \
        NAME, [](const RunConfig& c) { return std::string(c.FIELD); },                                           \
            [](RunConfig& c, const std::string& v) { c.FIELD = v; }                                              \
    }
#define OPSAM_PATH(NAME, FIELD)                                                                                   \
    Key {                                                                                                        \
        NAME, [](const RunConfig& c) { return c.FIELD.string(); },                                               \
            [](RunConfig& c, const std::string& v) { c.FIELD = v; }                                              \
    }
#define OPSAM_BOOL(NAME, FIELD)                                                                                   \
    Key {                                                                                                        \
        NAME, [](const RunConfig& c) { return std::string(c.FIELD ? "true" : "false"); },                        \
            [](RunConfig& c, const std::string& v) { c.FIELD = parse_bool(NAME, v); }                            \
    }

std::string num_text(double v) { return fmt(v); }
std::string num_text(int v) { return std::to_string(v); }
std::string num_text(std::uint64_t v) { return std::to_string(v); }

const std::vector<Key>& keys() {
    static const std::vector<Key> table = {
        OPSAM_PATH("support.image", support_image),
        OPSAM_PATH("support.mask", support_mask),
        OPSAM_PATH("queries.dir", queries),
        OPSAM_STR("backend.encoder", encoder),
        OPSAM_STR("backend.segmenter", segmenter),
        OPSAM_PATH("backend.oracle_gt", oracle_gt),
        OPSAM_NUM("backend.timeout_s", timeout_seconds, int),
        OPSAM_BOOL("backend.verify_repeat", verify_repeat),
        OPSAM_NUM("cpg.rho", pipeline.cpg.rho, int),
        OPSAM_NUM("cpg.sinkhorn_iters", pipeline.cpg.sinkhorn_iters, int),
        Key{"cpg.embedding", [](const RunConfig& c) { return std::string(to_string(c.pipeline.cpg.embedding_kind)); },
            [](RunConfig& c, const std::string& v) {
                auto k = parse_embedding_kind(v);
                if (!k) throw ConfigError("config key 'cpg.embedding': expected query|key|value|feats, got '" + v + "'");
                c.pipeline.cpg.embedding_kind = *k;
            }},
        OPSAM_NUM("spf.tau", pipeline.spf.tau, double),
        OPSAM_NUM("scaling.xl", pipeline.scale_xl, double),
        OPSAM_NUM("scaling.xs", pipeline.scale_xs, double),
        OPSAM_NUM("epe.theta_tight", pipeline.epe.theta_tight, double),
        OPSAM_NUM("epe.theta_loose", pipeline.epe.theta_loose, double),
        OPSAM_NUM("epe.score_thresh", pipeline.epe.score_thresh, double),
        OPSAM_NUM("epe.neg_area_thresh", pipeline.epe.neg_area_thresh, int),
        OPSAM_NUM("epe.max_rounds", pipeline.epe.max_rounds, int),
        Key{"epe.center", [](const RunConfig& c) { return std::string(to_string(c.pipeline.epe.center)); },
            [](RunConfig& c, const std::string& v) {
                if (v == "edt") c.pipeline.epe.center = PromptCenter::edt;
                else if (v == "bbc") c.pipeline.epe.center = PromptCenter::bbc;
                else throw ConfigError("config key 'epe.center': expected edt|bbc, got '" + v + "'");
            }},
        OPSAM_NUM("synthetic.patch", synthetic.patch, int),
        OPSAM_NUM("synthetic.dim", synthetic.dim, int),
        OPSAM_NUM("synthetic.noise_sigma", synthetic.noise_sigma, double),
        OPSAM_NUM("run.seed", seed, std::uint64_t),
        OPSAM_NUM("run.workers", workers, int),
        OPSAM_PATH("run.out", out),
        OPSAM_BOOL("run.dump_priors", dump_priors),
    };
    return table;
}

#undef OPSAM_NUM
#undef OPSAM_STR
#undef OPSAM_PATH
#undef OPSAM_BOOL

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

bool is_url(const std::string& s) { return s.rfind("http://", 0) == 0 || s.rfind("https://", 0) == 0; }

} // namespace

void RunConfig::validate() const {
    pipeline.validate();
    if (encoder != "synthetic" && !is_url(encoder))
        throw ConfigError("backend.encoder must be 'synthetic' or an http:// URL, got '" + encoder + "'");
    if (segmenter != "oracle" && !is_url(segmenter))
        throw ConfigError("backend.segmenter must be 'oracle' or an http:// URL, got '" + segmenter + "'");
    if (synthetic.patch < 1) throw ConfigError("synthetic.patch must be >= 1");
    if (synthetic.dim < 4) throw ConfigError("synthetic.dim must be >= 4");
    if (!(synthetic.noise_sigma >= 0.0)) throw ConfigError("synthetic.noise_sigma must be >= 0");
    if (workers < 0) throw ConfigError("run.workers must be >= 0");
    if (timeout_seconds < 1) throw ConfigError("backend.timeout_s must be >= 1");
}

void RunConfig::validate_paths() const {
    validate();
    auto need = [](const std::filesystem::path& p, const char* key, bool dir) {
        if (p.empty()) throw ConfigError(std::string(key) + " is not set");
        if (dir ? !std::filesystem::is_directory(p) : !std::filesystem::is_regular_file(p))
            throw ConfigError(std::string(key) + " does not exist: " + p.string());
    };
    need(support_image, "support.image", false);
    need(support_mask, "support.mask", false);
    need(queries, "queries.dir", true);
    if (segmenter == "oracle") need(oracle_gt, "backend.oracle_gt", true);
    if (out.empty()) throw ConfigError("run.out is not set");
}

std::string to_text(const RunConfig& cfg) {
    std::string out;
    for (const Key& k : keys()) {
        out += k.name;
        out += " = ";
        out += k.get(cfg);
        out += '\n';
    }
    return out;
}

RunConfig parse_config(const std::string& text, RunConfig base) {
    std::istringstream is(text);
    std::string line;
    std::set<std::string> seen;
    int line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
        const std::string key = trim(t.substr(0, eq));
        const std::string value = trim(t.substr(eq + 1));
        if (!seen.insert(key).second) throw ConfigError("config key '" + key + "' given twice");
        const auto& table = keys();
        auto it = std::find_if(table.begin(), table.end(), [&](const Key& k) { return key == k.name; });
        if (it == table.end()) throw ConfigError("config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
        it->set(base, value);
    }
    return base;
}

RunConfig load_config(const std::filesystem::path& path, RunConfig base) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot read config " + path.string());
    std::ostringstream ss;
    ss << is.rdbuf();
    return parse_config(ss.str(), std::move(base));
}

void save_config(const std::filesystem::path& path, const RunConfig& cfg) {
    std::ofstream os(path);
    if (!os) throw Error("cannot write " + path.string());
    os << to_text(cfg);
}

} // namespace opsam
