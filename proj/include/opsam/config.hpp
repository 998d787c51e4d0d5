#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "opsam/pipeline.hpp"
#include "opsam/synthetic.hpp"

namespace opsam {

struct RunConfig {
    std::filesystem::path support_image;
    std::filesystem::path support_mask;
    std::filesystem::path queries;
    std::string encoder = "synthetic";  // "synthetic" or an http:// URL
    std::string segmenter = "oracle";   // "oracle" or an http:// URL
    std::filesystem::path oracle_gt;    // ground-truth masks for the oracle segmenter
    std::filesystem::path out;
    PipelineConfig pipeline;
    SyntheticEncoderConfig synthetic; // its seed field is ignored; `seed` drives it
    std::uint64_t seed = 7;
    int workers = 0; // 0 uses the hardware thread count
    bool dump_priors = false;
    int timeout_seconds = 120;
    bool verify_repeat = false;

    /// Value ranges only.
    void validate() const;
    /// Value ranges plus existence of every referenced path.
    void validate_paths() const;

    bool operator==(const RunConfig&) const = default;
};

/// Flat `key = value` text, one key per line, `#` starts a comment line.
/// Every key is written, so parse(to_text(c)) == c.
std::string to_text(const RunConfig& cfg);
/// Unset keys keep their defaults; unknown keys and bad values throw ConfigError.
RunConfig parse_config(const std::string& text, RunConfig base = {});
RunConfig load_config(const std::filesystem::path& path, RunConfig base = {});
void save_config(const std::filesystem::path& path, const RunConfig& cfg);

} // namespace opsam
