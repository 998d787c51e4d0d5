#pragma once

#include <iosfwd>
#include <memory>

#include "opsam/config.hpp"
#include "opsam/remote.hpp"

namespace opsam {

/// Encoder and segmenter chosen by a RunConfig, owned together.
struct Backends {
    std::unique_ptr<RemoteClient> encoder_client;
    std::unique_ptr<RemoteClient> segmenter_client;
    std::unique_ptr<EncoderBackend> encoder;
    std::unique_ptr<SegmenterBackend> segmenter;
};

Backends make_backends(const RunConfig& cfg);

struct RunSummary {
    int queries = 0;
    double wall_ms = 0.0;
};

/// Runs every query image under cfg.queries and writes, under cfg.out:
///   masks/<id>.png, traces/<id>.jsonl, queries.csv, config.txt, run_meta.json,
///   and with dump_priors also priors/<id>_*.pgm and spf.csv.
/// Everything except run_meta.json is byte-identical across reruns.
RunSummary run_batch(const RunConfig& cfg, const Backends& backends, std::ostream& log);

} // namespace opsam
