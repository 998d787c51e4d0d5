#include "opsam/run.hpp"

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <exception>
#include <fstream>
#include <mutex>
#include <optional>
#include <ostream>
#include <thread>

#include <json.hpp>

#include "opsam/eval.hpp"
#include "opsam/image_io.hpp"
#include "opsam/oracle_segmenter.hpp"
#include "opsam/synthetic.hpp"

namespace opsam {

namespace {

std::string fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::ofstream open_out(const std::filesystem::path& p) {
    std::ofstream os(p, std::ios::binary);
    if (!os) throw Error("cannot write " + p.string());
    return os;
}

struct Slot {
    std::optional<QueryResult> result;
    std::exception_ptr error;
    bool done = false;
};

} // namespace

Backends make_backends(const RunConfig& cfg) {
    Backends b;
    const RemoteOptions opts{cfg.timeout_seconds, cfg.verify_repeat};
    if (cfg.encoder == "synthetic") {
        SyntheticEncoderConfig sc = cfg.synthetic;
        sc.seed = cfg.seed;
        b.encoder = std::make_unique<SyntheticEncoder>(sc);
    } else {
        b.encoder_client = std::make_unique<RemoteClient>(cfg.encoder, opts);
        b.encoder = std::make_unique<RemoteEncoder>(*b.encoder_client);
    }
    if (cfg.segmenter == "oracle") {
        const auto masks = list_images(cfg.oracle_gt);
        b.segmenter = std::make_unique<OracleSegmenter>([masks](std::string_view id) -> std::optional<MaskGrid> {
            auto it = masks.find(std::string(id));
            if (it == masks.end()) return std::nullopt;
            return read_mask(it->second);
        });
    } else {
        b.segmenter_client = std::make_unique<RemoteClient>(cfg.segmenter, opts);
        b.segmenter = std::make_unique<RemoteSegmenter>(*b.segmenter_client);
    }
    return b;
}

RunSummary run_batch(const RunConfig& cfg, const Backends& backends, std::ostream& log) {
    cfg.validate();
    const auto t0 = std::chrono::steady_clock::now();
    const auto queries = list_images(cfg.queries);
    if (queries.empty()) throw ConfigError("no query images in " + cfg.queries.string());
    std::vector<std::pair<std::string, std::filesystem::path>> items(queries.begin(), queries.end());

    const SupportBundle bundle = build_support_bundle(read_image(cfg.support_image), read_mask(cfg.support_mask),
                                                      cfg.pipeline.scale_xl, cfg.pipeline.scale_xs);
    const EncoderCapabilities caps = backends.encoder->capabilities();
    const PreparedSupport support = prepare_support(bundle, *backends.encoder, cfg.pipeline.cpg);

    std::filesystem::create_directories(cfg.out / "masks");
    std::filesystem::create_directories(cfg.out / "traces");
    if (cfg.dump_priors) std::filesystem::create_directories(cfg.out / "priors");
    save_config(cfg.out / "config.txt", cfg);

    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    const std::size_t workers = std::min<std::size_t>(items.size(), cfg.workers > 0 ? cfg.workers : hw);

    std::vector<Slot> slots(items.size());
    std::mutex mu;
    std::condition_variable ready;
    std::atomic<std::size_t> next{0};
    std::atomic<bool> abort{false};

    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= items.size() || abort) return;
            Slot local;
            try {
                local.result = run_query(support, read_image(items[i].second), items[i].first, *backends.encoder,
                                         *backends.segmenter, cfg.pipeline);
            } catch (...) {
                local.error = std::current_exception();
            }
            std::lock_guard lock(mu);
            slots[i] = std::move(local);
            slots[i].done = true;
            ready.notify_all();
        }
    };
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);

    // Single writer, strictly in filename order.
    std::ofstream csv = open_out(cfg.out / "queries.csv");
    csv << "query_id,rounds,prompts,remediations,stop,weight_ori,weight_xl,weight_xs\n";
    std::optional<std::ofstream> spf;
    if (cfg.dump_priors) {
        spf = open_out(cfg.out / "spf.csv");
        *spf << "query_id,scale,c_iou,weight\n";
    }
    try {
        for (std::size_t i = 0; i < items.size(); ++i) {
            std::unique_lock lock(mu);
            ready.wait(lock, [&] { return slots[i].done; });
            Slot slot = std::move(slots[i]);
            lock.unlock();
            if (slot.error) std::rethrow_exception(slot.error);

            const std::string& id = items[i].first;
            const QueryResult& r = *slot.result;
            write_mask_png(cfg.out / "masks" / (id + ".png"), r.mask);
            std::ofstream trace = open_out(cfg.out / "traces" / (id + ".jsonl"));
            write_trace_jsonl(trace, r.trace);
            csv << id << ',' << r.trace.prompting_rounds << ',' << r.trace.prompts.size() << ','
                << r.trace.remediations << ',' << to_string(r.trace.stop);
            for (const auto& rep : r.reports) csv << ',' << fixed(rep.weight, 6);
            csv << '\n';
            if (spf) {
                write_prior_pgm(cfg.out / "priors" / (id + "_fused.pgm"), r.fused_prior);
                for (std::size_t s = 0; s < 3; ++s) {
                    const std::string tag(to_string(r.reports[s].size_tag));
                    write_prior_pgm(cfg.out / "priors" / (id + "_" + tag + ".pgm"), r.priors[s]);
                    write_prior_pgm(cfg.out / "priors" / (id + "_" + tag + "_rev.pgm"), r.reports[s].p_rev);
                    *spf << id << ',' << tag << ',' << fixed(r.reports[s].c_iou, 6) << ','
                         << fixed(r.reports[s].weight, 6) << '\n';
                }
            }
            log << id << ": rounds=" << r.trace.prompting_rounds << " prompts=" << r.trace.prompts.size()
                << " stop=" << to_string(r.trace.stop) << '\n';
        }
    } catch (...) {
        abort = true;
        throw;
    }
    pool.clear();

    RunSummary summary;
    summary.queries = static_cast<int>(items.size());
    summary.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();

    nlohmann::ordered_json meta;
    meta["queries"] = summary.queries;
    meta["workers"] = workers;
    meta["wall_ms"] = summary.wall_ms;
    meta["encoder"] = cfg.encoder;
    meta["segmenter"] = cfg.segmenter;
    meta["encoder_patch"] = caps.patch;
    meta["encoder_input_size"] = caps.input_size;
    meta["encoder_dim"] = caps.dim;
    meta["segmenter_input"] = caps.segmenter_input;
    meta["value_source"] = caps.value_source;
    meta["resize_policy"] = "letterbox top-left, zero padding; area/linear resize, nearest for masks";
    meta["support_scales"] = {{"xl", bundle.scale_xl}, {"xs", bundle.scale_xs}};
    open_out(cfg.out / "run_meta.json") << meta.dump(2) << '\n';
    return summary;
}

} // namespace opsam
