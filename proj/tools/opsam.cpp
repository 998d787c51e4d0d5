#include <cstdio>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "opsam/eval.hpp"
#include "opsam/image_io.hpp"
#include "opsam/run.hpp"
#include "opsam/synthetic.hpp"

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitBackend = 2;
constexpr int kExitMismatch = 3;

struct RunArgs {
    std::string config, support_image, support_mask, queries, encoder, segmenter, oracle_gt, out;
    std::optional<std::uint64_t> seed;
    std::optional<int> workers;
    bool dump_priors = false;
    bool verify_repeat = false;
};

int cmd_run(const RunArgs& a) {
    opsam::RunConfig cfg;
    if (!a.config.empty()) cfg = opsam::load_config(a.config);
    if (!a.support_image.empty()) cfg.support_image = a.support_image;
    if (!a.support_mask.empty()) cfg.support_mask = a.support_mask;
    if (!a.queries.empty()) cfg.queries = a.queries;
    if (!a.encoder.empty()) cfg.encoder = a.encoder;
    if (!a.segmenter.empty()) cfg.segmenter = a.segmenter;
    if (!a.oracle_gt.empty()) cfg.oracle_gt = a.oracle_gt;
    if (!a.out.empty()) cfg.out = a.out;
    if (a.seed) cfg.seed = *a.seed;
    if (a.workers) cfg.workers = *a.workers;
    if (a.dump_priors) cfg.dump_priors = true;
    if (a.verify_repeat) cfg.verify_repeat = true;
    cfg.validate_paths();

    const opsam::Backends backends = opsam::make_backends(cfg);
    const opsam::RunSummary s = opsam::run_batch(cfg, backends, std::cerr);
    std::cout << s.queries << " queries written to " << cfg.out.string() << '\n';
    return 0;
}

int cmd_eval(const std::string& pred, const std::string& gt, const std::string& out) {
    const opsam::EvalSummary s = opsam::eval_run(pred, gt);
    std::filesystem::path csv_path(out);
    if (!csv_path.parent_path().empty()) std::filesystem::create_directories(csv_path.parent_path());
    {
        std::ofstream csv(csv_path);
        if (!csv) throw opsam::ConfigError("cannot write " + out);
        opsam::write_eval_csv(csv, s.records);
    }
    std::ofstream(std::filesystem::path(csv_path).replace_extension(".json")) << opsam::eval_summary_json(s);
    std::cout << "images " << s.records.size() << "  mIoU " << opsam::percent(s.mean_iou) << "  mDice "
              << opsam::percent(s.mean_dice) << '\n';
    for (const std::string& u : s.unmatched) std::cerr << "unmatched " << u << '\n';
    return s.unmatched.empty() ? 0 : kExitMismatch;
}

int cmd_synth(int scenes, const std::string& out, std::uint64_t seed, int blobs, int size) {
    if (scenes < 1) throw opsam::ConfigError("--scenes must be >= 1");
    opsam::SceneOptions opts;
    opts.blobs = blobs;
    opts.height = opts.width = size;
    const std::filesystem::path dir(out);
    char name[32];
    for (int i = 0; i < scenes; ++i) {
        const opsam::SyntheticScene s = opsam::make_scene(seed + static_cast<std::uint64_t>(i), opts);
        std::snprintf(name, sizeof name, "scene_%04d.png", i);
        opsam::write_image_png(dir / "images" / name, s.image);
        opsam::write_mask_png(dir / "masks" / name, s.gt_mask);
    }
    opsam::SceneOptions support_opts = opts;
    support_opts.blobs = 1;
    const opsam::SyntheticScene support = opsam::make_scene(seed + static_cast<std::uint64_t>(scenes), support_opts);
    opsam::write_image_png(dir / "support" / "image.png", support.image);
    opsam::write_mask_png(dir / "support" / "mask.png", support.gt_mask);
    std::cout << scenes << " scenes written to " << dir.string() << '\n';
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"One-shot segmentation prompting: prior generation, prior fusion and prompt evolution"};
    app.require_subcommand(1);

    RunArgs ra;
    auto* run = app.add_subcommand("run", "segment every query image against one annotated support");
    run->add_option("--config", ra.config, "key = value config file");
    run->add_option("--support-image", ra.support_image);
    run->add_option("--support-mask", ra.support_mask);
    run->add_option("--queries", ra.queries, "directory of query images");
    run->add_option("--encoder", ra.encoder, "synthetic or http://host:port");
    run->add_option("--segmenter", ra.segmenter, "oracle or http://host:port");
    run->add_option("--oracle-gt", ra.oracle_gt, "ground-truth masks for the oracle segmenter");
    run->add_option("--out", ra.out);
    run->add_option("--seed", ra.seed);
    run->add_option("--workers", ra.workers, "0 = one per hardware thread");
    run->add_flag("--dump-priors", ra.dump_priors, "write per-scale priors as PGM plus spf.csv");
    run->add_flag("--verify-repeat", ra.verify_repeat, "send each remote request twice and compare replies");

    std::string pred, gt, eval_out;
    auto* eval = app.add_subcommand("eval", "score predicted masks against ground truth");
    eval->add_option("--pred", pred)->required();
    eval->add_option("--gt", gt)->required();
    eval->add_option("--out", eval_out, "per-image CSV; a .json summary is written beside it")->required();

    int scenes = 0, blobs = 1, size = 128;
    std::string synth_out;
    std::uint64_t synth_seed = 0;
    auto* synth = app.add_subcommand("synth", "render synthetic scenes with ground truth");
    synth->add_option("--scenes", scenes)->required();
    synth->add_option("--out", synth_out)->required();
    synth->add_option("--seed", synth_seed);
    synth->add_option("--blobs", blobs);
    synth->add_option("--size", size);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitConfig;
    }

    try {
        if (*run) return cmd_run(ra);
        if (*eval) return cmd_eval(pred, gt, eval_out);
        return cmd_synth(scenes, synth_out, synth_seed, blobs, size);
    } catch (const opsam::BackendError& e) {
        std::cerr << "backend error: " << e.what() << '\n';
        return kExitBackend;
    } catch (const opsam::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitConfig;
    }
}
