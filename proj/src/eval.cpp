#include "opsam/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "opsam/image_io.hpp"

namespace opsam {

namespace {

bool is_image(const std::filesystem::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    static const std::set<std::string> exts{".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff"};
    return exts.contains(ext);
}

struct RunRow {
    int rounds = 0;
    int prompts = 0;
};

// query_id,rounds,prompts,... as written by the batch runner.
std::map<std::string, RunRow> read_run_rows(const std::filesystem::path& csv) {
    std::map<std::string, RunRow> rows;
    std::ifstream is(csv);
    if (!is) return rows;
    std::string line;
    std::getline(is, line);
    if (line.rfind("query_id,rounds,prompts", 0) != 0) return rows;
    while (std::getline(is, line)) {
        std::istringstream ls(line);
        std::string id, r, p;
        if (!std::getline(ls, id, ',') || !std::getline(ls, r, ',') || !std::getline(ls, p, ',')) continue;
        try {
            rows[id] = {std::stoi(r), std::stoi(p)};
        } catch (const std::exception&) {
        }
    }
    return rows;
}

} // namespace

std::string percent(double fraction) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", 100.0 * fraction);
    return buf;
}

std::map<std::string, std::filesystem::path> list_images(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) throw ConfigError("not a directory: " + dir.string());
    std::map<std::string, std::filesystem::path> out;
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
        if (!e.is_regular_file() || !is_image(e.path())) continue;
        const std::string stem = e.path().stem().string();
        if (!out.emplace(stem, e.path()).second)
            throw ConfigError("two images share the name '" + stem + "' in " + dir.string());
    }
    return out;
}

EvalSummary eval_run(const std::filesystem::path& pred_dir, const std::filesystem::path& gt_dir) {
    const auto preds = list_images(pred_dir);
    const auto gts = list_images(gt_dir);
    if (preds.empty()) throw ConfigError("no prediction masks in " + pred_dir.string());
    const auto run_rows = read_run_rows(std::filesystem::absolute(pred_dir).lexically_normal().parent_path() / "queries.csv");

    EvalSummary s;
    for (const auto& [id, path] : preds) {
        auto g = gts.find(id);
        if (g == gts.end()) {
            s.unmatched.push_back("pred:" + path.filename().string());
            continue;
        }
        const MaskGrid pred = read_mask(path);
        const MaskGrid gt = read_mask(g->second);
        if (!pred.same_shape(gt)) throw ShapeError("mask size differs for '" + id + "'");
        const Overlap o = iou_dice(pred, gt);
        EvalRecord r{id, o.iou, o.dice, 0, 0, 0.0};
        if (auto it = run_rows.find(id); it != run_rows.end()) {
            r.rounds = it->second.rounds;
            r.prompts = it->second.prompts;
        }
        s.records.push_back(r);
    }
    for (const auto& [id, path] : gts)
        if (!preds.contains(id)) s.unmatched.push_back("gt:" + path.filename().string());

    for (const EvalRecord& r : s.records) {
        s.mean_iou += r.iou;
        s.mean_dice += r.dice;
    }
    if (!s.records.empty()) {
        s.mean_iou /= double(s.records.size());
        s.mean_dice /= double(s.records.size());
    }
    return s;
}

void write_eval_csv(std::ostream& os, const std::vector<EvalRecord>& records) {
    os << "query_id,iou,dice,rounds,prompts\n";
    for (const EvalRecord& r : records)
        os << r.query_id << ',' << percent(r.iou) << ',' << percent(r.dice) << ',' << r.rounds << ',' << r.prompts << '\n';
}

std::string eval_summary_json(const EvalSummary& s) {
    nlohmann::ordered_json j;
    j["count"] = s.records.size();
    j["mean_iou"] = std::stod(percent(s.mean_iou));
    j["mean_dice"] = std::stod(percent(s.mean_dice));
    j["unmatched"] = s.unmatched;
    return j.dump(2) + "\n";
}

} // namespace opsam
