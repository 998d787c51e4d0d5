#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "opsam/metrics.hpp"

namespace opsam {

/// Image files in `dir` keyed by stem, in filename order. Throws ConfigError
/// when two files share a stem.
std::map<std::string, std::filesystem::path> list_images(const std::filesystem::path& dir);

struct EvalSummary {
    std::vector<EvalRecord> records; // sorted by query id
    std::vector<std::string> unmatched; // "pred:<name>" or "gt:<name>"
    double mean_iou = 0.0;
    double mean_dice = 0.0;
};

/// Pairs masks by file stem. Rounds and prompts are filled from a
/// `queries.csv` written by `opsam run` next to the prediction directory,
/// when one exists.
EvalSummary eval_run(const std::filesystem::path& pred_dir, const std::filesystem::path& gt_dir);

/// query_id,iou,dice,rounds,prompts with IoU/Dice as percentages, two decimals.
void write_eval_csv(std::ostream& os, const std::vector<EvalRecord>& records);
/// {count, mean_iou, mean_dice, unmatched}
std::string eval_summary_json(const EvalSummary& s);

std::string percent(double fraction);

} // namespace opsam
