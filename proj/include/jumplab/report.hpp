#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "jumplab/schedule.hpp"

namespace jumplab {

/// One row of an experiment record.
struct EpochRecord {
    std::size_t epoch = 0;
    std::string strategy;
    double effect_rate = 1.0;
    bool warmup = false;
    std::size_t selected_count = 0;
    std::size_t skipped_batches = 0;
    std::size_t commit_count = 0;
    double mean_lag = 0.0;
    double test_acc = 0.0;
    double sel_precision = 0.0;
    double sel_recall = 0.0;
    double sel_f1 = 0.0;
    std::optional<double> temporal_iou;
    std::optional<double> cross_iou;
    std::optional<double> median_var_clean;
    std::optional<double> median_var_noisy;
    double train_loss = 0.0;
    double lr = 0.0;
    std::size_t updates = 0;
    std::size_t forward_passes = 0;
    std::size_t gated_iterations = 0;
    ErrorFlowDiagnostics flow;
    double epoch_wall_ms = 0.0;
    std::uint64_t peak_rss_bytes = 0;
};

/// Fields that measure the machine rather than the training run.
inline const std::vector<std::string>& timing_fields() {
    static const std::vector<std::string> fields{"epoch_wall_ms", "peak_rss_bytes", "mean_epoch_ms"};
    return fields;
}

struct RunMeta {
    std::string config_hash;
    std::uint64_t seed = 0;
    std::string strategy;
    double effect_rate = 1.0;
    std::size_t warmup_epochs = 0;
    std::optional<double> spread;  ///< blob spread; absent for CSV data
};

struct RunSummary {
    std::string config_hash;
    std::uint64_t seed = 0;
    std::optional<double> spread;
    std::string strategy;
    double effect_rate = 1.0;
    double final_acc = 0.0;
    double last10_mean_acc = 0.0;
    std::optional<double> mean_sel_f1;
    std::optional<double> mean_temporal_iou;
    std::optional<double> mean_cross_iou;
    double mean_epoch_ms = 0.0;
};

nlohmann::ordered_json to_json(const EpochRecord& r, const RunMeta& meta);
EpochRecord record_from_json(const nlohmann::json& j);
nlohmann::ordered_json to_json(const RunSummary& s);

/// Mean of the last min(10, n) test accuracies.
double last10_mean(const std::vector<EpochRecord>& records);

RunSummary summarize(const std::vector<EpochRecord>& records, const RunMeta& meta);

/// Writes epochs.jsonl, summary.json and curves.csv under out_dir.
RunSummary emit_report(const std::vector<EpochRecord>& records, const RunMeta& meta,
                       const std::filesystem::path& out_dir);

/// Reads epochs.jsonl back; the metadata comes from its first line.
std::vector<EpochRecord> load_epochs_jsonl(const std::filesystem::path& path, RunMeta& meta);

/// Per-sample single-loss decisions for one epoch.
void write_selection_dump(const EpochStats& stats, const std::vector<bool>& clean_mask,
                          const std::filesystem::path& path);

double median(std::vector<double> values);

}  // namespace jumplab
