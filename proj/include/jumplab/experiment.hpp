#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "jumplab/data.hpp"
#include "jumplab/model.hpp"
#include "jumplab/report.hpp"
#include "jumplab/schedule.hpp"
#include "jumplab/selection.hpp"

namespace jumplab {

inline constexpr int kConfigVersion = 1;

struct DatasetConfig {
    enum class Source { blobs, csv };
    Source source = Source::blobs;
    std::size_t classes = 10;
    std::size_t dim = 32;
    std::size_t per_class = 300;
    double spread = 1.0;
    std::string train_csv;
    std::string test_csv;
};

struct NoiseConfig {
    NoiseKind kind = NoiseKind::symmetric;
    double epsilon = 0.0;
    std::map<std::size_t, std::size_t> class_map;
    std::uint64_t idn_seed = 0;
};

/// Fully resolved experiment description. Cells are the cartesian product of
/// strategies x effect_rates x seeds.
struct ExperimentConfig {
    DatasetConfig dataset;
    NoiseConfig noise;
    TrainConfig train;
    SelectionConfig selection;
    /// When unset the small-loss keep ratio is 1 - noise epsilon.
    bool keep_ratio_auto = true;
    std::vector<Strategy> strategies{Strategy::jump_update};
    std::vector<double> effect_rates{1.0};
    std::size_t jump_step = 0;
    std::vector<std::uint64_t> seeds{1};
    std::filesystem::path output_dir = "runs";
    bool dump_selection = false;
    bool save_checkpoints = true;

    void validate() const;
    double keep_ratio() const;
};

/// Parses the versioned JSON config; unknown keys and type mismatches raise
/// config errors naming the field path.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Canonical JSON of every field that affects results (output location and
/// dump toggles excluded), keys sorted.
nlohmann::json canonical_config(const ExperimentConfig& cfg);
std::string config_hash(const ExperimentConfig& cfg);

/// Applies JUMPLAB_OUTPUT_DIR when set.
void apply_environment(ExperimentConfig& cfg);

struct CellResult {
    Strategy strategy = Strategy::standard;
    double effect_rate = 1.0;
    std::uint64_t seed = 0;
    std::vector<EpochRecord> records;
    RunSummary summary;
    std::filesystem::path dir;
};

struct PreparedData {
    NoisyDataset train;
    NoisyDataset test;
};

/// Builds (or loads) the dataset for one seed and injects the configured noise.
PreparedData prepare_data(const ExperimentConfig& cfg, std::uint64_t seed);

struct CellOptions {
    bool write_outputs = true;
    bool record_events = false;
};

/// Trains one (strategy, effect rate, seed) cell end to end.
CellResult run_cell(const ExperimentConfig& cfg, Strategy strategy, double effect_rate, std::uint64_t seed,
                    const PreparedData& data, const CellOptions& options = {});

std::string cell_name(Strategy strategy, double effect_rate, bool show_rate);

/// Effect rates a strategy runs at; standard training has a single cell.
std::vector<double> rates_for(const ExperimentConfig& cfg, Strategy strategy);

/// Runs every cell; writes per-cell outputs under output_dir.
std::vector<CellResult> run_experiment(const ExperimentConfig& cfg);

struct ComparisonRow {
    std::string label;
    Strategy strategy = Strategy::standard;
    double effect_rate = 1.0;
    std::size_t seeds = 0;
    double mean_last10 = 0.0;
    double std_last10 = 0.0;
    std::optional<double> mean_temporal_iou;
    std::optional<double> mean_cross_iou;
    std::optional<double> mean_sel_f1;
    double mean_epoch_ms = 0.0;
};

std::vector<ComparisonRow> comparison_table(const ExperimentConfig& cfg, const std::vector<CellResult>& cells);

/// Runs all cells, then writes comparison.csv and iou_comparison.csv.
std::vector<ComparisonRow> compare_strategies(const ExperimentConfig& cfg);

void write_comparison(const std::vector<ComparisonRow>& rows, const std::filesystem::path& out_dir);

}  // namespace jumplab
