#include "jumplab/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>

#include <fmt/format.h>

#include "jumplab/codebook.hpp"
#include "jumplab/metrics.hpp"

namespace jumplab {
namespace {

using nlohmann::json;

bool non_negative_integer(const json& v) {
    return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
}

// IoU of two empty selections counts as 1; say so, since nothing was compared.
double noted_iou(const std::vector<bool>& a, const std::vector<bool>& b, const char* what, std::size_t epoch) {
    if (std::none_of(a.begin(), a.end(), [](bool f) { return f; }) &&
        std::none_of(b.begin(), b.end(), [](bool f) { return f; })) {
        fmt::print(stderr, "note: epoch {}: {} IoU of two empty selections taken as 1\n", epoch, what);
    }
    return iou(a, b);
}

/// Strict reader for one JSON object: every key must be consumed.
class ObjectReader {
public:
    ObjectReader(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
        if (!obj_.is_object()) fail(ErrorKind::config, fmt::format("{}: expected an object", display()));
    }

    bool has(const std::string& key) const { return obj_.contains(key); }

    const json& raw(const std::string& key) {
        seen_.insert(key);
        return obj_.at(key);
    }

    std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    void read(const std::string& key, double& out) {
        if (!has(key)) return;
        const json& v = raw(key);
        if (!v.is_number()) fail(ErrorKind::config, fmt::format("{}: expected a number", field(key)));
        out = v.get<double>();
    }

    void read(const std::string& key, std::size_t& out) {
        if (!has(key)) return;
        const json& v = raw(key);
        if (!non_negative_integer(v)) {
            fail(ErrorKind::config, fmt::format("{}: expected a non-negative integer", field(key)));
        }
        out = v.get<std::size_t>();
    }

    void read(const std::string& key, bool& out) {
        if (!has(key)) return;
        const json& v = raw(key);
        if (!v.is_boolean()) fail(ErrorKind::config, fmt::format("{}: expected true or false", field(key)));
        out = v.get<bool>();
    }

    void read(const std::string& key, std::string& out) {
        if (!has(key)) return;
        const json& v = raw(key);
        if (!v.is_string()) fail(ErrorKind::config, fmt::format("{}: expected a string", field(key)));
        out = v.get<std::string>();
    }

    template <typename T>
    void read_list(const std::string& key, std::vector<T>& out) {
        if (!has(key)) return;
        const json& v = raw(key);
        if (!v.is_array()) fail(ErrorKind::config, fmt::format("{}: expected an array", field(key)));
        out.clear();
        for (std::size_t i = 0; i < v.size(); ++i) {
            const json& item = v[i];
            if constexpr (std::is_same_v<T, double>) {
                if (!item.is_number()) fail(ErrorKind::config, fmt::format("{}[{}]: expected a number", field(key), i));
            } else {
                if (!non_negative_integer(item)) {
                    fail(ErrorKind::config, fmt::format("{}[{}]: expected a non-negative integer", field(key), i));
                }
            }
            out.push_back(item.get<T>());
        }
    }

    void finish() const {
        for (const auto& [key, value] : obj_.items()) {
            if (!seen_.count(key)) fail(ErrorKind::config, fmt::format("{}: unknown key", field(key)));
        }
    }

private:
    std::string display() const { return path_.empty() ? "<root>" : path_; }

    const json& obj_;
    std::string path_;
    std::set<std::string> seen_;
};

template <typename Fn>
auto wrap_config(const std::string& field, Fn&& fn) {
    try {
        return fn();
    } catch (const Error& e) {
        fail(ErrorKind::config, fmt::format("{}: {}", field, e.what()));
    }
}

std::string fnv1a_hex(const std::string& text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const char c : text) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return fmt::format("{:016x}", h);
}

std::optional<double> mean_optional(const std::vector<double>& v) {
    if (v.empty()) return std::nullopt;
    double s = 0.0;
    for (const double x : v) s += x;
    return s / static_cast<double>(v.size());
}

}  // namespace

double ExperimentConfig::keep_ratio() const {
    if (!keep_ratio_auto) return selection.small_loss_keep_ratio;
    return std::clamp(1.0 - noise.epsilon, 0.05, 1.0);
}

void ExperimentConfig::validate() const {
    if (dataset.source == DatasetConfig::Source::blobs) {
        if (dataset.classes < 2 || dataset.dim < 2) fail(ErrorKind::config, "dataset: need classes >= 2 and dim >= 2");
        if (dataset.per_class < 2) fail(ErrorKind::config, "dataset.per_class: must be >= 2");
        if (!(dataset.spread >= 0.0)) fail(ErrorKind::config, "dataset.spread: must be >= 0");
    } else {
        if (dataset.train_csv.empty() || dataset.test_csv.empty()) {
            fail(ErrorKind::config, "dataset: csv source needs train_csv and test_csv");
        }
        if (dataset.classes < 2) fail(ErrorKind::config, "dataset.classes: must be >= 2");
    }
    wrap_config("train", [&] { train.validate(); });
    SelectionConfig sel = selection;
    sel.small_loss_keep_ratio = keep_ratio();
    wrap_config("selection", [&] { sel.validate(); });
    if (!(noise.epsilon >= 0.0 && noise.epsilon <= 1.0)) fail(ErrorKind::config, "noise.epsilon: outside [0, 1]");
    if (noise.kind == NoiseKind::asymmetric && noise.class_map.empty() && noise.epsilon > 0.0) {
        fail(ErrorKind::config, "noise.class_map: required for asymmetric noise");
    }
    for (const auto& [from, to] : noise.class_map) {
        if (from >= dataset.classes || to >= dataset.classes) {
            fail(ErrorKind::config, fmt::format("noise.class_map: entry {}->{} outside [0, {})", from, to,
                                                dataset.classes));
        }
    }
    if (strategies.empty()) fail(ErrorKind::config, "schedule.strategies: must not be empty");
    if (effect_rates.empty()) fail(ErrorKind::config, "schedule.effect_rates: must not be empty");
    for (const double r : effect_rates) {
        if (!(r > 0.0 && r <= 1.0)) fail(ErrorKind::config, fmt::format("schedule.effect_rates: {} outside (0, 1]", r));
    }
    if (jump_step == 1) fail(ErrorKind::config, "schedule.jump_step: must be 0 (one epoch) or >= 2");
    if (seeds.empty()) fail(ErrorKind::config, "seeds: must not be empty");
    if (train.code_bits) {
        if (!is_power_of_two(train.code_bits) || train.code_bits < 2) {
            fail(ErrorKind::config, "train.code_bits: must be a power of two >= 2");
        }
        if (train.code_bits < dataset.classes) {
            fail(ErrorKind::capacity, fmt::format("train.code_bits: K={} cannot encode C={} classes", train.code_bits,
                                                dataset.classes));
        }
    }
}

ExperimentConfig parse_config(const json& j) {
    ExperimentConfig cfg;
    ObjectReader root(j, "");
    if (!root.has("version")) fail(ErrorKind::config, "version: missing");
    const json& version = root.raw("version");
    if (!version.is_number_integer() || version.get<int>() != kConfigVersion) {
        fail(ErrorKind::config, fmt::format("version: expected {}", kConfigVersion));
    }

    if (root.has("dataset")) {
        ObjectReader d(root.raw("dataset"), "dataset");
        std::string source = "blobs";
        d.read("source", source);
        if (source == "blobs") cfg.dataset.source = DatasetConfig::Source::blobs;
        else if (source == "csv") cfg.dataset.source = DatasetConfig::Source::csv;
        else fail(ErrorKind::config, fmt::format("dataset.source: unknown value '{}'", source));
        d.read("classes", cfg.dataset.classes);
        d.read("dim", cfg.dataset.dim);
        d.read("per_class", cfg.dataset.per_class);
        d.read("spread", cfg.dataset.spread);
        d.read("train_csv", cfg.dataset.train_csv);
        d.read("test_csv", cfg.dataset.test_csv);
        d.finish();
    }

    if (root.has("noise")) {
        ObjectReader n(root.raw("noise"), "noise");
        std::string kind = "symmetric";
        n.read("kind", kind);
        cfg.noise.kind = wrap_config("noise.kind", [&] { return parse_noise_kind(kind); });
        n.read("epsilon", cfg.noise.epsilon);
        n.read("idn_seed", cfg.noise.idn_seed);
        if (n.has("class_map")) {
            const json& m = n.raw("class_map");
            if (!m.is_object()) fail(ErrorKind::config, "noise.class_map: expected an object");
            for (const auto& [from, to] : m.items()) {
                std::size_t key = 0;
                const auto [ptr, ec] = std::from_chars(from.data(), from.data() + from.size(), key);
                if (ec != std::errc() || ptr != from.data() + from.size() || !non_negative_integer(to)) {
                    fail(ErrorKind::config, fmt::format("noise.class_map.{}: expected class -> class", from));
                }
                cfg.noise.class_map[key] = to.get<std::size_t>();
            }
        }
        n.finish();
    }

    bool warmup_given = false;
    if (root.has("train")) {
        ObjectReader t(root.raw("train"), "train");
        t.read("lr0", cfg.train.lr0);
        t.read("lr_min", cfg.train.lr_min);
        t.read("momentum", cfg.train.momentum);
        t.read("weight_decay", cfg.train.weight_decay);
        t.read("batch_size", cfg.train.batch_size);
        t.read("epochs", cfg.train.epochs);
        warmup_given = t.has("warmup_epochs");
        t.read("warmup_epochs", cfg.train.warmup_epochs);
        t.read("temperature", cfg.train.temperature);
        t.read("detection_weight", cfg.train.detection_weight);
        t.read_list("trunk_widths", cfg.train.trunk_widths);
        t.read("code_bits", cfg.train.code_bits);
        t.finish();
    }
    if (!warmup_given) cfg.train.warmup_epochs = (cfg.train.epochs * 15) / 100;

    if (root.has("selection")) {
        ObjectReader s(root.raw("selection"), "selection");
        s.read("tau", cfg.selection.tau);
        s.read("tau_decay", cfg.selection.tau_decay);
        if (s.has("small_loss_keep_ratio")) {
            const json& v = s.raw("small_loss_keep_ratio");
            if (v.is_string() && v.get<std::string>() == "auto") {
                cfg.keep_ratio_auto = true;
            } else if (v.is_number()) {
                cfg.keep_ratio_auto = false;
                cfg.selection.small_loss_keep_ratio = v.get<double>();
            } else {
                fail(ErrorKind::config, "selection.small_loss_keep_ratio: expected a number or \"auto\"");
            }
        }
        s.finish();
    }

    if (root.has("schedule")) {
        ObjectReader s(root.raw("schedule"), "schedule");
        if (s.has("strategies")) {
            const json& list = s.raw("strategies");
            if (!list.is_array()) fail(ErrorKind::config, "schedule.strategies: expected an array");
            cfg.strategies.clear();
            for (std::size_t i = 0; i < list.size(); ++i) {
                if (!list[i].is_string()) {
                    fail(ErrorKind::config, fmt::format("schedule.strategies[{}]: expected a string", i));
                }
                cfg.strategies.push_back(wrap_config(fmt::format("schedule.strategies[{}]", i),
                                                     [&] { return parse_strategy(list[i].get<std::string>()); }));
            }
        }
        s.read_list("effect_rates", cfg.effect_rates);
        s.read("jump_step", cfg.jump_step);
        s.finish();
    }

    root.read_list("seeds", cfg.seeds);
    std::string out_dir = cfg.output_dir.string();
    root.read("output_dir", out_dir);
    cfg.output_dir = out_dir;
    root.read("dump_selection", cfg.dump_selection);
    root.read("save_checkpoints", cfg.save_checkpoints);
    root.finish();
    cfg.validate();
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::io, fmt::format("cannot open config '{}'", path.string()));
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        fail(ErrorKind::config, fmt::format("config '{}' is not valid JSON: {}", path.string(), e.what()));
    }
    return parse_config(j);
}

json canonical_config(const ExperimentConfig& cfg) {
    json j;
    j["version"] = kConfigVersion;
    auto& d = j["dataset"];
    if (cfg.dataset.source == DatasetConfig::Source::blobs) {
        d["source"] = "blobs";
        d["classes"] = cfg.dataset.classes;
        d["dim"] = cfg.dataset.dim;
        d["per_class"] = cfg.dataset.per_class;
        d["spread"] = cfg.dataset.spread;
    } else {
        d["source"] = "csv";
        d["classes"] = cfg.dataset.classes;
        d["train_csv"] = cfg.dataset.train_csv;
        d["test_csv"] = cfg.dataset.test_csv;
    }
    auto& n = j["noise"];
    n["kind"] = std::string(to_string(cfg.noise.kind));
    n["epsilon"] = cfg.noise.epsilon;
    if (cfg.noise.kind == NoiseKind::asymmetric) {
        json m = json::object();
        for (const auto& [from, to] : cfg.noise.class_map) m[std::to_string(from)] = to;
        n["class_map"] = m;
    }
    if (cfg.noise.kind == NoiseKind::instance) n["idn_seed"] = cfg.noise.idn_seed;
    auto& t = j["train"];
    t["lr0"] = cfg.train.lr0;
    t["lr_min"] = cfg.train.lr_min;
    t["momentum"] = cfg.train.momentum;
    t["weight_decay"] = cfg.train.weight_decay;
    t["batch_size"] = cfg.train.batch_size;
    t["epochs"] = cfg.train.epochs;
    t["warmup_epochs"] = cfg.train.warmup_epochs;
    t["temperature"] = cfg.train.temperature;
    t["detection_weight"] = cfg.train.detection_weight;
    t["trunk_widths"] = cfg.train.trunk_widths;
    t["code_bits"] = cfg.train.code_bits ? cfg.train.code_bits : default_code_bits(cfg.dataset.classes);
    auto& s = j["selection"];
    s["tau"] = cfg.selection.tau;
    s["tau_decay"] = cfg.selection.tau_decay;
    s["small_loss_keep_ratio"] = cfg.keep_ratio();
    auto& sc = j["schedule"];
    json names = json::array();
    for (const auto st : cfg.strategies) names.push_back(std::string(to_string(st)));
    sc["strategies"] = names;
    sc["effect_rates"] = cfg.effect_rates;
    sc["jump_step"] = cfg.jump_step;
    j["seeds"] = cfg.seeds;
    return j;
}

std::string config_hash(const ExperimentConfig& cfg) {
    return fnv1a_hex(canonical_config(cfg).dump());
}

void apply_environment(ExperimentConfig& cfg) {
    if (const char* dir = std::getenv("JUMPLAB_OUTPUT_DIR"); dir && *dir) cfg.output_dir = dir;
}

PreparedData prepare_data(const ExperimentConfig& cfg, std::uint64_t seed) {
    const RngStream root(seed);
    PreparedData data;
    if (cfg.dataset.source == DatasetConfig::Source::blobs) {
        auto splits = gen_blobs(cfg.dataset.classes, cfg.dataset.dim, cfg.dataset.per_class, cfg.dataset.spread,
                                root.derive("data").seed());
        data.train = std::move(splits.train);
        data.test = std::move(splits.test);
    } else {
        data.train = load_csv(cfg.dataset.train_csv, cfg.dataset.classes, Split::train);
        data.test = load_csv(cfg.dataset.test_csv, cfg.dataset.classes, Split::test);
        if (data.train.dim() != data.test.dim()) {
            fail(ErrorKind::config, "dataset: train and test CSVs have different feature counts");
        }
    }
    if (cfg.noise.epsilon > 0.0) {
        NoiseSpec spec;
        spec.kind = cfg.noise.kind;
        spec.epsilon = cfg.noise.epsilon;
        spec.class_map = cfg.noise.class_map;
        if (spec.kind == NoiseKind::instance) {
            const std::uint64_t s = cfg.noise.idn_seed ? cfg.noise.idn_seed : root.derive("idn").seed();
            spec.idn_weights = random_idn_weights(data.train.dim(), data.train.classes, s);
        }
        data.train = inject_noise(data.train, spec, root.derive("noise").seed());
    }
    return data;
}

std::string cell_name(Strategy strategy, double effect_rate, bool show_rate) {
    if (!show_rate || strategy == Strategy::standard) return std::string(to_string(strategy));
    return fmt::format("{}_r{}", to_string(strategy), effect_rate);
}

CellResult run_cell(const ExperimentConfig& cfg, Strategy strategy, double effect_rate, std::uint64_t seed,
                    const PreparedData& data, const CellOptions& options) {
    const std::size_t bits = cfg.train.code_bits ? cfg.train.code_bits : default_code_bits(data.train.classes);
    const HadamardCodebook codebook(bits, data.train.classes);
    TrainConfig train_cfg = cfg.train;
    train_cfg.seed = seed;
    SelectionConfig selection_cfg = cfg.selection;
    selection_cfg.small_loss_keep_ratio = cfg.keep_ratio();
    const ScheduleConfig schedule_cfg{strategy, effect_rate, cfg.jump_step};

    TrainingSession session(data.train, codebook, train_cfg, selection_cfg, schedule_cfg, seed);
    session.record_events(options.record_events);
    session.collect_single_loss(cfg.dump_selection);

    CellResult result;
    result.strategy = strategy;
    result.effect_rate = effect_rate;
    result.seed = seed;
    const bool show_rate = cfg.effect_rates.size() > 1;
    result.dir = cfg.output_dir / cell_name(strategy, effect_rate, show_rate) / fmt::format("seed_{}", seed);
    if (options.write_outputs) {
        std::error_code ec;
        std::filesystem::create_directories(result.dir, ec);
        if (ec) fail(ErrorKind::io, fmt::format("cannot create '{}': {}", result.dir.string(), ec.message()));
    }

    std::vector<bool> previous;
    for (std::size_t e = 0; e < train_cfg.epochs; ++e) {
        EpochStats stats = session.run_epoch();
        EpochRecord r;
        r.epoch = stats.epoch;
        r.strategy = std::string(to_string(strategy));
        r.effect_rate = effect_rate;
        r.warmup = stats.warmup;
        r.selected_count = stats.selected_count;
        r.skipped_batches = stats.skipped_batches;
        r.commit_count = stats.commit_count;
        r.mean_lag = stats.mean_lag;
        r.test_acc = evaluate(session.net(), data.test);
        const auto quality = selection_quality(stats.selection, data.train.clean_mask);
        r.sel_precision = quality.precision;
        r.sel_recall = quality.recall;
        r.sel_f1 = quality.f1;
        if (!previous.empty()) r.temporal_iou = noted_iou(previous, stats.selection, "temporal", stats.epoch);
        if (!stats.peer_selection.empty()) {
            r.cross_iou = noted_iou(stats.selection, stats.peer_selection, "cross", stats.epoch);
        }
        if (!stats.variance.empty()) {
            std::vector<double> clean, noisy;
            for (std::size_t i = 0; i < stats.variance.size(); ++i) {
                (data.train.clean_mask[i] ? clean : noisy).push_back(stats.variance[i]);
            }
            if (!clean.empty()) r.median_var_clean = median(clean);
            if (!noisy.empty()) r.median_var_noisy = median(noisy);
        }
        r.train_loss = stats.train_loss;
        r.lr = stats.lr;
        r.updates = stats.updates;
        r.forward_passes = stats.forward_passes;
        r.gated_iterations = stats.gated_iterations;
        r.flow = stats.flow;
        r.epoch_wall_ms = stats.wall_ms;
        r.peak_rss_bytes = peak_resident_bytes();
        result.records.push_back(std::move(r));
        if (options.write_outputs && cfg.dump_selection && !stats.variance.empty()) {
            write_selection_dump(stats, data.train.clean_mask,
                                 result.dir / fmt::format("selection_epoch_{:03}.csv", stats.epoch));
        }
        previous = std::move(stats.selection);
    }

    RunMeta meta{config_hash(cfg), seed, std::string(to_string(strategy)), effect_rate, train_cfg.warmup_epochs, {}};
    if (cfg.dataset.source == DatasetConfig::Source::blobs) meta.spread = cfg.dataset.spread;
    if (options.write_outputs) {
        result.summary = emit_report(result.records, meta, result.dir);
        if (cfg.save_checkpoints) {
            save_checkpoint(session.net(), result.dir / "checkpoint.bin");
            nlohmann::ordered_json ck;
            ck["format"] = "JLCKPT01";
            ck["epoch"] = train_cfg.epochs;
            ck["seed"] = seed;
            ck["strategy"] = std::string(to_string(strategy));
            ck["temperature"] = train_cfg.temperature;
            ck["config_hash"] = meta.config_hash;
            ck["config"] = canonical_config(cfg);
            std::ofstream out(result.dir / "checkpoint.json", std::ios::binary);
            if (!out) fail(ErrorKind::io, "cannot write checkpoint.json");
            out << ck.dump(2) << '\n';
        }
    } else {
        result.summary = summarize(result.records, meta);
    }
    return result;
}

std::vector<double> rates_for(const ExperimentConfig& cfg, Strategy strategy) {
    // Standard training never selects, so the effect rate does not apply.
    if (strategy == Strategy::standard) return {1.0};
    return cfg.effect_rates;
}

std::vector<CellResult> run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    std::vector<CellResult> cells;
    for (const auto seed : cfg.seeds) {
        const PreparedData data = prepare_data(cfg, seed);
        for (const auto strategy : cfg.strategies) {
            for (const double rate : rates_for(cfg, strategy)) {
                cells.push_back(run_cell(cfg, strategy, rate, seed, data));
            }
        }
    }
    return cells;
}

std::vector<ComparisonRow> comparison_table(const ExperimentConfig& cfg, const std::vector<CellResult>& cells) {
    std::vector<ComparisonRow> rows;
    const bool show_rate = cfg.effect_rates.size() > 1;
    for (const auto strategy : cfg.strategies) {
        for (const double rate : rates_for(cfg, strategy)) {
            ComparisonRow row;
            row.label = cell_name(strategy, rate, show_rate);
            row.strategy = strategy;
            row.effect_rate = rate;
            std::vector<double> acc, temporal, cross, f1, ms;
            for (const auto& c : cells) {
                if (c.strategy != strategy || c.effect_rate != rate) continue;
                acc.push_back(c.summary.last10_mean_acc);
                ms.push_back(c.summary.mean_epoch_ms);
                if (c.summary.mean_temporal_iou) temporal.push_back(*c.summary.mean_temporal_iou);
                if (c.summary.mean_cross_iou) cross.push_back(*c.summary.mean_cross_iou);
                if (c.summary.mean_sel_f1) f1.push_back(*c.summary.mean_sel_f1);
            }
            row.seeds = acc.size();
            row.mean_last10 = mean_optional(acc).value_or(0.0);
            if (acc.size() > 1) {
                double ss = 0.0;
                for (const double a : acc) ss += (a - row.mean_last10) * (a - row.mean_last10);
                row.std_last10 = std::sqrt(ss / static_cast<double>(acc.size() - 1));
            }
            row.mean_temporal_iou = mean_optional(temporal);
            row.mean_cross_iou = mean_optional(cross);
            row.mean_sel_f1 = mean_optional(f1);
            row.mean_epoch_ms = mean_optional(ms).value_or(0.0);
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

void write_comparison(const std::vector<ComparisonRow>& rows, const std::filesystem::path& out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) fail(ErrorKind::io, fmt::format("cannot create '{}': {}", out_dir.string(), ec.message()));
    const auto opt = [](const std::optional<double>& v) { return v ? fmt::format("{}", *v) : std::string(); };
    {
        std::ofstream out(out_dir / "comparison.csv", std::ios::binary);
        if (!out) fail(ErrorKind::io, "cannot write comparison.csv");
        out << "label,strategy,effect_rate,seeds,mean_last10_acc,std_last10_acc,mean_sel_f1,mean_epoch_ms\n";
        for (const auto& r : rows) {
            out << fmt::format("{},{},{},{},{},{},{},{}\n", r.label, to_string(r.strategy), r.effect_rate, r.seeds,
                               r.mean_last10, r.std_last10, opt(r.mean_sel_f1), r.mean_epoch_ms);
        }
    }
    {
        std::ofstream out(out_dir / "iou_comparison.csv", std::ios::binary);
        if (!out) fail(ErrorKind::io, "cannot write iou_comparison.csv");
        out << "label,mean_temporal_iou,mean_cross_iou\n";
        for (const auto& r : rows) {
            out << fmt::format("{},{},{}\n", r.label, opt(r.mean_temporal_iou), opt(r.mean_cross_iou));
        }
    }
}

std::vector<ComparisonRow> compare_strategies(const ExperimentConfig& cfg) {
    std::size_t count = 0;
    for (const auto strategy : cfg.strategies) count += rates_for(cfg, strategy).size();
    if (count < 2) {
        fail(ErrorKind::config, "compare: needs at least two strategy/effect-rate cells");
    }
    const auto cells = run_experiment(cfg);
    auto rows = comparison_table(cfg, cells);
    write_comparison(rows, cfg.output_dir);
    return rows;
}

}  // namespace jumplab
