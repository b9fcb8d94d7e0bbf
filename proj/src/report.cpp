#include "jumplab/report.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

#include <fmt/format.h>

namespace jumplab {
namespace {

template <typename J>
void put_optional(J& j, const char* key, const std::optional<double>& v) {
    if (v) j[key] = *v;
    else j[key] = nullptr;
}

std::optional<double> get_optional(const nlohmann::json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<double>();
}

std::optional<double> mean_of(const std::vector<double>& v) {
    if (v.empty()) return std::nullopt;
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

std::ofstream open_for_write(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorKind::io, fmt::format("cannot open '{}' for writing", path.string()));
    return out;
}

std::string csv_optional(const std::optional<double>& v) {
    return v ? fmt::format("{}", *v) : std::string();
}

}  // namespace

double median(std::vector<double> values) {
    if (values.empty()) return 0.0;
    const std::size_t mid = values.size() / 2;
    std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
    const double upper = values[mid];
    if (values.size() % 2 == 1) return upper;
    const double lower = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lower + upper);
}

nlohmann::ordered_json to_json(const EpochRecord& r, const RunMeta& meta) {
    nlohmann::ordered_json j;
    j["epoch"] = r.epoch;
    j["strategy"] = r.strategy;
    j["selected_count"] = r.selected_count;
    j["skipped_batches"] = r.skipped_batches;
    j["commit_count"] = r.commit_count;
    j["mean_lag"] = r.mean_lag;
    j["test_acc"] = r.test_acc;
    j["sel_precision"] = r.sel_precision;
    j["sel_recall"] = r.sel_recall;
    j["sel_f1"] = r.sel_f1;
    j["epoch_wall_ms"] = r.epoch_wall_ms;
    j["config_hash"] = meta.config_hash;
    j["seed"] = meta.seed;
    put_optional(j, "spread", meta.spread);
    j["effect_rate"] = r.effect_rate;
    j["warmup"] = r.warmup;
    put_optional(j, "temporal_iou", r.temporal_iou);
    put_optional(j, "cross_iou", r.cross_iou);
    put_optional(j, "median_var_clean", r.median_var_clean);
    put_optional(j, "median_var_noisy", r.median_var_noisy);
    j["train_loss"] = r.train_loss;
    j["lr"] = r.lr;
    j["updates"] = r.updates;
    j["forward_passes"] = r.forward_passes;
    j["gated_iterations"] = r.gated_iterations;
    j["n_A"] = r.flow.selection_iterations;
    j["n_f"] = r.flow.sub_flows;
    j["n_a"] = r.flow.per_flow;
    j["d_a_proxy"] = r.flow.per_flow_exact;
    j["d_A_proxy"] = r.flow.accumulation_proxy;
    j["peak_rss_bytes"] = r.peak_rss_bytes;
    return j;
}

EpochRecord record_from_json(const nlohmann::json& j) {
    try {
        EpochRecord r;
        r.epoch = j.at("epoch").get<std::size_t>();
        r.strategy = j.at("strategy").get<std::string>();
        r.selected_count = j.at("selected_count").get<std::size_t>();
        r.skipped_batches = j.at("skipped_batches").get<std::size_t>();
        r.commit_count = j.at("commit_count").get<std::size_t>();
        r.mean_lag = j.at("mean_lag").get<double>();
        r.test_acc = j.at("test_acc").get<double>();
        r.sel_precision = j.at("sel_precision").get<double>();
        r.sel_recall = j.at("sel_recall").get<double>();
        r.sel_f1 = j.at("sel_f1").get<double>();
        r.epoch_wall_ms = j.at("epoch_wall_ms").get<double>();
        r.effect_rate = j.value("effect_rate", 1.0);
        r.warmup = j.value("warmup", false);
        r.temporal_iou = get_optional(j, "temporal_iou");
        r.cross_iou = get_optional(j, "cross_iou");
        r.median_var_clean = get_optional(j, "median_var_clean");
        r.median_var_noisy = get_optional(j, "median_var_noisy");
        r.train_loss = j.value("train_loss", 0.0);
        r.lr = j.value("lr", 0.0);
        r.updates = j.value("updates", std::size_t{0});
        r.forward_passes = j.value("forward_passes", std::size_t{0});
        r.gated_iterations = j.value("gated_iterations", std::size_t{0});
        r.flow.selection_iterations = j.value("n_A", std::uint64_t{0});
        r.flow.sub_flows = j.value("n_f", std::uint64_t{1});
        r.flow.per_flow = j.value("n_a", std::uint64_t{0});
        r.flow.per_flow_exact = j.value("d_a_proxy", 0.0);
        r.flow.accumulation_proxy = j.value("d_A_proxy", 0.0);
        r.peak_rss_bytes = j.value("peak_rss_bytes", std::uint64_t{0});
        return r;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::parse, fmt::format("epoch record: {}", e.what()));
    }
}

nlohmann::ordered_json to_json(const RunSummary& s) {
    nlohmann::ordered_json j;
    j["config_hash"] = s.config_hash;
    j["seed"] = s.seed;
    put_optional(j, "spread", s.spread);
    j["strategy"] = s.strategy;
    j["effect_rate"] = s.effect_rate;
    j["final_acc"] = s.final_acc;
    j["last10_mean_acc"] = s.last10_mean_acc;
    put_optional(j, "mean_sel_f1", s.mean_sel_f1);
    put_optional(j, "mean_temporal_iou", s.mean_temporal_iou);
    put_optional(j, "mean_cross_iou", s.mean_cross_iou);
    j["mean_epoch_ms"] = s.mean_epoch_ms;
    return j;
}

double last10_mean(const std::vector<EpochRecord>& records) {
    if (records.empty()) return 0.0;
    const std::size_t take = std::min<std::size_t>(10, records.size());
    double sum = 0.0;
    for (std::size_t i = records.size() - take; i < records.size(); ++i) sum += records[i].test_acc;
    return sum / static_cast<double>(take);
}

RunSummary summarize(const std::vector<EpochRecord>& records, const RunMeta& meta) {
    if (records.empty()) fail(ErrorKind::config, "summary needs at least one epoch record");
    RunSummary s;
    s.config_hash = meta.config_hash;
    s.seed = meta.seed;
    s.spread = meta.spread;
    s.strategy = meta.strategy;
    s.effect_rate = meta.effect_rate;
    s.final_acc = records.back().test_acc;
    s.last10_mean_acc = last10_mean(records);
    std::vector<double> f1, temporal, cross, ms;
    for (const auto& r : records) {
        ms.push_back(r.epoch_wall_ms);
        if (r.warmup) continue;
        f1.push_back(r.sel_f1);
        if (r.temporal_iou && r.epoch > meta.warmup_epochs) temporal.push_back(*r.temporal_iou);
        if (r.cross_iou) cross.push_back(*r.cross_iou);
    }
    s.mean_sel_f1 = mean_of(f1);
    s.mean_temporal_iou = mean_of(temporal);
    s.mean_cross_iou = mean_of(cross);
    s.mean_epoch_ms = mean_of(ms).value_or(0.0);
    return s;
}

RunSummary emit_report(const std::vector<EpochRecord>& records, const RunMeta& meta,
                       const std::filesystem::path& out_dir) {
    if (records.empty()) fail(ErrorKind::config, "emit_report: no epoch records");
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) fail(ErrorKind::io, fmt::format("cannot create '{}': {}", out_dir.string(), ec.message()));

    {
        auto out = open_for_write(out_dir / "epochs.jsonl");
        for (const auto& r : records) out << to_json(r, meta).dump() << '\n';
        if (!out) fail(ErrorKind::io, "write to epochs.jsonl failed");
    }
    const RunSummary summary = summarize(records, meta);
    {
        auto out = open_for_write(out_dir / "summary.json");
        out << to_json(summary).dump(2) << '\n';
        if (!out) fail(ErrorKind::io, "write to summary.json failed");
    }
    {
        auto out = open_for_write(out_dir / "curves.csv");
        out << "epoch,test_acc,sel_precision,sel_recall,sel_f1,temporal_iou,cross_iou,train_loss,selected_count\n";
        for (const auto& r : records) {
            out << fmt::format("{},{},{},{},{},{},{},{},{}\n", r.epoch, r.test_acc, r.sel_precision, r.sel_recall,
                               r.sel_f1, csv_optional(r.temporal_iou), csv_optional(r.cross_iou), r.train_loss,
                               r.selected_count);
        }
        if (!out) fail(ErrorKind::io, "write to curves.csv failed");
    }
    return summary;
}

std::vector<EpochRecord> load_epochs_jsonl(const std::filesystem::path& path, RunMeta& meta) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::io, fmt::format("cannot open '{}'", path.string()));
    std::vector<EpochRecord> records;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            fail(ErrorKind::parse, fmt::format("{}:{}: {}", path.string(), line_no, e.what()));
        }
        if (records.empty()) {
            meta.config_hash = j.value("config_hash", std::string());
            meta.seed = j.value("seed", std::uint64_t{0});
            meta.strategy = j.value("strategy", std::string());
            meta.effect_rate = j.value("effect_rate", 1.0);
            meta.spread = get_optional(j, "spread");
        }
        try {
            records.push_back(record_from_json(j));
        } catch (const Error& e) {
            fail(e.kind(), fmt::format("{}:{}: {}", path.string(), line_no, e.what()));
        }
    }
    meta.warmup_epochs = static_cast<std::size_t>(
        std::count_if(records.begin(), records.end(), [](const EpochRecord& r) { return r.warmup; }));
    return records;
}

void write_selection_dump(const EpochStats& stats, const std::vector<bool>& clean_mask,
                          const std::filesystem::path& path) {
    auto out = open_for_write(path);
    out << "sample_index,variance,bce_loss,det_flag,cls_flag,combined_flag,is_truly_clean\n";
    for (std::size_t i = 0; i < stats.variance.size(); ++i) {
        out << fmt::format("{},{},{},{},{},{},{}\n", i, stats.variance[i], stats.bce[i],
                           int(stats.detection_flags[i]), int(stats.classifier_flags[i]),
                           int(stats.combined_flags[i]), int(clean_mask[i]));
    }
    if (!out) fail(ErrorKind::io, fmt::format("write to '{}' failed", path.string()));
}

}  // namespace jumplab
