#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "jumplab/experiment.hpp"

using namespace jumplab;
using nlohmann::json;

namespace {

std::filesystem::path scratch(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / "jumplab_test_experiment" / name;
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

json tiny_config() {
    return json::parse(R"({
        "version": 1,
        "dataset": {"source": "blobs", "classes": 4, "dim": 8, "per_class": 30, "spread": 1.0},
        "noise": {"kind": "symmetric", "epsilon": 0.3},
        "train": {"epochs": 4, "warmup_epochs": 1, "batch_size": 32, "trunk_widths": [16]},
        "schedule": {"strategies": ["jump_update"]},
        "seeds": [3]
    })");
}

std::string error_of(const json& j) {
    try {
        (void)parse_config(j);
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::config);
        return e.what();
    }
    FAIL("config was accepted");
    return {};
}

// Each line of epochs.jsonl with the timing fields removed.
std::vector<std::string> stripped_jsonl(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::vector<std::string> out;
    for (std::string line; std::getline(in, line);) {
        auto j = nlohmann::ordered_json::parse(line);
        for (const auto& f : timing_fields()) j.erase(f);
        out.push_back(j.dump());
    }
    return out;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("parse_config defaults") {
    const auto cfg = parse_config(json::parse(R"({"version": 1})"));
    CHECK(cfg.dataset.classes == 10);
    CHECK(cfg.dataset.dim == 32);
    CHECK(cfg.train.epochs == 60);
    CHECK(cfg.train.warmup_epochs == 9);
    CHECK(cfg.train.temperature == 2.0);
    CHECK(cfg.selection.tau == 0.001);
    CHECK(cfg.strategies == std::vector<Strategy>{Strategy::jump_update});
    CHECK(cfg.seeds == std::vector<std::uint64_t>{1});

    auto j = tiny_config();
    j["noise"]["epsilon"] = 0.8;
    CHECK(parse_config(j).keep_ratio() == doctest::Approx(0.2));
    j["selection"] = {{"small_loss_keep_ratio", 0.5}};
    CHECK(parse_config(j).keep_ratio() == 0.5);
    j.erase("train");
    CHECK(parse_config(j).train.warmup_epochs == 9);
}

TEST_CASE("parse_config rejects bad input with the field path") {
    auto j = tiny_config();
    j["train"]["lrr"] = 0.1;
    CHECK(error_of(j).find("train.lrr") != std::string::npos);

    j = tiny_config();
    j["extra"] = 1;
    CHECK(error_of(j).find("extra") != std::string::npos);

    j = tiny_config();
    j["version"] = 2;
    CHECK(error_of(j).find("version") != std::string::npos);

    j = tiny_config();
    j["train"]["epochs"] = "ten";
    CHECK(error_of(j).find("train.epochs") != std::string::npos);

    j = tiny_config();
    j["schedule"]["strategies"] = {"jump_update", "mentor_net"};
    CHECK(error_of(j).find("schedule.strategies[1]") != std::string::npos);

    j = tiny_config();
    j["schedule"]["effect_rates"] = {0.0};
    (void)error_of(j);

    j = tiny_config();
    j["train"]["warmup_epochs"] = 4;
    (void)error_of(j);

    j = tiny_config();
    j["dataset"]["classes"] = 40;
    j["train"]["code_bits"] = 32;
    try {
        (void)parse_config(j);
        FAIL("expected capacity error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::capacity);
    }
}

TEST_CASE("config hash follows meaningful fields only") {
    const auto base = parse_config(tiny_config());
    const std::string h = config_hash(base);
    CHECK(h.size() == 16);

    auto reordered = json::parse(R"({"seeds": [3], "schedule": {"strategies": ["jump_update"]},
        "train": {"trunk_widths": [16], "batch_size": 32, "warmup_epochs": 1, "epochs": 4},
        "noise": {"epsilon": 0.3, "kind": "symmetric"},
        "dataset": {"spread": 1.0, "per_class": 30, "dim": 8, "classes": 4, "source": "blobs"}, "version": 1})");
    CHECK(config_hash(parse_config(reordered)) == h);

    auto moved = tiny_config();
    moved["output_dir"] = "/tmp/elsewhere";
    moved["dump_selection"] = true;
    moved["save_checkpoints"] = false;
    CHECK(config_hash(parse_config(moved)) == h);

    for (const auto& [path, value] : std::vector<std::pair<std::string, json>>{
             {"/train/lr0", 0.03}, {"/noise/epsilon", 0.31}, {"/dataset/spread", 1.1}, {"/seeds", {4}},
             {"/selection", {{"tau", 0.002}}}, {"/selection", {{"tau_decay", 0.9}}}, {"/schedule/jump_step", 3}}) {
        auto changed = tiny_config();
        changed[json::json_pointer(path)] = value;
        CHECK_MESSAGE(config_hash(parse_config(changed)) != h, path);
    }
}

TEST_CASE("output directory from the environment") {
    auto cfg = parse_config(tiny_config());
    ::setenv("JUMPLAB_OUTPUT_DIR", "/tmp/jumplab_env_dir", 1);
    apply_environment(cfg);
    ::unsetenv("JUMPLAB_OUTPUT_DIR");
    CHECK(cfg.output_dir == std::filesystem::path("/tmp/jumplab_env_dir"));
}

TEST_CASE("minimal run writes every output") {
    auto j = tiny_config();
    j["train"]["epochs"] = 2;
    j["train"]["warmup_epochs"] = 0;
    j["dump_selection"] = true;
    auto cfg = parse_config(j);
    cfg.output_dir = scratch("smoke");
    const auto cells = run_experiment(cfg);
    REQUIRE(cells.size() == 1);
    const auto dir = cells[0].dir;
    for (const char* f : {"epochs.jsonl", "summary.json", "curves.csv", "checkpoint.bin", "checkpoint.json"})
        CHECK_MESSAGE(std::filesystem::exists(dir / f), f);
    CHECK(std::filesystem::exists(dir / "selection_epoch_000.csv"));
    const auto lines = stripped_jsonl(dir / "epochs.jsonl");
    CHECK(lines.size() == 2);
    const auto first = json::parse(lines[0]);
    CHECK(first["config_hash"] == config_hash(cfg));
    CHECK(first["spread"] == 1.0);
    for (const char* key : {"sel_precision", "sel_recall", "sel_f1"}) {
        CHECK(first[key].get<double>() >= 0.0);
        CHECK(first[key].get<double>() <= 1.0);
    }
    const auto summary = json::parse(std::ifstream(dir / "summary.json"));
    CHECK(summary.contains("last10_mean_acc"));
    CHECK(summary["seed"] == 3);
}

TEST_CASE("identical config and seed give identical records") {
    auto cfg = parse_config(tiny_config());
    cfg.strategies = {Strategy::jump_update, Strategy::cross_update};
    cfg.output_dir = scratch("replay_a");
    const auto a = run_experiment(cfg);
    cfg.output_dir = scratch("replay_b");
    const auto b = run_experiment(cfg);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(stripped_jsonl(a[i].dir / "epochs.jsonl") == stripped_jsonl(b[i].dir / "epochs.jsonl"));
        CHECK(slurp(a[i].dir / "curves.csv") == slurp(b[i].dir / "curves.csv"));
        CHECK(slurp(a[i].dir / "checkpoint.bin") == slurp(b[i].dir / "checkpoint.bin"));
    }
}

TEST_CASE("compare table shapes") {
    auto j = tiny_config();
    j["schedule"]["strategies"] = {"standard", "jump_update"};
    j["seeds"] = {1, 2, 3};
    j["save_checkpoints"] = false;
    auto cfg = parse_config(j);
    cfg.output_dir = scratch("compare");
    const auto rows = compare_strategies(cfg);
    REQUIRE(rows.size() == 2);
    for (const auto& r : rows) {
        CHECK(r.seeds == 3);
        CHECK(r.std_last10 >= 0.0);
    }
    std::ifstream csv(cfg.output_dir / "comparison.csv");
    std::string header;
    std::getline(csv, header);
    CHECK(header.find("std_last10") != std::string::npos);
    CHECK(std::filesystem::exists(cfg.output_dir / "iou_comparison.csv"));

    j = tiny_config();
    j["schedule"] = {{"strategies", {"self_update"}}, {"effect_rates", {0.3, 0.5, 0.6, 0.8, 1.0}}};
    j["save_checkpoints"] = false;
    j["train"]["epochs"] = 2;
    cfg = parse_config(j);
    cfg.output_dir = scratch("sweep");
    CHECK(compare_strategies(cfg).size() == 5);

    j["schedule"]["strategies"] = {"standard", "self_update"};
    j["schedule"]["effect_rates"] = {0.3, 0.5, 1.0};
    cfg = parse_config(j);
    cfg.output_dir = scratch("sweep_standard");
    const auto mixed = compare_strategies(cfg);
    REQUIRE(mixed.size() == 4);
    CHECK(mixed[0].label == "standard");
    CHECK(mixed[1].label == "self_update_r0.3");

    j = tiny_config();
    cfg = parse_config(j);
    cfg.output_dir = scratch("single");
    CHECK_THROWS_AS(compare_strategies(cfg), Error);
}

TEST_CASE("jump update beats standard training at 50% noise") {
    auto cfg = parse_config(json::parse(R"({
        "version": 1,
        "noise": {"kind": "symmetric", "epsilon": 0.5},
        "schedule": {"strategies": ["standard", "jump_update"]},
        "seeds": [1],
        "save_checkpoints": false
    })"));
    cfg.output_dir = scratch("paired");
    const auto cells = run_experiment(cfg);
    REQUIRE(cells.size() == 2);
    CHECK(cells[0].strategy == Strategy::standard);
    CHECK(cells[1].summary.final_acc > cells[0].summary.final_acc);
}
