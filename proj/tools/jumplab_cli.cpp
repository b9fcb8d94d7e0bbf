// jumplab: command-line entry point for the noisy-label selection lab.
//
//   jumplab codebook --classes C [--bits K] --out codebook.csv
//   jumplab gen-data --classes C --dim D --per-class N --spread S --seed X --out-train a.csv --out-test b.csv
//   jumplab inject   --in a.csv --classes C --kind symmetric --epsilon 0.4 --seed X --out noisy.csv
//   jumplab train    --config exp.json [--out-dir DIR] [--dump-selection]
//   jumplab compare  --config exp.json [--out-dir DIR]
//   jumplab report   --run-dir DIR
//
// Exit codes: 0 success, 2 config error, 3 numeric failure, 4 I/O error.
// Failures print one line "error[<kind>]: <detail>" on stderr.

#include <charconv>
#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "jumplab/codebook.hpp"
#include "jumplab/data.hpp"
#include "jumplab/experiment.hpp"
#include "jumplab/report.hpp"

namespace {

using namespace jumplab;

int exit_code(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::numeric: return 3;
        case ErrorKind::io:
        case ErrorKind::parse: return 4;
        default: return 2;
    }
}

std::map<std::size_t, std::size_t> parse_class_map(const std::string& text) {
    std::map<std::size_t, std::size_t> out;
    std::size_t start = 0;
    while (start < text.size()) {
        auto end = text.find(',', start);
        if (end == std::string::npos) end = text.size();
        const std::string item = text.substr(start, end - start);
        const auto colon = item.find(':');
        std::size_t from = 0, to = 0;
        const bool ok = colon != std::string::npos &&
                        std::from_chars(item.data(), item.data() + colon, from).ec == std::errc() &&
                        std::from_chars(item.data() + colon + 1, item.data() + item.size(), to).ec == std::errc();
        if (!ok) fail(ErrorKind::config, fmt::format("--class-map: bad entry '{}', expected from:to", item));
        out[from] = to;
        start = end + 1;
    }
    return out;
}

void print_summary(const RunSummary& s) {
    std::cout << to_json(s).dump() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"jumplab: sample selection under label noise"};
    app.require_subcommand(1);

    auto* codebook = app.add_subcommand("codebook", "write a Hadamard codebook as CSV");
    std::size_t cb_classes = 0, cb_bits = 0;
    std::string cb_out;
    codebook->add_option("--classes", cb_classes, "number of classes")->required();
    codebook->add_option("--bits", cb_bits, "code length K (power of two); default max(16, 2C) rounded up");
    codebook->add_option("--out", cb_out, "output CSV path")->required();

    auto* gen = app.add_subcommand("gen-data", "generate Gaussian blob train/test CSVs");
    std::size_t g_classes = 10, g_dim = 32, g_per_class = 300;
    double g_spread = 1.0;
    std::uint64_t g_seed = 1;
    std::string g_train, g_test;
    gen->add_option("--classes", g_classes);
    gen->add_option("--dim", g_dim);
    gen->add_option("--per-class", g_per_class);
    gen->add_option("--spread", g_spread);
    gen->add_option("--seed", g_seed);
    gen->add_option("--out-train", g_train)->required();
    gen->add_option("--out-test", g_test)->required();

    auto* inject = app.add_subcommand("inject", "inject label noise into a clean train CSV");
    std::string i_in, i_out, i_kind = "symmetric", i_map;
    std::size_t i_classes = 0;
    double i_eps = 0.0;
    std::uint64_t i_seed = 1, i_idn_seed = 1;
    inject->add_option("--in", i_in)->required();
    inject->add_option("--out", i_out)->required();
    inject->add_option("--classes", i_classes)->required();
    inject->add_option("--kind", i_kind, "symmetric | asymmetric | pairflip | instance");
    inject->add_option("--epsilon", i_eps)->required();
    inject->add_option("--seed", i_seed);
    inject->add_option("--class-map", i_map, "asymmetric mapping, e.g. 2:0,3:5,5:3");
    inject->add_option("--idn-seed", i_idn_seed, "seed for the instance-noise projection");

    auto* train = app.add_subcommand("train", "run every strategy x seed cell of a config");
    auto* compare = app.add_subcommand("compare", "run all cells and write the comparison table");
    std::string config_path, out_dir;
    bool dump_selection = false;
    for (auto* sub : {train, compare}) {
        sub->add_option("--config", config_path, "experiment JSON")->required();
        sub->add_option("--out-dir", out_dir, "override output_dir (JUMPLAB_OUTPUT_DIR also works)");
    }
    train->add_flag("--dump-selection", dump_selection, "write per-epoch selection CSVs");

    auto* report = app.add_subcommand("report", "rebuild summary.json and curves.csv from epochs.jsonl");
    std::string run_dir;
    report->add_option("--run-dir", run_dir)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error[usage]: " << e.what() << '\n';
        return 2;
    }

    try {
        if (*codebook) {
            const std::size_t bits = cb_bits ? cb_bits : default_code_bits(cb_classes);
            HadamardCodebook(bits, cb_classes).save_csv(cb_out);
        } else if (*gen) {
            const auto splits = gen_blobs(g_classes, g_dim, g_per_class, g_spread, g_seed);
            save_csv(splits.train, g_train);
            save_csv(splits.test, g_test);
        } else if (*inject) {
            const NoisyDataset clean = load_csv(i_in, i_classes, Split::train);
            NoiseSpec spec;
            spec.kind = parse_noise_kind(i_kind);
            spec.epsilon = i_eps;
            if (!i_map.empty()) spec.class_map = parse_class_map(i_map);
            if (spec.kind == NoiseKind::instance) {
                spec.idn_weights = random_idn_weights(clean.dim(), i_classes, i_idn_seed);
            }
            const NoisyDataset noisy = inject_noise(clean, spec, i_seed);
            save_csv(noisy, i_out);
            std::cerr << fmt::format("flipped {:.4f} of {} labels\n", noisy.noise_rate(), noisy.size());
        } else if (*train || *compare) {
            ExperimentConfig cfg = load_config(config_path);
            apply_environment(cfg);
            if (!out_dir.empty()) cfg.output_dir = out_dir;
            if (*train) {
                cfg.dump_selection = cfg.dump_selection || dump_selection;
                for (const auto& cell : run_experiment(cfg)) print_summary(cell.summary);
            } else {
                for (const auto& row : compare_strategies(cfg)) {
                    std::cout << fmt::format("{:<24} acc {:.4f} +- {:.4f}  seeds {}\n", row.label, row.mean_last10,
                                             row.std_last10, row.seeds);
                }
                std::cout << "wrote " << (cfg.output_dir / "comparison.csv").string() << '\n';
            }
        } else if (*report) {
            RunMeta meta;
            const std::filesystem::path dir = run_dir;
            const auto records = load_epochs_jsonl(dir / "epochs.jsonl", meta);
            print_summary(emit_report(records, meta, dir));
        }
    } catch (const Error& e) {
        std::cerr << "error[" << to_string(e.kind()) << "]: " << e.what() << '\n';
        return exit_code(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "error[internal]: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
