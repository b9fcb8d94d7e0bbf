#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <sys/wait.h>

namespace {

const std::filesystem::path kCli = JUMPLAB_CLI_PATH;

std::filesystem::path scratch(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / "jumplab_test_cli" / name;
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

struct Result {
    int code = -1;
    std::string err;
};

Result run(const std::string& args, const std::filesystem::path& dir) {
    const auto err_file = dir / "stderr.txt";
    const std::string cmd = kCli.string() + " " + args + " > " + (dir / "stdout.txt").string() + " 2> " + err_file.string();
    const int status = std::system(cmd.c_str());
    Result r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    std::ifstream in(err_file);
    std::getline(in, r.err);
    return r;
}

void write(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p);
    out << text;
}

}  // namespace

TEST_CASE("codebook subcommand") {
    const auto dir = scratch("codebook");
    CHECK(run("codebook --classes 3 --bits 4 --out " + (dir / "cb.csv").string(), dir).code == 0);
    std::ifstream in(dir / "cb.csv");
    std::string l0, l1, l2, extra;
    std::getline(in, l0);
    std::getline(in, l1);
    std::getline(in, l2);
    CHECK(l0 == "1,1,1,1");
    CHECK(l1 == "1,-1,1,-1");
    CHECK(l2 == "1,1,-1,-1");
    CHECK_FALSE(static_cast<bool>(std::getline(in, extra)));

    const auto over = run("codebook --classes 9 --bits 8 --out " + (dir / "x.csv").string(), dir);
    CHECK(over.code == 2);
    CHECK(over.err.rfind("error[capacity]:", 0) == 0);
}

TEST_CASE("gen-data, inject and train") {
    const auto dir = scratch("pipeline");
    REQUIRE(run("gen-data --classes 3 --dim 4 --per-class 20 --seed 2 --out-train " + (dir / "train.csv").string() +
                    " --out-test " + (dir / "test.csv").string(),
                dir).code == 0);
    CHECK(std::filesystem::exists(dir / "train.csv"));
    CHECK(std::filesystem::exists(dir / "test.csv"));
    REQUIRE(run("inject --in " + (dir / "train.csv").string() + " --classes 3 --kind pairflip --epsilon 1.0 --seed 1 --out " +
                    (dir / "noisy.csv").string(),
                dir)
                .code == 0);
    std::ifstream in(dir / "noisy.csv");
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
        const auto a = line.rfind(',');
        const auto b = line.rfind(',', a - 1);
        const int noisy = std::stoi(line.substr(a + 1));
        const int clean = std::stoi(line.substr(b + 1, a - b - 1));
        REQUIRE(noisy == (clean + 1) % 3);
    }

    write(dir / "cfg.json", R"({"version": 1, "dataset": {"source": "csv", "classes": 3, "train_csv": ")" +
                                (dir / "noisy.csv").string() + R"(", "test_csv": ")" + (dir / "test.csv").string() +
                                R"("}, "train": {"epochs": 2, "warmup_epochs": 0, "batch_size": 16, "trunk_widths": [8]}, "seeds": [1]})");
    const auto out = dir / "runs";
    REQUIRE(run("train --config " + (dir / "cfg.json").string() + " --out-dir " + out.string(), dir).code == 0);
    const auto cell = out / "jump_update" / "seed_1";
    CHECK(std::filesystem::exists(cell / "epochs.jsonl"));
    CHECK(run("report --run-dir " + cell.string(), dir).code == 0);
}

TEST_CASE("exit codes") {
    const auto dir = scratch("codes");
    write(dir / "bad_key.json", R"({"version": 1, "train": {"lrr": 0.1}})");
    auto r = run("train --config " + (dir / "bad_key.json").string(), dir);
    CHECK(r.code == 2);
    CHECK(r.err.rfind("error[config]:", 0) == 0);
    CHECK(r.err.find("train.lrr") != std::string::npos);

    r = run("train --config " + (dir / "missing.json").string(), dir);
    CHECK(r.code == 4);
    CHECK(r.err.rfind("error[io]:", 0) == 0);

    write(dir / "bad.csv", "f0,f1,label_true,label_noisy\n0.1,0.2,7,7\n");
    r = run("inject --in " + (dir / "bad.csv").string() + " --classes 3 --epsilon 0.2 --out " + (dir / "o.csv").string(), dir);
    CHECK(r.code == 4);
    CHECK(r.err.rfind("error[parse]:", 0) == 0);

    // Features near the top of the double range overflow the first layer.
    std::string rows = "f0,f1,label_true,label_noisy\n";
    for (int i = 0; i < 8; ++i) rows += "1e308,-1e308," + std::to_string(i % 2) + "," + std::to_string(i % 2) + "\n";
    write(dir / "huge.csv", rows);
    write(dir / "overflow.json", R"({"version": 1, "dataset": {"source": "csv", "classes": 2, "train_csv": ")" +
                                     (dir / "huge.csv").string() + R"(", "test_csv": ")" + (dir / "huge.csv").string() +
                                     R"("}, "train": {"epochs": 2, "warmup_epochs": 0, "batch_size": 4, "trunk_widths": [8]},
        "schedule": {"strategies": ["standard"]}, "save_checkpoints": false})");
    r = run("train --config " + (dir / "overflow.json").string() + " --out-dir " + (dir / "runs").string(), dir);
    CHECK(r.code == 3);
    CHECK(r.err.rfind("error[numeric]: epoch 0 iteration 0:", 0) == 0);

    const auto sub = scratch("codes_usage");
    CHECK(run("no-such-command", sub).code != 0);
}
