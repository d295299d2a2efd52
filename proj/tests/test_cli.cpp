// Drives the installed CLI binary end to end over its subcommands. The binary
// path comes in via TRAJKIT_CLI_PATH from the build.

#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

namespace fs = std::filesystem;

namespace {

const std::string cli = TRAJKIT_CLI_PATH;

int run(const std::string& args) {
    const std::string cmd = cli + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

fs::path workdir() {
    static const fs::path dir = [] {
        const auto d = fs::temp_directory_path() / "trajkit_cli_test";
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

}  // namespace

TEST_CASE("cli: stage-by-stage workflow", "[cli]") {
    const auto dir = workdir();
    const auto d = [&](const char* name) { return (dir / name).string(); };

    REQUIRE(run("synth --out-dir " + d("corpus") + " --per-class 16 --seed 3") == 0);
    REQUIRE(fs::exists(dir / "corpus" / "manifest.txt"));

    REQUIRE(run("split --manifest " + d("corpus") + "/manifest.txt --out " + d("corpus") +
                "/manifest_split.txt --seed 3") == 0);

    REQUIRE(run("train-backbone --manifest " + d("corpus") + "/manifest_split.txt --epochs 12 --seed 3 --out " +
                d("model.tkbb")) == 0);
    REQUIRE(fs::exists(dir / "model.tkbb"));

    REQUIRE(run("score --backbone " + d("model.tkbb") + " --manifest " + d("corpus") +
                "/manifest_split.txt --out " + d("scores.csv")) == 0);

    REQUIRE(run("make-labels --scores " + d("scores.csv") + " --method gmm --out " + d("labels.csv")) == 0);
    REQUIRE(fs::exists(dir / "labels.csv"));

    REQUIRE(run("augment --method shift --manifest " + d("corpus") + "/manifest_split.txt --labels " +
                d("labels.csv") + " --seed 3 --out-dir " + d("aug")) == 0);
    REQUIRE(fs::exists(dir / "aug" / "manifest_aug.txt"));

    REQUIRE(run("train-clf --variant mped-c --arch a1 --fusion late --backbone " + d("model.tkbb") +
                " --manifest " + d("aug") + "/manifest_aug.txt --labels " + d("aug") +
                "/labels_aug.csv --folds 2 --seed 3 --epochs 4 --out-dir " + d("clf")) == 0);
    REQUIRE(fs::exists(dir / "clf" / "preds" / "preds_mped-c_a1_late_fold0.csv"));

    REQUIRE(run("evaluate --pred " + d("clf") + "/preds/preds_mped-c_a1_late_fold0.csv --out " +
                d("eval")) == 0);
    REQUIRE(fs::exists(dir / "eval" / "metrics.json"));
    REQUIRE(fs::exists(dir / "eval" / "confusion.svg"));
}

TEST_CASE("cli: full run, report regeneration and compare", "[cli]") {
    const auto dir = workdir();
    const auto cfg_path = dir / "config.json";
    {
        std::ofstream cfg(cfg_path);
        cfg << R"({
  "out_dir": ")" << (dir / "run").string() << R"(",
  "seed": 7,
  "synthetic": {"per_class": 14},
  "backbone": {"epochs": 10},
  "classifiers": {
    "grid": [
      {"variant": "mped-c", "arch": "a1", "fusion": "late"},
      {"variant": "mped-c", "arch": "a3", "fusion": "early-agg"}
    ],
    "train": {"max_epochs": 5, "folds": 3}
  }
})";
    }
    REQUIRE(run("run --config " + cfg_path.string()) == 0);
    REQUIRE(fs::exists(dir / "run" / "run_record.json"));
    REQUIRE(fs::exists(dir / "run" / "report" / "metrics_table.txt"));
    REQUIRE(fs::exists(dir / "run" / "report" / "comparisons.txt"));

    REQUIRE(run("report --run " + (dir / "run" / "run_record.json").string() + " --out " +
                (dir / "report2").string()) == 0);
    REQUIRE(fs::exists(dir / "report2" / "metrics_table.csv"));

    REQUIRE(run("compare --runs " + (dir / "run" / "run_record.json").string() +
                " --model-a mped-c_a1_late --model-b mped-c_a3_early-agg") == 0);

    REQUIRE(run("reference") == 0);
}

TEST_CASE("cli: validation errors exit with code 1", "[cli]") {
    const auto dir = workdir();
    CHECK(run("split --manifest " + (dir / "nonexistent.txt").string() + " --out " + (dir / "x.txt").string()) ==
          1);
    CHECK(run("make-labels --scores " + (dir / "nope.csv").string() + " --out " + (dir / "y.csv").string()) == 1);
    CHECK(run("evaluate --pred " + (dir / "nope.csv").string() + " --out " + (dir / "z").string()) == 1);
}
