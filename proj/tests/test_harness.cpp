#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fcntl.h>
#include <unistd.h>

#include <filesystem>
#include <fstream>

#include "gqe/harness.hpp"
#include "gqe/qsci.hpp"

using namespace gqe;
using namespace gqe::harness;

namespace {

const std::string kH2Path = std::string(GQE_FIXTURE_DIR) + "/h2_sto3g.fcidump";

// Runs the CLI with stdout redirected to a file; returns (exit code, output).
std::pair<int, std::string> run_cli_captured(std::vector<std::string> args) {
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    const std::string path =
        (std::filesystem::temp_directory_path() / "gqe_cli_capture.txt").string();
    std::fflush(stdout);
    int saved = dup(1);
    int fd = open(path.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0600);
    dup2(fd, 1);
    close(fd);
    int code = run_cli(static_cast<int>(argv.size()), argv.data());
    std::fflush(stdout);
    std::cout.flush();
    dup2(saved, 1);
    close(saved);
    std::ifstream in(path);
    std::string out((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::filesystem::remove(path);
    return {code, out};
}

RunConfig h2_config() {
    RunConfig cfg;
    cfg.apply_defaults();
    cfg.fcidump = kH2Path;
    cfg.seq_len = 4;
    cfg.exact_sampling = true;
    return cfg;
}

}  // namespace

TEST_CASE("run config defaults match the reference settings") {
    RunConfig cfg;
    cfg.apply_defaults();
    CHECK(cfg.batch_size == 10);
    CHECK(cfg.n_shots == 100000);
    CHECK(cfg.iterations == 100);
    CHECK(cfg.learning_rate == doctest::Approx(5e-6));
    CHECK(cfg.weight_decay == doctest::Approx(0.01));
    CHECK(cfg.updates_per_batch == 30);
    CHECK(cfg.repetition_penalty == doctest::Approx(1.2));
    CHECK(cfg.d_max == 2000);
    CHECK(cfg.d_latent == 12);
    CHECK(cfg.angle_grid.size() == 8);
}

TEST_CASE("validation lists every violated field") {
    RunConfig cfg;
    cfg.apply_defaults();
    cfg.fcidump = "x";
    cfg.hubbard = "y";       // both set
    cfg.batch_size = 0;      // bad
    cfg.clip_epsilon = 2.0;  // bad
    auto violations = cfg.validate();
    CHECK(violations.size() == 3);
}

TEST_CASE("load_system wires the H2 fixture end to end") {
    auto system = load_system(h2_config());
    CHECK(system.sector.n_electrons == 2);
    CHECK(system.vocab.size() == 3 * 8);
    CHECK(system.casci_energy == doctest::Approx(-1.137283834489).epsilon(1e-9));
    CHECK(system.hf_energy == doctest::Approx(-1.116759307396).epsilon(1e-9));
    CHECK(system.reference.bits == 0b0011);
}

TEST_CASE("load_system accepts a hubbard spec with overrides") {
    RunConfig cfg;
    cfg.apply_defaults();
    cfg.hubbard = "2,1.0,4.0";
    auto system = load_system(cfg);
    CHECK(system.casci_energy == doctest::Approx(2.0 - 2.0 * std::sqrt(2.0)).epsilon(1e-9));
}

TEST_CASE("sweep_dmax is non-increasing and exact at full rank") {
    auto system = load_system(h2_config());
    std::vector<int> tokens = {20, 2};  // partial-angle double + single
    auto rows = sweep_dmax(system, tokens, {1, 2, 3, 4, 8}, 100000, true, 7);
    REQUIRE(rows.size() == 5);
    for (std::size_t i = 1; i < rows.size(); ++i)
        CHECK(rows[i].abs_error <= rows[i - 1].abs_error + 1e-12);
    CHECK(rows.back().dimension <= 4);
}

TEST_CASE("sweep_shots exact row lower-bounds the finite rows") {
    auto system = load_system(h2_config());
    std::vector<int> tokens = {20, 2};
    auto rows = sweep_shots(system, tokens, {100, 100000}, 3, 2000, true, 3);
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].shots == 0.0);
    for (std::size_t i = 1; i < rows.size(); ++i)
        CHECK(rows[0].mean_abs_error <=
              rows[i].mean_abs_error + 2 * rows[i].std_abs_error + 1e-12);
}

TEST_CASE("paper-scale parameter ratio stays below 0.40") {
    auto gpt2 = analytic_parameter_report(paper_scale_config(FfnVariant::Gpt2));
    auto hqkan = analytic_parameter_report(paper_scale_config(FfnVariant::Hqkan));
    const double ratio = static_cast<double>(hqkan.total) / gpt2.total;
    CHECK(ratio <= 0.40);
    CHECK(gpt2.total > 50000000);  // dense variant lands near the published scale
    CHECK(gpt2.total < 65000000);
}

TEST_CASE("cli: casci subcommand prints the closed-form dimer energy") {
    auto [code, out] = run_cli_captured(
        {"gqe", "casci", "--hubbard", "2,1.0,4.0", "--electrons", "2", "--ms2", "0"});
    REQUIRE(code == 0);
    CHECK(std::stod(out) == doctest::Approx(2.0 - 2.0 * std::sqrt(2.0)).epsilon(1e-9));
}

TEST_CASE("cli: unknown subcommand exits with a config error") {
    std::vector<std::string> args = {"gqe", "frobnicate"};
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    CHECK(run_cli(static_cast<int>(argv.size()), argv.data()) == 2);
}

TEST_CASE("cli: train writes metrics, summary, checkpoint, resolved config") {
    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() / "gqe_train_test";
    fs::remove_all(dir);

    std::vector<std::string> args = {
        "gqe",          "train",
        "--fcidump",    kH2Path,
        "--exact",      "--seq-len", "3",
        "--iterations", "2",
        "--updates",    "2",
        "--batch",      "3",
        "--d-model",    "16",
        "--heads",      "2",
        "--layers",     "1",
        "--d-latent",   "4",
        "--seeds",      "1",
        "--out",        dir.string()};
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    REQUIRE(run_cli(static_cast<int>(argv.size()), argv.data()) == 0);
    CHECK(fs::exists(dir / "resolved.toml"));
    CHECK(fs::exists(dir / "summary.json"));
    CHECK(fs::exists(dir / "seed_0" / "metrics.jsonl"));
    CHECK(fs::exists(dir / "seed_0" / "checkpoint.bin"));

    std::ifstream metrics(dir / "seed_0" / "metrics.jsonl");
    std::string line;
    int lines = 0;
    while (std::getline(metrics, line)) {
        ++lines;
        CHECK(line.find("\"iter\"") != std::string::npos);
        CHECK(line.find("\"best_energy\"") != std::string::npos);
        CHECK(line.find("\"batch_min\"") != std::string::npos);
        CHECK(line.find("\"batch_mean\"") != std::string::npos);
        CHECK(line.find("\"loss\"") != std::string::npos);
        CHECK(line.find("\"grad_norm\"") != std::string::npos);
        CHECK(line.find("\"seconds\"") != std::string::npos);
    }
    CHECK(lines == 2);

    // rerun without --force refuses to overwrite
    CHECK(run_cli(static_cast<int>(argv.size()), argv.data()) == 2);
    args.push_back("--force");
    argv.clear();
    for (auto& a : args) argv.push_back(a.data());
    CHECK(run_cli(static_cast<int>(argv.size()), argv.data()) == 0);
    fs::remove_all(dir);
}

TEST_CASE("cli: resolved config re-parses to an identical run plan") {
    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() / "gqe_roundtrip_test";
    fs::path dir2 = fs::temp_directory_path() / "gqe_roundtrip_test2";
    fs::remove_all(dir);
    fs::remove_all(dir2);

    std::vector<std::string> args = {
        "gqe",       "train",      "--fcidump", kH2Path,    "--exact",
        "--seq-len", "3",          "--iterations", "1",     "--updates", "1",
        "--batch",   "2",          "--d-model", "16",       "--heads",   "2",
        "--layers",  "1",          "--d-latent", "4",       "--seeds",   "1",
        "--lr",      "0.000007",   "--out",     dir.string()};
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    REQUIRE(run_cli(static_cast<int>(argv.size()), argv.data()) == 0);

    // re-run purely from the resolved config; only the output dir changes
    std::vector<std::string> args2 = {"gqe", "train", "--config",
                                      (dir / "resolved.toml").string(), "--out",
                                      dir2.string()};
    std::vector<char*> argv2;
    for (auto& a : args2) argv2.push_back(a.data());
    REQUIRE(run_cli(static_cast<int>(argv2.size()), argv2.data()) == 0);

    // identical run plan -> identical metrics stream (seconds aside)
    auto strip_seconds = [](const fs::path& p) {
        std::ifstream in(p);
        std::string all, line;
        while (std::getline(in, line)) {
            auto pos = line.find("\"seconds\"");
            all += line.substr(0, pos) + "\n";
        }
        return all;
    };
    CHECK(strip_seconds(dir / "seed_0" / "metrics.jsonl") ==
          strip_seconds(dir2 / "seed_0" / "metrics.jsonl"));
    fs::remove_all(dir);
    fs::remove_all(dir2);
}

TEST_CASE("cli: report-gates emits the four-field JSON") {
    auto [code, out] = run_cli_captured(
        {"gqe", "report-gates", "--fcidump", kH2Path, "--tokens", "0,9,17"});
    REQUIRE(code == 0);
    for (const char* key : {"two_qubit", "single_rotation", "clifford", "total"})
        CHECK(out.find(key) != std::string::npos);
}

TEST_CASE("config text round-trips to the identical run plan") {
    RunConfig cfg;
    cfg.apply_defaults();
    cfg.fcidump = kH2Path;
    cfg.learning_rate = 7.25e-6;
    cfg.angle_grid = {0.1, -0.2, 0.3};
    cfg.exact_sampling = true;
    cfg.symmetry_completion = false;
    std::string text = cfg.to_toml();
    RunConfig again;
    again.apply_defaults();
    again.apply_toml_text(text, "test");
    CHECK(again.to_toml() == text);
    CHECK(again.learning_rate == cfg.learning_rate);
    CHECK(again.angle_grid == cfg.angle_grid);
    CHECK(again.symmetry_completion == false);

    RunConfig bad;
    bad.apply_defaults();
    CHECK_THROWS_AS(bad.apply_toml_text("no_such_key = 1\n", "test"),
                    std::invalid_argument);
}
