#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "eegdiff/efdm.hpp"

namespace fs = std::filesystem;

namespace {

struct RunResult {
    int exit_code = -1;
    std::string output;  // stdout + stderr
};

std::string cli_path() {
    const char* env = std::getenv("EEGDIFF_CLI");
    REQUIRE_MESSAGE(env != nullptr, "EEGDIFF_CLI must point at the CLI binary");
    return env;
}

RunResult run(const std::string& args) {
    const std::string command = cli_path() + " " + args + " 2>&1";
    std::array<char, 4096> buffer{};
    RunResult result;
    FILE* pipe = popen(command.c_str(), "r");
    REQUIRE(pipe != nullptr);
    while (std::fgets(buffer.data(), buffer.size(), pipe)) result.output += buffer.data();
    const int status = pclose(pipe);
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return result;
}

std::vector<std::uint8_t> read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("cli: --help for every subcommand lists its flags with defaults") {
    const struct {
        const char* name;
        std::vector<const char*> flags;
    } expectations[] = {
        {"gen-data", {"--out", "--n-per-class", "--channels", "--sample-rate", "--duration",
                      "--noise-sigma", "--sinusoids", "--class"}},
        {"build-efdm", {"--input", "--out", "--wsize", "--hop", "--cut-hz", "--image-size", "--window"}},
        {"train-diffusion", {"--data", "--out", "--label", "--image-size", "--diffusion-steps",
                             "--noise-schedule", "--lr", "--batch-size", "--num-channels",
                             "--num-res-blocks", "--epochs"}},
        {"sample", {"--ckpt", "--out", "--n", "--pgm-dir"}},
        {"train-classifier", {"--train", "--val", "--out", "--metrics", "--epochs", "--lr",
                              "--batch-size", "--config"}},
        {"eval", {"--ckpt", "--data", "--diffusion-ckpts", "--n-samples", "--out"}},
        {"experiment", {"--real", "--synth", "--out", "--runs", "--epochs", "--train-per-class",
                        "--test-per-class", "--synth-per-class", "--config"}},
        {"export-image", {"--data", "--index", "--out", "--rgb"}},
    };
    for (const auto& sub : expectations) {
        auto result = run(std::string(sub.name) + " --help");
        CHECK(result.exit_code == 0);
        for (const char* flag : sub.flags) {
            INFO(sub.name << " help should mention " << flag);
            CHECK(result.output.find(flag) != std::string::npos);
        }
    }
    // Defaults are printed for value flags.
    auto gen_help = run("gen-data --help");
    CHECK(gen_help.output.find("16") != std::string::npos);   // --n-per-class default
    CHECK(gen_help.output.find("250") != std::string::npos);  // --sample-rate default
}

TEST_CASE("cli: unknown flags are rejected with usage and exit 2") {
    auto result = run("gen-data --no-such-flag 1 --out /tmp/x");
    CHECK(result.exit_code == 2);
    CHECK(result.output.find("--no-such-flag") != std::string::npos);
}

TEST_CASE("cli: missing subcommand is a usage error") {
    auto result = run("");
    CHECK(result.exit_code == 2);
}

TEST_CASE("cli: gen-data is byte-identical across reruns with one seed") {
    const auto dir_a = fresh_dir("eegdiff_cli_gen_a");
    const auto dir_b = fresh_dir("eegdiff_cli_gen_b");
    auto a = run("--seed 42 gen-data --out " + dir_a.string() + " --n-per-class 2 --duration 1");
    auto b = run("--seed 42 gen-data --out " + dir_b.string() + " --n-per-class 2 --duration 1");
    CHECK(a.exit_code == 0);
    CHECK(b.exit_code == 0);
    for (const char* rel : {"alpha/rec_0000.eegr", "alpha/rec_0001.eegr", "beta/rec_0000.eegr"}) {
        CHECK(read_file(dir_a / rel) == read_file(dir_b / rel));
        CHECK(!read_file(dir_a / rel).empty());
    }
    auto c = run("--seed 43 gen-data --out " + dir_a.string() + " --n-per-class 2 --duration 1");
    CHECK(c.exit_code == 0);
    CHECK(read_file(dir_a / "alpha/rec_0000.eegr") != read_file(dir_b / "alpha/rec_0000.eegr"));
    fs::remove_all(dir_a);
    fs::remove_all(dir_b);
}

TEST_CASE("cli: gen-data then build-efdm produces a loadable dataset") {
    const auto dir = fresh_dir("eegdiff_cli_pipe");
    auto gen = run("--seed 7 gen-data --out " + (dir / "rec").string() + " --n-per-class 2 --duration 2");
    REQUIRE(gen.exit_code == 0);
    auto build = run("build-efdm --input " + (dir / "rec").string() + " --out " +
                     (dir / "maps.efdm").string() + " --wsize 64 --image-size 32");
    REQUIRE_MESSAGE(build.exit_code == 0, build.output);
    auto ds = eegdiff::load_dataset(dir / "maps.efdm");
    CHECK(ds.class_names == std::vector<std::string>{"alpha", "beta"});
    // 2 s at 250 Hz with wsize 64: 7 full frames + 1 padded tail, per recording.
    CHECK(ds.items.size() == 2 * 2 * 8);
    CHECK(ds.items.front().height == 32);

    // Identical rerun gives identical bytes.
    auto again = run("build-efdm --input " + (dir / "rec").string() + " --out " +
                     (dir / "maps2.efdm").string() + " --wsize 64 --image-size 32");
    REQUIRE(again.exit_code == 0);
    CHECK(read_file(dir / "maps.efdm") == read_file(dir / "maps2.efdm"));
    fs::remove_all(dir);
}

TEST_CASE("cli: eval on an empty dataset exits 1 with a validation error") {
    const auto dir = fresh_dir("eegdiff_cli_evalerr");
    // Build a tiny classifier checkpoint first.
    auto gen = run("--seed 9 gen-data --out " + (dir / "rec").string() + " --n-per-class 2 --duration 1");
    REQUIRE(gen.exit_code == 0);
    auto build = run("build-efdm --input " + (dir / "rec").string() + " --out " +
                     (dir / "maps.efdm").string() + " --wsize 64 --image-size 32");
    REQUIRE(build.exit_code == 0);
    auto train = run("--seed 9 train-classifier --train " + (dir / "maps.efdm").string() + " --val " +
                     (dir / "maps.efdm").string() + " --out " + (dir / "clf.ddpm").string() +
                     " --epochs 1");
    REQUIRE_MESSAGE(train.exit_code == 0, train.output);

    // Empty dataset: header with zero items.
    eegdiff::EfdmDataset empty;
    empty.class_names = {"alpha", "beta"};
    eegdiff::save_dataset(dir / "empty.efdm", empty);
    auto result = run("eval --ckpt " + (dir / "clf.ddpm").string() + " --data " +
                      (dir / "empty.efdm").string() + " --out " + (dir / "eval.csv").string());
    CHECK(result.exit_code == 1);
    CHECK(result.output.find("error: validation:") != std::string::npos);
    fs::remove_all(dir);
}

TEST_CASE("cli: the documented training flag spellings are accepted") {
    const auto dir = fresh_dir("eegdiff_cli_flags");
    auto gen = run("--seed 3 gen-data --out " + (dir / "rec").string() + " --n-per-class 1 --duration 1");
    REQUIRE(gen.exit_code == 0);
    auto build = run("build-efdm --input " + (dir / "rec").string() + " --out " +
                     (dir / "maps.efdm").string() + " --wsize 64 --image_size 32");
    REQUIRE(build.exit_code == 0);
    // snake_case spellings pass through unchanged (tiny sizes keep it quick).
    auto train = run("--seed 3 train-diffusion --data " + (dir / "maps.efdm").string() + " --out " +
                     (dir / "ckpt").string() +
                     " --label alpha --diffusion_steps 1000 --noise_schedule linear --lr 1e-4 "
                     "--batch_size 32 --image_size 32 --num_channels 8 --num_res_blocks 1 --epochs 1");
    REQUIRE_MESSAGE(train.exit_code == 0, train.output);
    CHECK(fs::exists(dir / "ckpt" / "alpha_epoch001.ddpm"));
    fs::remove_all(dir);
}

TEST_CASE("cli: export-image writes PGM and PPM") {
    const auto dir = fresh_dir("eegdiff_cli_export");
    auto gen = run("--seed 5 gen-data --out " + (dir / "rec").string() + " --n-per-class 1 --duration 1");
    REQUIRE(gen.exit_code == 0);
    auto build = run("build-efdm --input " + (dir / "rec").string() + " --out " +
                     (dir / "maps.efdm").string() + " --wsize 64 --image-size 32");
    REQUIRE(build.exit_code == 0);
    auto pgm = run("export-image --data " + (dir / "maps.efdm").string() + " --index 0 --out " +
                   (dir / "map.pgm").string());
    CHECK(pgm.exit_code == 0);
    auto ppm = run("export-image --data " + (dir / "maps.efdm").string() + " --index 1 --rgb --out " +
                   (dir / "map.ppm").string());
    CHECK(ppm.exit_code == 0);
    const auto g = read_file(dir / "map.pgm");
    const auto c = read_file(dir / "map.ppm");
    CHECK(std::string(g.begin(), g.begin() + 2) == "P5");
    CHECK(std::string(c.begin(), c.begin() + 2) == "P6");

    auto bad = run("export-image --data " + (dir / "maps.efdm").string() + " --index 9999 --out " +
                   (dir / "oops.pgm").string());
    CHECK(bad.exit_code == 1);
    CHECK(bad.output.find("error: validation:") != std::string::npos);
    fs::remove_all(dir);
}
