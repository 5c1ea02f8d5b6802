#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "doctest.h"
#include "eegdiff/datagen.hpp"
#include "eegdiff/harness.hpp"
#include "eegdiff/error.hpp"

using namespace eegdiff;

namespace {

EfdmDataset band_dataset(std::uint64_t seed, int recordings_per_class, double noise = 0.25) {
    auto spec = SynthSpec::desk_default(seed);
    spec.noise_sigma = noise;
    EfdmDataset ds;
    for (const auto& cls : spec.classes) ds.intern_label(cls.label);
    for (int cls = 0; cls < 2; ++cls) {
        for (int inst = 0; inst < recordings_per_class; ++inst) {
            auto rec = generate(spec, cls, static_cast<std::uint64_t>(inst));
            auto maps = build_efdms(stft(rec, 64, 64), {100.0, 32},
                                    spec.classes[static_cast<std::size_t>(cls)].label);
            for (auto& e : maps) ds.items.push_back(std::move(e));
        }
    }
    return ds;
}

ExperimentPlan tiny_plan(std::uint64_t seed) {
    ExperimentPlan plan;
    plan.n_runs = 2;
    plan.epochs = 2;
    plan.train_per_class = 32;
    plan.test_per_class = 16;
    plan.synth_per_class = 16;
    plan.base_seed = seed;
    plan.classifier = ClassifierConfig::desk(2, 32, 32);
    return plan;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("confidence_interval: constant samples have zero width") {
    const auto [mean, half] = confidence_interval({1.0, 1.0, 1.0, 1.0});
    CHECK(mean == doctest::Approx(1.0));
    CHECK(half == doctest::Approx(0.0).scale(1.0));
}

TEST_CASE("confidence_interval: two-point closed form uses t=12.706") {
    const auto [mean, half] = confidence_interval({0.0, 1.0});
    CHECK(mean == doctest::Approx(0.5));
    // s = 0.70711, so half = 12.706 * 0.70711 / 1.41421 = 6.3531...
    CHECK(half == doctest::Approx(6.3531).epsilon(1e-4));
}

TEST_CASE("confidence_interval: matches frozen t-table quantiles") {
    // Directly check half-width / (s/sqrt(n)) against published t values.
    auto t_of = [](int n) {
        std::vector<double> v(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = static_cast<double>(i);
        const auto [mean, half] = confidence_interval(v);
        double ss = 0.0;
        for (double x : v) ss += (x - mean) * (x - mean);
        const double s = std::sqrt(ss / (n - 1));
        return half / (s / std::sqrt(static_cast<double>(n)));
    };
    CHECK(t_of(2) == doctest::Approx(12.7062047364).epsilon(1e-9));
    CHECK(t_of(5) == doctest::Approx(2.7764451052).epsilon(1e-9));
    CHECK(t_of(20) == doctest::Approx(2.0930240544).epsilon(1e-9));
}

TEST_CASE("confidence_interval: needs at least two values") {
    CHECK_THROWS_AS(confidence_interval({1.0}), ValidationError);
}

TEST_CASE("confidence_interval: Monte Carlo coverage near 95%") {
    Rng rng(201);
    int covered = 0;
    const int trials = 1000;
    for (int trial = 0; trial < trials; ++trial) {
        std::vector<double> sample(20);
        for (auto& v : sample) v = rng.gaussian();
        const auto [mean, half] = confidence_interval(sample);
        if (std::abs(mean) <= half) ++covered;
    }
    const double coverage = static_cast<double>(covered) / trials;
    CHECK(coverage >= 0.93);
    CHECK(coverage <= 0.97);
}

TEST_CASE("run_two_arm: smoke run produces well-formed report shapes") {
    auto real = band_dataset(301, 6);  // 96 maps per class
    auto plan = tiny_plan(301);
    auto report = run_two_arm(plan, real, band_dataset(302, 2));
    REQUIRE(report.arms.size() == 2);
    CHECK(report.arms[0].name == "original");
    CHECK(report.arms[1].name == "augmented");
    for (const auto& arm : report.arms) {
        CHECK(static_cast<int>(arm.runs.size()) == plan.n_runs);
        CHECK(static_cast<int>(arm.mean_val_accuracy.size()) == plan.epochs);
        CHECK(static_cast<int>(arm.ci_val_accuracy.size()) == plan.epochs);
        for (double h : arm.ci_val_accuracy) CHECK(h >= 0.0);
        for (int e = 0; e < plan.epochs; ++e) {
            double lo = 1e9, hi = -1e9;
            for (const auto& run : arm.runs) {
                lo = std::min(lo, run.val_accuracy[static_cast<std::size_t>(e)]);
                hi = std::max(hi, run.val_accuracy[static_cast<std::size_t>(e)]);
            }
            CHECK(arm.mean_val_accuracy[static_cast<std::size_t>(e)] >= lo - 1e-12);
            CHECK(arm.mean_val_accuracy[static_cast<std::size_t>(e)] <= hi + 1e-12);
        }
    }
}

TEST_CASE("run_two_arm: the original arm is identical with and without augmentation") {
    auto real = band_dataset(303, 6);
    auto plan = tiny_plan(303);

    auto report = run_two_arm(plan, real, band_dataset(304, 2));
    // Re-run arm A alone from the same plan.
    EfdmDataset train, test;
    train.class_names = real.class_names;
    test.class_names = real.class_names;
    std::map<std::string, int> count;
    for (const auto& item : real.items) {
        int& c = count[item.label];
        if (c < plan.train_per_class) {
            train.items.push_back(item);
        } else if (c < plan.train_per_class + plan.test_per_class) {
            test.items.push_back(item);
        }
        ++c;
    }
    auto solo = run_arm(plan, "original", train, test);
    REQUIRE(solo.runs.size() == report.arms[0].runs.size());
    for (std::size_t r = 0; r < solo.runs.size(); ++r) {
        CHECK(solo.runs[r].val_accuracy == report.arms[0].runs[r].val_accuracy);
        CHECK(solo.runs[r].train_loss == report.arms[0].runs[r].train_loss);
    }
}

TEST_CASE("run_arm: results do not depend on the thread count") {
    auto real = band_dataset(320, 4);  // 64 maps per class, alpha block then beta block
    auto plan = tiny_plan(320);
    EfdmDataset train = real, test = real;
    train.items.clear();
    test.items.clear();
    for (int cls = 0; cls < 2; ++cls) {
        const auto base = real.items.begin() + cls * 64;
        train.items.insert(train.items.end(), base, base + 32);
        test.items.insert(test.items.end(), base + 32, base + 48);
    }

    auto serial = run_arm(plan, "arm", train, test);
    plan.threads = 2;
    auto threaded = run_arm(plan, "arm", train, test);
    REQUIRE(serial.runs.size() == threaded.runs.size());
    for (std::size_t r = 0; r < serial.runs.size(); ++r) {
        CHECK(serial.runs[r].val_accuracy == threaded.runs[r].val_accuracy);
        CHECK(serial.runs[r].train_loss == threaded.runs[r].train_loss);
    }
}

TEST_CASE("run_two_arm: train/test leakage is rejected with fingerprints") {
    auto real = band_dataset(305, 4);
    auto plan = tiny_plan(305);
    // Force a leak: make the test region contain a copy of a training item.
    EfdmDataset leaky = real;
    // items are interleaved per class in generation order; find the first
    // "alpha" item and copy it into the test region of the same class.
    int seen = 0;
    std::size_t first_alpha = 0, target = 0;
    for (std::size_t i = 0; i < leaky.items.size(); ++i) {
        if (leaky.items[i].label == "alpha") {
            if (seen == 0) first_alpha = i;
            ++seen;
            if (seen == plan.train_per_class + 3) {
                target = i;
                break;
            }
        }
    }
    leaky.items[target].pixels = leaky.items[first_alpha].pixels;
    CHECK_THROWS_WITH_AS(run_two_arm(plan, leaky, band_dataset(306, 2)),
                         doctest::Contains("fingerprint"), ValidationError);
}

TEST_CASE("run_two_arm: insufficient data is a validation error") {
    auto real = band_dataset(307, 1);  // 16 maps per class
    auto plan = tiny_plan(307);        // wants 48 per class
    CHECK_THROWS_AS(run_two_arm(plan, real, real), ValidationError);
}

TEST_CASE("emit_report: file row counts and deterministic output") {
    auto real = band_dataset(308, 6);
    auto plan = tiny_plan(308);
    auto report = run_two_arm(plan, real, band_dataset(309, 2));

    const auto dir = std::filesystem::temp_directory_path() / "eegdiff_report_test";
    std::filesystem::remove_all(dir);
    emit_report(report, dir);
    for (const char* name : {"curves.csv", "summary.csv", "reference.csv", "fig_accuracy.svg",
                             "fig_loss.svg", "fig_comparison.svg"}) {
        CHECK(std::filesystem::exists(dir / name));
    }

    std::ifstream summary(dir / "summary.csv");
    std::string line;
    int rows = 0;
    std::getline(summary, line);
    CHECK(line == "arm,max_average_accuracy");
    while (std::getline(summary, line)) {
        if (!line.empty()) ++rows;
    }
    CHECK(rows == static_cast<int>(report.arms.size()));

    // Reference rows carry the published comparison values.
    std::ifstream ref(dir / "reference.csv");
    std::ostringstream ref_text;
    ref_text << ref.rdbuf();
    CHECK(ref_text.str().find("91.434") != std::string::npos);
    CHECK(ref_text.str().find("92.634") != std::string::npos);
    CHECK(ref_text.str().find("92.984") != std::string::npos);

    // Byte-identical re-emission.
    const auto dir2 = std::filesystem::temp_directory_path() / "eegdiff_report_test2";
    std::filesystem::remove_all(dir2);
    emit_report(report, dir2);
    CHECK(read_file(dir / "curves.csv") == read_file(dir2 / "curves.csv"));
    CHECK(read_file(dir / "summary.csv") == read_file(dir2 / "summary.csv"));
    CHECK(read_file(dir / "fig_accuracy.svg") == read_file(dir2 / "fig_accuracy.svg"));
    std::filesystem::remove_all(dir);
    std::filesystem::remove_all(dir2);
}

TEST_CASE("emit_report: curves.csv reproduces summary.csv exactly") {
    auto real = band_dataset(310, 6);
    auto plan = tiny_plan(310);
    auto report = run_two_arm(plan, real, band_dataset(311, 2));
    const auto dir = std::filesystem::temp_directory_path() / "eegdiff_report_roundtrip";
    std::filesystem::remove_all(dir);
    emit_report(report, dir);

    // Reload the long-format table and recompute each arm's summary row.
    std::map<std::string, std::map<int, std::vector<double>>> val_acc;  // arm -> epoch -> values
    std::ifstream curves(dir / "curves.csv");
    std::string line;
    std::getline(curves, line);
    while (std::getline(curves, line)) {
        std::istringstream row(line);
        std::string arm, run, epoch, split, metric, value;
        std::getline(row, arm, ',');
        std::getline(row, run, ',');
        std::getline(row, epoch, ',');
        std::getline(row, split, ',');
        std::getline(row, metric, ',');
        std::getline(row, value, ',');
        if (split == "val" && metric == "accuracy") {
            val_acc[arm][std::stoi(epoch)].push_back(std::stod(value));
        }
    }
    std::map<std::string, double> recomputed;
    for (auto& [arm, epochs] : val_acc) {
        double best = -1.0;
        for (auto& [epoch, values] : epochs) {
            const double mean = std::accumulate(values.begin(), values.end(), 0.0) /
                                static_cast<double>(values.size());
            best = std::max(best, mean);
        }
        recomputed[arm] = best;
    }

    std::ifstream summary(dir / "summary.csv");
    std::getline(summary, line);
    while (std::getline(summary, line)) {
        if (line.empty()) continue;
        const auto comma = line.find(',');
        const std::string arm = line.substr(0, comma);
        const double value = std::stod(line.substr(comma + 1));
        CHECK(recomputed.at(arm) == doctest::Approx(value).epsilon(1e-15));
    }
    std::filesystem::remove_all(dir);
}

TEST_CASE("emit_report: zero runs are rejected before writing files") {
    ExperimentReport report;
    report.plan = tiny_plan(1);
    report.arms.push_back(ArmResult{});
    report.arms[0].name = "empty";
    const auto dir = std::filesystem::temp_directory_path() / "eegdiff_report_empty";
    std::filesystem::remove_all(dir);
    CHECK_THROWS_AS(emit_report(report, dir), ValidationError);
    CHECK_FALSE(std::filesystem::exists(dir / "curves.csv"));
}

TEST_CASE("reference baselines: published comparison rows") {
    const auto& rows = reference_baselines();
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].max_average_accuracy == doctest::Approx(91.434));
    CHECK(rows[1].max_average_accuracy == doctest::Approx(92.634));
    CHECK(rows[2].max_average_accuracy == doctest::Approx(92.984));
}
