#include "eegdiff/harness.hpp"

#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "eegdiff/diffusion.hpp"
#include "eegdiff/error.hpp"
#include "parallel.hpp"

namespace eegdiff {

std::pair<double, double> confidence_interval(const std::vector<double>& values) {
    const std::size_t n = values.size();
    if (n < 2) throw ValidationError("confidence interval needs at least 2 values");
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(n);
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));
    const boost::math::students_t dist(static_cast<double>(n - 1));
    const double t = boost::math::quantile(dist, 0.975);
    return {mean, t * sd / std::sqrt(static_cast<double>(n))};
}

std::vector<SyntheticEval> eval_on_synthetic(Classifier& classifier,
                                             const std::vector<CheckpointSet>& checkpoints,
                                             int n_samples_per_class, std::uint64_t seed, int threads) {
    if (checkpoints.empty()) throw ValidationError("no diffusion checkpoints given");
    if (n_samples_per_class < 1) throw ValidationError("n_samples_per_class must be >= 1");

    std::vector<SyntheticEval> curve;
    for (const auto& set : checkpoints) {
        EfdmDataset sampled;
        for (std::size_t c = 0; c < set.per_class.size(); ++c) {
            LoadedDenoiser den = load_denoiser(set.per_class[c]);
            const Rng rng = Rng(seed).fork(mix64(static_cast<std::uint64_t>(set.epoch)) ^
                                           mix64(static_cast<std::uint64_t>(c)));
            auto samples = p_sample_loop(den.model, n_samples_per_class, den.sched, rng, threads);
            const std::int64_t per = samples->numel() / n_samples_per_class;
            sampled.intern_label(den.label);
            for (int i = 0; i < n_samples_per_class; ++i) {
                std::vector<double> one(samples->data().begin() + i * per,
                                        samples->data().begin() + (i + 1) * per);
                Tensor x({3, den.model.config().image_size, den.model.config().image_size},
                         std::move(one), false);
                sampled.items.push_back(sample_to_efdm(x, den.label));
            }
        }
        curve.push_back({set.epoch, evaluate(classifier, sampled).accuracy});
    }
    return curve;
}

void ExperimentPlan::validate() const {
    if (n_runs < 2) throw ValidationError("plan needs n_runs >= 2 for confidence intervals");
    if (epochs < 1) throw ValidationError("plan needs epochs >= 1");
    if (train_per_class < 1 || test_per_class < 1 || synth_per_class < 0) {
        throw ValidationError("plan counts must be >= 1 (synthetic >= 0)");
    }
}

namespace {

void summarize(ArmResult& arm, int epochs) {
    for (int e = 0; e < epochs; ++e) {
        auto collect = [&](auto member) {
            std::vector<double> vals;
            vals.reserve(arm.runs.size());
            for (const auto& run : arm.runs) vals.push_back((run.*member)[static_cast<std::size_t>(e)]);
            return confidence_interval(vals);
        };
        const auto [va_m, va_h] = collect(&TrainRunRecord::val_accuracy);
        const auto [vl_m, vl_h] = collect(&TrainRunRecord::val_loss);
        const auto [ta_m, ta_h] = collect(&TrainRunRecord::train_accuracy);
        const auto [tl_m, tl_h] = collect(&TrainRunRecord::train_loss);
        arm.mean_val_accuracy.push_back(va_m);
        arm.ci_val_accuracy.push_back(va_h);
        arm.mean_val_loss.push_back(vl_m);
        arm.ci_val_loss.push_back(vl_h);
        arm.mean_train_accuracy.push_back(ta_m);
        arm.ci_train_accuracy.push_back(ta_h);
        arm.mean_train_loss.push_back(tl_m);
        arm.ci_train_loss.push_back(tl_h);
    }
    arm.max_average_accuracy =
        *std::max_element(arm.mean_val_accuracy.begin(), arm.mean_val_accuracy.end());
}

EfdmDataset take_per_class(const EfdmDataset& source, int per_class, int skip_per_class,
                           const std::string& what) {
    EfdmDataset out;
    out.class_names = source.class_names;
    std::map<std::string, int> taken, skipped;
    for (const auto& item : source.items) {
        if (skipped[item.label] < skip_per_class) {
            ++skipped[item.label];
            continue;
        }
        if (taken[item.label] < per_class) {
            ++taken[item.label];
            out.items.push_back(item);
        }
    }
    for (const auto& name : source.class_names) {
        if (taken[name] < per_class) {
            throw ValidationError(what + " needs " + std::to_string(per_class) + " items of class '" +
                                  name + "', found " + std::to_string(taken[name]));
        }
    }
    return out;
}

}  // namespace

ArmResult run_arm(const ExperimentPlan& plan, const std::string& name, const EfdmDataset& train,
                  const EfdmDataset& test) {
    ArmResult arm;
    arm.name = name;
    arm.runs.resize(static_cast<std::size_t>(plan.n_runs));
    parallel_for(plan.n_runs, plan.threads, [&](std::int64_t i) {
        const std::uint64_t seed = plan.base_seed + static_cast<std::uint64_t>(i);
        ClassifierConfig cfg = plan.classifier;
        cfg.seed = seed;
        Classifier model(cfg);
        arm.runs[static_cast<std::size_t>(i)] = train_classifier(model, train, test, plan.epochs, seed);
    });
    summarize(arm, plan.epochs);
    return arm;
}

ExperimentReport run_two_arm(const ExperimentPlan& plan, const EfdmDataset& real,
                             const EfdmDataset& synth) {
    plan.validate();
    EfdmDataset train_real = take_per_class(real, plan.train_per_class, 0, "training split");
    EfdmDataset test_real = take_per_class(real, plan.test_per_class, plan.train_per_class, "test split");

    EfdmDataset synth_used;
    synth_used.class_names = train_real.class_names;
    if (plan.synth_per_class > 0) {
        synth_used = take_per_class(synth, plan.synth_per_class, 0, "synthetic pool");
        if (synth_used.class_names != train_real.class_names) {
            throw ValidationError("synthetic dataset vocabulary differs from the real one");
        }
    }

    // Leakage gate: the held-out set may not intersect any training content.
    std::set<std::uint64_t> test_prints;
    for (const auto& item : test_real.items) test_prints.insert(efdm_fingerprint(item));
    std::vector<std::uint64_t> collisions;
    for (const auto& item : train_real.items) {
        if (test_prints.count(efdm_fingerprint(item))) collisions.push_back(efdm_fingerprint(item));
    }
    for (const auto& item : synth_used.items) {
        if (test_prints.count(efdm_fingerprint(item))) collisions.push_back(efdm_fingerprint(item));
    }
    if (!collisions.empty()) {
        std::ostringstream msg;
        msg << "test split shares content with training data; colliding fingerprints:";
        for (std::uint64_t f : collisions) {
            char buf[32];
            std::snprintf(buf, sizeof(buf), " %016llx", static_cast<unsigned long long>(f));
            msg << buf;
        }
        throw ValidationError(msg.str());
    }

    EfdmDataset augmented;
    augmented.class_names = train_real.class_names;
    augmented.items = train_real.items;
    augmented.items.insert(augmented.items.end(), synth_used.items.begin(), synth_used.items.end());

    ExperimentReport report;
    report.plan = plan;
    report.arms.push_back(run_arm(plan, "original", train_real, test_real));
    report.arms.push_back(run_arm(plan, "augmented", augmented, test_real));
    return report;
}

const std::vector<ReferenceRow>& reference_baselines() {
    static const std::vector<ReferenceRow> rows = {
        {"original-reference", 91.434},
        {"augmented-40-reference", 92.634},
        {"augmented-60-reference", 92.984},
    };
    return rows;
}

namespace {

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string fmt6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

/// Minimal deterministic SVG line plot with CI bands.
class SvgPlot {
public:
    SvgPlot(std::string title, int epochs) : title_(std::move(title)), epochs_(epochs) {}

    void add_series(const std::string& name, const std::vector<double>& mean,
                    const std::vector<double>& half_width, const std::string& color) {
        series_.push_back({name, mean, half_width, color});
        for (std::size_t i = 0; i < mean.size(); ++i) {
            lo_ = std::min(lo_, mean[i] - half_width[i]);
            hi_ = std::max(hi_, mean[i] + half_width[i]);
        }
    }

    void write(const std::filesystem::path& path) const {
        const double w = 640, h = 420, ml = 60, mr = 20, mt = 40, mb = 40;
        const double span = (hi_ > lo_) ? (hi_ - lo_) : 1.0;
        auto sx = [&](double e) {
            return ml + (w - ml - mr) * (epochs_ > 1 ? e / (epochs_ - 1) : 0.5);
        };
        auto sy = [&](double v) { return h - mb - (h - mt - mb) * (v - lo_) / span; };

        std::ofstream out(path);
        if (!out) throw IoError("cannot write figure " + path.string());
        out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
            << "\" viewBox=\"0 0 " << w << " " << h << "\">\n";
        out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
        out << "<text x=\"" << w / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
            << "font-size=\"16\">" << title_ << "</text>\n";
        // Axes.
        out << "<line x1=\"" << ml << "\" y1=\"" << h - mb << "\" x2=\"" << w - mr << "\" y2=\"" << h - mb
            << "\" stroke=\"black\"/>\n";
        out << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << h - mb
            << "\" stroke=\"black\"/>\n";
        out << "<text x=\"" << (ml + w - mr) / 2 << "\" y=\"" << h - 8
            << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">epoch</text>\n";
        for (int e = 0; e < epochs_; ++e) {
            out << "<text x=\"" << fmt6(sx(e)) << "\" y=\"" << h - mb + 16
                << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">" << e + 1
                << "</text>\n";
        }
        out << "<text x=\"14\" y=\"" << fmt6(sy(lo_)) << "\" font-family=\"sans-serif\" font-size=\"10\">"
            << fmt6(lo_) << "</text>\n";
        out << "<text x=\"14\" y=\"" << fmt6(sy(hi_)) << "\" font-family=\"sans-serif\" font-size=\"10\">"
            << fmt6(hi_) << "</text>\n";

        int legend_y = static_cast<int>(mt);
        for (const auto& s : series_) {
            // CI band polygon: upper edge forward, lower edge back.
            out << "<polygon fill=\"" << s.color << "\" fill-opacity=\"0.2\" stroke=\"none\" points=\"";
            for (std::size_t i = 0; i < s.mean.size(); ++i) {
                out << fmt6(sx(static_cast<double>(i))) << "," << fmt6(sy(s.mean[i] + s.half[i])) << " ";
            }
            for (std::size_t i = s.mean.size(); i-- > 0;) {
                out << fmt6(sx(static_cast<double>(i))) << "," << fmt6(sy(s.mean[i] - s.half[i])) << " ";
            }
            out << "\"/>\n";
            out << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"2\" points=\"";
            for (std::size_t i = 0; i < s.mean.size(); ++i) {
                out << fmt6(sx(static_cast<double>(i))) << "," << fmt6(sy(s.mean[i])) << " ";
            }
            out << "\"/>\n";
            out << "<text x=\"" << w - mr - 150 << "\" y=\"" << legend_y << "\" font-family=\"sans-serif\" "
                << "font-size=\"12\" fill=\"" << s.color << "\">" << s.name << "</text>\n";
            legend_y += 16;
        }
        out << "</svg>\n";
        if (!out) throw IoError("failed writing figure " + path.string());
    }

private:
    struct Series {
        std::string name;
        std::vector<double> mean;
        std::vector<double> half;
        std::string color;
    };
    std::string title_;
    int epochs_;
    std::vector<Series> series_;
    double lo_ = std::numeric_limits<double>::infinity();
    double hi_ = -std::numeric_limits<double>::infinity();
};

}  // namespace

void emit_report(const ExperimentReport& report, const std::filesystem::path& dir) {
    if (report.arms.empty()) throw ValidationError("report has no arms");
    for (const auto& arm : report.arms) {
        if (arm.runs.empty()) throw ValidationError("arm '" + arm.name + "' has no runs");
    }
    std::filesystem::create_directories(dir);

    {
        std::ofstream out(dir / "curves.csv");
        if (!out) throw IoError("cannot write " + (dir / "curves.csv").string());
        out << "arm,run,epoch,split,metric,value\n";
        for (const auto& arm : report.arms) {
            for (std::size_t r = 0; r < arm.runs.size(); ++r) {
                const auto& run = arm.runs[r];
                for (int e = 0; e < run.epochs; ++e) {
                    const auto idx = static_cast<std::size_t>(e);
                    out << arm.name << "," << r << "," << e << ",train,loss," << fmt(run.train_loss[idx]) << "\n";
                    out << arm.name << "," << r << "," << e << ",train,accuracy," << fmt(run.train_accuracy[idx]) << "\n";
                    out << arm.name << "," << r << "," << e << ",val,loss," << fmt(run.val_loss[idx]) << "\n";
                    out << arm.name << "," << r << "," << e << ",val,accuracy," << fmt(run.val_accuracy[idx]) << "\n";
                }
            }
        }
    }
    {
        std::ofstream out(dir / "summary.csv");
        if (!out) throw IoError("cannot write " + (dir / "summary.csv").string());
        out << "arm,max_average_accuracy\n";
        for (const auto& arm : report.arms) out << arm.name << "," << fmt(arm.max_average_accuracy) << "\n";
    }
    {
        std::ofstream out(dir / "reference.csv");
        if (!out) throw IoError("cannot write " + (dir / "reference.csv").string());
        out << "arm,max_average_accuracy\n";
        for (const auto& row : reference_baselines()) out << row.arm << "," << fmt6(row.max_average_accuracy) << "\n";
    }

    const int epochs = report.plan.epochs;
    const std::vector<std::string> colors = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd"};
    {
        SvgPlot plot("train and validation accuracy (mean, 95% CI)", epochs);
        int c = 0;
        for (const auto& arm : report.arms) {
            plot.add_series(arm.name + " val", arm.mean_val_accuracy, arm.ci_val_accuracy,
                            colors[static_cast<std::size_t>(c++ % 4)]);
            plot.add_series(arm.name + " train", arm.mean_train_accuracy, arm.ci_train_accuracy,
                            colors[static_cast<std::size_t>(c++ % 4)]);
        }
        plot.write(dir / "fig_accuracy.svg");
    }
    {
        SvgPlot plot("train and validation loss (mean, 95% CI)", epochs);
        int c = 0;
        for (const auto& arm : report.arms) {
            plot.add_series(arm.name + " val", arm.mean_val_loss, arm.ci_val_loss,
                            colors[static_cast<std::size_t>(c++ % 4)]);
            plot.add_series(arm.name + " train", arm.mean_train_loss, arm.ci_train_loss,
                            colors[static_cast<std::size_t>(c++ % 4)]);
        }
        plot.write(dir / "fig_loss.svg");
    }
    {
        SvgPlot plot("validation accuracy comparison (mean, 95% CI)", epochs);
        int c = 0;
        for (const auto& arm : report.arms) {
            plot.add_series(arm.name, arm.mean_val_accuracy, arm.ci_val_accuracy,
                            colors[static_cast<std::size_t>(c++ % 4)]);
        }
        plot.write(dir / "fig_comparison.svg");
    }
}

}  // namespace eegdiff
