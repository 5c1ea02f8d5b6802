// eegdiff: synthesize EEG spectro-images with a denoising diffusion model
// and quantify their usefulness for classifier augmentation.
//
// Subcommands map 1:1 onto the library stages:
//   gen-data         write labeled synthetic recordings
//   build-efdm       recordings -> electrode-frequency map dataset
//   train-diffusion  train one denoiser per class label
//   sample           draw maps from a denoiser checkpoint
//   train-classifier train the conv classifier on a map dataset
//   eval             score a classifier on a dataset or on checkpoints
//   experiment       two-arm augmentation comparison with CI report
//   export-image     dump one map as PGM/PPM

#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "eegdiff/datagen.hpp"
#include "eegdiff/diffusion.hpp"
#include "eegdiff/efdm.hpp"
#include "eegdiff/error.hpp"
#include "eegdiff/harness.hpp"

namespace fs = std::filesystem;
using namespace eegdiff;

namespace {

struct GlobalFlags {
    std::uint64_t seed = 0;
    int threads = 1;
    bool verbose = false;
};

void log_config(const CLI::App* cmd) {
    std::ostringstream line;
    line << "[eegdiff] " << cmd->get_name() << " config:";
    for (const auto* opt : cmd->get_options()) {
        if (opt->get_name() == "--help") continue;
        line << " " << opt->get_name() << "=";
        const auto results = opt->results();
        if (results.empty()) {
            line << opt->get_default_str();
        } else {
            for (std::size_t i = 0; i < results.size(); ++i) line << (i ? ";" : "") << results[i];
        }
    }
    std::clog << line.str() << "\n";
}

/// Pad with zeros to a fixed width for stable lexicographic file order.
std::string zero_pad(int value, int width) {
    std::string s = std::to_string(value);
    while (static_cast<int>(s.size()) < width) s.insert(s.begin(), '0');
    return s;
}

/// FNV-1a; stable across platforms, unlike std::hash.
std::uint64_t label_hash(const std::string& label) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : label) {
        h ^= static_cast<std::uint8_t>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

EfdmDataset load_dataset_checked(const fs::path& path) {
    if (!fs::exists(path)) throw IoError("dataset file does not exist: " + path.string());
    return load_dataset(path);
}

std::vector<TensorPtr> class_images(const EfdmDataset& ds, const std::string& label) {
    std::vector<TensorPtr> images;
    for (const auto& item : ds.items) {
        if (item.label == label) images.push_back(to_float_tensor(item));
    }
    return images;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"EEG spectro-image synthesis and augmentation toolbox"};
    app.require_subcommand(1);
    GlobalFlags global;
    app.add_option("--seed", global.seed, "global RNG seed")->capture_default_str();
    app.add_option("--threads", global.threads, "max worker threads (1 = fully deterministic order)")
        ->capture_default_str();
    app.add_flag("-v,--verbose", global.verbose, "chatty progress on stderr");

    // ---- gen-data ----------------------------------------------------------
    auto* gen = app.add_subcommand("gen-data", "generate labeled synthetic recordings");
    struct {
        fs::path out;
        int n_per_class = 16;
        int channels = 8;
        double sample_rate = 250.0;
        double duration = 4.0;
        double noise_sigma = 0.05;
        int sinusoids = 3;
        bool one_over_f = false;
        std::vector<std::string> classes;  // label:center:width:amplitude
    } gen_args;
    gen->add_option("--out", gen_args.out, "output directory (one subdirectory per label)")->required();
    gen->add_option("--n-per-class,--n_per_class", gen_args.n_per_class, "recordings per class")
        ->capture_default_str();
    gen->add_option("--channels", gen_args.channels, "electrode count")->capture_default_str();
    gen->add_option("--sample-rate,--sample_rate", gen_args.sample_rate, "sampling rate in Hz")
        ->capture_default_str();
    gen->add_option("--duration", gen_args.duration, "recording length in seconds")->capture_default_str();
    gen->add_option("--noise-sigma,--noise_sigma", gen_args.noise_sigma, "white noise level")
        ->capture_default_str();
    gen->add_option("--sinusoids", gen_args.sinusoids, "tones per recording")->capture_default_str();
    gen->add_flag("--one-over-f,--one_over_f", gen_args.one_over_f, "add a 1/f noise tilt");
    gen->add_option("--class", gen_args.classes,
                    "class spec label:center_hz:width_hz:amplitude (repeatable; default "
                    "alpha:10:4:1 and beta:30:10:1)");

    // ---- build-efdm --------------------------------------------------------
    auto* build = app.add_subcommand("build-efdm", "convert recordings to an EFDM dataset");
    struct {
        fs::path input;
        fs::path out;
        int wsize = 0;  // 0 = sample_rate rounded
        int hop = 0;    // 0 = wsize
        double cut_hz = 100.0;
        int image_size = 128;
        double sample_rate = 250.0;  // for text inputs only
        std::string window = "hann";
    } build_args;
    build->add_option("--input", build_args.input, "directory of <label>/*.eegr|*.csv recordings")
        ->required();
    build->add_option("--out", build_args.out, "output .efdm dataset file")->required();
    build->add_option("--wsize", build_args.wsize, "STFT window size (0 = one second of samples)")
        ->capture_default_str();
    build->add_option("--hop", build_args.hop, "STFT hop (0 = wsize, non-overlapping)")->capture_default_str();
    build->add_option("--cut-hz,--cut_hz", build_args.cut_hz, "drop frequencies above this")
        ->capture_default_str();
    build->add_option("--image-size,--image_size", build_args.image_size, "EFDM side length")
        ->capture_default_str();
    build->add_option("--sample-rate,--sample_rate", build_args.sample_rate,
                      "sampling rate for delimited-text recordings")
        ->capture_default_str();
    build->add_option("--window", build_args.window, "analysis window: hann or rectangular")
        ->capture_default_str();

    // ---- train-diffusion ---------------------------------------------------
    auto* traind = app.add_subcommand("train-diffusion", "train one denoiser per class");
    struct {
        fs::path data;
        fs::path out;
        std::string label;  // empty = every class in the dataset
        int image_size = 32;
        int diffusion_steps = 200;
        std::string schedule = "linear";
        double lr = 1e-4;
        int batch_size = 16;
        int num_channels = 32;
        int num_res_blocks = 2;
        int epochs = 15;
        std::vector<int> ckpt_epochs;
    } td;
    traind->add_option("--data", td.data, "EFDM dataset file")->required();
    traind->add_option("--out", td.out, "output directory for checkpoints")->required();
    traind->add_option("--label", td.label, "train only this class label");
    traind->add_option("--image-size,--image_size", td.image_size, "input side length")->capture_default_str();
    traind->add_option("--diffusion-steps,--diffusion_steps", td.diffusion_steps, "T")->capture_default_str();
    traind->add_option("--noise-schedule,--noise_schedule", td.schedule, "only 'linear' is supported")
        ->capture_default_str();
    traind->add_option("--lr", td.lr, "Adam learning rate")->capture_default_str();
    traind->add_option("--batch-size,--batch_size", td.batch_size, "images per step")->capture_default_str();
    traind->add_option("--num-channels,--num_channels", td.num_channels, "denoiser width")
        ->capture_default_str();
    traind->add_option("--num-res-blocks,--num_res_blocks", td.num_res_blocks, "residual blocks")
        ->capture_default_str();
    traind->add_option("--epochs", td.epochs, "passes over the per-class training set")
        ->capture_default_str();
    traind->add_option("--ckpt-epochs,--ckpt_epochs", td.ckpt_epochs,
                       "extra epochs at which to snapshot checkpoints (final epoch always saved)");

    // ---- sample ------------------------------------------------------------
    auto* sample_cmd = app.add_subcommand("sample", "draw maps from a denoiser checkpoint");
    struct {
        std::vector<fs::path> ckpts;
        fs::path out;
        int n = 16;
        fs::path pgm_dir;
    } sa;
    sample_cmd->add_option("--ckpt", sa.ckpts, "denoiser checkpoint(s), one per class")->required();
    sample_cmd->add_option("--out", sa.out, "output .efdm dataset of samples")->required();
    sample_cmd->add_option("--n", sa.n, "samples per checkpoint")->capture_default_str();
    sample_cmd->add_option("--pgm-dir,--pgm_dir", sa.pgm_dir, "also dump each sample as PGM here");

    // ---- train-classifier --------------------------------------------------
    auto* trainc = app.add_subcommand("train-classifier", "train the conv classifier");
    struct {
        fs::path train;
        fs::path val;
        fs::path out;
        fs::path metrics;
        int epochs = 10;
        double lr = 0.0;  // 0 = config default
        int batch_size = 0;
        std::string config = "desk";
    } tc;
    trainc->add_option("--train", tc.train, "training EFDM dataset")->required();
    trainc->add_option("--val", tc.val, "validation EFDM dataset")->required();
    trainc->add_option("--out", tc.out, "output classifier checkpoint")->required();
    trainc->add_option("--metrics", tc.metrics, "per-epoch metrics CSV path");
    trainc->add_option("--epochs", tc.epochs, "training epochs")->capture_default_str();
    trainc->add_option("--lr", tc.lr, "learning rate (0 = config default)")->capture_default_str();
    trainc->add_option("--batch-size,--batch_size", tc.batch_size, "batch size (0 = config default)")
        ->capture_default_str();
    trainc->add_option("--config", tc.config, "architecture preset: desk or reference")
        ->capture_default_str();

    // ---- eval --------------------------------------------------------------
    auto* eval_cmd = app.add_subcommand("eval", "score a classifier");
    struct {
        fs::path ckpt;
        fs::path data;
        std::vector<std::string> diffusion_ckpts;  // epoch:path,path,...
        int n_samples = 16;
        fs::path out;
    } ev;
    eval_cmd->add_option("--ckpt", ev.ckpt, "classifier checkpoint")->required();
    eval_cmd->add_option("--data", ev.data, "EFDM dataset to score");
    eval_cmd->add_option("--diffusion-ckpts,--diffusion_ckpts", ev.diffusion_ckpts,
                         "epoch:path[,path...] groups; scores synthetic samples instead of --data");
    eval_cmd->add_option("--n-samples,--n_samples", ev.n_samples, "samples per class per checkpoint")
        ->capture_default_str();
    eval_cmd->add_option("--out", ev.out, "output CSV")->required();

    // ---- experiment --------------------------------------------------------
    auto* exp_cmd = app.add_subcommand("experiment", "two-arm augmentation comparison");
    struct {
        fs::path real;
        fs::path synth;
        fs::path out;
        int runs = 5;
        int epochs = 10;
        int train_per_class = 2000;
        int test_per_class = 500;
        int synth_per_class = 1200;
        std::string config = "desk";
    } ex;
    exp_cmd->add_option("--real", ex.real, "real EFDM dataset (train + held-out pool)")->required();
    exp_cmd->add_option("--synth", ex.synth, "synthetic EFDM dataset")->required();
    exp_cmd->add_option("--out", ex.out, "report directory")->required();
    exp_cmd->add_option("--runs", ex.runs, "repeated runs per arm")->capture_default_str();
    exp_cmd->add_option("--epochs", ex.epochs, "epochs per run")->capture_default_str();
    exp_cmd->add_option("--train-per-class,--train_per_class", ex.train_per_class, "real training maps")
        ->capture_default_str();
    exp_cmd->add_option("--test-per-class,--test_per_class", ex.test_per_class, "held-out maps")
        ->capture_default_str();
    exp_cmd->add_option("--synth-per-class,--synth_per_class", ex.synth_per_class, "synthetic maps")
        ->capture_default_str();
    exp_cmd->add_option("--config", ex.config, "classifier preset: desk or reference")->capture_default_str();

    // ---- export-image ------------------------------------------------------
    auto* export_cmd = app.add_subcommand("export-image", "dump one map as PGM/PPM");
    struct {
        fs::path data;
        int index = 0;
        fs::path out;
        bool rgb = false;
    } xp;
    export_cmd->add_option("--data", xp.data, "EFDM dataset file")->required();
    export_cmd->add_option("--index", xp.index, "item index")->capture_default_str();
    export_cmd->add_option("--out", xp.out, "output image path")->required();
    export_cmd->add_flag("--rgb", xp.rgb, "write the 3-plane PPM instead of PGM");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    CLI::App* cmd = app.get_subcommands().front();
    try {
        log_config(cmd);

        if (cmd == gen) {
            SynthSpec spec = SynthSpec::desk_default(global.seed);
            spec.n_channels = gen_args.channels;
            spec.sample_rate_hz = gen_args.sample_rate;
            spec.duration_s = gen_args.duration;
            spec.noise_sigma = gen_args.noise_sigma;
            spec.sinusoids = gen_args.sinusoids;
            spec.one_over_f = gen_args.one_over_f;
            if (!gen_args.classes.empty()) {
                spec.classes.clear();
                for (const auto& text : gen_args.classes) {
                    std::istringstream in(text);
                    SynthClass cls;
                    std::string field;
                    std::getline(in, cls.label, ':');
                    std::getline(in, field, ':');
                    cls.band_center_hz = std::stod(field);
                    std::getline(in, field, ':');
                    cls.band_width_hz = std::stod(field);
                    if (std::getline(in, field, ':')) cls.amplitude = std::stod(field);
                    spec.classes.push_back(cls);
                }
            }
            spec.validate();
            for (std::size_t cls = 0; cls < spec.classes.size(); ++cls) {
                const fs::path dir = gen_args.out / spec.classes[cls].label;
                fs::create_directories(dir);
                for (int inst = 0; inst < gen_args.n_per_class; ++inst) {
                    auto rec = generate(spec, static_cast<int>(cls), static_cast<std::uint64_t>(inst));
                    save_recording_binary(dir / ("rec_" + zero_pad(inst, 4) + ".eegr"), rec);
                }
                if (global.verbose) {
                    std::clog << "[eegdiff] wrote " << gen_args.n_per_class << " recordings for '"
                              << spec.classes[cls].label << "'\n";
                }
            }
        } else if (cmd == build) {
            if (!fs::is_directory(build_args.input)) {
                throw IoError("input directory does not exist: " + build_args.input.string());
            }
            Window window;
            if (build_args.window == "hann") {
                window = Window::Hann;
            } else if (build_args.window == "rectangular") {
                window = Window::Rectangular;
            } else {
                throw ValidationError("unknown window '" + build_args.window + "'");
            }
            EfdmDataset ds;
            std::vector<fs::path> class_dirs;
            for (const auto& entry : fs::directory_iterator(build_args.input)) {
                if (entry.is_directory()) class_dirs.push_back(entry.path());
            }
            std::sort(class_dirs.begin(), class_dirs.end());
            if (class_dirs.empty()) throw ValidationError("no class subdirectories under " + build_args.input.string());
            for (const auto& dir : class_dirs) {
                const std::string label = dir.filename().string();
                ds.intern_label(label);
                std::vector<fs::path> files;
                for (const auto& entry : fs::directory_iterator(dir)) {
                    if (entry.is_regular_file()) files.push_back(entry.path());
                }
                std::sort(files.begin(), files.end());
                for (const auto& file : files) {
                    Recording rec = (file.extension() == ".eegr")
                                        ? load_recording_binary(file, label)
                                        : load_recording_text(file, build_args.sample_rate, label);
                    const int wsize = build_args.wsize > 0
                                          ? build_args.wsize
                                          : static_cast<int>(std::llround(rec.sample_rate_hz));
                    const int hop = build_args.hop > 0 ? build_args.hop : wsize;
                    auto maps = build_efdms(stft(rec, wsize, hop, window),
                                            {build_args.cut_hz, build_args.image_size}, label);
                    for (auto& e : maps) ds.items.push_back(std::move(e));
                }
            }
            save_dataset(build_args.out, ds);
            std::clog << "[eegdiff] wrote " << ds.items.size() << " maps across " << ds.class_names.size()
                      << " classes to " << build_args.out << "\n";
        } else if (cmd == traind) {
            if (td.schedule != "linear") {
                throw ValidationError("unsupported noise schedule '" + td.schedule + "'");
            }
            auto ds = load_dataset_checked(td.data);
            std::vector<std::string> labels =
                td.label.empty() ? ds.class_names : std::vector<std::string>{td.label};
            fs::create_directories(td.out);
            for (const auto& label : labels) {
                auto images = class_images(ds, label);
                if (images.empty()) throw ValidationError("dataset has no items labeled '" + label + "'");
                DiffusionConfig cfg;
                cfg.image_size = td.image_size;
                cfg.T = td.diffusion_steps;
                cfg.lr = td.lr;
                cfg.batch_size = td.batch_size;
                cfg.channels = td.num_channels;
                cfg.res_blocks = td.num_res_blocks;
                cfg.seed = global.seed ^ mix64(label_hash(label));
                DiffusionTrainer trainer(cfg, label);
                trainer.save(td.out / (label + "_epoch" + zero_pad(0, 3) + ".ddpm"));
                for (int epoch = 1; epoch <= td.epochs; ++epoch) {
                    const double loss = trainer.train_epoch(images);
                    if (global.verbose) {
                        std::clog << "[eegdiff] " << label << " epoch " << epoch << " loss " << loss << "\n";
                    }
                    const bool snapshot =
                        epoch == td.epochs ||
                        std::find(td.ckpt_epochs.begin(), td.ckpt_epochs.end(), epoch) != td.ckpt_epochs.end();
                    if (snapshot) {
                        trainer.save(td.out / (label + "_epoch" + zero_pad(epoch, 3) + ".ddpm"));
                    }
                }
            }
        } else if (cmd == sample_cmd) {
            EfdmDataset out_ds;
            for (const auto& ckpt : sa.ckpts) {
                auto den = load_denoiser(ckpt);
                out_ds.intern_label(den.label);
                auto tensor = p_sample_loop(den.model, sa.n, den.sched,
                                            Rng(global.seed).fork(mix64(label_hash(den.label))),
                                            global.threads);
                const std::int64_t per = tensor->numel() / sa.n;
                for (int i = 0; i < sa.n; ++i) {
                    std::vector<double> one(tensor->data().begin() + i * per,
                                            tensor->data().begin() + (i + 1) * per);
                    Tensor x({3, den.model.config().image_size, den.model.config().image_size},
                             std::move(one), false);
                    auto e = sample_to_efdm(x, den.label);
                    if (!sa.pgm_dir.empty()) {
                        fs::create_directories(sa.pgm_dir);
                        export_pgm(sa.pgm_dir / (den.label + "_" + zero_pad(i, 4) + ".pgm"), e);
                    }
                    out_ds.items.push_back(std::move(e));
                }
            }
            save_dataset(sa.out, out_ds);
        } else if (cmd == trainc) {
            auto train_ds = load_dataset_checked(tc.train);
            auto val_ds = load_dataset_checked(tc.val);
            if (train_ds.items.empty()) throw ValidationError("training dataset is empty");
            const int hw = train_ds.items.front().height;
            ClassifierConfig cfg = tc.config == "reference"
                                       ? ClassifierConfig::reference(
                                             static_cast<int>(train_ds.class_names.size()), hw, hw)
                                       : ClassifierConfig::desk(
                                             static_cast<int>(train_ds.class_names.size()), hw, hw);
            if (tc.lr > 0) cfg.lr = tc.lr;
            if (tc.batch_size > 0) cfg.batch_size = tc.batch_size;
            cfg.seed = global.seed;
            Classifier model(cfg);
            auto record = train_classifier(model, train_ds, val_ds, tc.epochs, global.seed);
            save_classifier(tc.out, model);
            if (!tc.metrics.empty()) write_metrics_csv(tc.metrics, record);
            std::clog << "[eegdiff] final val accuracy " << record.val_accuracy.back() << "\n";
        } else if (cmd == eval_cmd) {
            auto model = load_classifier(ev.ckpt);
            std::ofstream out(ev.out);
            if (!out) throw IoError("cannot write " + ev.out.string());
            if (!ev.diffusion_ckpts.empty()) {
                std::vector<CheckpointSet> sets;
                for (const auto& text : ev.diffusion_ckpts) {
                    const auto colon = text.find(':');
                    if (colon == std::string::npos) {
                        throw ValidationError("expected epoch:path[,path...], got '" + text + "'");
                    }
                    CheckpointSet set;
                    set.epoch = std::stoi(text.substr(0, colon));
                    std::istringstream rest(text.substr(colon + 1));
                    std::string path;
                    while (std::getline(rest, path, ',')) set.per_class.emplace_back(path);
                    sets.push_back(std::move(set));
                }
                auto curve = eval_on_synthetic(model, sets, ev.n_samples, global.seed, global.threads);
                out << "diffusion_epoch,accuracy\n";
                char buf[64];
                for (const auto& point : curve) {
                    std::snprintf(buf, sizeof(buf), "%d,%.17g\n", point.epoch, point.accuracy);
                    out << buf;
                }
            } else {
                if (ev.data.empty()) throw ValidationError("eval needs --data or --diffusion-ckpts");
                auto ds = load_dataset_checked(ev.data);
                auto result = evaluate(model, ds);
                out << "metric,value\n";
                char buf[64];
                std::snprintf(buf, sizeof(buf), "accuracy,%.17g\n", result.accuracy);
                out << buf;
                for (std::size_t k = 0; k < result.per_class_recall.size(); ++k) {
                    std::snprintf(buf, sizeof(buf), "recall_%s,%.17g\n", model.class_names[k].c_str(),
                                  result.per_class_recall[k]);
                    out << buf;
                }
                std::clog << "[eegdiff] accuracy " << result.accuracy << "\n";
            }
        } else if (cmd == exp_cmd) {
            auto real = load_dataset_checked(ex.real);
            auto synth = load_dataset_checked(ex.synth);
            if (real.items.empty()) throw ValidationError("real dataset is empty");
            const int hw = real.items.front().height;
            ExperimentPlan plan;
            plan.n_runs = ex.runs;
            plan.epochs = ex.epochs;
            plan.train_per_class = ex.train_per_class;
            plan.test_per_class = ex.test_per_class;
            plan.synth_per_class = ex.synth_per_class;
            plan.base_seed = global.seed;
            plan.threads = global.threads;
            plan.classifier = ex.config == "reference"
                                  ? ClassifierConfig::reference(
                                        static_cast<int>(real.class_names.size()), hw, hw)
                                  : ClassifierConfig::desk(static_cast<int>(real.class_names.size()), hw, hw);
            auto report = run_two_arm(plan, real, synth);
            emit_report(report, ex.out);
            for (const auto& arm : report.arms) {
                std::clog << "[eegdiff] " << arm.name << " max average accuracy "
                          << arm.max_average_accuracy << "\n";
            }
        } else if (cmd == export_cmd) {
            auto ds = load_dataset_checked(xp.data);
            if (xp.index < 0 || xp.index >= static_cast<int>(ds.items.size())) {
                throw ValidationError("index " + std::to_string(xp.index) + " outside dataset of " +
                                      std::to_string(ds.items.size()) + " items");
            }
            const auto& item = ds.items[static_cast<std::size_t>(xp.index)];
            if (xp.rgb) {
                export_ppm(xp.out, item);
            } else {
                export_pgm(xp.out, item);
            }
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.category() << ": " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: internal: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
