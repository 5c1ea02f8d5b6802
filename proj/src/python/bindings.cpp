// Python bindings for the main pipeline operations. Arrays cross the
// boundary as numpy buffers; heavyweight state (trainers, classifiers)
// stays on the C++ side behind small handle classes.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "eegdiff/classifier.hpp"
#include "eegdiff/datagen.hpp"
#include "eegdiff/diffusion.hpp"
#include "eegdiff/efdm.hpp"
#include "eegdiff/error.hpp"
#include "eegdiff/harness.hpp"

namespace py = pybind11;
using namespace eegdiff;

namespace {

py::array_t<double> recording_array(const Recording& rec) {
    py::array_t<double> out({static_cast<py::ssize_t>(rec.channels), static_cast<py::ssize_t>(rec.samples)});
    std::copy(rec.data.begin(), rec.data.end(), out.mutable_data());
    return out;
}

py::array_t<std::complex<double>> spectrogram_array(const Spectrogram& spec) {
    py::array_t<std::complex<double>> out({static_cast<py::ssize_t>(spec.frames),
                                           static_cast<py::ssize_t>(spec.freq_bins),
                                           static_cast<py::ssize_t>(spec.channels)});
    std::copy(spec.values.begin(), spec.values.end(), out.mutable_data());
    return out;
}

py::array_t<std::uint8_t> efdm_array(const Efdm& e) {
    py::array_t<std::uint8_t> out({static_cast<py::ssize_t>(e.height), static_cast<py::ssize_t>(e.width)});
    std::copy(e.pixels.begin(), e.pixels.end(), out.mutable_data());
    return out;
}

std::vector<double> to_vector(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
    return {a.data(), a.data() + a.size()};
}

Window parse_window(const std::string& name) {
    if (name == "hann") return Window::Hann;
    if (name == "rectangular") return Window::Rectangular;
    throw ValidationError("unknown window '" + name + "'");
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "EEG spectro-image synthesis and augmentation toolbox";

    py::register_exception<Error>(m, "EegdiffError");

    // ---- datagen ----
    py::class_<SynthClass>(m, "SynthClass")
        .def(py::init<>())
        .def(py::init([](std::string label, double center, double width, double amplitude) {
                 return SynthClass{std::move(label), center, width, amplitude};
             }),
             py::arg("label"), py::arg("band_center_hz"), py::arg("band_width_hz"),
             py::arg("amplitude") = 1.0)
        .def_readwrite("label", &SynthClass::label)
        .def_readwrite("band_center_hz", &SynthClass::band_center_hz)
        .def_readwrite("band_width_hz", &SynthClass::band_width_hz)
        .def_readwrite("amplitude", &SynthClass::amplitude);

    py::class_<SynthSpec>(m, "SynthSpec")
        .def(py::init<>())
        .def_static("desk_default", &SynthSpec::desk_default, py::arg("seed"))
        .def_readwrite("n_channels", &SynthSpec::n_channels)
        .def_readwrite("sample_rate_hz", &SynthSpec::sample_rate_hz)
        .def_readwrite("duration_s", &SynthSpec::duration_s)
        .def_readwrite("classes", &SynthSpec::classes)
        .def_readwrite("noise_sigma", &SynthSpec::noise_sigma)
        .def_readwrite("seed", &SynthSpec::seed)
        .def_readwrite("sinusoids", &SynthSpec::sinusoids)
        .def_readwrite("one_over_f", &SynthSpec::one_over_f);

    py::class_<Recording>(m, "Recording")
        .def_property_readonly("data", &recording_array)
        .def_readonly("channels", &Recording::channels)
        .def_readonly("samples", &Recording::samples)
        .def_readonly("sample_rate_hz", &Recording::sample_rate_hz)
        .def_readonly("label", &Recording::label);

    m.def("generate", &generate, py::arg("spec"), py::arg("class_index"), py::arg("instance") = 0,
          "Generate one labeled synthetic recording.");

    // ---- signal ----
    py::class_<Spectrogram>(m, "Spectrogram")
        .def_property_readonly("values", &spectrogram_array)
        .def_readonly("frames", &Spectrogram::frames)
        .def_readonly("freq_bins", &Spectrogram::freq_bins)
        .def_readonly("channels", &Spectrogram::channels)
        .def_readonly("freq_resolution_hz", &Spectrogram::freq_resolution_hz);

    m.def(
        "stft",
        [](const Recording& rec, int wsize, int hop, const std::string& window) {
            return stft(rec, wsize, hop, parse_window(window));
        },
        py::arg("recording"), py::arg("wsize"), py::arg("hop"), py::arg("window") = "hann");

    m.def(
        "magnitude",
        [](const Spectrogram& spec) {
            auto mags = magnitude(spec);
            py::array_t<double> out({static_cast<py::ssize_t>(spec.frames),
                                     static_cast<py::ssize_t>(spec.freq_bins),
                                     static_cast<py::ssize_t>(spec.channels)});
            std::copy(mags.begin(), mags.end(), out.mutable_data());
            return out;
        },
        py::arg("spectrogram"));

    m.def("load_recording_binary", &load_recording_binary, py::arg("path"), py::arg("label") = "");
    m.def("save_recording_binary", &save_recording_binary, py::arg("path"), py::arg("recording"));

    // ---- efdm ----
    py::class_<Efdm>(m, "Efdm")
        .def_property_readonly("pixels", &efdm_array)
        .def_readonly("height", &Efdm::height)
        .def_readonly("width", &Efdm::width)
        .def_readwrite("label", &Efdm::label);

    py::class_<EfdmDataset>(m, "EfdmDataset")
        .def(py::init<>())
        .def_readwrite("items", &EfdmDataset::items)
        .def_readwrite("class_names", &EfdmDataset::class_names)
        .def("__len__", [](const EfdmDataset& ds) { return ds.items.size(); });

    m.def(
        "build_efdms",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& mags,
           double freq_resolution_hz, double cut_hz, int image_size, const std::string& label) {
            if (mags.ndim() != 3) throw ValidationError("magnitudes must be [frames, bins, channels]");
            return build_efdms(to_vector(mags), static_cast<int>(mags.shape(0)),
                               static_cast<int>(mags.shape(1)), static_cast<int>(mags.shape(2)),
                               freq_resolution_hz, {cut_hz, image_size}, label);
        },
        py::arg("magnitudes"), py::arg("freq_resolution_hz"), py::arg("cut_hz") = 100.0,
        py::arg("image_size") = 128, py::arg("label") = "");

    m.def(
        "efdms_from_recording",
        [](const Recording& rec, int wsize, int hop, double cut_hz, int image_size) {
            return build_efdms(stft(rec, wsize, hop), {cut_hz, image_size}, rec.label);
        },
        py::arg("recording"), py::arg("wsize"), py::arg("hop"), py::arg("cut_hz") = 100.0,
        py::arg("image_size") = 128);

    m.def("save_dataset", &save_dataset, py::arg("path"), py::arg("dataset"));
    m.def("load_dataset", &load_dataset, py::arg("path"));
    m.def("export_pgm", &export_pgm, py::arg("path"), py::arg("efdm"));
    m.def("export_ppm", &export_ppm, py::arg("path"), py::arg("efdm"));

    // ---- diffusion ----
    py::class_<NoiseSchedule>(m, "NoiseSchedule")
        .def_readonly("T", &NoiseSchedule::T)
        .def_property_readonly("betas", [](const NoiseSchedule& s) { return py::array_t<double>(py::cast(s.betas)); })
        .def_property_readonly("alphas", [](const NoiseSchedule& s) { return py::array_t<double>(py::cast(s.alphas)); })
        .def_property_readonly("alpha_bars",
                               [](const NoiseSchedule& s) { return py::array_t<double>(py::cast(s.alpha_bars)); });

    m.def("linear_schedule", &linear_schedule, py::arg("T"));

    m.def(
        "q_sample",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& x0, int t,
           const py::array_t<double, py::array::c_style | py::array::forcecast>& eps,
           const NoiseSchedule& sched) {
            std::vector<int> shape;
            for (py::ssize_t d = 0; d < x0.ndim(); ++d) shape.push_back(static_cast<int>(x0.shape(d)));
            auto x0_t = Tensor::from_data(shape, to_vector(x0));
            auto eps_t = Tensor::from_data(shape, to_vector(eps));
            auto out = q_sample(x0_t, t, eps_t, sched);
            py::array_t<double> result(std::vector<py::ssize_t>(x0.shape(), x0.shape() + x0.ndim()));
            std::copy(out->data().begin(), out->data().end(), result.mutable_data());
            return result;
        },
        py::arg("x0"), py::arg("t"), py::arg("eps"), py::arg("schedule"));

    py::class_<DiffusionConfig>(m, "DiffusionConfig")
        .def(py::init<>())
        .def_readwrite("image_size", &DiffusionConfig::image_size)
        .def_readwrite("T", &DiffusionConfig::T)
        .def_readwrite("lr", &DiffusionConfig::lr)
        .def_readwrite("batch_size", &DiffusionConfig::batch_size)
        .def_readwrite("channels", &DiffusionConfig::channels)
        .def_readwrite("res_blocks", &DiffusionConfig::res_blocks)
        .def_readwrite("seed", &DiffusionConfig::seed);

    py::class_<DiffusionTrainer>(m, "DiffusionTrainer")
        .def(py::init<const DiffusionConfig&, std::string>(), py::arg("config"), py::arg("label"))
        .def(
            "train_epoch",
            [](DiffusionTrainer& trainer, const EfdmDataset& dataset, const std::string& label) {
                std::vector<TensorPtr> images;
                for (const auto& item : dataset.items) {
                    if (label.empty() || item.label == label) images.push_back(to_float_tensor(item));
                }
                return trainer.train_epoch(images);
            },
            py::arg("dataset"), py::arg("label") = "",
            "One pass over the dataset (optionally one class); returns the mean loss.")
        .def("save", &DiffusionTrainer::save, py::arg("path"))
        .def_property_readonly("epochs_done", &DiffusionTrainer::epochs_done);

    m.def(
        "sample_maps",
        [](const std::filesystem::path& ckpt, int n, std::uint64_t seed, int threads) {
            auto den = load_denoiser(ckpt);
            auto tensor = p_sample_loop(den.model, n, den.sched, Rng(seed), threads);
            EfdmDataset out;
            out.intern_label(den.label);
            const std::int64_t per = tensor->numel() / n;
            for (int i = 0; i < n; ++i) {
                std::vector<double> one(tensor->data().begin() + i * per,
                                        tensor->data().begin() + (i + 1) * per);
                Tensor x({3, den.model.config().image_size, den.model.config().image_size},
                         std::move(one), false);
                out.items.push_back(sample_to_efdm(x, den.label));
            }
            return out;
        },
        py::arg("checkpoint"), py::arg("n"), py::arg("seed") = 0, py::arg("threads") = 1,
        "Draw n maps from a denoiser checkpoint, labeled by its class.");

    // ---- classifier ----
    py::class_<ClassifierConfig>(m, "ClassifierConfig")
        .def_static("desk", &ClassifierConfig::desk, py::arg("classes") = 2, py::arg("height") = 32,
                    py::arg("width") = 32)
        .def_static("reference", &ClassifierConfig::reference, py::arg("classes") = 2,
                    py::arg("height") = 128, py::arg("width") = 128)
        .def_readwrite("classes", &ClassifierConfig::classes)
        .def_readwrite("lr", &ClassifierConfig::lr)
        .def_readwrite("batch_size", &ClassifierConfig::batch_size)
        .def_readwrite("seed", &ClassifierConfig::seed);

    py::class_<TrainRunRecord>(m, "TrainRunRecord")
        .def_readonly("train_loss", &TrainRunRecord::train_loss)
        .def_readonly("train_accuracy", &TrainRunRecord::train_accuracy)
        .def_readonly("val_loss", &TrainRunRecord::val_loss)
        .def_readonly("val_accuracy", &TrainRunRecord::val_accuracy)
        .def_readonly("epochs", &TrainRunRecord::epochs);

    py::class_<Classifier>(m, "Classifier")
        .def(py::init<const ClassifierConfig&>(), py::arg("config"))
        .def_readonly("class_names", &Classifier::class_names);

    m.def("train_classifier", &train_classifier, py::arg("model"), py::arg("train"), py::arg("val"),
          py::arg("epochs"), py::arg("seed"));
    m.def(
        "evaluate",
        [](Classifier& model, const EfdmDataset& data) {
            auto result = evaluate(model, data);
            return py::make_tuple(result.accuracy, result.per_class_recall);
        },
        py::arg("model"), py::arg("data"), "Returns (accuracy, per-class recall).");
    m.def("save_classifier", &save_classifier, py::arg("path"), py::arg("model"));
    m.def("load_classifier", &load_classifier, py::arg("path"));

    // ---- harness ----
    m.def(
        "confidence_interval",
        [](const std::vector<double>& values) {
            const auto [mean, half] = confidence_interval(values);
            return py::make_tuple(mean, half);
        },
        py::arg("values"), "Student-t 95% interval: (mean, half_width).");
}
