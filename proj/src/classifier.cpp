#include "eegdiff/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "eegdiff/adam.hpp"
#include "eegdiff/checkpoint.hpp"
#include "eegdiff/error.hpp"
#include "eegdiff/ops.hpp"

namespace eegdiff {

ClassifierConfig ClassifierConfig::reference(int classes, int height, int width) {
    ClassifierConfig cfg;
    cfg.classes = classes;
    cfg.height = height;
    cfg.width = width;
    cfg.stages = {
        {16, {12, 1}, {1, 1}, {2, 0}, {4, 1}, {4, 1}},
        {64, {8, 1}, {1, 1}, {1, 0}, {2, 1}, {2, 1}},
        {128, {4, 1}, {1, 1}, {1, 0}, {2, 1}, {2, 1}},
    };
    cfg.head_dims = {5000, 2500, 1000};
    cfg.lr = 1e-4;
    cfg.batch_size = 128;
    return cfg;
}

ClassifierConfig ClassifierConfig::desk(int classes, int height, int width) {
    ClassifierConfig cfg;
    cfg.classes = classes;
    cfg.height = height;
    cfg.width = width;
    cfg.stages = {
        {16, {5, 1}, {1, 1}, {2, 0}, {4, 1}, {4, 1}},
        {32, {3, 1}, {1, 1}, {1, 0}, {2, 1}, {2, 1}},
        {64, {3, 1}, {1, 1}, {1, 0}, {2, 1}, {2, 1}},
    };
    cfg.head_dims = {128, 64};
    cfg.lr = 1e-3;
    cfg.batch_size = 32;
    return cfg;
}

std::vector<std::array<int, 3>> ClassifierConfig::shape_trace() const {
    std::vector<std::array<int, 3>> trace;
    int c = in_planes, h = height, w = width;
    for (std::size_t s = 0; s < stages.size(); ++s) {
        const ConvStage& st = stages[s];
        const auto stage_name = "stage " + std::to_string(s);
        if (st.kernel.first > h + 2 * st.padding.first || st.kernel.second > w + 2 * st.padding.second) {
            throw ValidationError(stage_name + " conv kernel does not fit its input " +
                                  std::to_string(h) + "x" + std::to_string(w));
        }
        h = (h + 2 * st.padding.first - st.kernel.first) / st.stride.first + 1;
        w = (w + 2 * st.padding.second - st.kernel.second) / st.stride.second + 1;
        c = st.filters;
        if (st.pool_kernel.first > h || st.pool_kernel.second > w) {
            throw ValidationError(stage_name + " pool kernel does not fit its input " +
                                  std::to_string(h) + "x" + std::to_string(w));
        }
        h = (h - st.pool_kernel.first) / st.pool_stride.first + 1;
        w = (w - st.pool_kernel.second) / st.pool_stride.second + 1;
        if (h < 1 || w < 1) {
            throw ValidationError(stage_name + " collapses the spatial extent to zero");
        }
        trace.push_back({c, h, w});
    }
    return trace;
}

void ClassifierConfig::validate() const {
    if (classes < 2) throw ValidationError("classifier needs at least 2 classes");
    if (stages.empty()) throw ValidationError("classifier needs at least one conv stage");
    if (lr <= 0 || batch_size < 1) throw ValidationError("classifier lr/batch_size invalid");
    shape_trace();  // throws with the failing layer name
}

Classifier::Classifier(const ClassifierConfig& config) : config_(config) {
    config_.validate();
    Rng rng(config_.seed);
    int in_planes = config_.in_planes;
    for (const auto& st : config_.stages) {
        convs_.emplace_back(in_planes, st.filters, st.kernel, st.stride, st.padding, rng);
        in_planes = st.filters;
    }
    head_.emplace_back(0, config_.head_dims.empty() ? config_.classes : config_.head_dims.front(), rng);
    for (std::size_t i = 0; i + 1 < config_.head_dims.size(); ++i) {
        head_.emplace_back(config_.head_dims[i], config_.head_dims[i + 1], rng);
    }
    if (!config_.head_dims.empty()) {
        head_.emplace_back(config_.head_dims.back(), config_.classes, rng);
    }
}

TensorPtr Classifier::forward(const TensorPtr& x) {
    if (x->ndim() != 4 || x->dim(1) != config_.in_planes) {
        throw DimensionError("classifier expects [N," + std::to_string(config_.in_planes) +
                             ",H,W] input, got " + x->shape_string());
    }
    TensorPtr h = x;
    for (std::size_t s = 0; s < convs_.size(); ++s) {
        const auto& st = config_.stages[s];
        h = gelu(convs_[s].forward(h));
        h = maxpool2d(h, st.pool_kernel, st.pool_stride);
    }
    h = flatten(h);
    for (std::size_t i = 0; i < head_.size(); ++i) {
        h = head_[i].forward(h);
        if (i + 1 < head_.size()) h = gelu(h);
    }
    return h;
}

NamedParams Classifier::named_params() const {
    NamedParams out;
    for (std::size_t s = 0; s < convs_.size(); ++s) convs_[s].collect("conv" + std::to_string(s), out);
    for (std::size_t i = 0; i < head_.size(); ++i) head_[i].collect("head" + std::to_string(i), out);
    return out;
}

void Classifier::load_params(const NamedParams& params) {
    auto own = named_params();
    for (auto& [name, tensor] : own) {
        const auto it = std::find_if(params.begin(), params.end(),
                                     [&](const auto& p) { return p.first == name; });
        if (it == params.end()) throw IoError("checkpoint missing parameter '" + name + "'");
        if (it->second->shape() != tensor->shape()) {
            throw IoError("checkpoint parameter '" + name + "' has shape " + it->second->shape_string() +
                          ", expected " + tensor->shape_string());
        }
        tensor->data() = it->second->data();
    }
}

Classifier build_classifier(const ClassifierConfig& config) { return Classifier(config); }

std::uint64_t dataset_fingerprint(const EfdmDataset& data) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix_byte = [&h](std::uint8_t b) {
        h ^= b;
        h *= 0x100000001b3ULL;
    };
    for (const auto& item : data.items) {
        const std::uint64_t f = efdm_fingerprint(item);
        for (int i = 0; i < 8; ++i) mix_byte(static_cast<std::uint8_t>(f >> (8 * i)));
        for (char c : item.label) mix_byte(static_cast<std::uint8_t>(c));
    }
    return h;
}

namespace {

/// Map a dataset label onto the model's class index.
int model_label_index(const Classifier& model, const EfdmDataset& data, const Efdm& item) {
    if (!model.class_names.empty()) {
        for (std::size_t i = 0; i < model.class_names.size(); ++i) {
            if (model.class_names[i] == item.label) return static_cast<int>(i);
        }
        throw ValidationError("label '" + item.label + "' unknown to the classifier");
    }
    const int idx = data.label_index(item.label);
    if (idx < 0) throw ValidationError("label '" + item.label + "' missing from dataset vocabulary");
    return idx;
}

TensorPtr stack_images(const EfdmDataset& data, const std::vector<std::int64_t>& order, std::size_t lo,
                       std::size_t hi) {
    const Efdm& first = data.items[static_cast<std::size_t>(order[lo])];
    const int m = static_cast<int>(hi - lo);
    auto batch = Tensor::zeros({m, 3, first.height, first.width});
    const std::int64_t per = batch->numel() / m;
    for (int i = 0; i < m; ++i) {
        const auto img = to_float_tensor(data.items[static_cast<std::size_t>(order[lo + static_cast<std::size_t>(i)])]);
        std::copy(img->data().begin(), img->data().end(), batch->data().begin() + i * per);
    }
    return batch;
}

struct SplitMetrics {
    double loss = 0.0;
    double accuracy = 0.0;
};

SplitMetrics eval_full(Classifier& model, const EfdmDataset& data, std::vector<int>* per_class_correct,
                       std::vector<int>* per_class_total) {
    if (data.items.empty()) throw ValidationError("evaluation dataset is empty");
    NoGradGuard no_grad;
    std::vector<std::int64_t> order(data.items.size());
    std::iota(order.begin(), order.end(), 0);

    const std::size_t batch = 256;
    double loss_sum = 0.0;
    std::int64_t correct = 0;
    for (std::size_t lo = 0; lo < order.size(); lo += batch) {
        const std::size_t hi = std::min(order.size(), lo + batch);
        auto x = stack_images(data, order, lo, hi);
        std::vector<int> labels;
        labels.reserve(hi - lo);
        for (std::size_t i = lo; i < hi; ++i) {
            labels.push_back(model_label_index(model, data, data.items[static_cast<std::size_t>(order[i])]));
        }
        auto logits = model.forward(x);
        loss_sum += cross_entropy(logits, labels)->item() * static_cast<double>(hi - lo);
        const int K = logits->dim(1);
        for (std::size_t i = 0; i < hi - lo; ++i) {
            const double* row = logits->data().data() + static_cast<std::int64_t>(i) * K;
            const int pred = static_cast<int>(std::max_element(row, row + K) - row);
            const int want = labels[i];
            if (per_class_total) ++(*per_class_total)[static_cast<std::size_t>(want)];
            if (pred == want) {
                ++correct;
                if (per_class_correct) ++(*per_class_correct)[static_cast<std::size_t>(want)];
            }
        }
    }
    SplitMetrics m;
    m.loss = loss_sum / static_cast<double>(data.items.size());
    m.accuracy = static_cast<double>(correct) / static_cast<double>(data.items.size());
    return m;
}

}  // namespace

TrainRunRecord train_classifier(Classifier& model, const EfdmDataset& train, const EfdmDataset& val,
                                int epochs, std::uint64_t seed) {
    if (train.items.empty() || val.items.empty()) throw ValidationError("training and validation sets must be non-empty");
    if (train.class_names != val.class_names) {
        throw ValidationError("train/val label vocabularies differ");
    }
    if (static_cast<int>(train.class_names.size()) != model.config().classes) {
        throw ValidationError("dataset has " + std::to_string(train.class_names.size()) +
                              " classes, classifier expects " + std::to_string(model.config().classes));
    }
    if (epochs < 1) throw ValidationError("epochs must be >= 1");
    model.class_names = train.class_names;

    // Bind the deferred head, then hand all parameters to Adam.
    {
        NoGradGuard no_grad;
        const Efdm& probe = train.items.front();
        model.forward(Tensor::zeros({1, 3, probe.height, probe.width}));
    }
    std::vector<TensorPtr> params;
    for (auto& [name, t] : model.named_params()) {
        t->ensure_grad();
        params.push_back(t);
    }
    AdamConfig adam_cfg;
    adam_cfg.lr = model.config().lr;
    Adam optimizer(std::move(params), adam_cfg);

    Rng rng(seed);
    TrainRunRecord record;
    record.seed = seed;
    record.epochs = epochs;
    record.dataset_fingerprint = dataset_fingerprint(train);

    std::vector<std::int64_t> order(train.items.size());
    std::iota(order.begin(), order.end(), 0);
    const std::size_t batch_size = static_cast<std::size_t>(model.config().batch_size);

    for (int epoch = 0; epoch < epochs; ++epoch) {
        rng.shuffle(order.data(), static_cast<std::int64_t>(order.size()));
        double loss_sum = 0.0;
        std::int64_t correct = 0;
        int step = 0;
        for (std::size_t lo = 0; lo < order.size(); lo += batch_size, ++step) {
            const std::size_t hi = std::min(order.size(), lo + batch_size);
            auto x = stack_images(train, order, lo, hi);
            std::vector<int> labels;
            labels.reserve(hi - lo);
            for (std::size_t i = lo; i < hi; ++i) {
                labels.push_back(model_label_index(model, train, train.items[static_cast<std::size_t>(order[i])]));
            }
            auto logits = model.forward(x);
            auto loss = cross_entropy(logits, labels);
            const double value = loss->item();
            if (!std::isfinite(value)) {
                throw DivergenceError("classifier training diverged at epoch " + std::to_string(epoch) +
                                      " step " + std::to_string(step));
            }
            loss->backward();
            optimizer.step();

            loss_sum += value * static_cast<double>(hi - lo);
            const int K = logits->dim(1);
            for (std::size_t i = 0; i < hi - lo; ++i) {
                const double* row = logits->data().data() + static_cast<std::int64_t>(i) * K;
                if (static_cast<int>(std::max_element(row, row + K) - row) == labels[i]) ++correct;
            }
        }
        record.train_loss.push_back(loss_sum / static_cast<double>(train.items.size()));
        record.train_accuracy.push_back(static_cast<double>(correct) / static_cast<double>(train.items.size()));

        const SplitMetrics vm = eval_full(model, val, nullptr, nullptr);
        record.val_loss.push_back(vm.loss);
        record.val_accuracy.push_back(vm.accuracy);
    }
    return record;
}

EvalResult evaluate(Classifier& model, const EfdmDataset& data) {
    const int K = model.config().classes;
    std::vector<int> correct(static_cast<std::size_t>(K), 0);
    std::vector<int> total(static_cast<std::size_t>(K), 0);
    const SplitMetrics m = eval_full(model, data, &correct, &total);
    EvalResult result;
    result.accuracy = m.accuracy;
    result.per_class_recall.resize(static_cast<std::size_t>(K), 0.0);
    for (int k = 0; k < K; ++k) {
        result.per_class_recall[static_cast<std::size_t>(k)] =
            total[static_cast<std::size_t>(k)] > 0
                ? static_cast<double>(correct[static_cast<std::size_t>(k)]) / total[static_cast<std::size_t>(k)]
                : 0.0;
    }
    return result;
}

namespace {
std::string join(const std::vector<std::string>& parts, char sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out.push_back(sep);
        out += parts[i];
    }
    return out;
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream in(s);
    while (std::getline(in, field, sep)) out.push_back(field);
    return out;
}
}  // namespace

void save_classifier(const std::filesystem::path& path, const Classifier& model) {
    const auto& cfg = model.config();
    std::ostringstream stages;
    for (std::size_t s = 0; s < cfg.stages.size(); ++s) {
        const auto& st = cfg.stages[s];
        if (s) stages << ";";
        stages << st.filters << "," << st.kernel.first << "," << st.kernel.second << ","
               << st.stride.first << "," << st.stride.second << "," << st.padding.first << ","
               << st.padding.second << "," << st.pool_kernel.first << "," << st.pool_kernel.second << ","
               << st.pool_stride.first << "," << st.pool_stride.second;
    }
    std::vector<std::string> head;
    for (int d : cfg.head_dims) head.push_back(std::to_string(d));
    for (const auto& name : model.class_names) {
        if (name.find(',') != std::string::npos) {
            throw ValidationError("class name '" + name + "' may not contain commas");
        }
    }
    std::map<std::string, std::string> config{
        {"in_planes", std::to_string(cfg.in_planes)},
        {"height", std::to_string(cfg.height)},
        {"width", std::to_string(cfg.width)},
        {"classes", std::to_string(cfg.classes)},
        {"stages", stages.str()},
        {"head_dims", join(head, ',')},
        {"lr", std::to_string(cfg.lr)},
        {"batch_size", std::to_string(cfg.batch_size)},
        {"seed", std::to_string(cfg.seed)},
        {"class_names", join(model.class_names, ',')},
    };
    save_checkpoint(path, CheckpointKind::Classifier, config, model.named_params());
}

Classifier load_classifier(const std::filesystem::path& path) {
    const LoadedCheckpoint ckpt = load_checkpoint(path);
    if (ckpt.kind != CheckpointKind::Classifier) {
        throw IoError("checkpoint " + path.string() + " is not a classifier checkpoint");
    }
    ClassifierConfig cfg;
    cfg.in_planes = std::stoi(ckpt.require("in_planes"));
    cfg.height = std::stoi(ckpt.require("height"));
    cfg.width = std::stoi(ckpt.require("width"));
    cfg.classes = std::stoi(ckpt.require("classes"));
    cfg.lr = std::stod(ckpt.require("lr"));
    cfg.batch_size = std::stoi(ckpt.require("batch_size"));
    cfg.seed = std::stoull(ckpt.require("seed"));
    for (const auto& stage_str : split(ckpt.require("stages"), ';')) {
        const auto f = split(stage_str, ',');
        if (f.size() != 11) throw IoError("malformed stage spec in checkpoint " + path.string());
        ConvStage st;
        st.filters = std::stoi(f[0]);
        st.kernel = {std::stoi(f[1]), std::stoi(f[2])};
        st.stride = {std::stoi(f[3]), std::stoi(f[4])};
        st.padding = {std::stoi(f[5]), std::stoi(f[6])};
        st.pool_kernel = {std::stoi(f[7]), std::stoi(f[8])};
        st.pool_stride = {std::stoi(f[9]), std::stoi(f[10])};
        cfg.stages.push_back(st);
    }
    for (const auto& d : split(ckpt.require("head_dims"), ',')) {
        if (!d.empty()) cfg.head_dims.push_back(std::stoi(d));
    }

    Classifier model(cfg);
    {
        NoGradGuard no_grad;
        model.forward(Tensor::zeros({1, cfg.in_planes, cfg.height, cfg.width}));
    }
    model.load_params(ckpt.params);
    const auto names = ckpt.config.find("class_names");
    if (names != ckpt.config.end() && !names->second.empty()) {
        model.class_names = split(names->second, ',');
    }
    return model;
}

void write_metrics_csv(const std::filesystem::path& path, const TrainRunRecord& record) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write metrics file " + path.string());
    out << "epoch,split,loss,accuracy\n";
    char buf[128];
    for (int e = 0; e < record.epochs; ++e) {
        std::snprintf(buf, sizeof(buf), "%d,train,%.17g,%.17g\n", e,
                      record.train_loss[static_cast<std::size_t>(e)],
                      record.train_accuracy[static_cast<std::size_t>(e)]);
        out << buf;
        std::snprintf(buf, sizeof(buf), "%d,val,%.17g,%.17g\n", e,
                      record.val_loss[static_cast<std::size_t>(e)],
                      record.val_accuracy[static_cast<std::size_t>(e)]);
        out << buf;
    }
    if (!out) throw IoError("failed writing metrics file " + path.string());
}

}  // namespace eegdiff
