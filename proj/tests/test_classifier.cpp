#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>

#include "doctest.h"
#include "eegdiff/classifier.hpp"
#include "eegdiff/datagen.hpp"
#include "eegdiff/error.hpp"
#include "eegdiff/ops.hpp"

using namespace eegdiff;

namespace {

/// Independent shape calculator for the conv/pool arithmetic.
struct ShapeCalc {
    int h, w;
    void conv(int kh, int kw, int sh, int sw, int ph, int pw) {
        h = (h + 2 * ph - kh) / sh + 1;
        w = (w + 2 * pw - kw) / sw + 1;
    }
    void pool(int kh, int kw, int sh, int sw) {
        h = (h - kh) / sh + 1;
        w = (w - kw) / sw + 1;
    }
};

/// Labeled desk-scale EFDM dataset with disjoint spectral bands.
EfdmDataset make_band_dataset(std::uint64_t seed, int recordings_per_class, double noise = 0.05) {
    auto spec = SynthSpec::desk_default(seed);
    spec.noise_sigma = noise;
    EfdmDataset ds;
    for (int cls = 0; cls < 2; ++cls) ds.intern_label(spec.classes[static_cast<std::size_t>(cls)].label);
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

EfdmDataset slice_per_class(const EfdmDataset& src, int per_class, int skip = 0) {
    EfdmDataset out;
    out.class_names = src.class_names;
    std::map<std::string, int> taken, skipped;
    for (const auto& item : src.items) {
        if (skipped[item.label] < skip) {
            ++skipped[item.label];
            continue;
        }
        if (taken[item.label] < per_class) {
            ++taken[item.label];
            out.items.push_back(item);
        }
    }
    return out;
}

}  // namespace

TEST_CASE("classifier config: reference stack keeps the printed filter progression") {
    auto cfg = ClassifierConfig::reference();
    REQUIRE(cfg.stages.size() == 3);
    CHECK(cfg.stages[0].filters == 16);
    CHECK(cfg.stages[1].filters == 64);
    CHECK(cfg.stages[2].filters == 128);
    CHECK(cfg.head_dims == std::vector<int>{5000, 2500, 1000});
    CHECK(cfg.stages[0].kernel == std::pair<int, int>{12, 1});
    CHECK(cfg.batch_size == 128);
    CHECK(cfg.lr == 1e-4);
}

TEST_CASE("classifier config: shape audit matches the independent calculator") {
    auto cfg = ClassifierConfig::reference(2, 128, 128);
    const auto trace = cfg.shape_trace();
    ShapeCalc calc{128, 128};
    REQUIRE(trace.size() == 3);
    for (std::size_t s = 0; s < 3; ++s) {
        const auto& st = cfg.stages[s];
        calc.conv(st.kernel.first, st.kernel.second, st.stride.first, st.stride.second,
                  st.padding.first, st.padding.second);
        calc.pool(st.pool_kernel.first, st.pool_kernel.second, st.pool_stride.first, st.pool_stride.second);
        CHECK(trace[s][0] == st.filters);
        CHECK(trace[s][1] == calc.h);
        CHECK(trace[s][2] == calc.w);
    }
    // Flattened head input for the 128x128 reference stack.
    CHECK(trace.back()[0] * trace.back()[1] * trace.back()[2] == 128 * 5 * 128);
}

TEST_CASE("classifier config: inconsistent arithmetic names the failing layer") {
    auto cfg = ClassifierConfig::reference(2, 32, 32);  // reference stack cannot chain at 32x32
    CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("stage 1"), ValidationError);
}

TEST_CASE("classifier: same seed builds bitwise-identical parameters") {
    auto cfg = ClassifierConfig::desk(2, 32, 32);
    cfg.seed = 77;
    Classifier a(cfg);
    Classifier b(cfg);
    {
        NoGradGuard guard;  // bind both deferred heads the same way
        a.forward(Tensor::zeros({1, 3, 32, 32}));
        b.forward(Tensor::zeros({1, 3, 32, 32}));
    }
    auto pa = a.named_params();
    auto pb = b.named_params();
    REQUIRE(pa.size() == pb.size());
    for (std::size_t i = 0; i < pa.size(); ++i) {
        CHECK(pa[i].first == pb[i].first);
        CHECK(pa[i].second->data() == pb[i].second->data());
    }
}

TEST_CASE("classifier: reference config forward on a 3x128x128 zero image") {
    // The deferred head binds to 128*5*128 = 81920 features here, which
    // allocates a ~3.3 GB weight; forward-only, freed at scope exit.
    auto cfg = ClassifierConfig::reference(2, 128, 128);
    cfg.seed = 1;
    Classifier model(cfg);
    NoGradGuard guard;
    auto logits = model.forward(Tensor::zeros({1, 3, 128, 128}));
    CHECK(logits->shape() == std::vector<int>{1, 2});
    for (double v : logits->data()) CHECK(std::isfinite(v));
}

TEST_CASE("classifier: deferred head binds once and rejects later mismatches") {
    auto cfg = ClassifierConfig::desk(2, 32, 32);
    Classifier model(cfg);
    NoGradGuard guard;
    model.forward(Tensor::zeros({1, 3, 32, 32}));
    CHECK_THROWS_AS(model.forward(Tensor::zeros({1, 3, 64, 64})), DimensionError);
}

TEST_CASE("classifier: separable bands reach 95% held-out accuracy quickly") {
    auto full = make_band_dataset(101, 12);  // 12 recordings -> 192 maps per class
    auto train = slice_per_class(full, 128);
    auto val = slice_per_class(full, 48, 128);
    auto cfg = ClassifierConfig::desk(2, 32, 32);
    cfg.seed = 5;
    Classifier model(cfg);
    auto record = train_classifier(model, train, val, 10, 5);
    CHECK(*std::max_element(record.val_accuracy.begin(), record.val_accuracy.end()) >= 0.95);
}

TEST_CASE("classifier: permuted labels sit at chance level") {
    auto full = make_band_dataset(102, 10);
    auto train = slice_per_class(full, 96);
    auto val = slice_per_class(full, 48, 96);
    // Random label permutation destroys the class structure.
    Rng rng(103);
    for (auto& item : train.items) {
        item.label = train.class_names[static_cast<std::size_t>(rng.uniform_int(2))];
    }
    for (auto& item : val.items) {
        item.label = val.class_names[static_cast<std::size_t>(rng.uniform_int(2))];
    }
    auto cfg = ClassifierConfig::desk(2, 32, 32);
    cfg.seed = 6;
    Classifier model(cfg);
    auto record = train_classifier(model, train, val, 3, 6);
    CHECK(record.val_accuracy.back() >= 0.4);
    CHECK(record.val_accuracy.back() <= 0.6);
}

TEST_CASE("classifier: training is deterministic given the seed") {
    auto full = make_band_dataset(104, 4);
    auto train = slice_per_class(full, 32);
    auto val = slice_per_class(full, 16, 32);
    auto cfg = ClassifierConfig::desk(2, 32, 32);
    cfg.seed = 7;
    Classifier a(cfg);
    Classifier b(cfg);
    auto ra = train_classifier(a, train, val, 2, 7);
    auto rb = train_classifier(b, train, val, 2, 7);
    CHECK(ra.train_loss == rb.train_loss);
    CHECK(ra.val_accuracy == rb.val_accuracy);
}

TEST_CASE("evaluate: constant predictor scores 0.5 on a balanced set") {
    auto full = make_band_dataset(105, 4);
    auto data = slice_per_class(full, 32);
    auto cfg = ClassifierConfig::desk(2, 32, 32);
    cfg.seed = 8;
    Classifier model(cfg);
    {
        NoGradGuard guard;
        model.forward(Tensor::zeros({1, 3, 32, 32}));
    }
    model.class_names = data.class_names;
    // Pin the output layer to always choose class 0.
    auto params = model.named_params();
    for (auto& [name, t] : params) {
        if (name == "head2.bias") {
            t->data()[0] = 1000.0;
            t->data()[1] = -1000.0;
        }
    }
    auto result = evaluate(model, data);
    CHECK(result.accuracy == doctest::Approx(0.5));
    CHECK(result.per_class_recall[0] == doctest::Approx(1.0));
    CHECK(result.per_class_recall[1] == doctest::Approx(0.0));
}

TEST_CASE("evaluate: accuracy equals an independent recount") {
    auto full = make_band_dataset(106, 4);
    auto train = slice_per_class(full, 32);
    auto val = slice_per_class(full, 16, 32);
    auto cfg = ClassifierConfig::desk(2, 32, 32);
    cfg.seed = 9;
    Classifier model(cfg);
    train_classifier(model, train, val, 2, 9);

    auto result = evaluate(model, val);
    NoGradGuard guard;
    int correct = 0;
    for (const auto& item : val.items) {
        auto x = Tensor::zeros({1, 3, item.height, item.width});
        auto img = to_float_tensor(item);
        std::copy(img->data().begin(), img->data().end(), x->data().begin());
        auto logits = model.forward(x);
        const int pred = logits->data()[0] >= logits->data()[1] ? 0 : 1;
        int want = -1;
        for (std::size_t k = 0; k < model.class_names.size(); ++k) {
            if (model.class_names[k] == item.label) want = static_cast<int>(k);
        }
        if (pred == want) ++correct;
    }
    CHECK(result.accuracy ==
          doctest::Approx(static_cast<double>(correct) / static_cast<double>(val.items.size())));
}

TEST_CASE("evaluate: dataset order does not change the result") {
    auto full = make_band_dataset(107, 4);
    auto data = slice_per_class(full, 24);
    auto cfg = ClassifierConfig::desk(2, 32, 32);
    cfg.seed = 10;
    Classifier model(cfg);
    auto tiny_val = slice_per_class(full, 8, 24);
    train_classifier(model, data, tiny_val, 1, 10);

    auto base = evaluate(model, data);
    EfdmDataset reversed;
    reversed.class_names = data.class_names;
    reversed.items.assign(data.items.rbegin(), data.items.rend());
    auto flipped = evaluate(model, reversed);
    CHECK(base.accuracy == flipped.accuracy);

    EfdmDataset empty;
    empty.class_names = data.class_names;
    CHECK_THROWS_AS(evaluate(model, empty), ValidationError);
}

TEST_CASE("classifier: overfits a single batch below 0.01 cross-entropy") {
    auto full = make_band_dataset(108, 2);
    auto batch = slice_per_class(full, 4);
    auto cfg = ClassifierConfig::desk(2, 32, 32);
    cfg.seed = 11;
    cfg.batch_size = 8;  // exactly one batch per epoch, so epochs == steps
    Classifier model(cfg);
    auto record = train_classifier(model, batch, batch, 300, 11);
    CHECK(*std::min_element(record.train_loss.begin(), record.train_loss.end()) < 0.01);
}

TEST_CASE("logits: adding a constant never changes the argmax") {
    Rng rng(109);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> row(5);
        for (auto& v : row) v = rng.uniform(-3, 3);
        const auto base = std::max_element(row.begin(), row.end()) - row.begin();
        const double c = rng.uniform(-100, 100);
        std::vector<double> shifted(5);
        for (std::size_t i = 0; i < 5; ++i) shifted[i] = row[i] + c;
        const auto moved = std::max_element(shifted.begin(), shifted.end()) - shifted.begin();
        CHECK(base == moved);
    }
}

TEST_CASE("classifier: checkpoint round-trip preserves behavior") {
    auto full = make_band_dataset(110, 4);
    auto train = slice_per_class(full, 32);
    auto val = slice_per_class(full, 16, 32);
    auto cfg = ClassifierConfig::desk(2, 32, 32);
    cfg.seed = 12;
    Classifier model(cfg);
    train_classifier(model, train, val, 2, 12);

    const auto path = std::filesystem::temp_directory_path() / "eegdiff_test_clf.ddpm";
    save_classifier(path, model);
    auto loaded = load_classifier(path);
    CHECK(loaded.class_names == model.class_names);
    CHECK(evaluate(loaded, val).accuracy == evaluate(model, val).accuracy);
    std::filesystem::remove(path);
}
