#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "sthar/config_json.hpp"
#include "sthar/training.hpp"

using namespace sthar;
namespace fs = std::filesystem;

namespace {

SyntheticSpec tiny_spec() {
    SyntheticSpec spec;
    spec.clips_per_class = 4;
    spec.subjects = 4;
    spec.clip_length = 32;
    spec.noise = 0.0;
    spec.seed = 3;
    return spec;
}

ModelConfig tiny_model() {
    ModelConfig cfg;
    cfg.kind = ModelKind::CnnBaseline;
    cfg.context = 4;
    cfg.contexts = {4};
    cfg.d_model = 8;
    cfg.heads = 2;
    cfg.depth = 1;
    cfg.d_ff = 8;
    cfg.feature_len = 8;
    cfg.lstm_hidden = 4;
    cfg.seed = 2;
    return cfg;
}

}  // namespace

TEST_CASE("adam's first step moves every coordinate by exactly lr") {
    // After one update m̂/( √v̂ + ε ) = g/|g| up to ε, so |Δ| = lr.
    ParamStore<double> store;
    store.add("p", Tensor64({1, 3}, std::vector<double>{1.0, 2.0, 3.0}));
    store.get("p").grad() = {0.4, -0.2, 7.0};
    OptimState state;
    adam_step(store, state, 0.1, 0.9, 0.999, 1e-8);
    const auto& after = store.get("p").data();
    CHECK(after[0] == doctest::Approx(1.0 - 0.1).epsilon(1e-6));
    CHECK(after[1] == doctest::Approx(2.0 + 0.1).epsilon(1e-6));
    CHECK(after[2] == doctest::Approx(3.0 - 0.1).epsilon(1e-6));
    CHECK(state.step == 1);
}

TEST_CASE("sgd with momentum accumulates velocity") {
    ParamStore<double> store;
    store.add("p", Tensor64({1, 1}, std::vector<double>{0.0}));
    OptimState state;
    auto grad_step = [&] {
        store.get("p").grad() = {1.0};
        sgd_momentum_step(store, state, 0.1, 0.9);
    };
    grad_step();
    CHECK(store.get("p").data()[0] == doctest::Approx(-0.1));
    grad_step();  // velocity 0.9·0.1 + 0.1 = 0.19
    CHECK(store.get("p").data()[0] == doctest::Approx(-0.29));
}

TEST_CASE("gradient clipping rescales the global norm") {
    ParamStore<double> store;
    store.add("a", Tensor64({1, 1}, std::vector<double>{0.0}));
    store.add("b", Tensor64({1, 1}, std::vector<double>{0.0}));
    store.get("a").grad() = {3.0};
    store.get("b").grad() = {4.0};
    clip_grad_norm(store, 1.0);
    CHECK(store.get("a").grad()[0] == doctest::Approx(0.6));
    CHECK(store.get("b").grad()[0] == doctest::Approx(0.8));

    store.get("a").grad() = {0.3};
    store.get("b").grad() = {0.4};
    clip_grad_norm(store, 1.0);  // under the cap: untouched
    CHECK(store.get("a").grad()[0] == doctest::Approx(0.3));
}

TEST_CASE("checkpoints round-trip through the binary format") {
    ModelConfig mc = tiny_model();
    ParamStore<float> store;
    init_model_params(mc, store);
    OptimState optim;
    optim.step = 7;
    optim.m["cnn.conv0.k"] = {1.5, -2.5};
    optim.v["cnn.conv0.k"] = {0.25, 0.75};
    TrainConfig tc;
    tc.seed = 11;
    tc.split_seed = 13;

    Checkpoint ckpt = store_to_checkpoint(mc, store, optim, tc);
    const fs::path path = fs::temp_directory_path() / "sthar_ckpt_test.bin";
    save_checkpoint(ckpt, path);
    Checkpoint back = load_checkpoint(path);
    fs::remove(path);

    CHECK(back.model.kind == mc.kind);
    CHECK(back.model.context == mc.context);
    CHECK(back.names == ckpt.names);
    CHECK(back.values == ckpt.values);
    CHECK(back.optim.step == 7);
    CHECK(back.optim.m.at("cnn.conv0.k") == std::vector<double>{1.5, -2.5});
    CHECK(back.optim.v.at("cnn.conv0.k") == std::vector<double>{0.25, 0.75});
    CHECK(back.train_seed == 11);
    CHECK(back.split_seed == 13);
    CHECK(back.train_ratio == tc.train_ratio);

    ParamStore<float> restored = checkpoint_to_store<float>(back);
    for (auto& [name, t] : store) CHECK(restored.get(name).data() == t.data());
}

TEST_CASE("loading a non-checkpoint file fails cleanly") {
    const fs::path path = fs::temp_directory_path() / "sthar_ckpt_bad.bin";
    std::ofstream(path) << "garbage";
    CHECK_THROWS_AS(load_checkpoint(path), IoError);
    fs::remove(path);
}

TEST_CASE("max_steps = 0 performs no parameter updates") {
    Dataset ds = synth_generate(tiny_spec());
    SplitSpec split = split_by_subject(ds, 0.5, 0.25, 0.25, 1);
    ModelConfig mc = tiny_model();
    TrainConfig tc;
    tc.epochs = 3;
    tc.max_steps = 0;

    ParamStore<float> fresh;
    init_model_params(mc, fresh);
    auto out = train<float>(mc, ds, split, tc);
    CHECK(out.metrics.steps == 0);
    for (auto& [name, t] : out.best_store) CHECK(t.data() == fresh.get(name).data());
}

TEST_CASE("training runs are seed-deterministic") {
    Dataset ds = synth_generate(tiny_spec());
    SplitSpec split = split_by_subject(ds, 0.5, 0.25, 0.25, 1);
    ModelConfig mc = tiny_model();
    TrainConfig tc;
    tc.epochs = 2;
    tc.seed = 21;

    auto a = train<float>(mc, ds, split, tc);
    auto b = train<float>(mc, ds, split, tc);
    CHECK(metrics_to_json(a.metrics) == metrics_to_json(b.metrics));
    for (auto& [name, t] : a.best_store) CHECK(t.data() == b.best_store.get(name).data());
    CHECK(a.metrics.wall_seconds == 0.0);
    CHECK(a.metrics.steps > 0);
    CHECK(a.metrics.train_loss.size() == 2);
}

TEST_CASE("evaluate fills the confusion matrix and skips short clips") {
    Dataset ds = synth_generate(tiny_spec());
    ds.clips[0].frames = 2;  // too short for context 4
    ds.clips[0].pixels.resize(2 * ds.clips[0].frame_bytes());
    ModelConfig mc = tiny_model();
    ParamStore<float> store;
    init_model_params(mc, store);
    std::set<std::string> subjects{"subj00", "subj01", "subj02", "subj03"};
    Metrics m = evaluate(mc, store, ds, subjects, mc.context);
    CHECK(m.skipped_short_clips == 1);
    std::size_t total = 0;
    for (const auto& row : m.confusion)
        for (std::size_t v : row) total += v;
    CHECK(total == ds.clips.size() - 1);
}

TEST_CASE("config json round-trips") {
    ModelConfig mc = tiny_model();
    mc.kind = ModelKind::VitOnly;
    ModelConfig mc2 = model_config_from_json(model_config_to_json(mc));
    CHECK(mc2.kind == mc.kind);
    CHECK(mc2.context == mc.context);
    CHECK(mc2.contexts == mc.contexts);
    CHECK(mc2.d_model == mc.d_model);
    CHECK(mc2.patch == mc.patch);
    CHECK(mc2.seed == mc.seed);

    TrainConfig tc;
    tc.optimizer = OptimizerKind::SgdMomentum;
    tc.lr = 0.05;
    tc.max_steps = 9;
    tc.deterministic = false;
    TrainConfig tc2 = train_config_from_json(train_config_to_json(tc));
    CHECK(tc2.optimizer == tc.optimizer);
    CHECK(tc2.lr == tc.lr);
    CHECK(tc2.max_steps == tc.max_steps);
    CHECK(tc2.deterministic == tc.deterministic);

    SyntheticSpec sp = tiny_spec();
    SyntheticSpec sp2 = synth_spec_from_json(synth_spec_to_json(sp));
    CHECK(sp2.clips_per_class == sp.clips_per_class);
    CHECK(sp2.noise == sp.noise);
    CHECK(sp2.seed == sp.seed);
}

TEST_CASE("metrics json has stable ordered keys") {
    Metrics m;
    m.train_loss = {1.5};
    m.train_acc = {0.5};
    m.val_acc = {0.25};
    m.test_acc = 0.75;
    m.confusion = {{1, 0}, {0, 1}};
    m.steps = 4;
    const std::string j = metrics_to_json(m);
    CHECK(j.find("\"train_loss\"") < j.find("\"train_acc\""));
    CHECK(j.find("\"train_acc\"") < j.find("\"val_acc\""));
    CHECK(j.find("\"val_acc\"") < j.find("\"test_acc\""));
    CHECK(j.find("\"confusion\"") != std::string::npos);
    CHECK(j.find("\"wall_seconds\"") != std::string::npos);
    CHECK(metrics_to_json(m) == metrics_to_json(m));
}
