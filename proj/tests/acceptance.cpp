// Acceptance gate: runs every top-level criterion at its stated tolerance
// and prints one PASS/FAIL line per criterion. Exits nonzero on any failure.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <vector>

#include "sthar/config_json.hpp"
#include "sthar/gradcheck_suites.hpp"
#include "sthar/models.hpp"
#include "sthar/training.hpp"

using namespace sthar;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(const std::string& name, bool ok, const std::string& detail = "") {
    std::cout << (ok ? "PASS" : "FAIL") << " " << name;
    if (!detail.empty()) std::cout << " (" << detail << ")";
    std::cout << std::endl;
    if (!ok) ++g_failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string read_file(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

// --- criterion 1: gradient suite ---------------------------------------------

void check_gradient_suite() {
    const auto t0 = std::chrono::steady_clock::now();
    bool ok = true;
    std::string worst;
    for (const auto& suite : {gradcheck_ops(), gradcheck_cells(), gradcheck_models()})
        for (const auto& c : suite)
            if (!c.passed()) {
                ok = false;
                worst = c.name;
            }
    const double secs = seconds_since(t0);
    std::ostringstream detail;
    detail << "ops<1e-6 cells<1e-5 models<1e-4, " << secs << " s";
    if (!worst.empty()) detail << ", failed: " << worst;
    report("gradient suite", ok && secs < 120.0, detail.str());
}

// --- criterion 2: cell oracles ------------------------------------------------

// Scalar-loop references, independent of the tensor ops.
using Vec = std::vector<double>;

Vec preact(const Tensor64& W, const Tensor64& U, const Tensor64& b, const Vec& h, const Vec& x) {
    Vec out(W.rows());
    for (std::size_t i = 0; i < W.rows(); ++i) {
        double acc = b.data()[i];
        for (std::size_t j = 0; j < W.cols(); ++j) acc += W.at(i, j) * h[j];
        for (std::size_t j = 0; j < U.cols(); ++j) acc += U.at(i, j) * x[j];
        out[i] = acc;
    }
    return out;
}

double sig(double v) { return 1.0 / (1.0 + std::exp(-v)); }

void check_cell_oracles() {
    const std::size_t n_h = 6, n_x = 4;
    double worst = 0.0;

    {
        std::mt19937_64 rng(101);
        auto p = LstmParams<double>::make(n_h, n_x, rng);
        Tensor64 h = Tensor64::zeros({n_h, 1}), c = Tensor64::zeros({n_h, 1});
        Vec oh(n_h, 0.0), oc(n_h, 0.0);
        for (int t = 0; t < 1000; ++t) {
            Tensor64 x = Tensor64::uniform({n_x, 1}, -1, 1, rng);
            auto [hn, cn] = lstm_step(p, h, c, x);
            h = hn;
            c = cn;
            Vec f = preact(p.f.W, p.f.U, p.f.b, oh, x.data());
            Vec i = preact(p.i.W, p.i.U, p.i.b, oh, x.data());
            Vec cd = preact(p.c.W, p.c.U, p.c.b, oh, x.data());
            Vec o = preact(p.o.W, p.o.U, p.o.b, oh, x.data());
            for (std::size_t k = 0; k < n_h; ++k) {
                oc[k] = sig(f[k]) * oc[k] + sig(i[k]) * std::tanh(cd[k]);
                oh[k] = std::tanh(oc[k]) * sig(o[k]);
            }
            for (std::size_t k = 0; k < n_h; ++k) {
                worst = std::max(worst, std::abs(h.data()[k] - oh[k]));
                worst = std::max(worst, std::abs(c.data()[k] - oc[k]));
            }
        }
    }
    {
        std::mt19937_64 rng(102);
        auto p = GruParams<double>::make(n_h, n_x, rng);
        Tensor64 h = Tensor64::zeros({n_h, 1});
        Vec oh(n_h, 0.0);
        for (int t = 0; t < 1000; ++t) {
            Tensor64 x = Tensor64::uniform({n_x, 1}, -1, 1, rng);
            h = gru_step(p, h, x);
            Vec z = preact(p.z.W, p.z.U, p.z.b, oh, x.data());
            Vec r = preact(p.r.W, p.r.U, p.r.b, oh, x.data());
            Vec rh(n_h);
            for (std::size_t k = 0; k < n_h; ++k) rh[k] = sig(r[k]) * oh[k];
            Vec cd = preact(p.h.W, p.h.U, p.h.b, rh, x.data());
            for (std::size_t k = 0; k < n_h; ++k)
                oh[k] = sig(z[k]) * std::tanh(cd[k]) + (1.0 - sig(z[k])) * oh[k];
            for (std::size_t k = 0; k < n_h; ++k)
                worst = std::max(worst, std::abs(h.data()[k] - oh[k]));
        }
    }
    std::ostringstream detail;
    detail << "1000 LSTM + 1000 GRU steps, max |diff| = " << worst;
    report("cell oracles vs scalar references (<=1e-10)", worst <= 1e-10, detail.str());
}

// --- criterion 3: attention invariants -----------------------------------------

void check_attention_invariants() {
    std::mt19937_64 rng(103);
    double worst = 0.0;

    Tensor64 Q = Tensor64::uniform({5, 6}, -2, 2, rng);
    Tensor64 K = Tensor64::uniform({7, 6}, -2, 2, rng);
    Tensor64 V = Tensor64::uniform({7, 4}, -2, 2, rng);
    auto [out, w] = scaled_dot_attention(Q, K, V);
    for (std::size_t r = 0; r < w.rows(); ++r) {
        double s = 0;
        for (std::size_t c = 0; c < w.cols(); ++c) s += w.at(r, c);
        worst = std::max(worst, std::abs(s - 1.0));
    }

    MhaParams<double> single = MhaParams<double>::make(4, 1, rng);
    single.Wo = Tensor64::identity(4);
    Tensor64 X = Tensor64::uniform({5, 4}, -1, 1, rng);
    auto [direct, dw] = scaled_dot_attention(
        matmul(X, single.heads[0].Wq), matmul(X, single.heads[0].Wk),
        matmul(X, single.heads[0].Wv));
    Tensor64 viaMha = multi_head(X, single);
    for (std::size_t i = 0; i < direct.size(); ++i)
        worst = std::max(worst, std::abs(direct.data()[i] - viaMha.data()[i]));

    MhaParams<double> p = MhaParams<double>::make(4, 2, rng);
    std::vector<std::size_t> perm{3, 0, 4, 2, 1};
    Tensor64 Xp({5, 4});
    for (std::size_t r = 0; r < 5; ++r)
        for (std::size_t c = 0; c < 4; ++c) Xp.at(r, c) = X.at(perm[r], c);
    Tensor64 Y = multi_head(X, p);
    Tensor64 Yp = multi_head(Xp, p);
    for (std::size_t r = 0; r < 5; ++r)
        for (std::size_t c = 0; c < 4; ++c)
            worst = std::max(worst, std::abs(Yp.at(r, c) - Y.at(perm[r], c)));

    std::ostringstream detail;
    detail << "row sums, H=1 equivalence, permutation equivariance; max |diff| = " << worst;
    report("attention invariants (<=1e-12)", worst <= 1e-12, detail.str());
}

// --- criterion 4: architecture contrast ----------------------------------------

ModelConfig tiny_hybrid() {
    ModelConfig cfg;
    cfg.kind = ModelKind::Hybrid;
    cfg.num_classes = 6;
    cfg.context = 6;
    cfg.contexts = {6};
    cfg.d_model = 16;
    cfg.heads = 2;
    cfg.depth = 1;
    cfg.d_ff = 16;
    cfg.feature_len = 16;
    cfg.lstm_hidden = 8;
    cfg.seed = 0;
    return cfg;
}

void check_architecture_contrast() {
    ModelConfig hybrid = tiny_hybrid();
    ModelConfig baseline = hybrid;
    baseline.kind = ModelKind::CnnBaseline;

    ParamStore<double> hstore, bstore;
    init_model_params(hybrid, hstore);
    init_model_params(baseline, bstore);

    std::mt19937_64 rng(104);
    std::vector<Tensor64> clip;
    for (std::size_t t = 0; t < 6; ++t) clip.push_back(Tensor64::uniform({1, 16, 16}, 0, 1, rng));
    std::vector<Tensor64> swapped = clip;
    std::swap(swapped[1], swapped[4]);

    Tensor64 h0 = model_logits(hybrid, hstore, clip);
    Tensor64 h1 = model_logits(hybrid, hstore, swapped);
    double hybrid_diff = 0;
    for (std::size_t i = 0; i < h0.size(); ++i)
        hybrid_diff = std::max(hybrid_diff, std::abs(h0.data()[i] - h1.data()[i]));

    Tensor64 b0 = model_logits(baseline, bstore, clip);
    Tensor64 b1 = model_logits(baseline, bstore, swapped);
    bool baseline_identical = b0.data() == b1.data();

    std::ostringstream detail;
    detail << "hybrid max |dlogit| = " << hybrid_diff << ", baseline bit-identical = "
           << (baseline_identical ? "yes" : "no");
    report("architecture contrast (order sensitivity vs invariance)",
           hybrid_diff > 0.0 && baseline_identical, detail.str());
}

// --- criterion 5: overfit sanity ------------------------------------------------

void check_overfit_sanity() {
    const auto t0 = std::chrono::steady_clock::now();

    SyntheticSpec spec;
    spec.clips_per_class = 2;  // 12 clips
    spec.subjects = 2;
    spec.clip_length = 32;
    spec.seed = 0;
    Dataset ds = synth_generate(spec);

    ModelConfig cfg = tiny_hybrid();
    ParamStore<float> store;
    init_model_params(cfg, store);
    OptimState optim;
    TrainConfig tc;
    tc.seed = 0;

    auto train_accuracy = [&] {
        std::size_t correct = 0;
        for (const auto& clip : ds.clips) {
            const std::size_t start =
                sample_window_start(clip.frames, cfg.context, WindowMode::Center, 0);
            auto frames = clip_window_tensors<float>(clip, start, cfg.context);
            correct += predict(model_forward(cfg, store, frames)) == clip.label;
        }
        return double(correct) / double(ds.clips.size());
    };

    std::size_t steps = 0;
    double acc = train_accuracy();
    const std::size_t batch = 4;
    std::mt19937_64 order_rng(0);
    while (acc < 1.0 && steps < 500) {
        std::vector<std::size_t> order(ds.clips.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::shuffle(order.begin(), order.end(), order_rng);
        for (std::size_t pos = 0; pos < order.size() && steps < 500; pos += batch) {
            const std::size_t bend = std::min(pos + batch, order.size());
            store.zero_grad();
            for (std::size_t bi = pos; bi < bend; ++bi) {
                const auto& clip = ds.clips[order[bi]];
                const std::size_t start = sample_window_start(
                    clip.frames, cfg.context, WindowMode::Random, steps * 131 + bi);
                auto frames = clip_window_tensors<float>(clip, start, cfg.context);
                Tensor32 loss = scale(cross_entropy(model_forward(cfg, store, frames), clip.label),
                                      float(1.0 / double(bend - pos)));
                loss.backward();
            }
            clip_grad_norm(store, 5.0);
            adam_step(store, optim, tc.lr, tc.beta1, tc.beta2, tc.eps);
            ++steps;
        }
        acc = train_accuracy();
    }
    const double secs = seconds_since(t0);
    std::ostringstream detail;
    detail << "100% train accuracy after " << steps << " steps, " << secs << " s";
    report("overfit sanity (12 clips, <=500 steps, <60 s)", acc == 1.0 && steps <= 500 &&
           secs < 60.0, detail.str());
}

// --- criterion 6: toy benchmark --------------------------------------------------

void check_toy_benchmark() {
    const auto t0 = std::chrono::steady_clock::now();

    SyntheticSpec spec;  // defaults: 100 clips/class, 16x16, length 32, 10 subjects
    spec.seed = 0;
    Dataset ds = synth_generate(spec);

    ModelConfig cfg;  // defaults: hybrid, d_model 128, H 4, depth 2
    cfg.context = 24;
    cfg.seed = 0;
    TrainConfig tc;
    tc.epochs = 45;
    tc.seed = 0;
    tc.split_seed = 0;

    SplitSpec split = split_by_subject(ds, 0.6, 0.2, 0.2, tc.split_seed);
    auto result = train<float>(cfg, ds, split, tc);
    Metrics test = evaluate(cfg, result.best_store, ds, split.test, cfg.context);
    const double secs = seconds_since(t0);

    std::ostringstream detail;
    detail << "hybrid@24 test accuracy = " << test.test_acc << " in " << secs << " s";
    report("toy benchmark (>=90% in <=15 min)", test.test_acc >= 0.90 && secs <= 900.0,
           detail.str());
}

void check_compare_grid(const fs::path& work) {
    const fs::path cfg_path = work / "compare_config.json";
    {
        nlohmann::ordered_json j;
        j["data"]["synthetic"] = {{"clips_per_class", 12}, {"subjects", 6}, {"seed", 0}};
        j["model"] = model_config_to_json(ModelConfig{});
        TrainConfig tc;
        tc.epochs = 1;
        tc.max_steps = 10;
        j["train"] = train_config_to_json(tc);
        std::ofstream(cfg_path) << j.dump(2);
    }
    const fs::path out = work / "compare";
    std::string cmd = std::string(STHAR_CLI_PATH) + " compare --config " + cfg_path.string() +
                      " --contexts 12,18,24 --models hybrid,vit_only,cnn_baseline --out " +
                      out.string() + " --force > " + (work / "compare.log").string() + " 2>&1";
    const int rc = std::system(cmd.c_str());

    std::size_t populated = 0;
    std::ifstream csv(out / "compare.csv");
    std::string line;
    std::getline(csv, line);  // header
    bool header_ok = line == "context,model,accuracy,seconds";
    while (std::getline(csv, line))
        if (!line.empty() && line.find("failed") == std::string::npos) ++populated;

    std::ostringstream detail;
    detail << "exit=" << rc << ", header " << (header_ok ? "ok" : "bad") << ", " << populated
           << "/9 cells populated";
    report("comparison grid (3 models x 3 contexts)", rc == 0 && header_ok && populated == 9,
           detail.str());
}

// --- criterion 7: determinism ----------------------------------------------------

void check_determinism(const fs::path& work) {
    const fs::path cfg_path = work / "det_config.json";
    {
        nlohmann::ordered_json j;
        j["data"]["synthetic"] = {{"clips_per_class", 6}, {"subjects", 6}, {"seed", 0}};
        ModelConfig mc = tiny_hybrid();
        mc.contexts = {6, 12, 18, 24};
        j["model"] = model_config_to_json(mc);
        TrainConfig tc;
        tc.epochs = 2;
        j["train"] = train_config_to_json(tc);
        std::ofstream(cfg_path) << j.dump(2);
    }
    auto run = [&](const std::string& name) {
        const fs::path out = work / name;
        std::string cmd = std::string(STHAR_CLI_PATH) + " train --config " + cfg_path.string() +
                          " --out " + out.string() + " --force > " +
                          (work / (name + ".log")).string() + " 2>&1";
        return std::system(cmd.c_str()) == 0;
    };
    const bool ran = run("det_a") && run("det_b");
    const std::string ma = read_file(work / "det_a" / "metrics.json");
    const std::string mb = read_file(work / "det_b" / "metrics.json");
    const bool metrics_identical = ran && !ma.empty() && ma == mb;

    // Checkpoint round-trip: logits on a probe clip must be bit-identical.
    bool logits_identical = false;
    if (ran) {
        Checkpoint ckpt = load_checkpoint(work / "det_a" / "checkpoint.bin");
        auto store = checkpoint_to_store<float>(ckpt);
        SyntheticSpec spec;
        spec.clips_per_class = 1;
        spec.subjects = 1;
        spec.seed = 42;
        Dataset probe = synth_generate(spec);
        auto frames = clip_window_tensors<float>(probe.clips[0], 0, ckpt.model.context);
        Tensor32 before = model_logits(ckpt.model, store, frames);

        save_checkpoint(ckpt, work / "roundtrip.bin");
        Checkpoint back = load_checkpoint(work / "roundtrip.bin");
        auto store2 = checkpoint_to_store<float>(back);
        Tensor32 after = model_logits(back.model, store2, frames);
        logits_identical = before.data() == after.data();
    }

    std::ostringstream detail;
    detail << "metrics byte-identical = " << (metrics_identical ? "yes" : "no")
           << ", round-trip logits bit-identical = " << (logits_identical ? "yes" : "no");
    report("determinism (cmd_train + checkpoint round-trip)",
           metrics_identical && logits_identical, detail.str());
}

// --- criterion 8: closed-form spot values ----------------------------------------

void check_spot_values() {
    bool ok = true;
    std::ostringstream detail;

    Tensor64 sm = softmax_rows(Tensor64({1, 2}, {0.0, std::log(3.0)}));
    ok = ok && std::abs(sm.data()[0] - 0.25) <= 1e-10 && std::abs(sm.data()[1] - 0.75) <= 1e-10;
    detail << "softmax([0,ln3])=[" << sm.data()[0] << "," << sm.data()[1] << "]";

    const double ce = neg_log_prob(Tensor64::full({1, 6}, 1.0 / 6.0), 0).item();
    ok = ok && std::abs(ce - std::log(6.0)) <= 1e-10;
    detail << ", uniform CE=" << ce;

    LstmParams<double> zero{
        {Tensor64::zeros({1, 1}), Tensor64::zeros({1, 1}), Tensor64::zeros({1, 1})},
        {Tensor64::zeros({1, 1}), Tensor64::zeros({1, 1}), Tensor64::zeros({1, 1})},
        {Tensor64::zeros({1, 1}), Tensor64::zeros({1, 1}), Tensor64::zeros({1, 1})},
        {Tensor64::zeros({1, 1}), Tensor64::zeros({1, 1}), Tensor64::zeros({1, 1})}};
    auto [h, c] = lstm_step(zero, Tensor64::zeros({1, 1}), Tensor64::full({1, 1}, 1.0),
                            Tensor64::zeros({1, 1}));
    ok = ok && std::abs(h.item() - 0.23106) <= 1e-5;
    detail << ", zero-LSTM h=" << h.item();

    report("closed-form spot values", ok, detail.str());
}

}  // namespace

int main() {
    const fs::path work = fs::temp_directory_path() / "sthar_acceptance";
    fs::remove_all(work);
    fs::create_directories(work);

    check_spot_values();
    check_cell_oracles();
    check_attention_invariants();
    check_architecture_contrast();
    check_gradient_suite();
    check_overfit_sanity();
    check_determinism(work);
    check_compare_grid(work);
    check_toy_benchmark();

    std::cout << (g_failures == 0 ? "ACCEPTANCE PASSED" : "ACCEPTANCE FAILED") << " ("
              << g_failures << " failing criteria)" << std::endl;
    return g_failures == 0 ? 0 : 1;
}
