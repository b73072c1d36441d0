#pragma once

// The three verification suites behind `sthar gradcheck`: per-op, per-cell
// and per-model finite-difference checks, all in 64-bit.

#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "sthar/attention.hpp"
#include "sthar/gradcheck.hpp"
#include "sthar/models.hpp"
#include "sthar/recurrent.hpp"
#include "sthar/training.hpp"
#include "sthar/vision.hpp"

namespace sthar {

struct SuiteCheck {
    std::string name;
    double tolerance;
    double max_rel_err;
    bool passed() const { return max_rel_err < tolerance; }
};

// Like check_gradients, but probes at most max_coords seeded-random
// coordinates per parameter tensor. Analytic gradients for every coordinate
// still come from one full backward pass; only the FD probing is sampled,
// which keeps whole-model checks inside the time budget.
inline GradCheckReport check_gradients_sampled(ParamStore<double>& store,
                                               const std::function<Tensor64()>& loss_fn,
                                               std::size_t max_coords, std::uint64_t seed,
                                               double h = 1e-5) {
    store.zero_grad();
    loss_fn().backward();
    std::vector<std::vector<double>> analytic;
    for (auto& [name, t] : store) analytic.push_back(t.grad());
    const double l0 = loss_fn().item();

    std::mt19937_64 rng(seed);
    GradCheckReport report;
    std::size_t pi = 0;
    for (auto& [name, t] : store) {
        std::vector<std::size_t> coords(t.size());
        for (std::size_t i = 0; i < coords.size(); ++i) coords[i] = i;
        if (coords.size() > max_coords) {
            std::shuffle(coords.begin(), coords.end(), rng);
            coords.resize(max_coords);
        }
        GradCheckEntry entry{name, 0.0};
        for (std::size_t i : coords) {
            const double orig = t.data()[i];
            t.data()[i] = orig + h;
            const double lp = loss_fn().item();
            t.data()[i] = orig - h;
            const double lm = loss_fn().item();
            t.data()[i] = orig;
            // Maxpool/relu kinks make the loss piecewise: when the two
            // one-sided slopes disagree the probe straddles a kink and the
            // central difference is meaningless, so skip that coordinate.
            // A wrong analytic gradient still fails on the consistent ones.
            const double slope_p = (lp - l0) / h;
            const double slope_m = (l0 - lm) / h;
            if (rel_err(slope_p, slope_m) > 1e-2) continue;
            const double fd = (lp - lm) / (2 * h);
            // Below this the difference is central-difference round-off
            // (eps·|L|/h), not gradient error.
            const double noise =
                100 * std::numeric_limits<double>::epsilon() * (std::abs(l0) + 1.0) / h;
            if (std::abs(analytic[pi][i] - fd) <= noise) continue;
            entry.max_rel_err = std::max(entry.max_rel_err, rel_err(analytic[pi][i], fd));
        }
        report.max_rel_err = std::max(report.max_rel_err, entry.max_rel_err);
        report.entries.push_back(std::move(entry));
        ++pi;
    }
    return report;
}

namespace gradcheck_detail {

// Fixed random weighting makes the loss sensitive to every output element.
inline Tensor64 weighted_sum(const Tensor64& x, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Tensor64 w = Tensor64::uniform(x.shape(), -1.0, 1.0, rng);
    return sum_all(mul(x, w));
}

}  // namespace gradcheck_detail

inline std::vector<SuiteCheck> gradcheck_ops(double tol = 1e-6) {
    using gradcheck_detail::weighted_sum;
    std::vector<SuiteCheck> checks;
    auto run = [&](const std::string& name, ParamStore<double>& store,
                   const std::function<Tensor64()>& loss) {
        checks.push_back({name, tol, check_gradients(store, loss).max_rel_err});
    };

    {
        std::mt19937_64 rng(1);
        ParamStore<double> s;
        s.add("A", Tensor64::uniform({3, 4}, -1, 1, rng));
        s.add("B", Tensor64::uniform({4, 2}, -1, 1, rng));
        run("matmul", s, [&] { return weighted_sum(tanh_t(matmul(s.get("A"), s.get("B"))), 7); });
    }
    {
        std::mt19937_64 rng(2);
        ParamStore<double> s;
        s.add("x", Tensor64::uniform({2, 6, 6}, -1, 1, rng));
        s.add("k", Tensor64::uniform({3, 2, 3, 3}, -1, 1, rng));
        s.add("b", Tensor64::uniform({3}, -1, 1, rng));
        run("conv2d", s, [&] {
            return weighted_sum(tanh_t(conv2d(s.get("x"), s.get("k"), s.get("b"), 2, 1)), 8);
        });
    }
    {
        std::mt19937_64 rng(3);
        ParamStore<double> s;
        s.add("x", Tensor64::uniform({3, 5}, -2, 2, rng));
        run("softmax_rows", s, [&] { return weighted_sum(softmax_rows(s.get("x")), 9); });
    }
    const std::pair<Act, const char*> kinds[] = {{Act::Tanh, "tanh"},
                                                 {Act::Sigmoid, "sigmoid"},
                                                 {Act::Relu, "relu"},
                                                 {Act::Elu, "elu"}};
    for (auto [kind, name] : kinds) {
        std::mt19937_64 rng(4);
        ParamStore<double> s;
        // Offset keeps relu inputs away from the kink at 0.
        s.add("x", Tensor64::uniform({4, 4}, 0.1, 2.0, rng));
        s.add("y", Tensor64::uniform({4, 4}, -2.0, -0.1, rng));
        Act k = kind;
        run(std::string("activation_") + name, s, [&s, k] {
            return weighted_sum(add(activation(s.get("x"), k), activation(s.get("y"), k)), 10);
        });
    }
    {
        std::mt19937_64 rng(5);
        ParamStore<double> s;
        s.add("x", Tensor64::uniform({2, 4, 4}, -1, 1, rng));
        run("maxpool2", s, [&] { return weighted_sum(maxpool2(s.get("x")), 11); });
    }
    {
        std::mt19937_64 rng(6);
        ParamStore<double> s;
        s.add("x", Tensor64::uniform({3, 8}, -1, 1, rng));
        s.add("gain", Tensor64::uniform({1, 8}, 0.5, 1.5, rng));
        s.add("offset", Tensor64::uniform({1, 8}, -0.5, 0.5, rng));
        run("layer_norm_rows", s, [&] {
            return weighted_sum(layer_norm_rows(s.get("x"), s.get("gain"), s.get("offset")), 12);
        });
    }
    {
        std::mt19937_64 rng(7);
        ParamStore<double> s;
        s.add("x", Tensor64::uniform({2, 6}, -1, 1, rng));
        s.add("b", Tensor64::uniform({1, 6}, -1, 1, rng));
        run("add_bias_rows", s, [&] {
            return weighted_sum(tanh_t(add_bias_rows(s.get("x"), s.get("b"))), 13);
        });
    }
    {
        std::mt19937_64 rng(8);
        ParamStore<double> s;
        s.add("x", Tensor64::uniform({4, 3}, -1, 1, rng));
        run("mean_rows_transpose", s, [&] {
            return weighted_sum(transpose(mean_rows(tanh_t(s.get("x")))), 14);
        });
    }
    {
        std::mt19937_64 rng(9);
        ParamStore<double> s;
        s.add("f", Tensor64::uniform({1, 8, 8}, -1, 1, rng));
        run("patchify", s, [&] { return weighted_sum(tanh_t(patchify(s.get("f"), 4)), 15); });
    }
    return checks;
}

inline std::vector<SuiteCheck> gradcheck_cells(double tol = 1e-5) {
    using gradcheck_detail::weighted_sum;
    std::vector<SuiteCheck> checks;
    const std::size_t n_h = 3, n_x = 2;

    {
        std::mt19937_64 rng(21);
        ParamStore<double> s;
        RnnCellParams<double>::make(n_h, n_x, rng).register_in(s, "rnn");
        Tensor64 h0 = Tensor64::uniform({n_h, 1}, -1, 1, rng);
        Tensor64 x = Tensor64::uniform({n_x, 1}, -1, 1, rng);
        auto loss = [&] {
            return weighted_sum(
                vanilla_step(RnnCellParams<double>::from_store(s, "rnn"), h0, x), 31);
        };
        checks.push_back({"vanilla_step", tol, check_gradients(s, loss).max_rel_err});
    }
    {
        std::mt19937_64 rng(22);
        ParamStore<double> s;
        LstmParams<double>::make(n_h, n_x, rng).register_in(s, "lstm");
        Tensor64 h0 = Tensor64::uniform({n_h, 1}, -1, 1, rng);
        Tensor64 c0 = Tensor64::uniform({n_h, 1}, -1, 1, rng);
        Tensor64 x = Tensor64::uniform({n_x, 1}, -1, 1, rng);
        auto loss = [&] {
            auto [h, c] = lstm_step(LstmParams<double>::from_store(s, "lstm"), h0, c0, x);
            return add(weighted_sum(h, 32), weighted_sum(c, 33));
        };
        checks.push_back({"lstm_step", tol, check_gradients(s, loss).max_rel_err});
    }
    {
        std::mt19937_64 rng(23);
        ParamStore<double> s;
        GruParams<double>::make(n_h, n_x, rng).register_in(s, "gru");
        Tensor64 h0 = Tensor64::uniform({n_h, 1}, -1, 1, rng);
        Tensor64 x = Tensor64::uniform({n_x, 1}, -1, 1, rng);
        auto loss = [&] {
            return weighted_sum(gru_step(GruParams<double>::from_store(s, "gru"), h0, x), 34);
        };
        checks.push_back({"gru_step", tol, check_gradients(s, loss).max_rel_err});
    }
    // Many-to-one runs, T=4.
    for (auto kind : {CellKind::Vanilla, CellKind::Lstm, CellKind::Gru}) {
        std::mt19937_64 rng(40);
        ParamStore<double> s;
        if (kind == CellKind::Vanilla) RnnCellParams<double>::make(n_h, n_x, rng).register_in(s, "c");
        if (kind == CellKind::Lstm) LstmParams<double>::make(n_h, n_x, rng).register_in(s, "c");
        if (kind == CellKind::Gru) GruParams<double>::make(n_h, n_x, rng).register_in(s, "c");
        std::vector<Tensor64> xs;
        for (int t = 0; t < 4; ++t) xs.push_back(Tensor64::uniform({n_x, 1}, -1, 1, rng));
        auto loss = [&, kind] {
            CellParamsAny<double> p{kind, std::nullopt, std::nullopt, std::nullopt};
            if (kind == CellKind::Vanilla) p.vanilla = RnnCellParams<double>::from_store(s, "c");
            if (kind == CellKind::Lstm) p.lstm = LstmParams<double>::from_store(s, "c");
            if (kind == CellKind::Gru) p.gru = GruParams<double>::from_store(s, "c");
            return weighted_sum(run_many_to_one(p, xs), 35);
        };
        const char* name = kind == CellKind::Vanilla ? "run_many_to_one_vanilla"
                           : kind == CellKind::Lstm  ? "run_many_to_one_lstm"
                                                     : "run_many_to_one_gru";
        checks.push_back({name, tol, check_gradients(s, loss).max_rel_err});
    }
    // Attention pieces share the cell tolerance tier.
    {
        std::mt19937_64 rng(25);
        ParamStore<double> s;
        s.add("Q", Tensor64::uniform({3, 4}, -1, 1, rng));
        s.add("K", Tensor64::uniform({5, 4}, -1, 1, rng));
        s.add("V", Tensor64::uniform({5, 2}, -1, 1, rng));
        auto loss = [&] {
            auto [out, w] = scaled_dot_attention(s.get("Q"), s.get("K"), s.get("V"));
            return gradcheck_detail::weighted_sum(out, 36);
        };
        checks.push_back({"scaled_dot_attention", tol, check_gradients(s, loss).max_rel_err});
    }
    {
        std::mt19937_64 rng(26);
        ParamStore<double> s;
        EncoderBlockParams<double>::make(8, 2, 8, rng).register_in(s, "enc");
        Tensor64 X = Tensor64::uniform({3, 8}, -1, 1, rng);
        auto loss = [&] {
            return gradcheck_detail::weighted_sum(
                encoder_block(X, EncoderBlockParams<double>::from_store(s, "enc", 2)), 37);
        };
        checks.push_back({"encoder_block", tol, check_gradients(s, loss).max_rel_err});
    }
    {
        std::mt19937_64 rng(27);
        ParamStore<double> s;
        s.add("frame", Tensor64::uniform({1, 16, 16}, 0, 1, rng));
        SmallCnnParams<double>::make(1, 16, 16, 4, rng).register_in(s, "cnn");
        auto loss = [&] {
            return gradcheck_detail::weighted_sum(
                cnn_forward(s.get("frame"), SmallCnnParams<double>::from_store(s, "cnn")), 38);
        };
        checks.push_back(
            {"cnn_forward", tol, check_gradients_sampled(s, loss, 64, 99).max_rel_err});
    }
    return checks;
}

inline std::vector<SuiteCheck> gradcheck_models(double tol = 1e-4) {
    std::vector<SuiteCheck> checks;
    for (auto kind : {ModelKind::Hybrid, ModelKind::VitOnly, ModelKind::CnnBaseline,
                      ModelKind::CnnLstm}) {
        ModelConfig cfg;
        cfg.kind = kind;
        cfg.num_classes = 3;
        cfg.context = 3;
        cfg.contexts = {3};
        cfg.frame_channels = 1;
        cfg.frame_height = 16;
        cfg.frame_width = 16;
        cfg.d_model = 8;
        cfg.heads = 2;
        cfg.depth = 1;
        cfg.d_ff = 8;
        cfg.feature_len = 8;
        cfg.patch = 8;
        cfg.lstm_hidden = 4;
        cfg.seed = 5;

        ParamStore<double> store;
        init_model_params(cfg, store);
        std::mt19937_64 rng(77);
        std::vector<Tensor64> clip;
        for (std::size_t t = 0; t < cfg.context; ++t)
            clip.push_back(Tensor64::uniform({1, 16, 16}, 0, 1, rng));
        auto loss = [&] { return cross_entropy(model_forward(cfg, store, clip), 1); };
        checks.push_back({"model_" + model_kind_name(kind), tol,
                          check_gradients_sampled(store, loss, 25, 1234).max_rel_err});
    }
    return checks;
}

}  // namespace sthar
