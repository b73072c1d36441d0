#pragma once

// Loss, optimizers, the training loop, evaluation metrics and the in-memory
// checkpoint representation (binary format lives in checkpoint.cpp).

#include <chrono>
#include <cstdint>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "sthar/data.hpp"
#include "sthar/models.hpp"
#include "sthar/param_store.hpp"
#include "sthar/tensor.hpp"

namespace sthar {

enum class OptimizerKind { Adam, SgdMomentum };

inline std::string optimizer_name(OptimizerKind k) {
    return k == OptimizerKind::Adam ? "adam" : "sgd_momentum";
}
inline OptimizerKind optimizer_from_name(const std::string& s) {
    if (s == "adam") return OptimizerKind::Adam;
    if (s == "sgd_momentum") return OptimizerKind::SgdMomentum;
    throw ConfigError("unknown optimizer '" + s + "'");
}

struct TrainConfig {
    OptimizerKind optimizer = OptimizerKind::Adam;
    double lr = 1e-3;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;  // adam
    double momentum = 0.9;                          // sgd
    std::size_t batch = 8;
    std::size_t epochs = 12;
    long long max_steps = -1;  // <0 unlimited; 0 means no updates at all
    double clip_norm = 5.0;
    std::uint64_t seed = 0;
    bool deterministic = true;
    double train_ratio = 0.6, val_ratio = 0.2, test_ratio = 0.2;
    std::uint64_t split_seed = 0;

    void validate() const {
        if (lr <= 0) throw ConfigError("train: learning rate must be > 0");
        if (batch < 1) throw ConfigError("train: batch size must be >= 1");
    }
};

// Per-parameter moment buffers (adam) or velocity (sgd), keyed by name.
struct OptimState {
    std::map<std::string, std::vector<double>> m, v;
    std::uint64_t step = 0;
};

struct Metrics {
    std::vector<double> train_loss;  // per epoch
    std::vector<double> train_acc;
    std::vector<double> val_acc;
    double test_acc = 0.0;
    std::vector<std::vector<std::size_t>> confusion;  // [true][pred]
    std::size_t skipped_short_clips = 0;
    double wall_seconds = 0.0;
    std::uint64_t steps = 0;
};

// In-memory checkpoint; serialization is in checkpoint.cpp.
struct Checkpoint {
    std::uint32_t version = 1;
    ModelConfig model;
    std::vector<std::string> names;
    std::vector<Shape> shapes;
    std::vector<std::vector<float>> values;
    OptimState optim;
    std::uint64_t train_seed = 0, split_seed = 0;
    double train_ratio = 0.6, val_ratio = 0.2, test_ratio = 0.2;
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// --- loss --------------------------------------------------------------------

// −log(prob[label]) with probabilities clamped at 1e-12.
template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& distribution, std::size_t label) {
    return neg_log_prob(distribution, label);
}

// --- optimizer steps -----------------------------------------------------------

template <typename T>
void clip_grad_norm(ParamStore<T>& store, double max_norm) {
    const double norm = store.grad_norm();
    if (norm <= max_norm || norm == 0) return;
    const T factor = T(max_norm / norm);
    for (auto& [name, t] : store)
        for (auto& g : t.grad()) g *= factor;
}

// Standard bias-corrected update; parameters are replaced with fresh tensors
// so live graphs keep their original values.
template <typename T>
void adam_step(ParamStore<T>& store, OptimState& state, double lr, double beta1, double beta2,
               double eps) {
    state.step += 1;
    const double bc1 = 1.0 - std::pow(beta1, double(state.step));
    const double bc2 = 1.0 - std::pow(beta2, double(state.step));
    for (auto& [name, t] : store) {
        auto& m = state.m[name];
        auto& v = state.v[name];
        if (m.size() != t.size()) m.assign(t.size(), 0.0);
        if (v.size() != t.size()) v.assign(t.size(), 0.0);
        Tensor<T> next(t.shape(), t.data());
        const auto& g = t.grad();
        for (std::size_t i = 0; i < t.size(); ++i) {
            m[i] = beta1 * m[i] + (1 - beta1) * double(g[i]);
            v[i] = beta2 * v[i] + (1 - beta2) * double(g[i]) * double(g[i]);
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            next.data()[i] = T(double(next.data()[i]) - lr * mhat / (std::sqrt(vhat) + eps));
        }
        store.replace(name, std::move(next));
    }
}

template <typename T>
void sgd_momentum_step(ParamStore<T>& store, OptimState& state, double lr, double momentum) {
    state.step += 1;
    for (auto& [name, t] : store) {
        auto& vel = state.v[name];
        if (vel.size() != t.size()) vel.assign(t.size(), 0.0);
        Tensor<T> next(t.shape(), t.data());
        const auto& g = t.grad();
        for (std::size_t i = 0; i < t.size(); ++i) {
            vel[i] = momentum * vel[i] + double(g[i]);
            next.data()[i] = T(double(next.data()[i]) - lr * vel[i]);
        }
        store.replace(name, std::move(next));
    }
}

template <typename T>
void optimizer_step(ParamStore<T>& store, OptimState& state, const TrainConfig& cfg) {
    if (cfg.optimizer == OptimizerKind::Adam)
        adam_step(store, state, cfg.lr, cfg.beta1, cfg.beta2, cfg.eps);
    else
        sgd_momentum_step(store, state, cfg.lr, cfg.momentum);
}

// --- checkpoint bridge ---------------------------------------------------------

template <typename T>
Checkpoint store_to_checkpoint(const ModelConfig& model, const ParamStore<T>& store,
                               const OptimState& optim, const TrainConfig& train) {
    Checkpoint ckpt;
    ckpt.model = model;
    ckpt.optim = optim;
    ckpt.train_seed = train.seed;
    ckpt.split_seed = train.split_seed;
    ckpt.train_ratio = train.train_ratio;
    ckpt.val_ratio = train.val_ratio;
    ckpt.test_ratio = train.test_ratio;
    for (const auto& [name, t] : store) {
        ckpt.names.push_back(name);
        ckpt.shapes.push_back(t.shape());
        std::vector<float> vals(t.size());
        for (std::size_t i = 0; i < t.size(); ++i) vals[i] = float(t.data()[i]);
        ckpt.values.push_back(std::move(vals));
    }
    return ckpt;
}

template <typename T>
ParamStore<T> checkpoint_to_store(const Checkpoint& ckpt) {
    ParamStore<T> store;
    for (std::size_t i = 0; i < ckpt.names.size(); ++i) {
        std::vector<T> vals(ckpt.values[i].size());
        for (std::size_t j = 0; j < vals.size(); ++j) vals[j] = T(ckpt.values[i][j]);
        store.add(ckpt.names[i], Tensor<T>(ckpt.shapes[i], std::move(vals)));
    }
    return store;
}

// --- evaluation ------------------------------------------------------------------

template <typename T>
Metrics evaluate(const ModelConfig& cfg, const ParamStore<T>& store, const Dataset& ds,
                 const std::set<std::string>& subjects, std::size_t context) {
    Metrics metrics;
    metrics.confusion.assign(cfg.num_classes, std::vector<std::size_t>(cfg.num_classes, 0));
    std::size_t correct = 0, total = 0;
    for (const auto& clip : ds.clips) {
        if (!subjects.count(clip.subject)) continue;
        if (clip.frames < context) {
            ++metrics.skipped_short_clips;
            continue;
        }
        const std::size_t start =
            sample_window_start(clip.frames, context, WindowMode::Center, 0);
        auto frames = clip_window_tensors<T>(clip, start, context);
        const std::size_t pred = predict(model_forward(cfg, store, frames));
        metrics.confusion[clip.label][pred] += 1;
        correct += (pred == clip.label);
        ++total;
    }
    metrics.test_acc = total ? double(correct) / double(total) : 0.0;
    return metrics;
}

// --- training loop ---------------------------------------------------------------

template <typename T>
struct TrainOutput {
    Checkpoint checkpoint;  // best-val parameters
    Metrics metrics;
    ParamStore<T> best_store;
};

// Seeded init, epoch loop with seeded shuffling and seeded random windows,
// gradient clipping, per-epoch validation, best-val checkpoint selection
// (ties -> earlier epoch). Deterministic mode is inherently satisfied: the
// loop is single-threaded and every random draw is derived from cfg seeds.
template <typename T>
TrainOutput<T> train(const ModelConfig& model_cfg, const Dataset& ds, const SplitSpec& split,
                     const TrainConfig& cfg) {
    model_cfg.validate();
    cfg.validate();
    const auto t_start = std::chrono::steady_clock::now();

    std::vector<std::size_t> train_idx, val_idx;
    for (std::size_t i = 0; i < ds.clips.size(); ++i) {
        const auto& c = ds.clips[i];
        if (c.frames < model_cfg.context) continue;
        if (split.train.count(c.subject)) train_idx.push_back(i);
        if (split.val.count(c.subject)) val_idx.push_back(i);
    }
    if (train_idx.empty()) throw ContractError("train: empty training split");

    ParamStore<T> store;
    init_model_params(model_cfg, store);
    OptimState optim;
    TrainOutput<T> out;
    out.best_store = store;
    double best_val = -1.0;

    const std::uint64_t step_cap =
        cfg.max_steps < 0 ? std::numeric_limits<std::uint64_t>::max()
                          : std::uint64_t(cfg.max_steps);
    std::uint64_t steps = 0;
    bool done = (step_cap == 0);

    for (std::size_t epoch = 0; epoch < cfg.epochs && !done; ++epoch) {
        std::mt19937_64 shuffle_rng(cfg.seed * 0x9e3779b9ULL + epoch);
        std::vector<std::size_t> order = train_idx;
        std::shuffle(order.begin(), order.end(), shuffle_rng);

        double epoch_loss = 0.0;
        std::size_t epoch_examples = 0, epoch_correct = 0;

        for (std::size_t pos = 0; pos < order.size() && !done; pos += cfg.batch) {
            const std::size_t bend = std::min(pos + cfg.batch, order.size());
            store.zero_grad();
            double batch_loss = 0.0;
            for (std::size_t bi = pos; bi < bend; ++bi) {
                const auto& clip = ds.clips[order[bi]];
                const std::uint64_t wseed =
                    cfg.seed ^ (std::uint64_t(epoch) << 32) ^ (order[bi] * 0x51eb851fULL);
                const std::size_t start = sample_window_start(clip.frames, model_cfg.context,
                                                              WindowMode::Random, wseed);
                auto frames = clip_window_tensors<T>(clip, start, model_cfg.context);
                Tensor<T> dist = model_forward(model_cfg, store, frames);
                Tensor<T> loss = scale(cross_entropy(dist, clip.label),
                                       T(1.0 / double(bend - pos)));
                loss.backward();
                batch_loss += double(loss.item()) * double(bend - pos);
                epoch_correct += (predict(dist) == clip.label);
                ++epoch_examples;
            }
            batch_loss /= double(bend - pos);
            if (std::isnan(batch_loss) || std::isinf(batch_loss))
                throw NumericError("training diverged (non-finite loss) at step " +
                                   std::to_string(steps));
            if (cfg.clip_norm > 0) clip_grad_norm(store, cfg.clip_norm);
            optimizer_step(store, optim, cfg);
            epoch_loss += batch_loss * double(bend - pos);
            ++steps;
            if (steps >= step_cap) done = true;
        }

        if (epoch_examples > 0) {
            out.metrics.train_loss.push_back(epoch_loss / double(epoch_examples));
            out.metrics.train_acc.push_back(double(epoch_correct) / double(epoch_examples));
        }
        Metrics val = evaluate(model_cfg, store, ds, split.val, model_cfg.context);
        out.metrics.val_acc.push_back(val.test_acc);
        if (val.test_acc > best_val) {
            best_val = val.test_acc;
            out.best_store = store;  // shared tensor handles; optimizer replaces, not mutates
        }
    }
    if (best_val < 0) out.best_store = store;

    out.metrics.steps = steps;
    const auto t_end = std::chrono::steady_clock::now();
    // Deterministic runs must produce byte-identical metrics, so timing is
    // reported as zero there and only measured otherwise.
    out.metrics.wall_seconds =
        cfg.deterministic ? 0.0 : std::chrono::duration<double>(t_end - t_start).count();
    out.checkpoint = store_to_checkpoint(model_cfg, out.best_store, optim, cfg);
    return out;
}

std::string metrics_to_json(const Metrics& metrics);

}  // namespace sthar
