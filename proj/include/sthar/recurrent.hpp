#pragma once

// Vanilla RNN, LSTM and GRU cells plus a many-to-one sequence runner.
// Hidden states and inputs are column vectors (n×1 tensors) so the cell
// equations read exactly as written: h = tanh(W·h_prev + U·x + b).

#include <optional>
#include <random>
#include <string>
#include <vector>

#include "sthar/param_store.hpp"
#include "sthar/tensor.hpp"

namespace sthar {

namespace detail {
// Uniform ±1/sqrt(fan_in) init for a rows×cols matrix.
template <typename T, typename Rng>
Tensor<T> init_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
    const T bound = T(1) / std::sqrt(T(cols));
    return Tensor<T>::uniform({rows, cols}, -bound, bound, rng);
}
}  // namespace detail

template <typename T>
struct RnnCellParams {
    Tensor<T> W;  // n_h×n_h
    Tensor<T> U;  // n_h×n_x
    Tensor<T> b;  // n_h×1

    template <typename Rng>
    static RnnCellParams make(std::size_t n_h, std::size_t n_x, Rng& rng) {
        return {detail::init_matrix<T>(n_h, n_h, rng), detail::init_matrix<T>(n_h, n_x, rng),
                Tensor<T>::zeros({n_h, 1})};
    }

    void register_in(ParamStore<T>& store, const std::string& prefix) const {
        store.add(prefix + ".W", W);
        store.add(prefix + ".U", U);
        store.add(prefix + ".b", b);
    }

    static RnnCellParams from_store(const ParamStore<T>& store, const std::string& prefix) {
        return {store.get(prefix + ".W"), store.get(prefix + ".U"), store.get(prefix + ".b")};
    }
};

template <typename T>
struct LstmParams {
    // Gate order: forget, input, candidate, output.
    RnnCellParams<T> f, i, c, o;

    template <typename Rng>
    static LstmParams make(std::size_t n_h, std::size_t n_x, Rng& rng) {
        LstmParams p{RnnCellParams<T>::make(n_h, n_x, rng), RnnCellParams<T>::make(n_h, n_x, rng),
                     RnnCellParams<T>::make(n_h, n_x, rng), RnnCellParams<T>::make(n_h, n_x, rng)};
        // Forget bias +1 keeps early cell-state retention high.
        for (auto& v : p.f.b.data()) v = T(1);
        return p;
    }

    void register_in(ParamStore<T>& store, const std::string& prefix) const {
        f.register_in(store, prefix + ".f");
        i.register_in(store, prefix + ".i");
        c.register_in(store, prefix + ".c");
        o.register_in(store, prefix + ".o");
    }

    static LstmParams from_store(const ParamStore<T>& store, const std::string& prefix) {
        return {RnnCellParams<T>::from_store(store, prefix + ".f"),
                RnnCellParams<T>::from_store(store, prefix + ".i"),
                RnnCellParams<T>::from_store(store, prefix + ".c"),
                RnnCellParams<T>::from_store(store, prefix + ".o")};
    }
};

template <typename T>
struct GruParams {
    // Gate order: update, reset, candidate.
    RnnCellParams<T> z, r, h;

    template <typename Rng>
    static GruParams make(std::size_t n_h, std::size_t n_x, Rng& rng) {
        return {RnnCellParams<T>::make(n_h, n_x, rng), RnnCellParams<T>::make(n_h, n_x, rng),
                RnnCellParams<T>::make(n_h, n_x, rng)};
    }

    void register_in(ParamStore<T>& store, const std::string& prefix) const {
        z.register_in(store, prefix + ".z");
        r.register_in(store, prefix + ".r");
        h.register_in(store, prefix + ".h");
    }

    static GruParams from_store(const ParamStore<T>& store, const std::string& prefix) {
        return {RnnCellParams<T>::from_store(store, prefix + ".z"),
                RnnCellParams<T>::from_store(store, prefix + ".r"),
                RnnCellParams<T>::from_store(store, prefix + ".h")};
    }
};

namespace detail {
template <typename T>
Tensor<T> gate_preact(const RnnCellParams<T>& g, const Tensor<T>& h_prev, const Tensor<T>& x) {
    return add(add(matmul(g.W, h_prev), matmul(g.U, x)), g.b);
}
}  // namespace detail

// h = tanh(W·h_prev + U·x + b)
template <typename T>
Tensor<T> vanilla_step(const RnnCellParams<T>& p, const Tensor<T>& h_prev, const Tensor<T>& x) {
    return tanh_t(detail::gate_preact(p, h_prev, x));
}

// f = σ(·), i = σ(·), c~ = tanh(·), c = f⊙c_prev + i⊙c~, o = σ(·),
// h = tanh(c) ⊙ o.
template <typename T>
std::pair<Tensor<T>, Tensor<T>> lstm_step(const LstmParams<T>& p, const Tensor<T>& h_prev,
                                          const Tensor<T>& c_prev, const Tensor<T>& x) {
    Tensor<T> f = sigmoid_t(detail::gate_preact(p.f, h_prev, x));
    Tensor<T> i = sigmoid_t(detail::gate_preact(p.i, h_prev, x));
    Tensor<T> cand = tanh_t(detail::gate_preact(p.c, h_prev, x));
    Tensor<T> c = add(mul(f, c_prev), mul(i, cand));
    Tensor<T> o = sigmoid_t(detail::gate_preact(p.o, h_prev, x));
    Tensor<T> h = mul(tanh_t(c), o);
    return {h, c};
}

// z = σ(·), r = σ(·), h~ = tanh(W_h(r⊙h_prev) + U_h·x + b_h),
// h = z⊙h~ + (1−z)⊙h_prev  (update gate weights the candidate).
template <typename T>
Tensor<T> gru_step(const GruParams<T>& p, const Tensor<T>& h_prev, const Tensor<T>& x) {
    Tensor<T> z = sigmoid_t(detail::gate_preact(p.z, h_prev, x));
    Tensor<T> r = sigmoid_t(detail::gate_preact(p.r, h_prev, x));
    Tensor<T> cand =
        tanh_t(add(add(matmul(p.h.W, mul(r, h_prev)), matmul(p.h.U, x)), p.h.b));
    Tensor<T> one_minus_z = sub(Tensor<T>::full(z.shape(), T(1)), z);
    return add(mul(z, cand), mul(one_minus_z, h_prev));
}

enum class CellKind { Vanilla, Lstm, Gru };

template <typename T>
struct CellParamsAny {
    CellKind kind;
    std::optional<RnnCellParams<T>> vanilla;
    std::optional<LstmParams<T>> lstm;
    std::optional<GruParams<T>> gru;
};

// Iterates the cell over xs in order and returns the final hidden state.
// h0 (and c0 for LSTM) default to zero vectors.
template <typename T>
Tensor<T> run_many_to_one(const CellParamsAny<T>& p, const std::vector<Tensor<T>>& xs,
                          std::optional<Tensor<T>> h0 = std::nullopt,
                          std::optional<Tensor<T>> c0 = std::nullopt) {
    if (xs.empty()) throw ContractError("run_many_to_one: empty sequence");
    const std::size_t n_h = [&] {
        switch (p.kind) {
            case CellKind::Vanilla: return p.vanilla->W.rows();
            case CellKind::Lstm: return p.lstm->f.W.rows();
            case CellKind::Gru: return p.gru->z.W.rows();
        }
        throw ContractError("run_many_to_one: bad cell kind");
    }();
    Tensor<T> h = h0 ? *h0 : Tensor<T>::zeros({n_h, 1});
    Tensor<T> c = c0 ? *c0 : Tensor<T>::zeros({n_h, 1});
    for (const auto& x : xs) {
        switch (p.kind) {
            case CellKind::Vanilla:
                h = vanilla_step(*p.vanilla, h, x);
                break;
            case CellKind::Lstm: {
                auto [hn, cn] = lstm_step(*p.lstm, h, c, x);
                h = hn;
                c = cn;
                break;
            }
            case CellKind::Gru:
                h = gru_step(*p.gru, h, x);
                break;
        }
    }
    return h;
}

}  // namespace sthar
