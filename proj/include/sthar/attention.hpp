#pragma once

// Scaled dot-product attention, multi-head attention, sinusoidal positional
// encodings, the CLS token and a pre-norm Transformer encoder block.
// Token matrices are row-major: X is n_tokens × d_model.

#include <cmath>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "sthar/param_store.hpp"
#include "sthar/recurrent.hpp"  // detail::init_matrix
#include "sthar/tensor.hpp"

namespace sthar {

// weights = softmax_rows(Q·Kᵀ/√d_k); out = weights·V.
template <typename T>
std::pair<Tensor<T>, Tensor<T>> scaled_dot_attention(const Tensor<T>& Q, const Tensor<T>& K,
                                                     const Tensor<T>& V) {
    if (Q.cols() == 0) throw ContractError("scaled_dot_attention: d_k = 0");
    if (Q.cols() != K.cols())
        throw DimensionError("scaled_dot_attention: Q/K feature mismatch " +
                             shape_str(Q.shape()) + " vs " + shape_str(K.shape()));
    if (K.rows() != V.rows())
        throw DimensionError("scaled_dot_attention: K/V row mismatch " + shape_str(K.shape()) +
                             " vs " + shape_str(V.shape()));
    const T inv_sqrt_dk = T(1) / std::sqrt(T(Q.cols()));
    Tensor<T> scores = scale(matmul(Q, transpose(K)), inv_sqrt_dk);
    Tensor<T> weights = softmax_rows(scores);
    return {matmul(weights, V), weights};
}

template <typename T>
struct MhaParams {
    struct Head {
        Tensor<T> Wq, Wk, Wv;  // d_model×d_k / d_model×d_v
    };
    std::vector<Head> heads;
    Tensor<T> Wo;  // (H·d_v)×d_model

    std::size_t d_model() const { return heads[0].Wq.rows(); }
    std::size_t d_k() const { return heads[0].Wq.cols(); }

    template <typename Rng>
    static MhaParams make(std::size_t d_model, std::size_t n_heads, Rng& rng) {
        if (n_heads == 0 || d_model % n_heads != 0)
            throw ConfigError("multi-head attention: head count " + std::to_string(n_heads) +
                              " does not divide d_model " + std::to_string(d_model));
        const std::size_t d_k = d_model / n_heads;
        MhaParams p;
        for (std::size_t h = 0; h < n_heads; ++h)
            p.heads.push_back({detail::init_matrix<T>(d_model, d_k, rng),
                               detail::init_matrix<T>(d_model, d_k, rng),
                               detail::init_matrix<T>(d_model, d_k, rng)});
        p.Wo = detail::init_matrix<T>(d_model, d_model, rng);
        return p;
    }

    void register_in(ParamStore<T>& store, const std::string& prefix) const {
        for (std::size_t h = 0; h < heads.size(); ++h) {
            const std::string hp = prefix + ".h" + std::to_string(h);
            store.add(hp + ".Wq", heads[h].Wq);
            store.add(hp + ".Wk", heads[h].Wk);
            store.add(hp + ".Wv", heads[h].Wv);
        }
        store.add(prefix + ".Wo", Wo);
    }

    static MhaParams from_store(const ParamStore<T>& store, const std::string& prefix,
                                std::size_t n_heads) {
        MhaParams p;
        for (std::size_t h = 0; h < n_heads; ++h) {
            const std::string hp = prefix + ".h" + std::to_string(h);
            p.heads.push_back({store.get(hp + ".Wq"), store.get(hp + ".Wk"),
                               store.get(hp + ".Wv")});
        }
        p.Wo = store.get(prefix + ".Wo");
        return p;
    }
};

// Per head: attention over projections of X; concatenate by head index,
// project with Wo.
template <typename T>
Tensor<T> multi_head(const Tensor<T>& X, const MhaParams<T>& p) {
    std::vector<Tensor<T>> outs;
    outs.reserve(p.heads.size());
    for (const auto& head : p.heads) {
        auto [out, weights] =
            scaled_dot_attention(matmul(X, head.Wq), matmul(X, head.Wk), matmul(X, head.Wv));
        outs.push_back(out);
    }
    return matmul(concat_cols(outs), p.Wo);
}

template <typename T>
struct EncoderBlockParams {
    MhaParams<T> mha;
    Tensor<T> ff1, b1;  // d_model×d_ff, d_ff
    Tensor<T> ff2, b2;  // d_ff×d_model, d_model
    Tensor<T> norm1_gain, norm1_offset, norm2_gain, norm2_offset;

    template <typename Rng>
    static EncoderBlockParams make(std::size_t d_model, std::size_t n_heads, std::size_t d_ff,
                                   Rng& rng) {
        if (d_ff < d_model)
            throw ConfigError("encoder block: d_ff " + std::to_string(d_ff) + " < d_model " +
                              std::to_string(d_model));
        EncoderBlockParams p;
        p.mha = MhaParams<T>::make(d_model, n_heads, rng);
        p.ff1 = detail::init_matrix<T>(d_model, d_ff, rng);
        p.b1 = Tensor<T>::zeros({1, d_ff});
        p.ff2 = detail::init_matrix<T>(d_ff, d_model, rng);
        p.b2 = Tensor<T>::zeros({1, d_model});
        p.norm1_gain = Tensor<T>::full({1, d_model}, T(1));
        p.norm1_offset = Tensor<T>::zeros({1, d_model});
        p.norm2_gain = Tensor<T>::full({1, d_model}, T(1));
        p.norm2_offset = Tensor<T>::zeros({1, d_model});
        return p;
    }

    void register_in(ParamStore<T>& store, const std::string& prefix) const {
        mha.register_in(store, prefix + ".mha");
        store.add(prefix + ".ff1", ff1);
        store.add(prefix + ".b1", b1);
        store.add(prefix + ".ff2", ff2);
        store.add(prefix + ".b2", b2);
        store.add(prefix + ".norm1.gain", norm1_gain);
        store.add(prefix + ".norm1.offset", norm1_offset);
        store.add(prefix + ".norm2.gain", norm2_gain);
        store.add(prefix + ".norm2.offset", norm2_offset);
    }

    static EncoderBlockParams from_store(const ParamStore<T>& store, const std::string& prefix,
                                         std::size_t n_heads) {
        EncoderBlockParams p;
        p.mha = MhaParams<T>::from_store(store, prefix + ".mha", n_heads);
        p.ff1 = store.get(prefix + ".ff1");
        p.b1 = store.get(prefix + ".b1");
        p.ff2 = store.get(prefix + ".ff2");
        p.b2 = store.get(prefix + ".b2");
        p.norm1_gain = store.get(prefix + ".norm1.gain");
        p.norm1_offset = store.get(prefix + ".norm1.offset");
        p.norm2_gain = store.get(prefix + ".norm2.gain");
        p.norm2_offset = store.get(prefix + ".norm2.offset");
        return p;
    }
};

// Pre-norm residual form: X + MHA(norm(X)), then + FFN(norm(·)) with ELU
// between the two linear layers.
template <typename T>
Tensor<T> encoder_block(const Tensor<T>& X, const EncoderBlockParams<T>& p) {
    Tensor<T> a = add(X, multi_head(layer_norm_rows(X, p.norm1_gain, p.norm1_offset), p.mha));
    Tensor<T> n = layer_norm_rows(a, p.norm2_gain, p.norm2_offset);
    Tensor<T> ff = add_bias_rows(
        matmul(elu_t(add_bias_rows(matmul(n, p.ff1), p.b1)), p.ff2), p.b2);
    return add(a, ff);
}

// Fixed sinusoidal table: row p holds sin(p/10000^(2i/d)) and
// cos(p/10000^(2i/d)) interleaved, so row 0 is (0, 1, 0, 1, ...).
template <typename T>
Tensor<T> make_positional_table(std::size_t max_len, std::size_t d_model) {
    Tensor<T> table({max_len, d_model});
    for (std::size_t pos = 0; pos < max_len; ++pos)
        for (std::size_t i = 0; i < d_model; ++i) {
            const double exponent = double(2 * (i / 2)) / double(d_model);
            const double angle = double(pos) / std::pow(10000.0, exponent);
            table.at(pos, i) = T(i % 2 == 0 ? std::sin(angle) : std::cos(angle));
        }
    return table;
}

// Prepends the CLS row and adds positional encodings: row 0 = cls + PE(0),
// rows 1..N = seq + PE(1..N).
template <typename T>
Tensor<T> add_positions_and_cls(const Tensor<T>& seq, const Tensor<T>& table,
                                const Tensor<T>& cls) {
    const std::size_t N = seq.rows(), d = seq.cols();
    if (cls.ndim() != 2 || cls.rows() != 1 || cls.cols() != d)
        throw DimensionError("add_positions_and_cls: CLS must be 1×d_model");
    if (N + 1 > table.rows())
        throw ContractError("add_positions_and_cls: sequence length " + std::to_string(N) +
                            " exceeds positional table capacity " +
                            std::to_string(table.rows() - 1));
    Tensor<T> tokens = concat_rows<T>({cls, seq});
    Tensor<T> positions = slice_rows(table, 0, N + 1);
    return add(tokens, positions);
}

}  // namespace sthar
