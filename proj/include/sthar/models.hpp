#pragma once

// The four end-to-end classifiers: hybrid CNN-ViT, ViT-only, CNN baseline
// (temporal mean pooling) and CNN-LSTM, all driven by one ModelConfig and a
// shared ParamStore naming scheme.

#include <algorithm>
#include <random>
#include <string>
#include <vector>

#include "sthar/attention.hpp"
#include "sthar/param_store.hpp"
#include "sthar/recurrent.hpp"
#include "sthar/tensor.hpp"
#include "sthar/vision.hpp"

namespace sthar {

enum class ModelKind { Hybrid, VitOnly, CnnBaseline, CnnLstm };

inline std::string model_kind_name(ModelKind k) {
    switch (k) {
        case ModelKind::Hybrid: return "hybrid";
        case ModelKind::VitOnly: return "vit_only";
        case ModelKind::CnnBaseline: return "cnn_baseline";
        case ModelKind::CnnLstm: return "cnn_lstm";
    }
    return "?";
}

inline ModelKind model_kind_from_name(const std::string& name) {
    if (name == "hybrid") return ModelKind::Hybrid;
    if (name == "vit_only") return ModelKind::VitOnly;
    if (name == "cnn_baseline") return ModelKind::CnnBaseline;
    if (name == "cnn_lstm") return ModelKind::CnnLstm;
    throw ConfigError("unknown model kind '" + name + "'");
}

struct ModelConfig {
    ModelKind kind = ModelKind::Hybrid;
    std::size_t num_classes = 6;
    std::size_t context = 24;                       // clip length T per prediction
    std::vector<std::size_t> contexts{12, 18, 24};  // admissible context lengths
    std::size_t frame_channels = 1;
    std::size_t frame_height = 16;
    std::size_t frame_width = 16;
    std::size_t d_model = 128;
    std::size_t heads = 4;
    std::size_t depth = 2;
    std::size_t d_ff = 256;
    std::size_t feature_len = 128;   // CNN backbone output length L
    std::size_t patch = 8;           // vit_only
    std::size_t lstm_hidden = 128;   // cnn_lstm
    std::uint64_t seed = 0;

    // Every divisibility and range constraint is enforced here, before any
    // parameter is allocated or data touched.
    void validate() const {
        if (num_classes < 2) throw ConfigError("model: num_classes must be >= 2");
        if (std::find(contexts.begin(), contexts.end(), context) == contexts.end())
            throw ConfigError("model: context " + std::to_string(context) +
                              " is not in the configured context set");
        if (frame_channels != 1 && frame_channels != 3)
            throw ConfigError("model: frame channels must be 1 or 3");
        if (frame_height < 8 || frame_width < 8)
            throw ConfigError("model: frame extents must be >= 8");
        if (kind == ModelKind::Hybrid || kind == ModelKind::CnnBaseline ||
            kind == ModelKind::CnnLstm) {
            if (frame_height % 16 != 0 || frame_width % 16 != 0)
                throw ConfigError("model: CNN backbone needs frame extents divisible by 16");
        }
        if (kind == ModelKind::Hybrid || kind == ModelKind::VitOnly) {
            if (heads == 0 || d_model % heads != 0)
                throw ConfigError("model: heads " + std::to_string(heads) +
                                  " do not divide d_model " + std::to_string(d_model));
            if (d_ff < d_model) throw ConfigError("model: d_ff < d_model");
            if (depth == 0) throw ConfigError("model: encoder depth must be >= 1");
        }
        if (kind == ModelKind::VitOnly) {
            if (patch == 0 || frame_height % patch != 0 || frame_width % patch != 0)
                throw ConfigError("model: patch " + std::to_string(patch) +
                                  " does not divide frame extents");
        }
        if (kind == ModelKind::CnnLstm && lstm_hidden == 0)
            throw ConfigError("model: lstm_hidden must be >= 1");
    }

    std::size_t tokens_per_clip() const {
        if (kind == ModelKind::VitOnly)
            return context * (frame_height / patch) * (frame_width / patch);
        return context;
    }
};

namespace detail {
template <typename T, typename Rng>
void add_linear_head(ParamStore<T>& store, const std::string& prefix, std::size_t in,
                     std::size_t out, Rng& rng) {
    store.add(prefix + ".w", init_matrix<T>(out, in, rng));
    store.add(prefix + ".b", Tensor<T>::zeros({out, 1}));
}
}  // namespace detail

// Seeded parameter allocation. Names are stable; the checkpoint format
// serializes them verbatim.
template <typename T>
void init_model_params(const ModelConfig& cfg, ParamStore<T>& store) {
    cfg.validate();
    std::mt19937_64 rng(cfg.seed);
    switch (cfg.kind) {
        case ModelKind::Hybrid: {
            SmallCnnParams<T>::make(cfg.frame_channels, cfg.frame_height, cfg.frame_width,
                                    cfg.feature_len, rng)
                .register_in(store, "cnn");
            if (cfg.feature_len != cfg.d_model)
                store.add("feat_proj", detail::init_matrix<T>(cfg.feature_len, cfg.d_model, rng));
            store.add("cls", Tensor<T>::zeros({1, cfg.d_model}));
            for (std::size_t b = 0; b < cfg.depth; ++b)
                EncoderBlockParams<T>::make(cfg.d_model, cfg.heads, cfg.d_ff, rng)
                    .register_in(store, "enc" + std::to_string(b));
            detail::add_linear_head(store, "head", cfg.d_model, cfg.num_classes, rng);
            break;
        }
        case ModelKind::VitOnly: {
            PatchEmbedParams<T>::make(cfg.patch, cfg.frame_channels, cfg.d_model, rng)
                .register_in(store, "embed");
            store.add("cls", Tensor<T>::zeros({1, cfg.d_model}));
            for (std::size_t b = 0; b < cfg.depth; ++b)
                EncoderBlockParams<T>::make(cfg.d_model, cfg.heads, cfg.d_ff, rng)
                    .register_in(store, "enc" + std::to_string(b));
            detail::add_linear_head(store, "head", cfg.d_model, cfg.num_classes, rng);
            break;
        }
        case ModelKind::CnnBaseline: {
            SmallCnnParams<T>::make(cfg.frame_channels, cfg.frame_height, cfg.frame_width,
                                    cfg.feature_len, rng)
                .register_in(store, "cnn");
            // Two-layer ELU MLP head.
            detail::add_linear_head(store, "mlp1", cfg.feature_len, cfg.d_model, rng);
            detail::add_linear_head(store, "mlp2", cfg.d_model, cfg.num_classes, rng);
            break;
        }
        case ModelKind::CnnLstm: {
            SmallCnnParams<T>::make(cfg.frame_channels, cfg.frame_height, cfg.frame_width,
                                    cfg.feature_len, rng)
                .register_in(store, "cnn");
            LstmParams<T>::make(cfg.lstm_hidden, cfg.feature_len, rng).register_in(store, "lstm");
            detail::add_linear_head(store, "head", cfg.lstm_hidden, cfg.num_classes, rng);
            break;
        }
    }
}

namespace detail {

template <typename T>
void check_clip(const ModelConfig& cfg, const std::vector<Tensor<T>>& clip) {
    if (clip.size() != cfg.context)
        throw ContractError("model: clip length " + std::to_string(clip.size()) +
                            " != configured context " + std::to_string(cfg.context));
    for (const auto& f : clip)
        if (f.ndim() != 3 || f.extent(0) != cfg.frame_channels ||
            f.extent(1) != cfg.frame_height || f.extent(2) != cfg.frame_width)
            throw DimensionError("model: frame shape " + shape_str(f.shape()) +
                                 " does not match config");
}

// z (d×1 column) -> logits row 1×num_classes.
template <typename T>
Tensor<T> linear_head(const ParamStore<T>& store, const std::string& prefix,
                      const Tensor<T>& z) {
    return transpose(add(matmul(store.get(prefix + ".w"), z), store.get(prefix + ".b")));
}

// Shared tail for the two encoder models: CLS + positions, encoder stack,
// CLS-row readout, linear head.
template <typename T>
Tensor<T> encoder_readout_logits(const ModelConfig& cfg, const ParamStore<T>& store,
                                 const Tensor<T>& token_rows) {
    Tensor<T> table = make_positional_table<T>(token_rows.rows() + 1, cfg.d_model);
    Tensor<T> x = add_positions_and_cls(token_rows, table, store.get("cls"));
    for (std::size_t b = 0; b < cfg.depth; ++b)
        x = encoder_block(x, EncoderBlockParams<T>::from_store(store, "enc" + std::to_string(b),
                                                               cfg.heads));
    Tensor<T> z = transpose(slice_rows(x, 0, 1));  // CLS row as column
    return linear_head(store, "head", z);
}

}  // namespace detail

// Raw (pre-softmax) 1×num_classes logit row for a clip.
template <typename T>
Tensor<T> model_logits(const ModelConfig& cfg, const ParamStore<T>& store,
                       const std::vector<Tensor<T>>& clip) {
    detail::check_clip(cfg, clip);
    switch (cfg.kind) {
        case ModelKind::Hybrid: {
            auto cnn = SmallCnnParams<T>::from_store(store, "cnn");
            Tensor<T> feats = time_distributed(clip, cnn);  // T×L
            if (store.contains("feat_proj")) feats = matmul(feats, store.get("feat_proj"));
            return detail::encoder_readout_logits(cfg, store, feats);
        }
        case ModelKind::VitOnly: {
            auto embed = PatchEmbedParams<T>::from_store(store, "embed", cfg.patch);
            // Patch sequences concatenated in frame order; positions are
            // numbered globally over the whole clip.
            std::vector<Tensor<T>> parts;
            parts.reserve(clip.size());
            for (const auto& f : clip) parts.push_back(patch_embed(patchify(f, cfg.patch), embed));
            return detail::encoder_readout_logits(cfg, store, concat_rows(parts));
        }
        case ModelKind::CnnBaseline: {
            auto cnn = SmallCnnParams<T>::from_store(store, "cnn");
            Tensor<T> feats = time_distributed(clip, cnn);        // T×L
            Tensor<T> pooled = transpose(mean_rows(feats));       // L×1
            Tensor<T> hidden = elu_t(add(matmul(store.get("mlp1.w"), pooled),
                                         store.get("mlp1.b")));
            return transpose(add(matmul(store.get("mlp2.w"), hidden), store.get("mlp2.b")));
        }
        case ModelKind::CnnLstm: {
            auto cnn = SmallCnnParams<T>::from_store(store, "cnn");
            CellParamsAny<T> cell{CellKind::Lstm, std::nullopt,
                                  LstmParams<T>::from_store(store, "lstm"), std::nullopt};
            std::vector<Tensor<T>> xs;
            xs.reserve(clip.size());
            for (const auto& f : clip) xs.push_back(cnn_forward(f, cnn));
            Tensor<T> h = run_many_to_one(cell, xs);
            return detail::linear_head(store, "head", h);
        }
    }
    throw ContractError("model_logits: bad model kind");
}

// Class distribution (1×num_classes row summing to 1).
template <typename T>
Tensor<T> model_forward(const ModelConfig& cfg, const ParamStore<T>& store,
                        const std::vector<Tensor<T>>& clip) {
    return softmax_rows(model_logits(cfg, store, clip));
}

// Argmax with ties broken by lowest index.
template <typename T>
std::size_t predict(const Tensor<T>& distribution) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < distribution.size(); ++i)
        if (distribution.data()[i] > distribution.data()[best]) best = i;
    return best;
}

}  // namespace sthar
