#pragma once

// Per-frame CNN backbone, TimeDistributed application over frame sequences,
// and patch extraction/embedding for the ViT-only path.

#include <array>
#include <random>
#include <string>
#include <vector>

#include "sthar/param_store.hpp"
#include "sthar/recurrent.hpp"  // detail::init_matrix
#include "sthar/tensor.hpp"

namespace sthar {

// Four conv stages (3×3, pad 1), each followed by ELU and 2×2 max pooling,
// then a linear projection to feature length L. Spatial extents must be
// divisible by 16 (four 2× reductions).
template <typename T>
struct SmallCnnParams {
    static constexpr std::array<std::size_t, 4> kWidths{8, 16, 32, 64};

    struct Stage {
        Tensor<T> kernels;  // Cout×Cin×3×3
        Tensor<T> bias;     // Cout
    };
    std::array<Stage, 4> stages;
    Tensor<T> proj_w;  // L×F where F = 64·(H/16)·(W/16)
    Tensor<T> proj_b;  // L×1

    template <typename Rng>
    static SmallCnnParams make(std::size_t channels, std::size_t height, std::size_t width,
                               std::size_t feature_len, Rng& rng) {
        if (height % 16 != 0 || width % 16 != 0)
            throw ConfigError("small cnn: frame " + std::to_string(height) + "x" +
                              std::to_string(width) + " not divisible by 16");
        SmallCnnParams p;
        std::size_t cin = channels;
        for (std::size_t s = 0; s < 4; ++s) {
            const std::size_t cout = kWidths[s];
            const T bound = T(1) / std::sqrt(T(cin * 9));
            p.stages[s].kernels = Tensor<T>::uniform({cout, cin, 3, 3}, -bound, bound, rng);
            p.stages[s].bias = Tensor<T>::zeros({cout});
            cin = cout;
        }
        const std::size_t flat = kWidths[3] * (height / 16) * (width / 16);
        p.proj_w = detail::init_matrix<T>(feature_len, flat, rng);
        p.proj_b = Tensor<T>::zeros({feature_len, 1});
        return p;
    }

    void register_in(ParamStore<T>& store, const std::string& prefix) const {
        for (std::size_t s = 0; s < 4; ++s) {
            const std::string sp = prefix + ".conv" + std::to_string(s);
            store.add(sp + ".k", stages[s].kernels);
            store.add(sp + ".b", stages[s].bias);
        }
        store.add(prefix + ".proj.w", proj_w);
        store.add(prefix + ".proj.b", proj_b);
    }

    static SmallCnnParams from_store(const ParamStore<T>& store, const std::string& prefix) {
        SmallCnnParams p;
        for (std::size_t s = 0; s < 4; ++s) {
            const std::string sp = prefix + ".conv" + std::to_string(s);
            p.stages[s].kernels = store.get(sp + ".k");
            p.stages[s].bias = store.get(sp + ".b");
        }
        p.proj_w = store.get(prefix + ".proj.w");
        p.proj_b = store.get(prefix + ".proj.b");
        return p;
    }
};

// frame: C×H×W in [0,1]; returns the L×1 feature column.
template <typename T>
Tensor<T> cnn_forward(const Tensor<T>& frame, const SmallCnnParams<T>& p) {
    Tensor<T> x = frame;
    for (const auto& stage : p.stages)
        x = maxpool2(elu_t(conv2d(x, stage.kernels, stage.bias, 1, 1)));
    Tensor<T> flat = reshape(x, {x.size(), std::size_t(1)});
    return add(matmul(p.proj_w, flat), p.proj_b);
}

// Shared-parameter per-frame application; row i of the result is the
// feature vector of frame i.
template <typename T>
Tensor<T> time_distributed(const std::vector<Tensor<T>>& frames, const SmallCnnParams<T>& p) {
    if (frames.empty()) throw ContractError("time_distributed: empty frame sequence");
    const Shape& ref = frames[0].shape();
    std::vector<Tensor<T>> rows;
    rows.reserve(frames.size());
    for (const auto& f : frames) {
        if (f.shape() != ref)
            throw DimensionError("time_distributed: heterogeneous frame shapes " +
                                 shape_str(ref) + " vs " + shape_str(f.shape()));
        rows.push_back(transpose(cnn_forward(f, p)));
    }
    return concat_rows(rows);
}

// Splits a C×H×W frame into non-overlapping p×p patches in row-major order
// (top-left to bottom-right); each output row is one flattened patch laid
// out channel-major, matching the frame's own memory order.
template <typename T>
Tensor<T> patchify(const Tensor<T>& frame, std::size_t patch) {
    if (frame.ndim() != 3) throw DimensionError("patchify: expected C×H×W frame");
    const std::size_t C = frame.extent(0), H = frame.extent(1), W = frame.extent(2);
    if (patch == 0 || H % patch != 0 || W % patch != 0)
        throw DimensionError("patchify: patch size " + std::to_string(patch) +
                             " does not divide frame " + shape_str(frame.shape()));
    const std::size_t py = H / patch, px = W / patch;
    const std::size_t n = py * px, d = patch * patch * C;
    std::vector<T> out(n * d);
    auto index_map = std::make_shared<std::vector<std::size_t>>(n * d);
    for (std::size_t gy = 0; gy < py; ++gy)
        for (std::size_t gx = 0; gx < px; ++gx) {
            const std::size_t row = gy * px + gx;
            std::size_t col = 0;
            for (std::size_t c = 0; c < C; ++c)
                for (std::size_t y = 0; y < patch; ++y)
                    for (std::size_t x = 0; x < patch; ++x, ++col) {
                        const std::size_t src = (c * H + gy * patch + y) * W + gx * patch + x;
                        out[row * d + col] = frame.data()[src];
                        (*index_map)[row * d + col] = src;
                    }
        }
    auto fn = frame.node();
    return Tensor<T>::make_op({n, d}, std::move(out), {fn},
                              [fn, index_map](typename Tensor<T>::Node& self) {
                                  fn->ensure_grad();
                                  for (std::size_t i = 0; i < self.grad.size(); ++i)
                                      fn->grad[(*index_map)[i]] += self.grad[i];
                              });
}

// Inverse of patchify for a frame of known geometry (test and tooling aid).
template <typename T>
Tensor<T> unpatchify(const Tensor<T>& patches, std::size_t C, std::size_t H, std::size_t W,
                     std::size_t patch) {
    const std::size_t py = H / patch, px = W / patch, d = patch * patch * C;
    if (patches.rows() != py * px || patches.cols() != d)
        throw DimensionError("unpatchify: patch matrix " + shape_str(patches.shape()) +
                             " does not match geometry");
    Tensor<T> frame({C, H, W});
    for (std::size_t gy = 0; gy < py; ++gy)
        for (std::size_t gx = 0; gx < px; ++gx) {
            const std::size_t row = gy * px + gx;
            std::size_t col = 0;
            for (std::size_t c = 0; c < C; ++c)
                for (std::size_t y = 0; y < patch; ++y)
                    for (std::size_t x = 0; x < patch; ++x, ++col)
                        frame.data()[(c * H + gy * patch + y) * W + gx * patch + x] =
                            patches.data()[row * d + col];
        }
    return frame;
}

template <typename T>
struct PatchEmbedParams {
    std::size_t patch = 0;
    Tensor<T> proj;  // (p²·C)×d_model

    template <typename Rng>
    static PatchEmbedParams make(std::size_t patch, std::size_t channels, std::size_t d_model,
                                 Rng& rng) {
        return {patch, detail::init_matrix<T>(patch * patch * channels, d_model, rng)};
    }

    void register_in(ParamStore<T>& store, const std::string& prefix) const {
        store.add(prefix + ".proj", proj);
    }

    static PatchEmbedParams from_store(const ParamStore<T>& store, const std::string& prefix,
                                       std::size_t patch) {
        return {patch, store.get(prefix + ".proj")};
    }
};

template <typename T>
Tensor<T> patch_embed(const Tensor<T>& patches, const PatchEmbedParams<T>& p) {
    return matmul(patches, p.proj);
}

}  // namespace sthar
