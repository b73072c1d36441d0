#include <doctest.h>

#include <random>

#include "sthar/vision.hpp"

using namespace sthar;

TEST_CASE("conv_out_extent formula") {
    CHECK(conv_out_extent(16, 3, 1, 1) == 16);
    CHECK(conv_out_extent(16, 3, 2, 1) == 8);
    CHECK(conv_out_extent(7, 3, 1, 0) == 5);
}

TEST_CASE("cnn_forward maps a frame to an L-dimensional feature column") {
    std::mt19937_64 rng(31);
    auto p = SmallCnnParams<double>::make(1, 16, 16, 24, rng);
    Tensor64 frame = Tensor64::uniform({1, 16, 16}, 0, 1, rng);
    Tensor64 feat = cnn_forward(frame, p);
    CHECK(feat.shape() == Shape{24, 1});
    CHECK_THROWS_AS(SmallCnnParams<double>::make(1, 12, 16, 24, rng), ConfigError);
}

TEST_CASE("time_distributed stacks per-frame features as rows") {
    std::mt19937_64 rng(32);
    auto p = SmallCnnParams<double>::make(1, 16, 16, 6, rng);
    std::vector<Tensor64> clip;
    for (int t = 0; t < 3; ++t) clip.push_back(Tensor64::uniform({1, 16, 16}, 0, 1, rng));
    Tensor64 feats = time_distributed(clip, p);
    REQUIRE(feats.shape() == Shape{3, 6});
    for (std::size_t t = 0; t < 3; ++t) {
        Tensor64 one = cnn_forward(clip[t], p);
        for (std::size_t c = 0; c < 6; ++c)
            CHECK(feats.at(t, c) == doctest::Approx(one.data()[c]).epsilon(1e-14));
    }
    CHECK_THROWS_AS(time_distributed({}, p), ContractError);
    std::vector<Tensor64> mixed{clip[0], Tensor64::zeros({1, 32, 32})};
    CHECK_THROWS_AS(time_distributed(mixed, p), DimensionError);
}

TEST_CASE("patchify lays out patches row-major with channel-major flattening") {
    // 1×4×4 frame with values 0..15, patch 2: patch 0 is the top-left block.
    std::vector<double> vals(16);
    for (int i = 0; i < 16; ++i) vals[i] = i;
    Tensor64 frame({1, 4, 4}, vals);
    Tensor64 p = patchify(frame, 2);
    REQUIRE(p.shape() == Shape{4, 4});
    CHECK(p.at(0, 0) == 0);
    CHECK(p.at(0, 1) == 1);
    CHECK(p.at(0, 2) == 4);
    CHECK(p.at(0, 3) == 5);
    CHECK(p.at(1, 0) == 2);   // top-right block
    CHECK(p.at(2, 0) == 8);   // bottom-left block
    CHECK(p.at(3, 3) == 15);  // bottom-right block, last pixel
}

TEST_CASE("patchify / unpatchify round-trip across sizes") {
    std::mt19937_64 rng(33);
    for (std::size_t side : {16u, 32u}) {
        for (std::size_t patch : {4u, 8u, 16u}) {
            for (std::size_t C : {1u, 3u}) {
                Tensor64 frame = Tensor64::uniform({C, side, side}, -1, 1, rng);
                Tensor64 p = patchify(frame, patch);
                CHECK(p.rows() == (side / patch) * (side / patch));
                CHECK(p.cols() == patch * patch * C);
                Tensor64 back = unpatchify(p, C, side, side, patch);
                REQUIRE(back.shape() == frame.shape());
                for (std::size_t i = 0; i < frame.size(); ++i)
                    CHECK(back.data()[i] == frame.data()[i]);
            }
        }
    }
    CHECK_THROWS_AS(patchify(Tensor64({1, 10, 10}), 3), DimensionError);
}

TEST_CASE("patch_embed projects patch rows to d_model") {
    std::mt19937_64 rng(34);
    auto p = PatchEmbedParams<double>::make(8, 1, 12, rng);
    Tensor64 frame = Tensor64::uniform({1, 16, 16}, 0, 1, rng);
    Tensor64 tokens = patch_embed(patchify(frame, 8), p);
    CHECK(tokens.shape() == Shape{4, 12});
}
