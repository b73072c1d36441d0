#pragma once

// Clip ingestion (KTH-style directory layout of PGM frames, or the raw
// "STHAR1" clip files), subject-disjoint splitting, context-window sampling
// and the deterministic synthetic action dataset generator.

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "sthar/error.hpp"
#include "sthar/tensor.hpp"

namespace sthar {

// One clip with frames held in memory as 8-bit grayscale-per-channel pixels.
struct ClipRecord {
    std::vector<std::uint8_t> pixels;  // T·C·H·W bytes
    std::size_t frames = 0, channels = 0, height = 0, width = 0;
    std::size_t label = 0;
    std::string class_name;
    std::string subject;
    std::string source;  // path on disk, or "synth:<seed>" for generated clips

    std::size_t frame_bytes() const { return channels * height * width; }
};

struct DatasetManifest {
    std::vector<std::string> classes;  // index = label
    std::size_t channels = 0, height = 0, width = 0;
    double fps = 25.0;
};

struct Dataset {
    DatasetManifest manifest;
    std::vector<ClipRecord> clips;
};

struct SplitSpec {
    std::set<std::string> train, val, test;
};

struct SyntheticSpec {
    std::size_t clips_per_class = 100;
    std::size_t height = 16, width = 16;
    std::size_t clip_length = 32;
    std::size_t subjects = 10;
    double noise = 0.05;  // additive noise amplitude in [0,1] pixel units
    std::uint64_t seed = 0;
    std::size_t max_context = 24;  // clip_length must cover this
};

enum class WindowMode { Center, Random };

// --- ingestion -------------------------------------------------------------

// Layout: <root>/<class>/<subject>/<clip>/frame_%05d.pgm or
// <root>/<class>/<subject>/<name>.clip (STHAR1). Ordering is lexicographic
// by path; labels follow sorted class names.
Dataset load_dataset(const std::filesystem::path& root);

// Writes clips as STHAR1 files plus manifest.json under out_dir.
void write_dataset(const Dataset& ds, const std::filesystem::path& out_dir);

// Raw clip format: magic "STHAR1", little-endian u32 T,C,H,W, then raw bytes.
void write_clip_raw(const ClipRecord& clip, const std::filesystem::path& path);
ClipRecord read_clip_raw(const std::filesystem::path& path);

void write_pgm(const std::filesystem::path& path, const std::uint8_t* pixels, std::size_t height,
               std::size_t width);
std::vector<std::uint8_t> read_pgm(const std::filesystem::path& path, std::size_t& height,
                                   std::size_t& width);

std::string manifest_to_json(const Dataset& ds);

// --- synthesis ---------------------------------------------------------------

// Six classes of a bright square on dark background: three translation
// speeds and three gesture-like patterns (horizontal/vertical oscillation,
// in-place pulse). Fully reproducible from the spec seed.
Dataset synth_generate(const SyntheticSpec& spec);

const std::vector<std::string>& synth_class_names();

// --- sampling and splitting --------------------------------------------------

// Returns the first frame index of the window. Center mode: the N central
// frames; random mode: seeded contiguous window.
std::size_t sample_window_start(std::size_t clip_len, std::size_t window, WindowMode mode,
                                std::uint64_t seed);

SplitSpec split_by_subject(const Dataset& ds, double train_ratio, double val_ratio,
                           double test_ratio, std::uint64_t seed);

// --- tensor bridge -----------------------------------------------------------

// Frames normalized to [0,1] by /255.
template <typename T>
Tensor<T> frame_to_tensor(const ClipRecord& clip, std::size_t frame_index) {
    const std::size_t fb = clip.frame_bytes();
    Tensor<T> t({clip.channels, clip.height, clip.width});
    const std::uint8_t* src = clip.pixels.data() + frame_index * fb;
    for (std::size_t i = 0; i < fb; ++i) t.data()[i] = T(src[i]) / T(255);
    return t;
}

template <typename T>
std::vector<Tensor<T>> clip_window_tensors(const ClipRecord& clip, std::size_t start,
                                           std::size_t window) {
    std::vector<Tensor<T>> frames;
    frames.reserve(window);
    for (std::size_t t = 0; t < window; ++t)
        frames.push_back(frame_to_tensor<T>(clip, start + t));
    return frames;
}

}  // namespace sthar
