#include "sthar/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include <json.hpp>

namespace fs = std::filesystem;

namespace sthar {

namespace {

constexpr char kClipMagic[6] = {'S', 'T', 'H', 'A', 'R', '1'};

void write_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) | (std::uint32_t(b[2]) << 16) |
           (std::uint32_t(b[3]) << 24);
}

// SplitMix64; used to derive independent per-clip seeds from the spec seed.
std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace

// ---------------------------------------------------------------------------
// PGM and raw clip I/O

void write_pgm(const fs::path& path, const std::uint8_t* pixels, std::size_t height,
               std::size_t width) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot write " + path.string());
    os << "P5\n" << width << " " << height << "\n255\n";
    os.write(reinterpret_cast<const char*>(pixels), std::streamsize(height * width));
}

std::vector<std::uint8_t> read_pgm(const fs::path& path, std::size_t& height,
                                   std::size_t& width) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot read " + path.string());
    std::string magic;
    is >> magic;
    if (magic != "P5") throw IoError("not an 8-bit binary PGM: " + path.string());
    auto next_token = [&]() {
        std::string tok;
        while (is >> tok) {
            if (tok[0] == '#') {
                std::string rest;
                std::getline(is, rest);
                continue;
            }
            return tok;
        }
        throw IoError("truncated PGM header: " + path.string());
    };
    width = std::stoul(next_token());
    height = std::stoul(next_token());
    const unsigned maxval = unsigned(std::stoul(next_token()));
    if (maxval != 255) throw IoError("PGM maxval must be 255: " + path.string());
    is.get();  // single whitespace after header
    std::vector<std::uint8_t> pixels(height * width);
    is.read(reinterpret_cast<char*>(pixels.data()), std::streamsize(pixels.size()));
    if (!is) throw IoError("truncated PGM data: " + path.string());
    return pixels;
}

void write_clip_raw(const ClipRecord& clip, const fs::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot write " + path.string());
    os.write(kClipMagic, 6);
    write_u32(os, std::uint32_t(clip.frames));
    write_u32(os, std::uint32_t(clip.channels));
    write_u32(os, std::uint32_t(clip.height));
    write_u32(os, std::uint32_t(clip.width));
    os.write(reinterpret_cast<const char*>(clip.pixels.data()),
             std::streamsize(clip.pixels.size()));
    if (!os) throw IoError("write failed: " + path.string());
}

ClipRecord read_clip_raw(const fs::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot read " + path.string());
    char magic[6];
    is.read(magic, 6);
    if (!is || std::memcmp(magic, kClipMagic, 6) != 0)
        throw IoError("bad clip magic: " + path.string());
    ClipRecord clip;
    clip.frames = read_u32(is);
    clip.channels = read_u32(is);
    clip.height = read_u32(is);
    clip.width = read_u32(is);
    clip.pixels.resize(clip.frames * clip.channels * clip.height * clip.width);
    is.read(reinterpret_cast<char*>(clip.pixels.data()), std::streamsize(clip.pixels.size()));
    if (!is) throw IoError("truncated clip data: " + path.string());
    clip.source = path.string();
    return clip;
}

// ---------------------------------------------------------------------------
// Ingestion

namespace {

std::vector<fs::path> sorted_entries(const fs::path& dir, bool dirs_only) {
    std::vector<fs::path> out;
    for (const auto& e : fs::directory_iterator(dir))
        if (!dirs_only || e.is_directory()) out.push_back(e.path());
    std::sort(out.begin(), out.end(),
              [](const fs::path& a, const fs::path& b) { return a.string() < b.string(); });
    return out;
}

ClipRecord load_frame_dir(const fs::path& dir) {
    std::vector<fs::path> frames;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.path().extension() == ".pgm") frames.push_back(e.path());
    std::sort(frames.begin(), frames.end(),
              [](const fs::path& a, const fs::path& b) { return a.string() < b.string(); });
    if (frames.empty()) throw IoError("no frames in " + dir.string());
    for (std::size_t i = 0; i < frames.size(); ++i) {
        char expect[32];
        std::snprintf(expect, sizeof expect, "frame_%05zu.pgm", i);
        if (frames[i].filename() != expect)
            throw IoError("missing or misnamed frame (expected " + std::string(expect) +
                          "): " + frames[i].string());
    }
    ClipRecord clip;
    clip.channels = 1;
    for (const auto& f : frames) {
        std::size_t h = 0, w = 0;
        auto px = read_pgm(f, h, w);
        if (clip.frames == 0) {
            clip.height = h;
            clip.width = w;
        } else if (h != clip.height || w != clip.width) {
            throw IoError("inconsistent frame shape in " + f.string());
        }
        clip.pixels.insert(clip.pixels.end(), px.begin(), px.end());
        ++clip.frames;
    }
    clip.source = dir.string();
    return clip;
}

}  // namespace

Dataset load_dataset(const fs::path& root) {
    Dataset ds;
    if (!fs::exists(root)) throw IoError("dataset root does not exist: " + root.string());

    // If a manifest is present its class list is authoritative; a class
    // directory it does not mention is an ingestion error.
    std::vector<std::string> declared_classes;
    if (fs::exists(root / "manifest.json")) {
        std::ifstream is(root / "manifest.json");
        nlohmann::json j = nlohmann::json::parse(is);
        for (const auto& c : j.at("classes")) declared_classes.push_back(c.get<std::string>());
        if (j.contains("fps")) ds.manifest.fps = j["fps"].get<double>();
    }

    std::vector<fs::path> class_dirs = sorted_entries(root, true);
    for (const auto& cd : class_dirs) {
        const std::string cname = cd.filename().string();
        if (!declared_classes.empty() &&
            std::find(declared_classes.begin(), declared_classes.end(), cname) ==
                declared_classes.end())
            throw IoError("unknown class directory: " + cd.string());
        ds.manifest.classes.push_back(cname);
    }
    std::sort(ds.manifest.classes.begin(), ds.manifest.classes.end());

    for (const auto& cd : class_dirs) {
        const std::string cname = cd.filename().string();
        const std::size_t label =
            std::size_t(std::find(ds.manifest.classes.begin(), ds.manifest.classes.end(), cname) -
                        ds.manifest.classes.begin());
        for (const auto& sd : sorted_entries(cd, true)) {
            const std::string subject = sd.filename().string();
            for (const auto& entry : sorted_entries(sd, false)) {
                ClipRecord clip;
                if (fs::is_directory(entry)) {
                    clip = load_frame_dir(entry);
                } else if (entry.extension() == ".clip") {
                    clip = read_clip_raw(entry);
                } else {
                    continue;
                }
                clip.label = label;
                clip.class_name = cname;
                clip.subject = subject;
                if (ds.manifest.channels == 0) {
                    ds.manifest.channels = clip.channels;
                    ds.manifest.height = clip.height;
                    ds.manifest.width = clip.width;
                } else if (clip.channels != ds.manifest.channels ||
                           clip.height != ds.manifest.height || clip.width != ds.manifest.width) {
                    throw IoError("inconsistent clip shape: " + entry.string());
                }
                ds.clips.push_back(std::move(clip));
            }
        }
    }
    return ds;
}

std::string manifest_to_json(const Dataset& ds) {
    nlohmann::ordered_json j;
    j["classes"] = ds.manifest.classes;
    j["shape"] = {ds.manifest.channels, ds.manifest.height, ds.manifest.width};
    j["fps"] = ds.manifest.fps;
    j["records"] = nlohmann::ordered_json::array();
    for (const auto& c : ds.clips) {
        nlohmann::ordered_json r;
        r["path"] = c.source;
        r["label"] = c.label;
        r["subject"] = c.subject;
        r["frames"] = c.frames;
        j["records"].push_back(std::move(r));
    }
    return j.dump(2);
}

void write_dataset(const Dataset& ds, const fs::path& out_dir) {
    fs::create_directories(out_dir);
    Dataset written = ds;
    std::map<std::string, std::map<std::string, std::size_t>> counters;
    for (auto& clip : written.clips) {
        const fs::path dir = out_dir / clip.class_name / clip.subject;
        fs::create_directories(dir);
        char name[32];
        std::snprintf(name, sizeof name, "clip_%03zu.clip",
                      counters[clip.class_name][clip.subject]++);
        const fs::path path = dir / name;
        write_clip_raw(clip, path);
        clip.source = path.string();
    }
    std::ofstream os(out_dir / "manifest.json");
    if (!os) throw IoError("cannot write manifest under " + out_dir.string());
    os << manifest_to_json(written) << "\n";
}

// ---------------------------------------------------------------------------
// Synthetic generator

const std::vector<std::string>& synth_class_names() {
    // Kept sorted so labels match ingestion order.
    static const std::vector<std::string> names{"oscillate_h",    "oscillate_v",
                                                "pulse_scale",    "translate_fast",
                                                "translate_medium", "translate_slow"};
    return names;
}

namespace {

struct SquareState {
    double x, y;    // top-left corner
    double size;
};

void draw_frame(std::uint8_t* dst, std::size_t H, std::size_t W, const SquareState& sq,
                double noise, std::mt19937_64& noise_rng) {
    for (std::size_t i = 0; i < H * W; ++i) dst[i] = 20;
    const long sx = std::lround(sq.x), sy = std::lround(sq.y);
    const long sz = std::lround(sq.size);
    for (long y = sy; y < sy + sz; ++y) {
        if (y < 0 || y >= long(H)) continue;
        for (long x = sx; x < sx + sz; ++x) {
            if (x < 0 || x >= long(W)) continue;
            dst[std::size_t(y) * W + std::size_t(x)] = 230;
        }
    }
    if (noise > 0) {
        std::uniform_real_distribution<double> dist(-noise * 255.0, noise * 255.0);
        for (std::size_t i = 0; i < H * W; ++i) {
            const double v = double(dst[i]) + dist(noise_rng);
            dst[i] = std::uint8_t(std::clamp(v, 0.0, 255.0));
        }
    }
}

// Reflecting 1-D motion within [0, limit].
double reflect(double v, double limit) {
    if (limit <= 0) return 0;
    const double period = 2 * limit;
    v = std::fmod(v, period);
    if (v < 0) v += period;
    return v <= limit ? v : period - v;
}

}  // namespace

Dataset synth_generate(const SyntheticSpec& spec) {
    if (spec.clip_length < spec.max_context)
        throw ConfigError("synthetic spec: clip length " + std::to_string(spec.clip_length) +
                          " below max context length " + std::to_string(spec.max_context));
    if (spec.subjects == 0 || spec.clips_per_class == 0)
        throw ConfigError("synthetic spec: subjects and clips_per_class must be >= 1");

    Dataset ds;
    ds.manifest.classes = synth_class_names();
    ds.manifest.channels = 1;
    ds.manifest.height = spec.height;
    ds.manifest.width = spec.width;

    const std::size_t H = spec.height, W = spec.width, T = spec.clip_length;
    constexpr std::size_t kPulsePeriod = 8;

    for (std::size_t label = 0; label < ds.manifest.classes.size(); ++label) {
        const std::string& cname = ds.manifest.classes[label];
        for (std::size_t ci = 0; ci < spec.clips_per_class; ++ci) {
            const std::size_t subject = ci % spec.subjects;
            const std::uint64_t clip_seed =
                mix64(spec.seed ^ mix64(label * 1000003ULL + ci));
            std::mt19937_64 rng(clip_seed);
            std::mt19937_64 noise_rng(mix64(clip_seed ^ 0x5eedULL));

            // Per-subject variation: deterministic size offset and start bias.
            const double base_size = 4.0 + double(subject % 3);
            const double max_x = double(W) - base_size - 2.0;
            const double max_y = double(H) - base_size - 2.0;
            std::uniform_real_distribution<double> ux(0.0, std::max(max_x, 1.0));
            std::uniform_real_distribution<double> uy(0.0, std::max(max_y, 1.0));
            double x0 = reflect(ux(rng) + double(subject), max_x);
            double y0 = reflect(uy(rng) + double(subject % 5), max_y);

            double speed = 0.0;
            if (cname == "translate_slow") speed = 1.0;
            if (cname == "translate_medium") speed = 2.0;
            if (cname == "translate_fast") speed = 3.0;
            std::uniform_int_distribution<int> dir_dist(0, 3);
            const int dir = dir_dist(rng);
            static const double kDirs[4][2] = {{1, 0}, {0, 1}, {1, 1}, {1, -1}};
            const double norm = (dir == 2 || dir == 3) ? std::sqrt(0.5) : 1.0;
            const double vx = speed * kDirs[dir][0] * norm;
            const double vy = speed * kDirs[dir][1] * norm;

            ClipRecord clip;
            clip.frames = T;
            clip.channels = 1;
            clip.height = H;
            clip.width = W;
            clip.label = label;
            clip.class_name = cname;
            clip.subject = "subj" + std::string(subject < 10 ? "0" : "") + std::to_string(subject);
            clip.source = "synth:" + std::to_string(clip_seed);
            clip.pixels.resize(T * H * W);

            for (std::size_t t = 0; t < T; ++t) {
                SquareState sq{x0, y0, base_size};
                if (speed > 0) {
                    sq.x = reflect(x0 + vx * double(t), max_x);
                    sq.y = reflect(y0 + vy * double(t), max_y);
                } else if (cname == "oscillate_h") {
                    sq.x = reflect(x0 + 3.0 * std::sin(2.0 * M_PI * double(t) / 8.0), max_x);
                } else if (cname == "oscillate_v") {
                    sq.y = reflect(y0 + 3.0 * std::sin(2.0 * M_PI * double(t) / 8.0), max_y);
                } else if (cname == "pulse_scale") {
                    // Exact period: size depends only on t mod the period.
                    const std::size_t phase = t % kPulsePeriod;
                    sq.size = base_size +
                              std::round(2.0 * (0.5 - 0.5 * std::cos(2.0 * M_PI * double(phase) /
                                                                     double(kPulsePeriod))));
                }
                draw_frame(clip.pixels.data() + t * H * W, H, W, sq, spec.noise, noise_rng);
            }
            ds.clips.push_back(std::move(clip));
        }
    }
    return ds;
}

// ---------------------------------------------------------------------------
// Sampling and splitting

std::size_t sample_window_start(std::size_t clip_len, std::size_t window, WindowMode mode,
                                std::uint64_t seed) {
    if (clip_len < window)
        throw ContractError("sample_window: clip length " + std::to_string(clip_len) +
                            " shorter than window " + std::to_string(window));
    if (mode == WindowMode::Center) return (clip_len - window) / 2;
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> dist(0, clip_len - window);
    return dist(rng);
}

SplitSpec split_by_subject(const Dataset& ds, double train_ratio, double val_ratio,
                           double test_ratio, std::uint64_t seed) {
    if (std::abs(train_ratio + val_ratio + test_ratio - 1.0) > 1e-9)
        throw ContractError("split_by_subject: ratios must sum to 1");
    std::set<std::string> subject_set;
    for (const auto& c : ds.clips) subject_set.insert(c.subject);
    std::vector<std::string> subjects(subject_set.begin(), subject_set.end());
    if (subjects.size() < 3)
        throw ContractError("split_by_subject: need at least 3 subjects, have " +
                            std::to_string(subjects.size()));
    std::mt19937_64 rng(seed);
    std::shuffle(subjects.begin(), subjects.end(), rng);

    const std::size_t n = subjects.size();
    std::size_t n_train = std::size_t(std::floor(train_ratio * double(n)));
    std::size_t n_val = std::size_t(std::floor(val_ratio * double(n)));
    n_train = std::max<std::size_t>(n_train, 1);
    n_val = std::max<std::size_t>(n_val, 1);
    if (n_train + n_val >= n)
        throw ContractError("split_by_subject: too few subjects for these ratios");

    SplitSpec split;
    for (std::size_t i = 0; i < n; ++i) {
        if (i < n_train)
            split.train.insert(subjects[i]);
        else if (i < n_train + n_val)
            split.val.insert(subjects[i]);
        else
            split.test.insert(subjects[i]);
    }
    return split;
}

}  // namespace sthar
