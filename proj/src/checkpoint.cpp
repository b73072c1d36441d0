#include <cstring>
#include <fstream>

#include <json.hpp>

#include "sthar/config_json.hpp"
#include "sthar/training.hpp"

namespace fs = std::filesystem;

namespace sthar {

namespace {

constexpr char kCkptMagic[6] = {'S', 'T', 'H', 'C', 'K', '1'};

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

void write_floats(std::ostream& os, const std::vector<float>& v) {
    for (float f : v) {
        std::uint32_t bits;
        std::memcpy(&bits, &f, 4);
        write_u32(os, bits);
    }
}

std::vector<float> read_floats(std::istream& is, std::size_t n) {
    std::vector<float> v(n);
    for (auto& f : v) {
        const std::uint32_t bits = read_u32(is);
        std::memcpy(&f, &bits, 4);
    }
    return v;
}

}  // namespace

// Layout: magic "STHCK1", u32 header length, ordered-JSON header (config,
// names, shapes, optimizer-state layout, seeds), then all parameter arrays
// as little-endian float32 in name order, then adam m/v (or sgd velocity)
// buffers in the same order.
void save_checkpoint(const Checkpoint& ckpt, const fs::path& path) {
    nlohmann::ordered_json header;
    header["version"] = ckpt.version;
    header["model"] = model_config_to_json(ckpt.model);
    header["names"] = ckpt.names;
    nlohmann::ordered_json shapes = nlohmann::ordered_json::array();
    for (const auto& s : ckpt.shapes) shapes.push_back(s);
    header["shapes"] = std::move(shapes);
    header["optim_step"] = ckpt.optim.step;
    std::vector<std::string> m_names, v_names;
    for (const auto& [name, buf] : ckpt.optim.m) m_names.push_back(name);
    for (const auto& [name, buf] : ckpt.optim.v) v_names.push_back(name);
    header["optim_m_names"] = m_names;
    header["optim_v_names"] = v_names;
    header["train_seed"] = ckpt.train_seed;
    header["split_seed"] = ckpt.split_seed;
    header["split_ratios"] = {ckpt.train_ratio, ckpt.val_ratio, ckpt.test_ratio};
    const std::string header_str = header.dump();

    // Atomic write: temp file then rename.
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary);
        if (!os) throw IoError("cannot write checkpoint: " + path.string());
        os.write(kCkptMagic, 6);
        write_u32(os, std::uint32_t(header_str.size()));
        os.write(header_str.data(), std::streamsize(header_str.size()));
        for (const auto& vals : ckpt.values) write_floats(os, vals);
        for (const auto& name : m_names) {
            const auto& m = ckpt.optim.m.at(name);
            write_u32(os, std::uint32_t(m.size()));
            write_floats(os, std::vector<float>(m.begin(), m.end()));
        }
        for (const auto& name : v_names) {
            const auto& v = ckpt.optim.v.at(name);
            write_u32(os, std::uint32_t(v.size()));
            write_floats(os, std::vector<float>(v.begin(), v.end()));
        }
        if (!os) throw IoError("checkpoint write failed: " + path.string());
    }
    fs::rename(tmp, path);
}

Checkpoint load_checkpoint(const fs::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot read checkpoint: " + path.string());
    char magic[6];
    is.read(magic, 6);
    if (!is || std::memcmp(magic, kCkptMagic, 6) != 0)
        throw IoError("bad checkpoint magic: " + path.string());
    const std::uint32_t header_len = read_u32(is);
    std::string header_str(header_len, '\0');
    is.read(header_str.data(), header_len);
    if (!is) throw IoError("truncated checkpoint header: " + path.string());
    nlohmann::json header = nlohmann::json::parse(header_str);

    Checkpoint ckpt;
    ckpt.version = header.at("version").get<std::uint32_t>();
    ckpt.model = model_config_from_json(header.at("model"));
    ckpt.names = header.at("names").get<std::vector<std::string>>();
    for (const auto& s : header.at("shapes")) ckpt.shapes.push_back(s.get<Shape>());
    ckpt.optim.step = header.at("optim_step").get<std::uint64_t>();
    ckpt.train_seed = header.at("train_seed").get<std::uint64_t>();
    ckpt.split_seed = header.at("split_seed").get<std::uint64_t>();
    if (header.contains("split_ratios")) {
        auto r = header["split_ratios"].get<std::vector<double>>();
        ckpt.train_ratio = r[0];
        ckpt.val_ratio = r[1];
        ckpt.test_ratio = r[2];
    }

    for (const auto& shape : ckpt.shapes)
        ckpt.values.push_back(read_floats(is, shape_numel(shape)));
    for (const auto& name : header.at("optim_m_names").get<std::vector<std::string>>()) {
        const std::uint32_t n = read_u32(is);
        auto fm = read_floats(is, n);
        ckpt.optim.m[name].assign(fm.begin(), fm.end());
    }
    for (const auto& name : header.at("optim_v_names").get<std::vector<std::string>>()) {
        const std::uint32_t n = read_u32(is);
        auto fv = read_floats(is, n);
        ckpt.optim.v[name].assign(fv.begin(), fv.end());
    }
    if (!is) throw IoError("truncated checkpoint data: " + path.string());
    return ckpt;
}

std::string metrics_to_json(const Metrics& metrics) {
    nlohmann::ordered_json j;
    j["train_loss"] = metrics.train_loss;
    j["train_acc"] = metrics.train_acc;
    j["val_acc"] = metrics.val_acc;
    j["test_acc"] = metrics.test_acc;
    j["confusion"] = metrics.confusion;
    j["skipped_short_clips"] = metrics.skipped_short_clips;
    j["wall_seconds"] = metrics.wall_seconds;
    j["steps"] = metrics.steps;
    return j.dump(2);
}

}  // namespace sthar
