#include "sthar/config_json.hpp"

namespace sthar {

using nlohmann::json;
using nlohmann::ordered_json;

ordered_json model_config_to_json(const ModelConfig& cfg) {
    ordered_json j;
    j["kind"] = model_kind_name(cfg.kind);
    j["num_classes"] = cfg.num_classes;
    j["context"] = cfg.context;
    j["contexts"] = cfg.contexts;
    j["frame"] = {cfg.frame_channels, cfg.frame_height, cfg.frame_width};
    j["d_model"] = cfg.d_model;
    j["heads"] = cfg.heads;
    j["depth"] = cfg.depth;
    j["d_ff"] = cfg.d_ff;
    j["feature_len"] = cfg.feature_len;
    j["patch"] = cfg.patch;
    j["lstm_hidden"] = cfg.lstm_hidden;
    j["seed"] = cfg.seed;
    return j;
}

ModelConfig model_config_from_json(const json& j) {
    ModelConfig cfg;
    if (j.contains("kind")) cfg.kind = model_kind_from_name(j["kind"].get<std::string>());
    if (j.contains("num_classes")) cfg.num_classes = j["num_classes"].get<std::size_t>();
    if (j.contains("context")) cfg.context = j["context"].get<std::size_t>();
    if (j.contains("contexts")) cfg.contexts = j["contexts"].get<std::vector<std::size_t>>();
    if (j.contains("frame")) {
        auto f = j["frame"].get<std::vector<std::size_t>>();
        if (f.size() != 3) throw ConfigError("model.frame must be [C,H,W]");
        cfg.frame_channels = f[0];
        cfg.frame_height = f[1];
        cfg.frame_width = f[2];
    }
    if (j.contains("d_model")) cfg.d_model = j["d_model"].get<std::size_t>();
    if (j.contains("heads")) cfg.heads = j["heads"].get<std::size_t>();
    if (j.contains("depth")) cfg.depth = j["depth"].get<std::size_t>();
    if (j.contains("d_ff")) cfg.d_ff = j["d_ff"].get<std::size_t>();
    if (j.contains("feature_len")) cfg.feature_len = j["feature_len"].get<std::size_t>();
    if (j.contains("patch")) cfg.patch = j["patch"].get<std::size_t>();
    if (j.contains("lstm_hidden")) cfg.lstm_hidden = j["lstm_hidden"].get<std::size_t>();
    if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
    return cfg;
}

ordered_json train_config_to_json(const TrainConfig& cfg) {
    ordered_json j;
    j["optimizer"] = optimizer_name(cfg.optimizer);
    j["lr"] = cfg.lr;
    j["beta1"] = cfg.beta1;
    j["beta2"] = cfg.beta2;
    j["eps"] = cfg.eps;
    j["momentum"] = cfg.momentum;
    j["batch"] = cfg.batch;
    j["epochs"] = cfg.epochs;
    j["max_steps"] = cfg.max_steps;
    j["clip_norm"] = cfg.clip_norm;
    j["seed"] = cfg.seed;
    j["deterministic"] = cfg.deterministic;
    j["split"] = {cfg.train_ratio, cfg.val_ratio, cfg.test_ratio};
    j["split_seed"] = cfg.split_seed;
    return j;
}

TrainConfig train_config_from_json(const json& j) {
    TrainConfig cfg;
    if (j.contains("optimizer"))
        cfg.optimizer = optimizer_from_name(j["optimizer"].get<std::string>());
    if (j.contains("lr")) cfg.lr = j["lr"].get<double>();
    if (j.contains("beta1")) cfg.beta1 = j["beta1"].get<double>();
    if (j.contains("beta2")) cfg.beta2 = j["beta2"].get<double>();
    if (j.contains("eps")) cfg.eps = j["eps"].get<double>();
    if (j.contains("momentum")) cfg.momentum = j["momentum"].get<double>();
    if (j.contains("batch")) cfg.batch = j["batch"].get<std::size_t>();
    if (j.contains("epochs")) cfg.epochs = j["epochs"].get<std::size_t>();
    if (j.contains("max_steps")) cfg.max_steps = j["max_steps"].get<long long>();
    if (j.contains("clip_norm")) cfg.clip_norm = j["clip_norm"].get<double>();
    if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("deterministic")) cfg.deterministic = j["deterministic"].get<bool>();
    if (j.contains("split")) {
        auto s = j["split"].get<std::vector<double>>();
        if (s.size() != 3) throw ConfigError("train.split must be [train,val,test]");
        cfg.train_ratio = s[0];
        cfg.val_ratio = s[1];
        cfg.test_ratio = s[2];
    }
    if (j.contains("split_seed")) cfg.split_seed = j["split_seed"].get<std::uint64_t>();
    return cfg;
}

ordered_json synth_spec_to_json(const SyntheticSpec& spec) {
    ordered_json j;
    j["clips_per_class"] = spec.clips_per_class;
    j["height"] = spec.height;
    j["width"] = spec.width;
    j["clip_length"] = spec.clip_length;
    j["subjects"] = spec.subjects;
    j["noise"] = spec.noise;
    j["seed"] = spec.seed;
    j["max_context"] = spec.max_context;
    return j;
}

SyntheticSpec synth_spec_from_json(const json& j) {
    SyntheticSpec spec;
    if (j.contains("clips_per_class")) spec.clips_per_class = j["clips_per_class"].get<std::size_t>();
    if (j.contains("height")) spec.height = j["height"].get<std::size_t>();
    if (j.contains("width")) spec.width = j["width"].get<std::size_t>();
    if (j.contains("clip_length")) spec.clip_length = j["clip_length"].get<std::size_t>();
    if (j.contains("subjects")) spec.subjects = j["subjects"].get<std::size_t>();
    if (j.contains("noise")) spec.noise = j["noise"].get<double>();
    if (j.contains("seed")) spec.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("max_context")) spec.max_context = j["max_context"].get<std::size_t>();
    return spec;
}

}  // namespace sthar
