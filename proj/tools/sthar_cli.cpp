// Command-line entry point: synth / train / eval / gradcheck / compare.
//
// Exit codes: 0 success, 1 check or compare failure, 2 usage/config error,
// 3 runtime divergence.

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <future>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "sthar/config_json.hpp"
#include "sthar/data.hpp"
#include "sthar/gradcheck_suites.hpp"
#include "sthar/models.hpp"
#include "sthar/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitConfig = 2;
constexpr int kExitDiverged = 3;

json load_json_file(const fs::path& path) {
    std::ifstream is(path);
    if (!is) throw sthar::ConfigError("cannot read config file: " + path.string());
    return json::parse(is);
}

// Applies "a.b.c=value" overrides; the value is parsed as JSON when
// possible, otherwise taken as a string.
void apply_overrides(json& cfg, const std::vector<std::string>& sets) {
    for (const auto& s : sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos)
            throw sthar::ConfigError("--set expects key.path=value, got '" + s + "'");
        const std::string path = s.substr(0, eq);
        const std::string raw = s.substr(eq + 1);
        json value;
        try {
            value = json::parse(raw);
        } catch (const json::parse_error&) {
            value = raw;
        }
        json* node = &cfg;
        std::istringstream keys(path);
        std::string key, prev;
        std::vector<std::string> parts;
        while (std::getline(keys, key, '.')) parts.push_back(key);
        if (parts.empty()) throw sthar::ConfigError("--set: empty key path");
        for (std::size_t i = 0; i + 1 < parts.size(); ++i) node = &(*node)[parts[i]];
        (*node)[parts.back()] = value;
    }
}

struct RunConfig {
    sthar::ModelConfig model;
    sthar::TrainConfig train;
    std::string data_root;                  // empty -> synthetic
    sthar::SyntheticSpec synthetic;
    bool has_synthetic = false;

    static RunConfig from_json(const json& j) {
        RunConfig rc;
        if (j.contains("model")) rc.model = sthar::model_config_from_json(j["model"]);
        if (j.contains("train")) rc.train = sthar::train_config_from_json(j["train"]);
        if (j.contains("data")) {
            if (j["data"].contains("root")) rc.data_root = j["data"]["root"].get<std::string>();
            if (j["data"].contains("synthetic")) {
                rc.synthetic = sthar::synth_spec_from_json(j["data"]["synthetic"]);
                rc.has_synthetic = true;
            }
        }
        return rc;
    }

    ordered_json to_json() const {
        ordered_json j;
        ordered_json data;
        if (!data_root.empty()) data["root"] = data_root;
        if (has_synthetic) data["synthetic"] = sthar::synth_spec_to_json(synthetic);
        j["data"] = std::move(data);
        j["model"] = sthar::model_config_to_json(model);
        j["train"] = sthar::train_config_to_json(train);
        return j;
    }

    sthar::Dataset load_data() const {
        if (!data_root.empty()) return sthar::load_dataset(data_root);
        if (has_synthetic) return sthar::synth_generate(synthetic);
        throw sthar::ConfigError("config: data.root or data.synthetic is required");
    }
};

void write_text_atomic(const fs::path& path, const std::string& text) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary);
        if (!os) throw sthar::IoError("cannot write " + path.string());
        os << text;
    }
    fs::rename(tmp, path);
}

void guard_overwrite(const fs::path& path, bool force) {
    if (fs::exists(path) && !force)
        throw sthar::ConfigError("output exists (use --force to overwrite): " + path.string());
}

// --- subcommands ------------------------------------------------------------

int cmd_synth(const fs::path& spec_path, const fs::path& out, bool force) {
    sthar::SyntheticSpec spec;
    if (!spec_path.empty()) spec = sthar::synth_spec_from_json(load_json_file(spec_path));
    guard_overwrite(out / "manifest.json", force);
    sthar::Dataset ds = sthar::synth_generate(spec);
    sthar::write_dataset(ds, out);
    std::cout << "wrote " << ds.clips.size() << " clips across " << ds.manifest.classes.size()
              << " classes to " << out.string() << "\n";
    return kExitOk;
}

int cmd_train(RunConfig rc, const fs::path& out, bool force) {
    rc.model.validate();
    rc.train.validate();
    guard_overwrite(out / "metrics.json", force);
    fs::create_directories(out);
    write_text_atomic(out / "config.json", rc.to_json().dump(2) + "\n");

    sthar::Dataset ds = rc.load_data();
    sthar::SplitSpec split = sthar::split_by_subject(ds, rc.train.train_ratio, rc.train.val_ratio,
                                                     rc.train.test_ratio, rc.train.split_seed);
    auto result = sthar::train<float>(rc.model, ds, split, rc.train);
    sthar::Metrics test = sthar::evaluate(rc.model, result.best_store, ds, split.test,
                                          rc.model.context);
    result.metrics.test_acc = test.test_acc;
    result.metrics.confusion = test.confusion;
    result.metrics.skipped_short_clips = test.skipped_short_clips;

    sthar::save_checkpoint(result.checkpoint, out / "checkpoint.bin");
    write_text_atomic(out / "metrics.json", sthar::metrics_to_json(result.metrics) + "\n");
    std::cout << sthar::metrics_to_json(result.metrics) << "\n";
    return kExitOk;
}

int cmd_eval(const fs::path& ckpt_path, const fs::path& data_dir, const std::string& split_name) {
    if (split_name != "train" && split_name != "val" && split_name != "test")
        throw sthar::ConfigError("eval: --split must be train, val or test");
    sthar::Checkpoint ckpt = sthar::load_checkpoint(ckpt_path);
    sthar::Dataset ds = sthar::load_dataset(data_dir);
    if (ds.manifest.channels != ckpt.model.frame_channels ||
        ds.manifest.height != ckpt.model.frame_height ||
        ds.manifest.width != ckpt.model.frame_width)
        throw sthar::ConfigError("eval: dataset frame shape does not match checkpoint config");
    sthar::SplitSpec split = sthar::split_by_subject(ds, ckpt.train_ratio, ckpt.val_ratio,
                                                     ckpt.test_ratio, ckpt.split_seed);
    const auto& subjects = split_name == "train" ? split.train
                           : split_name == "val" ? split.val
                                                 : split.test;
    auto store = sthar::checkpoint_to_store<float>(ckpt);
    sthar::Metrics m = sthar::evaluate(ckpt.model, store, ds, subjects, ckpt.model.context);
    sthar::Metrics out;
    out.test_acc = m.test_acc;
    out.confusion = m.confusion;
    out.skipped_short_clips = m.skipped_short_clips;
    std::cout << sthar::metrics_to_json(out) << "\n";
    return kExitOk;
}

int cmd_gradcheck(const std::string& level) {
    bool all_passed = true;
    auto print = [&](const std::vector<sthar::SuiteCheck>& checks, const std::string& name) {
        for (const auto& c : checks) {
            const bool ok = c.passed();
            all_passed = all_passed && ok;
            std::cout << (ok ? "PASS" : "FAIL") << " " << name << "/" << c.name
                      << " max_rel_err=" << c.max_rel_err << " tol=" << c.tolerance << "\n";
        }
    };
    if (level == "ops" || level == "all") print(sthar::gradcheck_ops(), "ops");
    if (level == "cells" || level == "all") print(sthar::gradcheck_cells(), "cells");
    if (level == "models" || level == "all") print(sthar::gradcheck_models(), "models");
    return all_passed ? kExitOk : kExitCheckFailed;
}

struct CompareCell {
    std::size_t context = 0;
    std::string model;
    bool ok = false;
    double accuracy = 0.0;
    double seconds = 0.0;
    std::string error;
};

int cmd_compare(RunConfig rc, const std::vector<std::size_t>& contexts,
                const std::vector<std::string>& models, const fs::path& out, bool force) {
    guard_overwrite(out / "compare.csv", force);
    fs::create_directories(out);
    sthar::Dataset ds = rc.load_data();
    sthar::SplitSpec split = sthar::split_by_subject(ds, rc.train.train_ratio, rc.train.val_ratio,
                                                     rc.train.test_ratio, rc.train.split_seed);

    std::vector<CompareCell> cells(contexts.size() * models.size());
    auto run_cell = [&](std::size_t idx) {
        CompareCell& cell = cells[idx];
        cell.context = contexts[idx / models.size()];
        cell.model = models[idx % models.size()];
        const auto t0 = std::chrono::steady_clock::now();
        try {
            sthar::ModelConfig mc = rc.model;
            mc.kind = sthar::model_kind_from_name(cell.model);
            mc.context = cell.context;
            mc.validate();
            auto result = sthar::train<float>(mc, ds, split, rc.train);
            sthar::Metrics test =
                sthar::evaluate(mc, result.best_store, ds, split.test, mc.context);
            cell.accuracy = test.test_acc;
            cell.ok = true;
        } catch (const std::exception& e) {
            cell.error = e.what();
        }
        cell.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    };

    std::size_t threads = 1;
    if (!rc.train.deterministic) {
        if (const char* env = std::getenv("STHAR_THREADS")) threads = std::max(1, std::atoi(env));
    }
    if (threads <= 1) {
        for (std::size_t i = 0; i < cells.size(); ++i) run_cell(i);
    } else {
        std::size_t next = 0;
        while (next < cells.size()) {
            std::vector<std::future<void>> batch;
            for (std::size_t k = 0; k < threads && next < cells.size(); ++k, ++next)
                batch.push_back(std::async(std::launch::async, run_cell, next));
            for (auto& f : batch) f.get();
        }
    }

    std::ostringstream csv;
    csv << "context,model,accuracy,seconds\n";
    ordered_json jgrid = ordered_json::array();
    bool any_failed = false;
    for (const auto& cell : cells) {
        any_failed = any_failed || !cell.ok;
        csv << cell.context << "," << cell.model << ","
            << (cell.ok ? std::to_string(cell.accuracy) : "failed") << "," << cell.seconds << "\n";
        ordered_json jc;
        jc["context"] = cell.context;
        jc["model"] = cell.model;
        jc["ok"] = cell.ok;
        jc["accuracy"] = cell.accuracy;
        jc["seconds"] = cell.seconds;
        if (!cell.ok) jc["error"] = cell.error;
        jgrid.push_back(std::move(jc));
    }
    write_text_atomic(out / "compare.csv", csv.str());
    write_text_atomic(out / "compare.json", jgrid.dump(2) + "\n");
    std::cout << csv.str();
    return any_failed ? kExitCheckFailed : kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Spatio-temporal human action recognition toolkit"};
    app.require_subcommand(1);

    // synth
    auto* synth = app.add_subcommand("synth", "Generate the synthetic dataset");
    std::string synth_spec, synth_out;
    bool synth_force = false;
    synth->add_option("--spec", synth_spec, "Synthetic spec JSON (defaults used if omitted)");
    synth->add_option("--out", synth_out, "Output directory")->required();
    synth->add_flag("--force", synth_force, "Overwrite existing output");

    // train
    auto* train = app.add_subcommand("train", "Train a model");
    std::string train_config, train_model, train_out;
    std::vector<std::string> train_sets;
    long long train_context = -1, train_seed = -1;
    bool train_force = false;
    train->add_option("--config", train_config, "Run config JSON")->required();
    train->add_option("--model", train_model, "Model kind override");
    train->add_option("--context", train_context, "Context length override");
    train->add_option("--seed", train_seed, "Seed override (model and train)");
    train->add_option("--set", train_sets, "Dotted-path config overrides key=value");
    train->add_option("--out", train_out, "Output directory")->required();
    train->add_flag("--force", train_force, "Overwrite existing output");

    // eval
    auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
    std::string eval_ckpt, eval_data, eval_split = "test";
    eval->add_option("--checkpoint", eval_ckpt, "Checkpoint file")->required();
    eval->add_option("--data", eval_data, "Dataset directory")->required();
    eval->add_option("--split", eval_split, "Split: train, val or test");

    // gradcheck
    auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference gradient suites");
    std::string gc_level = "all";
    gradcheck->add_option("--level", gc_level, "ops, cells, models or all")
        ->check(CLI::IsMember({"ops", "cells", "models", "all"}));

    // compare
    auto* compare = app.add_subcommand("compare", "Train/evaluate a model × context grid");
    std::string cmp_config, cmp_out, cmp_contexts = "12,18,24",
                cmp_models = "hybrid,vit_only,cnn_baseline";
    std::vector<std::string> cmp_sets;
    bool cmp_force = false;
    compare->add_option("--config", cmp_config, "Run config JSON")->required();
    compare->add_option("--contexts", cmp_contexts, "Comma-separated context lengths");
    compare->add_option("--models", cmp_models, "Comma-separated model kinds");
    compare->add_option("--set", cmp_sets, "Dotted-path config overrides key=value");
    compare->add_option("--out", cmp_out, "Output directory")->required();
    compare->add_flag("--force", cmp_force, "Overwrite existing output");

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) return cmd_synth(synth_spec, synth_out, synth_force);
        if (train->parsed()) {
            json j = load_json_file(train_config);
            apply_overrides(j, train_sets);
            RunConfig rc = RunConfig::from_json(j);
            if (!train_model.empty()) rc.model.kind = sthar::model_kind_from_name(train_model);
            if (train_context >= 0) rc.model.context = std::size_t(train_context);
            if (train_seed >= 0) {
                rc.model.seed = std::uint64_t(train_seed);
                rc.train.seed = std::uint64_t(train_seed);
            }
            return cmd_train(std::move(rc), train_out, train_force);
        }
        if (eval->parsed()) return cmd_eval(eval_ckpt, eval_data, eval_split);
        if (gradcheck->parsed()) return cmd_gradcheck(gc_level);
        if (compare->parsed()) {
            json j = load_json_file(cmp_config);
            apply_overrides(j, cmp_sets);
            RunConfig rc = RunConfig::from_json(j);
            std::vector<std::size_t> contexts;
            std::istringstream cs(cmp_contexts);
            for (std::string tok; std::getline(cs, tok, ',');)
                contexts.push_back(std::size_t(std::stoul(tok)));
            std::vector<std::string> models;
            std::istringstream ms(cmp_models);
            for (std::string tok; std::getline(ms, tok, ',');) models.push_back(tok);
            if (contexts.empty() || models.empty())
                throw sthar::ConfigError("compare: need at least one context and one model");
            return cmd_compare(std::move(rc), contexts, models, cmp_out, cmp_force);
        }
    } catch (const sthar::NumericError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitDiverged;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    }
    return kExitConfig;
}
