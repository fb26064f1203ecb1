// metro: strategy-forest induction and inference for non-collaborative
// dialogue. Thin shell over the libmetro C API.

#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "metro/metro.h"

namespace {

struct ConfigGuard {
    metro_config* cfg = nullptr;
    ~ConfigGuard() { metro_config_free(cfg); }
};

struct StringGuard {
    char* s = nullptr;
    ~StringGuard() { metro_string_free(s); }
};

int exit_code(metro_status status) {
    if (status != METRO_OK) std::fprintf(stderr, "error: %s\n", metro_last_error());
    return static_cast<int>(status);
}

struct GlobalOpts {
    std::string config_path;
    std::string task = "negotiation";
    long long seed = -1;
    bool stub = false;
    bool replay = false;
    bool record = false;
    std::vector<std::string> sets;
};

metro_status load_config(const GlobalOpts& opts, ConfigGuard& guard) {
    metro_status status = opts.config_path.empty()
                              ? metro_config_default(opts.task.c_str(), &guard.cfg)
                              : metro_config_load(opts.config_path.c_str(), &guard.cfg);
    if (status != METRO_OK) return status;
    if (opts.seed >= 0) {
        status = metro_config_set(guard.cfg, "seed", std::to_string(opts.seed).c_str());
        if (status != METRO_OK) return status;
    }
    if (opts.stub) status = metro_config_set(guard.cfg, "provider.mode", "stub");
    if (status == METRO_OK && opts.record) status = metro_config_set(guard.cfg, "provider.mode", "record");
    if (status == METRO_OK && opts.replay) status = metro_config_set(guard.cfg, "provider.mode", "replay");
    for (const std::string& kv : opts.sets) {
        if (status != METRO_OK) break;
        size_t eq = kv.find('=');
        if (eq == std::string::npos) {
            std::fprintf(stderr, "error: --set expects key=value, got \"%s\"\n", kv.c_str());
            return METRO_ERR_CONFIG;
        }
        status = metro_config_set(guard.cfg, kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str());
    }
    return status;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"METRO strategy forest pipeline"};
    app.require_subcommand(1);
    app.fallthrough();  // global options remain valid after the subcommand name

    GlobalOpts opts;
    app.add_option("--config", opts.config_path, "Config file (JSON)");
    app.add_option("--task", opts.task, "Task when no config file is given")->default_str("negotiation");
    app.add_option("--seed", opts.seed, "Override the run seed");
    app.add_flag("--stub", opts.stub, "Use the deterministic offline provider");
    app.add_flag("--replay", opts.replay, "Serve provider calls from the cache only");
    app.add_flag("--record", opts.record, "Record provider calls into the cache");
    // one value per occurrence so a following subcommand name is not swallowed
    app.add_option("--set", opts.sets, "Dotted config override, e.g. --set cluster.k=12")
        ->allow_extra_args(false);

    std::string corpus, forest, out_path, forest_b, actions;
    long long cluster = 0;
    std::string mode;

    auto* induce = app.add_subcommand("induce", "Induce a strategy forest from a transcript corpus");
    induce->add_option("--corpus", corpus, "Transcript JSONL path");
    induce->add_option("--forest", forest, "Forest output path");

    auto* eval = app.add_subcommand("eval", "Self-play evaluation against persona simulators");
    eval->add_option("--forest", forest, "Forest path");
    eval->add_option("--mode", mode, "Ablation: full | breadth_only | depth_only | none");

    auto* chat = app.add_subcommand("chat", "Interactive terminal session with the agent");
    chat->add_option("--forest", forest, "Forest path");

    auto* analyze = app.add_subcommand("analyze", "Branch-diversity metrics over a forest");
    analyze->add_option("--forest", forest, "Forest path");
    analyze->add_option("--actions", actions, "Labeled action pool JSONL for CC/WCC");

    auto* inspect = app.add_subcommand("inspect", "Dump one strategy tree");
    inspect->add_option("forest", forest, "Forest path")->required();
    inspect->add_option("cluster", cluster, "Cluster index")->required();

    auto* merge = app.add_subcommand("merge", "Concatenate two forests");
    merge->add_option("a", forest, "First forest")->required();
    merge->add_option("b", forest_b, "Second forest")->required();
    merge->add_option("-o,--out", out_path, "Merged forest output")->required();

    CLI11_PARSE(app, argc, argv);

    if (app.got_subcommand(merge))
        return exit_code(metro_merge(forest.c_str(), forest_b.c_str(), out_path.c_str()));

    if (app.got_subcommand(inspect)) {
        metro_forest* handle = nullptr;
        metro_status status = metro_forest_open(forest.c_str(), &handle);
        if (status != METRO_OK) return exit_code(status);
        StringGuard text;
        status = metro_forest_inspect(handle, static_cast<size_t>(cluster), &text.s);
        if (status == METRO_OK) std::printf("%s", text.s);
        metro_forest_free(handle);
        return exit_code(status);
    }

    ConfigGuard cfg;
    metro_status status = load_config(opts, cfg);
    if (status != METRO_OK) return exit_code(status);
    if (!corpus.empty()) status = metro_config_set(cfg.cfg, "paths.corpus", corpus.c_str());
    if (status == METRO_OK && !forest.empty())
        status = metro_config_set(cfg.cfg, "paths.forest", forest.c_str());
    if (status == METRO_OK && !mode.empty())
        status = metro_config_set(cfg.cfg, "inference.mode", mode.c_str());
    if (status != METRO_OK) return exit_code(status);

    if (app.got_subcommand(induce)) return exit_code(metro_induce(cfg.cfg));
    if (app.got_subcommand(eval)) {
        StringGuard report;
        status = metro_eval(cfg.cfg, &report.s);
        if (status == METRO_OK) std::printf("%s\n", report.s);
        return exit_code(status);
    }
    if (app.got_subcommand(chat)) return exit_code(metro_chat(cfg.cfg));
    if (app.got_subcommand(analyze)) {
        StringGuard json;
        status = metro_analyze(cfg.cfg, actions.empty() ? nullptr : actions.c_str(), &json.s);
        if (status == METRO_OK) std::printf("%s\n", json.s);
        return exit_code(status);
    }
    return 0;
}
