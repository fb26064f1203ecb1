#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "corpus.hpp"
#include "forest.hpp"
#include "gateway.hpp"
#include "inference.hpp"

namespace metro {

struct ArenaSettings {
    int max_turns = 8;
    int sessions = 4;
    int personas_per_cell = 1;
    int critic_samples = 5;
    bool at_successful_only = false;
    double buyer_target = 100;
    double seller_target = 200;
};

struct RunConfig {
    Task task = Task::negotiation;
    uint64_t seed = 42;
    GatewayConfig gateway;
    ScoringConfig scoring;
    InferenceConfig inference;
    size_t cluster_k = 80;
    bool cluster_normalized = true;
    ArenaSettings arena;
    std::string taxonomy = "default";  // "default" | "none"

    std::filesystem::path corpus_path;
    std::filesystem::path forest_path;
    std::filesystem::path logs_dir;
    std::filesystem::path prompts_dir;

    std::string to_json() const;
    static RunConfig from_json(const std::string& text);
    static RunConfig load(const std::filesystem::path& path);
    static RunConfig defaults_for(Task task);

    // dotted-path override, e.g. set("cluster.k", "12")
    void set(const std::string& key, const std::string& value);
};

// replaces ${VAR} with the environment variable's value (empty if unset)
std::string interpolate_env(const std::string& text);

}  // namespace metro
