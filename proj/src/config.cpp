#include "config.hpp"

#include <cstdlib>

#include <nlohmann/json.hpp>

namespace metro {

using nlohmann::json;

std::string interpolate_env(const std::string& text) {
    std::string out;
    size_t pos = 0;
    while (pos < text.size()) {
        size_t open = text.find("${", pos);
        if (open == std::string::npos) {
            out += text.substr(pos);
            break;
        }
        size_t close = text.find('}', open);
        if (close == std::string::npos) {
            out += text.substr(pos);
            break;
        }
        out += text.substr(pos, open - pos);
        std::string var = text.substr(open + 2, close - open - 2);
        const char* val = std::getenv(var.c_str());
        if (val) out += val;
        pos = close + 1;
    }
    return out;
}

namespace {

GatewayMode gateway_mode_from_string(const std::string& s) {
    if (s == "stub") return GatewayMode::stub;
    if (s == "live") return GatewayMode::live;
    if (s == "record") return GatewayMode::record;
    if (s == "replay") return GatewayMode::replay;
    fail(ErrorCode::config, "unknown gateway mode: " + s);
}

std::string to_string(GatewayMode m) {
    switch (m) {
        case GatewayMode::stub: return "stub";
        case GatewayMode::live: return "live";
        case GatewayMode::record: return "record";
        default: return "replay";
    }
}

std::string env_str(const json& j, const std::string& key, const std::string& fallback) {
    return interpolate_env(j.value(key, fallback));
}

}  // namespace

RunConfig RunConfig::defaults_for(Task task) {
    RunConfig cfg;
    cfg.task = task;
    if (task == Task::persuasion) {
        cfg.cluster_k = 150;
        cfg.inference.task_role = "persuasion";
        cfg.inference.task_goal = "charity donation persuasion";
    } else {
        cfg.cluster_k = 80;
        cfg.inference.task_role = "negotiation";
        cfg.inference.task_goal = "price negotiation";
    }
    return cfg;
}

std::string RunConfig::to_json() const {
    json j;
    j["task"] = metro::to_string(task);
    j["seed"] = seed;
    j["taxonomy"] = taxonomy;
    j["provider"] = {{"mode", to_string(gateway.mode)},
                     {"cache_dir", gateway.cache_dir.string()},
                     {"stub_embedding_dim", gateway.stub_embedding_dim},
                     {"max_in_flight", gateway.max_in_flight},
                     {"base_url", gateway.http.base_url},
                     {"api_key", ""},
                     {"chat_model", gateway.http.chat_model},
                     {"embed_model", gateway.http.embed_model},
                     {"embedding_dim", gateway.http.embedding_dim},
                     {"max_retries", gateway.http.max_retries},
                     {"backoff_ms", gateway.http.backoff_ms}};
    j["scoring"] = {{"lambda_len", scoring.lambda_len},
                    {"gamma", scoring.gamma},
                    {"w_sr", scoring.w_sr},
                    {"w_val", scoring.w_val},
                    {"w_cnt", scoring.w_cnt},
                    {"z", scoring.z},
                    {"top_k_branches", scoring.top_k_branches},
                    {"beam_width", scoring.beam_width}};
    j["inference"] = {{"top_k_principles", inference.top_k_principles},
                      {"top_k_branches_used", inference.top_k_branches_used},
                      {"mode", metro::to_string(inference.mode)},
                      {"context_window", inference.context_window},
                      {"task_role", inference.task_role},
                      {"task_goal", inference.task_goal}};
    j["cluster"] = {{"k", cluster_k}, {"normalized", cluster_normalized}};
    j["arena"] = {{"max_turns", arena.max_turns},
                  {"sessions", arena.sessions},
                  {"personas_per_cell", arena.personas_per_cell},
                  {"critic_samples", arena.critic_samples},
                  {"at_successful_only", arena.at_successful_only},
                  {"buyer_target", arena.buyer_target},
                  {"seller_target", arena.seller_target}};
    j["paths"] = {{"corpus", corpus_path.string()},
                  {"forest", forest_path.string()},
                  {"logs", logs_dir.string()},
                  {"prompts", prompts_dir.string()}};
    return j.dump(2);
}

RunConfig RunConfig::from_json(const std::string& text) {
    json j = json::parse(text);
    RunConfig cfg = defaults_for(task_from_string(j.value("task", "negotiation")));
    cfg.seed = j.value("seed", cfg.seed);
    cfg.taxonomy = j.value("taxonomy", cfg.taxonomy);

    if (j.contains("provider")) {
        const json& p = j["provider"];
        cfg.gateway.mode = gateway_mode_from_string(p.value("mode", "stub"));
        cfg.gateway.cache_dir = env_str(p, "cache_dir", "");
        cfg.gateway.stub_embedding_dim = p.value("stub_embedding_dim", cfg.gateway.stub_embedding_dim);
        cfg.gateway.max_in_flight = p.value("max_in_flight", cfg.gateway.max_in_flight);
        cfg.gateway.http.base_url = env_str(p, "base_url", "");
        cfg.gateway.http.api_key = env_str(p, "api_key", "");
        cfg.gateway.http.chat_model = p.value("chat_model", "");
        cfg.gateway.http.embed_model = p.value("embed_model", "");
        cfg.gateway.http.embedding_dim = p.value("embedding_dim", cfg.gateway.http.embedding_dim);
        cfg.gateway.http.max_retries = p.value("max_retries", cfg.gateway.http.max_retries);
        cfg.gateway.http.backoff_ms = p.value("backoff_ms", cfg.gateway.http.backoff_ms);
    }
    if (j.contains("scoring")) {
        const json& s = j["scoring"];
        cfg.scoring.lambda_len = s.value("lambda_len", cfg.scoring.lambda_len);
        cfg.scoring.gamma = s.value("gamma", cfg.scoring.gamma);
        cfg.scoring.w_sr = s.value("w_sr", cfg.scoring.w_sr);
        cfg.scoring.w_val = s.value("w_val", cfg.scoring.w_val);
        cfg.scoring.w_cnt = s.value("w_cnt", cfg.scoring.w_cnt);
        cfg.scoring.z = s.value("z", cfg.scoring.z);
        cfg.scoring.top_k_branches = s.value("top_k_branches", cfg.scoring.top_k_branches);
        cfg.scoring.beam_width = s.value("beam_width", cfg.scoring.beam_width);
    }
    if (j.contains("inference")) {
        const json& i = j["inference"];
        cfg.inference.top_k_principles = i.value("top_k_principles", cfg.inference.top_k_principles);
        cfg.inference.top_k_branches_used =
            i.value("top_k_branches_used", cfg.inference.top_k_branches_used);
        cfg.inference.mode = inference_mode_from_string(i.value("mode", "full"));
        cfg.inference.context_window = i.value("context_window", cfg.inference.context_window);
        cfg.inference.task_role = i.value("task_role", cfg.inference.task_role);
        cfg.inference.task_goal = i.value("task_goal", cfg.inference.task_goal);
    }
    if (j.contains("cluster")) {
        cfg.cluster_k = j["cluster"].value("k", cfg.cluster_k);
        cfg.cluster_normalized = j["cluster"].value("normalized", cfg.cluster_normalized);
    }
    if (j.contains("arena")) {
        const json& a = j["arena"];
        cfg.arena.max_turns = a.value("max_turns", cfg.arena.max_turns);
        cfg.arena.sessions = a.value("sessions", cfg.arena.sessions);
        cfg.arena.personas_per_cell = a.value("personas_per_cell", cfg.arena.personas_per_cell);
        cfg.arena.critic_samples = a.value("critic_samples", cfg.arena.critic_samples);
        cfg.arena.at_successful_only = a.value("at_successful_only", cfg.arena.at_successful_only);
        cfg.arena.buyer_target = a.value("buyer_target", cfg.arena.buyer_target);
        cfg.arena.seller_target = a.value("seller_target", cfg.arena.seller_target);
    }
    if (j.contains("paths")) {
        const json& p = j["paths"];
        cfg.corpus_path = env_str(p, "corpus", "");
        cfg.forest_path = env_str(p, "forest", "");
        cfg.logs_dir = env_str(p, "logs", "");
        cfg.prompts_dir = env_str(p, "prompts", "");
    }
    return cfg;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
    try {
        return from_json(read_file(path));
    } catch (const json::exception& e) {
        fail(ErrorCode::config, "bad config file " + path.string() + ": " + e.what());
    }
}

void RunConfig::set(const std::string& key, const std::string& value) {
    json j = json::parse(to_json());
    json* cursor = &j;
    size_t pos = 0;
    std::string k = key;
    while (true) {
        size_t dot = k.find('.', pos);
        std::string part = k.substr(pos, dot == std::string::npos ? std::string::npos : dot - pos);
        if (dot == std::string::npos) {
            // coerce to the existing field's type when possible
            if (cursor->contains(part) && (*cursor)[part].is_number()) {
                (*cursor)[part] = json::parse(value);
            } else if (cursor->contains(part) && (*cursor)[part].is_boolean()) {
                (*cursor)[part] = value == "true";
            } else {
                (*cursor)[part] = value;
            }
            break;
        }
        cursor = &(*cursor)[part];
        pos = dot + 1;
    }
    *this = from_json(j.dump());
}

}  // namespace metro
