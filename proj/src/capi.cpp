#include "metro/metro.h"

#include <cstring>
#include <iostream>
#include <memory>
#include <string>

#include "config.hpp"
#include "forest.hpp"
#include "inference.hpp"
#include "pipeline.hpp"

using namespace metro;

struct metro_config {
    RunConfig cfg;
};

struct metro_forest {
    StrategyForest forest;
};

struct metro_session {
    std::unique_ptr<StrategyForest> forest;
    std::unique_ptr<Gateway> gateway;
    std::unique_ptr<PromptLibrary> prompts;
    std::unique_ptr<InferenceEngine> engine;
    std::vector<Turn> history;
    TurnTrace last_trace;
};

namespace {

thread_local std::string g_last_error;

char* dup_string(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

metro_status status_for(ErrorCode code) {
    switch (code) {
        case ErrorCode::io: return METRO_ERR_IO;
        case ErrorCode::config: return METRO_ERR_CONFIG;
        case ErrorCode::ingest: return METRO_ERR_INGEST;
        case ErrorCode::gateway: return METRO_ERR_GATEWAY;
        case ErrorCode::invalid_argument: return METRO_ERR_INVALID;
        default: return METRO_ERR_INTERNAL;
    }
}

template <typename Fn>
metro_status guarded(Fn&& fn) {
    try {
        fn();
        g_last_error.clear();
        return METRO_OK;
    } catch (const Error& e) {
        g_last_error = e.what();
        return status_for(e.code());
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return METRO_ERR_INTERNAL;
    } catch (...) {
        g_last_error = "unknown error";
        return METRO_ERR_INTERNAL;
    }
}

}  // namespace

extern "C" {

const char* metro_version(void) { return "0.1.0"; }

const char* metro_last_error(void) { return g_last_error.c_str(); }

metro_status metro_config_load(const char* path, metro_config** out) {
    return guarded([&] {
        if (!path || !out) fail(ErrorCode::invalid_argument, "null argument");
        *out = new metro_config{RunConfig::load(path)};
    });
}

metro_status metro_config_default(const char* task, metro_config** out) {
    return guarded([&] {
        if (!task || !out) fail(ErrorCode::invalid_argument, "null argument");
        *out = new metro_config{RunConfig::defaults_for(task_from_string(task))};
    });
}

metro_status metro_config_set(metro_config* cfg, const char* key, const char* value) {
    return guarded([&] {
        if (!cfg || !key || !value) fail(ErrorCode::invalid_argument, "null argument");
        cfg->cfg.set(key, value);
    });
}

metro_status metro_config_dump(const metro_config* cfg, char** json_out) {
    return guarded([&] {
        if (!cfg || !json_out) fail(ErrorCode::invalid_argument, "null argument");
        *json_out = dup_string(cfg->cfg.to_json());
    });
}

void metro_config_free(metro_config* cfg) { delete cfg; }

metro_status metro_induce(const metro_config* cfg) {
    return guarded([&] {
        if (!cfg) fail(ErrorCode::invalid_argument, "null config");
        run_induce(cfg->cfg);
    });
}

metro_status metro_eval(const metro_config* cfg, char** report_json_out) {
    return guarded([&] {
        if (!cfg) fail(ErrorCode::invalid_argument, "null config");
        EvalReport report = run_eval(cfg->cfg);
        if (report_json_out) *report_json_out = dup_string(report.report_json);
    });
}

metro_status metro_analyze(const metro_config* cfg, const char* actions_path, char** json_out) {
    return guarded([&] {
        if (!cfg || !json_out) fail(ErrorCode::invalid_argument, "null argument");
        *json_out = dup_string(
            run_analyze(cfg->cfg, actions_path ? std::filesystem::path(actions_path)
                                               : std::filesystem::path{}));
    });
}

metro_status metro_merge(const char* forest_a_path, const char* forest_b_path,
                         const char* out_path) {
    return guarded([&] {
        if (!forest_a_path || !forest_b_path || !out_path)
            fail(ErrorCode::invalid_argument, "null argument");
        StrategyForest merged =
            merge_forests(load_forest(forest_a_path), load_forest(forest_b_path));
        save_forest(merged, out_path);
    });
}

metro_status metro_chat(const metro_config* cfg) {
    return guarded([&] {
        if (!cfg) fail(ErrorCode::invalid_argument, "null config");
        run_chat(cfg->cfg, std::cin, std::cout);
    });
}

metro_status metro_forest_open(const char* path, metro_forest** out) {
    return guarded([&] {
        if (!path || !out) fail(ErrorCode::invalid_argument, "null argument");
        *out = new metro_forest{load_forest(path)};
    });
}

size_t metro_forest_tree_count(const metro_forest* forest) {
    return forest ? forest->forest.trees.size() : 0;
}

metro_status metro_forest_inspect(const metro_forest* forest, size_t cluster, char** text_out) {
    return guarded([&] {
        if (!forest || !text_out) fail(ErrorCode::invalid_argument, "null argument");
        *text_out = dup_string(inspect_tree(forest->forest, cluster));
    });
}

void metro_forest_free(metro_forest* forest) { delete forest; }

metro_status metro_session_new(const metro_config* cfg, metro_session** out) {
    return guarded([&] {
        if (!cfg || !out) fail(ErrorCode::invalid_argument, "null argument");
        auto session = std::make_unique<metro_session>();
        session->forest = std::make_unique<StrategyForest>(load_forest(cfg->cfg.forest_path));
        session->gateway = std::make_unique<Gateway>(cfg->cfg.gateway);
        session->prompts = std::make_unique<PromptLibrary>(cfg->cfg.prompts_dir);
        session->engine = std::make_unique<InferenceEngine>(*session->forest, *session->gateway,
                                                            *session->prompts, cfg->cfg.inference);
        *out = session.release();
    });
}

metro_status metro_session_step(metro_session* session, const char* user_utterance,
                                char** agent_out) {
    return guarded([&] {
        if (!session || !agent_out) fail(ErrorCode::invalid_argument, "null argument");
        if (user_utterance && *user_utterance) {
            session->history.push_back(
                {static_cast<int>(session->history.size()), Speaker::user, user_utterance});
        } else if (!session->history.empty()) {
            fail(ErrorCode::invalid_argument, "user utterance required after the opening turn");
        }
        session->last_trace = TurnTrace{};
        std::string reply = session->engine->next_utterance(session->history, &session->last_trace);
        session->history.push_back(
            {static_cast<int>(session->history.size()), Speaker::agent, reply});
        *agent_out = dup_string(reply);
    });
}

metro_status metro_session_trace(const metro_session* session, char** json_out) {
    return guarded([&] {
        if (!session || !json_out) fail(ErrorCode::invalid_argument, "null argument");
        *json_out = dup_string(session->last_trace.to_json());
    });
}

void metro_session_free(metro_session* session) { delete session; }

void metro_string_free(char* s) { std::free(s); }

}  // extern "C"
