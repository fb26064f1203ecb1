#pragma once

#include <string>
#include <vector>

#include "forest.hpp"
#include "gateway.hpp"
#include "prompts.hpp"

namespace metro {

enum class InferenceMode { full, breadth_only, depth_only, none };

InferenceMode inference_mode_from_string(const std::string& s);
std::string to_string(InferenceMode m);

struct InferenceConfig {
    int top_k_principles = 5;
    int top_k_branches_used = 1;
    InferenceMode mode = InferenceMode::full;
    int context_window = 0;  // 0 = full history for the long-horizon prompt
    std::string task_role = "negotiation";  // used in suggestion prompts
    std::string task_goal = "price negotiation";
};

struct SuggestionBundle {
    std::string short_term;
    std::string long_term;
    size_t source_cluster = 0;
    std::vector<std::string> source_branch;
    std::vector<const Principle*> source_principles;
};

struct TurnTrace {
    size_t cluster = 0;
    std::string short_term;
    std::string long_term;
    std::vector<std::string> branch;
    std::vector<std::string> principles;

    std::string to_json() const;
};

const StrategyTree& retrieve_tree(const StrategyForest& forest, const std::vector<Turn>& history,
                                  Gateway& gateway);

// Top-k principles by cosine similarity between their anchors and the
// opponent-utterance embedding. Fewer returned when the tree holds fewer.
std::vector<const Principle*> select_principles(const StrategyTree& tree,
                                                const std::string& opponent_utterance, int k,
                                                Gateway& gateway);

std::vector<const Branch*> select_branch(const StrategyTree& tree, int k);

class InferenceEngine {
public:
    InferenceEngine(const StrategyForest& forest, Gateway& gateway, const PromptLibrary& prompts,
                    InferenceConfig config)
        : forest_(forest), gateway_(gateway), prompts_(prompts), config_(std::move(config)) {}

    SuggestionBundle compose_suggestions(const std::vector<const Principle*>& principles,
                                         const Branch* branch, const std::vector<Turn>& history);

    std::string generate_response(const SuggestionBundle& bundle, const std::vector<Turn>& history);

    // Full per-turn pipeline: retrieve, select, compose, respond.
    // Empty history skips retrieval and uses the opener prompt.
    std::string next_utterance(const std::vector<Turn>& history, TurnTrace* trace = nullptr);

    const InferenceConfig& config() const { return config_; }

private:
    const StrategyForest& forest_;
    Gateway& gateway_;
    const PromptLibrary& prompts_;
    InferenceConfig config_;
};

}  // namespace metro
