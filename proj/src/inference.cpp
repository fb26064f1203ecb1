#include "inference.hpp"

#include <algorithm>

#include <nlohmann/json.hpp>

#include "state_space.hpp"

namespace metro {

using nlohmann::json;

InferenceMode inference_mode_from_string(const std::string& s) {
    if (s == "full") return InferenceMode::full;
    if (s == "breadth_only") return InferenceMode::breadth_only;
    if (s == "depth_only") return InferenceMode::depth_only;
    if (s == "none") return InferenceMode::none;
    fail(ErrorCode::config, "unknown inference mode: " + s);
}

std::string to_string(InferenceMode m) {
    switch (m) {
        case InferenceMode::full: return "full";
        case InferenceMode::breadth_only: return "breadth_only";
        case InferenceMode::depth_only: return "depth_only";
        default: return "none";
    }
}

std::string TurnTrace::to_json() const {
    json j;
    j["cluster"] = cluster;
    j["short_term"] = short_term;
    j["long_term"] = long_term;
    j["branch"] = branch;
    j["principles"] = principles;
    return j.dump();
}

const StrategyTree& retrieve_tree(const StrategyForest& forest, const std::vector<Turn>& history,
                                  Gateway& gateway) {
    if (forest.trees.empty()) fail(ErrorCode::invalid_argument, "empty forest");
    if (history.empty()) fail(ErrorCode::invalid_argument, "cannot retrieve with empty history");
    EmbeddingVector query = gateway.embed(serialize_history(history));
    size_t best = 0;
    double best_sim = -2.0;
    for (size_t i = 0; i < forest.trees.size(); ++i) {
        double sim = cosine_similarity(forest.trees[i].root_embedding, query);
        if (sim > best_sim) {
            best_sim = sim;
            best = i;
        }
    }
    return forest.trees[best];
}

std::vector<const Principle*> select_principles(const StrategyTree& tree,
                                                const std::string& opponent_utterance, int k,
                                                Gateway& gateway) {
    if (k < 1) fail(ErrorCode::invalid_argument, "k must be >= 1");
    if (tree.principles.empty()) return {};
    EmbeddingVector query = gateway.embed(opponent_utterance);
    std::vector<std::pair<double, const Principle*>> scored;
    for (const Principle& p : tree.principles)
        scored.emplace_back(cosine_similarity(p.anchor, query), &p);
    std::stable_sort(scored.begin(), scored.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    std::vector<const Principle*> out;
    for (size_t i = 0; i < scored.size() && i < static_cast<size_t>(k); ++i)
        out.push_back(scored[i].second);
    return out;
}

std::vector<const Branch*> select_branch(const StrategyTree& tree, int k) {
    std::vector<const Branch*> out;
    for (size_t i = 0; i < tree.kept_branches.size() && i < static_cast<size_t>(std::max(k, 0)); ++i)
        out.push_back(&tree.kept_branches[i]);
    return out;
}

namespace {

std::string last_user_text(const std::vector<Turn>& history) {
    for (auto it = history.rbegin(); it != history.rend(); ++it)
        if (it->speaker == Speaker::user) return it->text;
    return {};
}

std::string windowed_context(const std::vector<Turn>& history, int window) {
    if (window <= 0 || static_cast<size_t>(window) >= history.size())
        return serialize_history(history);
    return serialize_history(
        std::vector<Turn>(history.end() - window, history.end()));
}

}  // namespace

SuggestionBundle InferenceEngine::compose_suggestions(
    const std::vector<const Principle*>& principles, const Branch* branch,
    const std::vector<Turn>& history) {
    SuggestionBundle bundle;
    bool want_breadth =
        config_.mode == InferenceMode::full || config_.mode == InferenceMode::breadth_only;
    bool want_depth =
        config_.mode == InferenceMode::full || config_.mode == InferenceMode::depth_only;

    if (want_breadth) {
        std::string do_list, avoid_list;
        for (const Principle* p : principles) {
            std::string& target = p->kind == PrincipleKind::do_ ? do_list : avoid_list;
            target += "- " + p->text + "\n";
        }
        if (do_list.empty()) do_list = "(none)\n";
        if (avoid_list.empty()) avoid_list = "(none)\n";
        ChatRequest req{"",
                        prompts_.render("short_term_suggestion",
                                        {{"task_role", config_.task_role},
                                         {"last_user", last_user_text(history)},
                                         {"principles", do_list},
                                         {"avoid_principles", avoid_list}}),
                        0.7, 1};
        bundle.short_term = gateway_.chat(req)[0];
        bundle.source_principles = principles;
    }

    if (want_depth && branch) {
        ChatRequest req{"",
                        prompts_.render("long_term_suggestion",
                                        {{"task_role", config_.task_role},
                                         {"context", windowed_context(history, config_.context_window)},
                                         {"branch", join(branch->actions, " -> ")}}),
                        0.7, 1};
        bundle.long_term = gateway_.chat(req)[0];
        bundle.source_branch = branch->actions;
    }
    return bundle;
}

std::string InferenceEngine::generate_response(const SuggestionBundle& bundle,
                                               const std::vector<Turn>& history) {
    if (!history.empty() && history.back().speaker != Speaker::user)
        fail(ErrorCode::invalid_argument, "history must end with a user turn");
    std::map<std::string, std::string> slots = {
        {"task_goal", config_.task_goal},
        {"history", history.empty() ? "(dialogue start)" : serialize_history(history)},
    };
    std::string tmpl = prompts_.get("agent_response");
    // modes with no guidance drop the corresponding prompt blocks entirely
    slots["short_term"] = bundle.short_term.empty() ? "(no suggestion)" : bundle.short_term;
    slots["long_term"] = bundle.long_term.empty() ? "(no directive)" : bundle.long_term;
    ChatRequest req{"", PromptLibrary::substitute(tmpl, slots), 0.7, 1};
    return gateway_.chat(req)[0];
}

std::string InferenceEngine::next_utterance(const std::vector<Turn>& history, TurnTrace* trace) {
    if (history.empty()) {
        ChatRequest req{"", prompts_.render("agent_opener", {{"task_goal", config_.task_goal}}), 0.7,
                        1};
        return gateway_.chat(req)[0];
    }

    SuggestionBundle bundle;
    if (config_.mode != InferenceMode::none) {
        const StrategyTree& tree = retrieve_tree(forest_, history, gateway_);
        std::vector<const Principle*> principles;
        bool want_breadth =
            config_.mode == InferenceMode::full || config_.mode == InferenceMode::breadth_only;
        if (want_breadth) {
            std::string opponent = last_user_text(history);
            if (!opponent.empty())
                principles = select_principles(tree, opponent, config_.top_k_principles, gateway_);
        }
        std::vector<const Branch*> branches = select_branch(tree, config_.top_k_branches_used);
        bundle = compose_suggestions(principles, branches.empty() ? nullptr : branches[0], history);
        bundle.source_cluster = tree.cluster;
        if (trace) {
            trace->cluster = tree.cluster;
            trace->short_term = bundle.short_term;
            trace->long_term = bundle.long_term;
            trace->branch = bundle.source_branch;
            for (const Principle* p : bundle.source_principles)
                trace->principles.push_back("[" + to_string(p->kind) + "] " + p->text);
        }
    }
    return generate_response(bundle, history);
}

}  // namespace metro
