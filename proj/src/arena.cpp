#include "arena.hpp"

#include <algorithm>
#include <iostream>
#include <map>

#include <nlohmann/json.hpp>

#include "state_space.hpp"

namespace metro {

using nlohmann::json;

const std::vector<std::string> kBigFiveTraits = {"openness", "conscientiousness", "extraversion",
                                                 "agreeableness", "neuroticism"};
const std::vector<std::string> kDecisionStyles = {"directive", "conceptual", "analytical",
                                                  "behavioral"};

std::string to_string(SessionOutcome o) {
    switch (o) {
        case SessionOutcome::success: return "success";
        case SessionOutcome::failure: return "failure";
        case SessionOutcome::exhausted: return "exhausted";
        default: return "aborted";
    }
}

std::string SessionResult::to_json() const {
    json j;
    json turns_json = json::array();
    for (const auto& [agent, user] : turns) turns_json.push_back({{"agent", agent}, {"user", user}});
    j["turns"] = turns_json;
    j["n_turns"] = n_turns;
    j["outcome"] = to_string(outcome);
    j["reward"] = reward;
    if (deal_price) j["deal_price"] = *deal_price;
    j["sl_ratio"] = sl_ratio;
    if (price_out_of_range) j["price_out_of_range"] = true;
    return j.dump();
}

std::vector<Persona> generate_personas(int count_per_cell, Gateway& gateway,
                                       const PromptLibrary& prompts) {
    if (count_per_cell < 1) fail(ErrorCode::invalid_argument, "count_per_cell must be >= 1");
    std::vector<Persona> out;
    for (const std::string& trait : kBigFiveTraits) {
        for (const std::string& style : kDecisionStyles) {
            for (int i = 0; i < count_per_cell; ++i) {
                Persona p;
                p.big_five = trait;
                p.decision_style = style;
                ChatRequest req{"", prompts.render("persona", {{"trait", trait}, {"style", style}}),
                                0.9, 1};
                if (i > 0) req.user += "\nVariant " + std::to_string(i) + ".";
                p.description = gateway.chat(req)[0];
                out.push_back(std::move(p));
            }
        }
    }
    return out;
}

SimulatorFn make_simulator(const Persona& persona, const std::string& task_goal, Gateway& gateway,
                           const PromptLibrary& prompts) {
    std::string description = persona.description;
    return [&gateway, &prompts, description, task_goal](const std::vector<Turn>& history) {
        ChatRequest req{"",
                        prompts.render("simulator", {{"task_goal", task_goal},
                                                     {"persona", description},
                                                     {"history", history.empty()
                                                                     ? "(dialogue start)"
                                                                     : serialize_history(history)}}),
                        0.9, 1};
        return gateway.chat(req)[0];
    };
}

CriticResult p4g_decide(const std::vector<std::optional<char>>& letters) {
    static const std::map<char, double> rewards = {
        {'A', -1.0}, {'B', -0.5}, {'C', 0.1}, {'D', 1.0}};
    std::vector<double> values;
    for (const auto& l : letters)
        if (l && rewards.count(*l)) values.push_back(rewards.at(*l));

    CriticResult result;
    if (values.size() < 3) return result;  // too few parseable votes: conservative continue
    double mean = 0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    result.reward = mean;
    if (mean > 0.6)
        result.decision = CriticDecision::success;
    else if (mean < -0.7)
        result.decision = CriticDecision::failure;
    return result;
}

CriticResult cb_decide(
    const std::vector<std::optional<std::pair<bool, std::optional<double>>>>& votes) {
    CriticResult result;
    std::vector<std::pair<bool, std::optional<double>>> parsed;
    for (const auto& v : votes)
        if (v) parsed.push_back(*v);
    if (parsed.empty()) return result;

    bool all_deal = std::all_of(parsed.begin(), parsed.end(), [](const auto& p) { return p.first; });
    if (!all_deal) return result;

    std::map<double, size_t> price_votes;
    for (const auto& p : parsed)
        if (p.second) ++price_votes[*p.second];
    double best_price = 0;
    size_t best_count = 0;
    bool tie = false;
    for (const auto& [price, count] : price_votes) {
        if (count > best_count) {
            best_count = count;
            best_price = price;
            tie = false;
        } else if (count == best_count) {
            tie = true;
        }
    }
    if (best_count == 0 || tie) return result;  // no agreed price: no deal
    result.decision = CriticDecision::success;
    result.deal_price = best_price;
    return result;
}

CriticFn make_p4g_critic(Gateway& gateway, const PromptLibrary& prompts, int samples) {
    return [&gateway, &prompts, samples](const std::vector<Turn>& conversation) {
        if (conversation.empty()) fail(ErrorCode::invalid_argument, "empty conversation");
        ChatRequest req{"",
                        prompts.render("p4g_critic", {{"conversation", serialize_history(conversation)}}),
                        0.7, samples};
        std::vector<std::optional<char>> letters;
        for (const std::string& c : gateway.chat(req)) {
            std::string t = trim(c);
            if (t.size() >= 1 && t[0] >= 'A' && t[0] <= 'D' && (t.size() == 1 || !isalpha(t[1])))
                letters.push_back(t[0]);
            else
                letters.push_back(std::nullopt);
        }
        return p4g_decide(letters);
    };
}

CriticFn make_cb_critic(Gateway& gateway, const PromptLibrary& prompts, int samples) {
    return [&gateway, &prompts, samples](const std::vector<Turn>& conversation) {
        if (conversation.empty()) fail(ErrorCode::invalid_argument, "empty conversation");
        ChatRequest req{"",
                        prompts.render("cb_critic", {{"conversation", serialize_history(conversation)}}),
                        0.7, samples};
        std::vector<std::optional<std::pair<bool, std::optional<double>>>> votes;
        for (const std::string& c : gateway.chat(req)) {
            try {
                size_t brace = c.find('{');
                if (brace == std::string::npos) throw std::runtime_error("no json");
                json j = json::parse(c.substr(brace));
                bool deal = j.at("deal").get<bool>();
                std::optional<double> price;
                if (j.contains("price") && j["price"].is_number()) price = j["price"].get<double>();
                votes.push_back(std::make_pair(deal, price));
            } catch (...) {
                votes.push_back(std::nullopt);
            }
        }
        return cb_decide(votes);
    };
}

double sl_ratio(double deal_price, double buyer_target, double seller_target) {
    if (buyer_target == seller_target)
        fail(ErrorCode::invalid_argument, "buyer and seller targets must differ");
    return (deal_price - seller_target) / (buyer_target - seller_target);
}

SessionResult run_session(const AgentFn& agent, const SimulatorFn& simulator, const CriticFn& critic,
                          const SessionSettings& settings) {
    SessionResult result;
    std::vector<Turn> history;
    try {
        for (int turn = 0; turn < settings.max_turns; ++turn) {
            std::string agent_text = agent(history);
            history.push_back({static_cast<int>(history.size()), Speaker::agent, agent_text});
            std::string user_text = simulator(history);
            history.push_back({static_cast<int>(history.size()), Speaker::user, user_text});
            result.turns.emplace_back(agent_text, user_text);
            result.n_turns = turn + 1;

            CriticResult verdict = critic(history);
            result.reward = verdict.reward;
            if (verdict.decision == CriticDecision::success) {
                result.outcome = SessionOutcome::success;
                if (verdict.deal_price && settings.buyer_target && settings.seller_target) {
                    result.deal_price = verdict.deal_price;
                    result.sl_ratio =
                        sl_ratio(*verdict.deal_price, *settings.buyer_target, *settings.seller_target);
                    double lo = std::min(*settings.buyer_target, *settings.seller_target);
                    double hi = std::max(*settings.buyer_target, *settings.seller_target);
                    result.price_out_of_range = *verdict.deal_price < lo || *verdict.deal_price > hi;
                    result.reward = result.sl_ratio;
                }
                return result;
            }
            if (verdict.decision == CriticDecision::failure) {
                result.outcome = SessionOutcome::failure;
                return result;
            }
        }
        result.outcome = SessionOutcome::exhausted;
    } catch (const Error&) {
        result.outcome = SessionOutcome::aborted;
    }
    return result;
}

AggregateMetrics aggregate(const std::vector<SessionResult>& results, bool at_successful_only) {
    AggregateMetrics m;
    size_t successes = 0;
    size_t at_count = 0;
    double at_sum = 0;
    for (const SessionResult& r : results) {
        if (r.outcome == SessionOutcome::aborted) {
            ++m.aborted;
            continue;
        }
        ++m.sessions;
        if (r.outcome == SessionOutcome::success) ++successes;
        if (!at_successful_only || r.outcome == SessionOutcome::success) {
            at_sum += r.n_turns;
            ++at_count;
        }
        m.sl += r.sl_ratio;
    }
    if (m.sessions == 0) fail(ErrorCode::invalid_argument, "no completed sessions to aggregate");
    m.sr = static_cast<double>(successes) / static_cast<double>(m.sessions);
    m.at = at_count ? at_sum / static_cast<double>(at_count) : 0.0;
    m.sl /= static_cast<double>(m.sessions);
    return m;
}

SessionResult chat_repl(InferenceEngine& engine, const CriticFn& critic,
                        const SessionSettings& settings, std::istream& in, std::ostream& out) {
    SessionResult result;
    std::vector<Turn> history;
    TurnTrace last_trace;
    for (int turn = 0; turn < settings.max_turns; ++turn) {
        TurnTrace trace;
        std::string agent_text = engine.next_utterance(history, &trace);
        last_trace = trace;
        history.push_back({static_cast<int>(history.size()), Speaker::agent, agent_text});
        out << "Agent: " << agent_text << "\n";

        std::string user_text;
        while (true) {
            out << "You: " << std::flush;
            if (!std::getline(in, user_text)) {
                result.outcome = SessionOutcome::aborted;
                return result;
            }
            user_text = trim(user_text);
            if (user_text == "/quit") {
                result.outcome = SessionOutcome::aborted;
                return result;
            }
            if (user_text == "/state") {
                out << last_trace.to_json() << "\n";
                continue;
            }
            if (!user_text.empty()) break;
        }
        history.push_back({static_cast<int>(history.size()), Speaker::user, user_text});
        result.turns.emplace_back(agent_text, user_text);
        result.n_turns = turn + 1;

        CriticResult verdict = critic(history);
        result.reward = verdict.reward;
        if (verdict.decision == CriticDecision::success) {
            result.outcome = SessionOutcome::success;
            if (verdict.deal_price && settings.buyer_target && settings.seller_target) {
                result.deal_price = verdict.deal_price;
                result.sl_ratio =
                    sl_ratio(*verdict.deal_price, *settings.buyer_target, *settings.seller_target);
            }
            out << "[session ended: success]\n";
            return result;
        }
        if (verdict.decision == CriticDecision::failure) {
            result.outcome = SessionOutcome::failure;
            out << "[session ended: failure]\n";
            return result;
        }
    }
    result.outcome = SessionOutcome::exhausted;
    out << "[session ended: turn cap reached]\n";
    return result;
}

}  // namespace metro
