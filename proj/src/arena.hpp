#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "corpus.hpp"
#include "gateway.hpp"
#include "inference.hpp"
#include "prompts.hpp"

namespace metro {

struct Persona {
    std::string big_five;        // one of 5 traits
    std::string decision_style;  // one of 4 styles
    std::string description;     // second-person, ~80-120 words
};

extern const std::vector<std::string> kBigFiveTraits;
extern const std::vector<std::string> kDecisionStyles;

enum class SessionOutcome { success, failure, exhausted, aborted };
std::string to_string(SessionOutcome o);

struct SessionResult {
    std::vector<std::pair<std::string, std::string>> turns;  // (agent, user)
    int n_turns = 0;
    SessionOutcome outcome = SessionOutcome::exhausted;
    double reward = 0;
    std::optional<double> deal_price;
    double sl_ratio = 0;  // 0 unless a successful negotiation deal
    bool price_out_of_range = false;

    std::string to_json() const;
};

enum class CriticDecision { success, failure, continue_ };

struct CriticResult {
    CriticDecision decision = CriticDecision::continue_;
    double reward = 0;                // p4g mean reward
    std::optional<double> deal_price; // cb agreed price
};

// Agent/simulator interfaces: history in, next utterance out.
using AgentFn = std::function<std::string(const std::vector<Turn>&)>;
using SimulatorFn = std::function<std::string(const std::vector<Turn>&)>;
using CriticFn = std::function<CriticResult(const std::vector<Turn>&)>;

// 5x4 trait/style grid, count_per_cell personas per cell.
std::vector<Persona> generate_personas(int count_per_cell, Gateway& gateway,
                                       const PromptLibrary& prompts);

SimulatorFn make_simulator(const Persona& persona, const std::string& task_goal, Gateway& gateway,
                           const PromptLibrary& prompts);

// Attitude critic: letters A-D -> {-1.0, -0.5, 0.1, 1.0}; majority of 5
// samples; success above 0.6 mean, failure below -0.7.
CriticFn make_p4g_critic(Gateway& gateway, const PromptLibrary& prompts, int samples = 5);

// Strict deal critic: success only when all parseable samples agree deal=true;
// price by majority, ties -> no deal.
CriticFn make_cb_critic(Gateway& gateway, const PromptLibrary& prompts, int samples = 5);

CriticResult p4g_decide(const std::vector<std::optional<char>>& letters);
CriticResult cb_decide(const std::vector<std::optional<std::pair<bool, std::optional<double>>>>& votes);

double sl_ratio(double deal_price, double buyer_target, double seller_target);

struct SessionSettings {
    int max_turns = 8;
    Task task = Task::negotiation;
    std::optional<double> buyer_target;
    std::optional<double> seller_target;
};

SessionResult run_session(const AgentFn& agent, const SimulatorFn& simulator, const CriticFn& critic,
                          const SessionSettings& settings);

struct AggregateMetrics {
    double sr = 0;
    double at = 0;
    double sl = 0;
    size_t sessions = 0;
    size_t aborted = 0;
};

// SR = successes/total, AT = mean turns over all sessions (flag for
// successful-only), SL% = mean sl_ratio (failures contribute 0).
AggregateMetrics aggregate(const std::vector<SessionResult>& results,
                           bool at_successful_only = false);

// Interactive terminal loop; /quit aborts, /state dumps the last trace.
SessionResult chat_repl(InferenceEngine& engine, const CriticFn& critic,
                        const SessionSettings& settings, std::istream& in, std::ostream& out);

}  // namespace metro
