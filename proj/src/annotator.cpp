#include "annotator.hpp"

#include <algorithm>
#include <iostream>

#include "state_space.hpp"

namespace metro {

bool ActionTaxonomy::contains(const std::string& label) const {
    return std::any_of(actions.begin(), actions.end(),
                       [&](const auto& a) { return a.first == label; });
}

std::string ActionTaxonomy::listing() const {
    std::string out;
    for (const auto& [label, desc] : actions) out += "- " + label + ": " + desc + "\n";
    return out;
}

ActionTaxonomy ActionTaxonomy::p4g_default() {
    return {Task::persuasion,
            {{"logical-appeal", "Use of reasoning and evidence to convince others"},
             {"emotion-appeal", "Elicitation of specific emotions to influence others"},
             {"credibility-appeal", "Cite organizational impacts to establish credibility"},
             {"foot-in-the-door", "Start with small donation requests to facilitate compliance"},
             {"self-modeling", "Indicate own intention to donate as a role model"},
             {"personal-story", "Use narrative examples with emotional impact"},
             {"donation-information", "Provide specific donation procedure information"},
             {"source-related-inquiry", "Ask about familiarity with the organization"},
             {"task-related-inquiry", "Ask about the opinion related to donation"},
             {"personal-related-inquiry", "Ask about previous personal experiences"}}};
}

ActionTaxonomy ActionTaxonomy::cb_default() {
    return {Task::negotiation,
            {{"greetings", "Open the conversation politely"},
             {"ask-a-question", "Request information about the item"},
             {"propose-price", "Put a concrete price on the table"},
             {"counter-price", "Reject the standing price with a new one"},
             {"use-comparables", "Cite market prices or alternatives"},
             {"show-hesitancy", "Signal doubt to pressure a concession"},
             {"offer-concession", "Add value such as pickup or quick payment"},
             {"appeal-to-budget", "Claim a firm budget limit"},
             {"split-the-difference", "Propose meeting in the middle"},
             {"accept-or-close", "Accept terms or move to close the deal"}}};
}

std::string normalize_action_label(const std::string& raw) {
    std::string out = to_lower(trim(raw));
    for (char& c : out)
        if (c == ' ' || c == '_') c = '-';
    // strip surrounding punctuation the model sometimes adds
    while (!out.empty() && (out.front() == '"' || out.front() == '\'' || out.front() == '`'))
        out.erase(out.begin());
    while (!out.empty() && (out.back() == '"' || out.back() == '\'' || out.back() == '`' ||
                            out.back() == '.'))
        out.pop_back();
    return out;
}

std::string Annotator::extract_action(const std::vector<Turn>& history, const std::string& utterance,
                                      const ActionTaxonomy* taxonomy) {
    std::string history_text = history.empty() ? "(dialogue start)" : serialize_history(history);
    std::map<std::string, std::string> slots = {{"history", history_text}, {"utterance", utterance}};

    if (!taxonomy) {
        ChatRequest req{"", prompts_.render("action_extraction_free", slots), temperature_, 1};
        std::string label = normalize_action_label(gateway_.chat(req)[0]);
        if (std::find(induced_actions_.begin(), induced_actions_.end(), label) ==
            induced_actions_.end())
            induced_actions_.push_back(label);
        return label;
    }

    slots["actions"] = taxonomy->listing();
    ChatRequest req{"", prompts_.render("action_extraction", slots), temperature_, 1};
    for (int attempt = 0; attempt < 2; ++attempt) {
        std::string label = normalize_action_label(gateway_.chat(req)[0]);
        if (taxonomy->contains(label)) return label;
        req.user += "\nYour previous answer was not in the list. Answer with one listed label only.";
    }
    fail(ErrorCode::gateway, "action label outside taxonomy after retry");
}

CriticVerdict Annotator::tally_votes(const std::vector<std::optional<CriticLabel>>& parsed) {
    CriticVerdict verdict;
    int counts[3] = {0, 0, 0};
    for (const auto& vote : parsed) {
        if (!vote) continue;
        verdict.votes.push_back(*vote);
        counts[static_cast<int>(*vote)] += 1;
    }
    verdict.valid = verdict.votes.size() >= 3;
    int best = std::max({counts[0], counts[1], counts[2]});
    int winners = (counts[0] == best) + (counts[1] == best) + (counts[2] == best);
    if (winners != 1 || best == 0) {
        verdict.label = CriticLabel::neutral;
    } else if (counts[static_cast<int>(CriticLabel::better)] == best) {
        verdict.label = CriticLabel::better;
    } else if (counts[static_cast<int>(CriticLabel::worse)] == best) {
        verdict.label = CriticLabel::worse;
    } else {
        verdict.label = CriticLabel::neutral;
    }
    return verdict;
}

CriticVerdict Annotator::run_critic(const std::vector<Turn>& history, const std::string& utterance,
                                    const std::string& user_reaction, int samples) {
    if (samples < 3 || samples % 2 == 0)
        fail(ErrorCode::invalid_argument, "critic sample count must be >= 3 and odd");
    std::string history_text = history.empty() ? "(dialogue start)" : serialize_history(history);
    ChatRequest req{"",
                    prompts_.render("critic", {{"history", history_text},
                                               {"utterance", utterance},
                                               {"reaction", user_reaction}}),
                    temperature_, samples};
    std::vector<std::optional<CriticLabel>> parsed;
    for (const std::string& completion : gateway_.chat(req)) {
        std::string c = to_lower(completion);
        bool better = c.find("better") != std::string::npos;
        bool worse = c.find("worse") != std::string::npos;
        bool neutral = c.find("neutral") != std::string::npos;
        if (better + worse + neutral != 1)
            parsed.push_back(std::nullopt);
        else
            parsed.push_back(better ? CriticLabel::better
                                    : worse ? CriticLabel::worse : CriticLabel::neutral);
    }
    return tally_votes(parsed);
}

namespace {

// "Principle: When ...\nRationale: ..." -> (principle, rationale)
std::pair<std::string, std::string> parse_expansion(const std::string& completion) {
    std::string principle, rationale;
    std::istringstream in(completion);
    std::string line;
    while (std::getline(in, line)) {
        std::string t = trim(line);
        if (starts_with_ci(t, "Principle:"))
            principle = trim(t.substr(10));
        else if (starts_with_ci(t, "Rationale:"))
            rationale = trim(t.substr(10));
        else if (principle.empty() && starts_with_ci(t, "When"))
            principle = t;
    }
    return {principle, rationale};
}

}  // namespace

Annotator::Expansion Annotator::expand_action(const std::vector<Turn>& history,
                                              const std::string& action,
                                              const CriticVerdict& verdict,
                                              const std::string& preceding_user_utterance) {
    if (!verdict.valid)
        fail(ErrorCode::invalid_argument, "cannot expand an action without a valid critic verdict");

    Expansion result;
    result.kind =
        verdict.label == CriticLabel::better ? PrincipleKind::do_ : PrincipleKind::avoid;
    std::string tmpl = result.kind == PrincipleKind::do_ ? "expansion_do" : "expansion_avoid";
    std::string history_text = history.empty() ? "(dialogue start)" : serialize_history(history);
    ChatRequest req{"",
                    prompts_.render(tmpl, {{"history", history_text},
                                           {"action", action},
                                           {"preceding_user", preceding_user_utterance}}),
                    temperature_, 1};
    for (int attempt = 0; attempt < 2; ++attempt) {
        auto [principle, rationale] = parse_expansion(gateway_.chat(req)[0]);
        if (starts_with_ci(principle, "When")) {
            result.expanded_action = principle;
            result.rationale = rationale;
            return result;
        }
        req.user += "\nYour previous answer did not begin with \"When\". Try again.";
    }
    fail(ErrorCode::gateway, "expanded action malformed after retry");
}

std::vector<AnnotatedTurn> Annotator::annotate_transcript(const Transcript& t,
                                                          const ActionTaxonomy* taxonomy) {
    std::vector<AnnotatedTurn> out;
    for (const Turn& turn : t.turns) {
        if (turn.speaker != Speaker::agent) continue;
        AnnotatedTurn a;
        a.turn_index = turn.index;
        std::vector<Turn> history = turn.index == 0 ? std::vector<Turn>{} : history_prefix(t, turn.index - 1);
        try {
            a.action = extract_action(history, turn.text, taxonomy);
        } catch (const Error& e) {
            std::cerr << "annotate: " << t.id << " turn " << turn.index << ": " << e.what() << "\n";
            continue;
        }

        // the critic judges by the user's reaction; the expansion is anchored
        // on the preceding counterpart utterance, so both must exist
        const Turn* reaction = turn.index + 1 < static_cast<int>(t.turns.size())
                                   ? &t.turns[static_cast<size_t>(turn.index) + 1]
                                   : nullptr;
        const Turn* preceding = turn.index > 0 ? &t.turns[static_cast<size_t>(turn.index) - 1] : nullptr;
        if (reaction && reaction->speaker == Speaker::user && preceding &&
            preceding->speaker == Speaker::user) {
            try {
                CriticVerdict verdict = run_critic(history, turn.text, reaction->text);
                if (verdict.valid) {
                    a.critic_label = verdict.label;
                    Expansion exp = expand_action(history, a.action, verdict, preceding->text);
                    a.expanded_action = exp.expanded_action;
                    a.rationale = exp.rationale;
                    a.principle_kind = exp.kind;
                }
            } catch (const Error& e) {
                std::cerr << "annotate: " << t.id << " turn " << turn.index << ": " << e.what()
                          << "\n";
            }
        }
        out.push_back(std::move(a));
    }
    return out;
}

std::map<std::string, std::vector<AnnotatedTurn>> Annotator::annotate_corpus(
    const std::vector<Transcript>& transcripts, const ActionTaxonomy* taxonomy,
    const std::filesystem::path& sidecar) {
    auto done = sidecar.empty() ? std::map<std::string, std::vector<AnnotatedTurn>>{}
                                : load_annotations(sidecar);
    for (const Transcript& t : transcripts) {
        if (done.count(t.id)) continue;
        std::vector<AnnotatedTurn> annotations = annotate_transcript(t, taxonomy);
        if (!sidecar.empty()) append_annotations(sidecar, t.id, annotations);
        done[t.id] = std::move(annotations);
    }
    return done;
}

}  // namespace metro
