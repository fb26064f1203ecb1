#include "prompts.hpp"

namespace metro {

namespace {

const std::map<std::string, std::string>& default_templates() {
    static const std::map<std::string, std::string> templates = {
        {"action_extraction",
         "You are an expert dialogue analyst. Given the dialogue history and the agent's next "
         "utterance, assign the single strategic action the utterance realizes.\n\n"
         "Dialogue history:\n{history}\n\n"
         "Agent utterance:\n{utterance}\n\n"
         "Available actions:\n{actions}\n\n"
         "Answer with exactly one action label from the list below. Output only the label.\n"},

        {"action_extraction_free",
         "You are an expert dialogue analyst. Given the dialogue history and the agent's next "
         "utterance, name the strategic action the utterance realizes as a short "
         "lowercase-hyphenated label (e.g. credibility-appeal).\n\n"
         "Dialogue history:\n{history}\n\n"
         "Agent utterance:\n{utterance}\n\n"
         "Answer with exactly one action label of your own choosing. Output only the label.\n"},

        {"critic",
         "You are a strict dialogue critic. Judge whether the agent's utterance was an effective "
         "strategic move by analyzing the user's reaction to it.\n\n"
         "Dialogue history:\n{history}\n\n"
         "Agent utterance:\n{utterance}\n\n"
         "User reaction:\n{reaction}\n\n"
         "Answer with exactly one word: better, worse, or neutral.\n"},

        {"expansion_do",
         "The following agent move was judged effective. Induce a single reusable do-principle "
         "that captures when and how to apply it, conditioned on the preceding counterpart "
         "utterance.\n\n"
         "Preceding counterpart utterance:\n{preceding_user}\n\n"
         "Agent action: {action}\n"
         "Dialogue history:\n{history}\n\n"
         "Respond with two lines:\n"
         "Principle: <the principle; it must begin with the word \"When\" and use \"do ...\">\n"
         "Rationale: <one sentence>\n"},

        {"expansion_avoid",
         "The following agent move was judged ineffective. Induce a single reusable "
         "avoid-principle that captures what to avoid in this situation, conditioned on the "
         "preceding counterpart utterance.\n\n"
         "Preceding counterpart utterance:\n{preceding_user}\n\n"
         "Agent action: {action}\n"
         "Dialogue history:\n{history}\n\n"
         "Respond with two lines:\n"
         "Principle: <the principle; it must begin with the word \"When\" and use \"avoid ...\">\n"
         "Rationale: <one sentence>\n"},

        {"short_term_suggestion",
         "You are an expert {task_role} strategist. Given the latest counterpart message and the "
         "retrieved micro-principles below, write a 1-2 sentence short-term strategy suggestion "
         "for the agent's next move. Reinterpret the principles for this exact context rather "
         "than quoting them.\n\n"
         "Latest counterpart message:\n{last_user}\n\n"
         "Applicable principles:\n{principles}\n\n"
         "Principles you must avoid violating:\n{avoid_principles}\n\n"
         "Short-term suggestion:\n"},

        {"long_term_suggestion",
         "You are an expert {task_role} strategist. The action chain below was observed to work "
         "from states like the current one. Summarize it into a 1-2 sentence high-level planning "
         "directive emphasizing cumulative temporal effects.\n\n"
         "Recent dialogue context:\n{context}\n\n"
         "Strategy chain: {branch}\n\n"
         "Long-term planning directive:\n"},

        {"agent_response",
         "You are the agent in a {task_goal} dialogue. Think from two perspectives: the immediate "
         "next move and the long-horizon plan. Respond with a single natural utterance.\n\n"
         "Dialogue so far:\n{history}\n\n"
         "Short-term strategy suggestion:\n{short_term}\n\n"
         "Long-term planning directive:\n{long_term}\n\n"
         "Agent:\n"},

        {"agent_opener",
         "You are the agent opening a {task_goal} dialogue. Greet the counterpart and open the "
         "conversation naturally with a single utterance.\n\nAgent:\n"},

        {"persona",
         "Write a second-person persona description of approximately 80-120 words for a user "
         "whose dominant Big-Five trait is {trait} and whose decision-making style is {style}. "
         "Describe how they talk, what persuades them, and what puts them off.\n"},

        {"simulator",
         "You are the user simulator in a {task_goal} dialogue. Your utterances and behavior "
         "need to strictly follow your persona. You hold interests that conflict with the "
         "agent's; do not concede easily.\n\n"
         "Your persona:\n{persona}\n\n"
         "Dialogue so far:\n{history}\n\n"
         "User:\n"},

        {"p4g_critic",
         "You are evaluating a persuasion dialogue. Classify the persuadee's final attitude "
         "toward donating:\n"
         "A) reject  B) neutral  C) positive  D) donate\n\n"
         "Conversation:\n{conversation}\n\n"
         "Answer (one letter only):\n"},

        {"cb_critic",
         "You are evaluating a price negotiation. Use a STRICT definition of \"deal\": both "
         "sides must have explicitly accepted a specific price.\n\n"
         "Conversation:\n{conversation}\n\n"
         "Respond with JSON only: {\"deal\": true/false, \"price\": <number or null>}\n"},
    };
    return templates;
}

}  // namespace

PromptLibrary::PromptLibrary(const std::filesystem::path& override_dir) {
    if (override_dir.empty() || !std::filesystem::exists(override_dir)) return;
    for (const auto& entry : std::filesystem::directory_iterator(override_dir)) {
        if (entry.path().extension() == ".txt")
            overrides_[entry.path().stem().string()] = read_file(entry.path());
    }
}

const std::string& PromptLibrary::get(const std::string& name) const {
    auto it = overrides_.find(name);
    if (it != overrides_.end()) return it->second;
    const auto& defaults = default_templates();
    auto dit = defaults.find(name);
    if (dit == defaults.end()) fail(ErrorCode::config, "unknown prompt template: " + name);
    return dit->second;
}

std::string PromptLibrary::substitute(const std::string& tmpl,
                                      const std::map<std::string, std::string>& slots) {
    std::string out;
    out.reserve(tmpl.size());
    size_t pos = 0;
    while (pos < tmpl.size()) {
        size_t open = tmpl.find('{', pos);
        if (open == std::string::npos) {
            out += tmpl.substr(pos);
            break;
        }
        size_t close = tmpl.find('}', open);
        if (close == std::string::npos) {
            out += tmpl.substr(pos);
            break;
        }
        std::string name = tmpl.substr(open + 1, close - open - 1);
        auto it = slots.find(name);
        if (it != slots.end()) {
            out += tmpl.substr(pos, open - pos);
            out += it->second;
            pos = close + 1;
        } else {
            // not a known slot (e.g. JSON braces in the template); keep literal
            out += tmpl.substr(pos, open + 1 - pos);
            pos = open + 1;
        }
    }
    return out;
}

std::string PromptLibrary::render(const std::string& name,
                                  const std::map<std::string, std::string>& slots) const {
    return substitute(get(name), slots);
}

}  // namespace metro
