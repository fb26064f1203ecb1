#pragma once

#include <optional>
#include <string>
#include <vector>

#include "corpus.hpp"
#include "gateway.hpp"
#include "prompts.hpp"

namespace metro {

struct ActionTaxonomy {
    Task task = Task::custom;
    std::vector<std::pair<std::string, std::string>> actions;  // (label, description)

    bool contains(const std::string& label) const;
    std::string listing() const;  // "- label: description" lines

    static ActionTaxonomy p4g_default();
    static ActionTaxonomy cb_default();
};

struct CriticVerdict {
    std::vector<CriticLabel> votes;  // parseable votes only
    CriticLabel label = CriticLabel::neutral;
    bool valid = false;
};

// lowercase, spaces/underscores to hyphens
std::string normalize_action_label(const std::string& raw);

class Annotator {
public:
    Annotator(Gateway& gateway, const PromptLibrary& prompts, double temperature = 0.7)
        : gateway_(gateway), prompts_(prompts), temperature_(temperature) {}

    // With a taxonomy the returned label must be a member (one re-ask on
    // violation, then error). Without one, a normalized free-form label.
    std::string extract_action(const std::vector<Turn>& history, const std::string& utterance,
                               const ActionTaxonomy* taxonomy);

    // samples must be >= 3 and odd; ties break toward neutral
    CriticVerdict run_critic(const std::vector<Turn>& history, const std::string& utterance,
                             const std::string& user_reaction, int samples = 5);

    struct Expansion {
        std::string expanded_action;
        std::string rationale;
        PrincipleKind kind = PrincipleKind::avoid;
    };

    Expansion expand_action(const std::vector<Turn>& history, const std::string& action,
                            const CriticVerdict& verdict, const std::string& preceding_user_utterance);

    // One AnnotatedTurn per agent turn. Checkpoints to the sidecar after each
    // transcript; transcripts already in the sidecar are skipped on resume.
    std::map<std::string, std::vector<AnnotatedTurn>> annotate_corpus(
        const std::vector<Transcript>& transcripts, const ActionTaxonomy* taxonomy,
        const std::filesystem::path& sidecar);

    // free-form labels pooled during taxonomy-free extraction
    const std::vector<std::string>& induced_actions() const { return induced_actions_; }

    static CriticVerdict tally_votes(const std::vector<std::optional<CriticLabel>>& parsed);

private:
    std::vector<AnnotatedTurn> annotate_transcript(const Transcript& t, const ActionTaxonomy* taxonomy);

    Gateway& gateway_;
    const PromptLibrary& prompts_;
    double temperature_;
    std::vector<std::string> induced_actions_;
};

}  // namespace metro
