#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "common.hpp"

namespace metro {

enum class Speaker { agent, user };
enum class Task { persuasion, negotiation, custom };

std::string to_string(Speaker s);
std::string to_string(Task t);
Task task_from_string(const std::string& s);

struct Turn {
    int index = 0;
    Speaker speaker = Speaker::agent;
    std::string text;
};

struct OutcomeLabel {
    bool success = false;
    double value = 0.0;  // terminal outcome-dependent value in [0,1], 0 on failure
};

struct Transcript {
    std::string id;
    Task task = Task::custom;
    std::vector<Turn> turns;
    OutcomeLabel outcome;
    std::map<std::string, std::string> metadata;

    std::optional<double> metadata_number(const std::string& key) const;
};

enum class CriticLabel { better, worse, neutral };
enum class PrincipleKind { do_, avoid };

std::string to_string(CriticLabel l);
std::string to_string(PrincipleKind k);

struct AnnotatedTurn {
    int turn_index = 0;
    std::string action;
    std::optional<CriticLabel> critic_label;
    std::string expanded_action;  // "When ..." micro-principle, empty when no valid verdict
    std::string rationale;
    PrincipleKind principle_kind = PrincipleKind::avoid;

    bool has_principle() const { return !expanded_action.empty(); }
};

struct IngestDiagnostic {
    size_t line = 0;
    std::string message;
};

struct IngestResult {
    std::vector<Transcript> transcripts;
    std::vector<IngestDiagnostic> diagnostics;
};

// Validates a single transcript against the turn/metadata invariants.
// Returns an error message, or empty when valid.
std::string validate_transcript(const Transcript& t);

// Newline-delimited JSON, one transcript per line. Bad records are reported
// per line and do not abort the rest of the file.
IngestResult ingest_transcripts(const std::filesystem::path& path, Task task);

std::string transcript_to_json_line(const Transcript& t);

// Turns 0..i inclusive.
std::vector<Turn> history_prefix(const Transcript& t, int i);

// Action labels of agent turns with index > i, in order.
std::vector<std::string> future_trajectory(const Transcript& t,
                                           const std::vector<AnnotatedTurn>& annotations, int i);

// Annotation sidecar, JSONL keyed by (transcript id, turn_index).
void append_annotations(const std::filesystem::path& sidecar, const std::string& transcript_id,
                        const std::vector<AnnotatedTurn>& turns);
std::map<std::string, std::vector<AnnotatedTurn>> load_annotations(const std::filesystem::path& sidecar);

}  // namespace metro
