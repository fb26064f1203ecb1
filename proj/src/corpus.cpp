#include "corpus.hpp"

#include <set>

#include <nlohmann/json.hpp>

namespace metro {

using nlohmann::json;

std::string to_string(Speaker s) { return s == Speaker::agent ? "agent" : "user"; }

std::string to_string(Task t) {
    switch (t) {
        case Task::persuasion: return "persuasion";
        case Task::negotiation: return "negotiation";
        default: return "custom";
    }
}

Task task_from_string(const std::string& s) {
    if (s == "persuasion") return Task::persuasion;
    if (s == "negotiation") return Task::negotiation;
    if (s == "custom") return Task::custom;
    fail(ErrorCode::config, "unknown task: " + s);
}

std::string to_string(CriticLabel l) {
    switch (l) {
        case CriticLabel::better: return "better";
        case CriticLabel::worse: return "worse";
        default: return "neutral";
    }
}

std::string to_string(PrincipleKind k) { return k == PrincipleKind::do_ ? "do" : "avoid"; }

std::optional<double> Transcript::metadata_number(const std::string& key) const {
    auto it = metadata.find(key);
    if (it == metadata.end()) return std::nullopt;
    try {
        size_t pos = 0;
        double v = std::stod(it->second, &pos);
        if (pos != it->second.size()) return std::nullopt;
        return v;
    } catch (...) {
        return std::nullopt;
    }
}

std::string validate_transcript(const Transcript& t) {
    if (t.id.empty()) return "missing transcript id";
    if (t.turns.empty()) return "transcript has no turns";
    for (size_t i = 0; i < t.turns.size(); ++i) {
        const Turn& turn = t.turns[i];
        if (turn.index != static_cast<int>(i))
            return "turn indices must be contiguous from 0 (turn " + std::to_string(i) + ")";
        if (trim(turn.text).empty())
            return "empty utterance at turn " + std::to_string(i);
        if (i > 0 && t.turns[i - 1].speaker == turn.speaker)
            return "consecutive same-speaker turns at index " + std::to_string(i);
    }
    if (!t.outcome.success && t.outcome.value != 0.0)
        return "failure outcome must carry value 0";
    if (t.outcome.value < 0.0 || t.outcome.value > 1.0)
        return "outcome value outside [0,1]";
    if (t.task == Task::negotiation) {
        auto buyer = t.metadata_number("buyer_target");
        auto seller = t.metadata_number("seller_target");
        if (!buyer || !seller) return "negotiation transcript missing buyer_target/seller_target";
        if (*buyer == *seller) return "buyer target equals seller target";
        if (t.outcome.success && !t.metadata_number("deal_price"))
            return "successful negotiation transcript missing deal_price";
    }
    return {};
}

namespace {

Transcript transcript_from_json(const json& j, Task task) {
    Transcript t;
    t.id = j.at("id").get<std::string>();
    t.task = task;
    for (const auto& jt : j.at("turns")) {
        Turn turn;
        turn.index = jt.at("index").get<int>();
        std::string sp = jt.at("speaker").get<std::string>();
        if (sp == "agent")
            turn.speaker = Speaker::agent;
        else if (sp == "user")
            turn.speaker = Speaker::user;
        else
            fail(ErrorCode::ingest, "unknown speaker: " + sp);
        turn.text = jt.at("text").get<std::string>();
        t.turns.push_back(std::move(turn));
    }
    const auto& jo = j.at("outcome");
    t.outcome.success = jo.at("success").get<bool>();
    t.outcome.value = jo.at("value").get<double>();
    if (j.contains("metadata")) {
        for (auto it = j.at("metadata").begin(); it != j.at("metadata").end(); ++it) {
            if (it.value().is_string())
                t.metadata[it.key()] = it.value().get<std::string>();
            else
                t.metadata[it.key()] = it.value().dump();
        }
    }
    return t;
}

}  // namespace

IngestResult ingest_transcripts(const std::filesystem::path& path, Task task) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::io, "cannot open corpus: " + path.string());

    IngestResult result;
    std::set<std::string> seen_ids;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        try {
            json j = json::parse(line);
            Transcript t = transcript_from_json(j, task);
            if (seen_ids.count(t.id)) {
                result.diagnostics.push_back({lineno, "duplicate transcript id: " + t.id});
                continue;
            }
            std::string err = validate_transcript(t);
            if (!err.empty()) {
                result.diagnostics.push_back({lineno, t.id + ": " + err});
                continue;
            }
            seen_ids.insert(t.id);
            result.transcripts.push_back(std::move(t));
        } catch (const json::exception& e) {
            result.diagnostics.push_back({lineno, std::string("malformed record: ") + e.what()});
        }
    }
    return result;
}

std::string transcript_to_json_line(const Transcript& t) {
    json j;
    j["id"] = t.id;
    j["task"] = to_string(t.task);
    json turns = json::array();
    for (const Turn& turn : t.turns) {
        turns.push_back({{"index", turn.index}, {"speaker", to_string(turn.speaker)}, {"text", turn.text}});
    }
    j["turns"] = turns;
    j["outcome"] = {{"success", t.outcome.success}, {"value", t.outcome.value}};
    if (!t.metadata.empty()) {
        json meta = json::object();
        for (const auto& [k, v] : t.metadata) meta[k] = v;
        j["metadata"] = meta;
    }
    return j.dump();
}

std::vector<Turn> history_prefix(const Transcript& t, int i) {
    if (i < 0 || i >= static_cast<int>(t.turns.size()))
        fail(ErrorCode::invalid_argument,
             "history_prefix index " + std::to_string(i) + " out of range for " + t.id);
    return std::vector<Turn>(t.turns.begin(), t.turns.begin() + i + 1);
}

std::vector<std::string> future_trajectory(const Transcript& t,
                                           const std::vector<AnnotatedTurn>& annotations, int i) {
    std::map<int, const AnnotatedTurn*> by_index;
    for (const AnnotatedTurn& a : annotations) by_index[a.turn_index] = &a;

    std::vector<std::string> actions;
    for (const Turn& turn : t.turns) {
        if (turn.speaker != Speaker::agent || turn.index <= i) continue;
        auto it = by_index.find(turn.index);
        if (it == by_index.end())
            fail(ErrorCode::invalid_argument,
                 "missing annotation for agent turn " + std::to_string(turn.index) + " in " + t.id);
        actions.push_back(it->second->action);
    }
    return actions;
}

namespace {

json annotation_to_json(const std::string& transcript_id, const AnnotatedTurn& a) {
    json j;
    j["transcript_id"] = transcript_id;
    j["turn_index"] = a.turn_index;
    j["action"] = a.action;
    if (a.critic_label) j["critic_label"] = to_string(*a.critic_label);
    if (a.has_principle()) {
        j["expanded_action"] = a.expanded_action;
        j["rationale"] = a.rationale;
        j["principle_kind"] = to_string(a.principle_kind);
    }
    return j;
}

}  // namespace

void append_annotations(const std::filesystem::path& sidecar, const std::string& transcript_id,
                        const std::vector<AnnotatedTurn>& turns) {
    if (sidecar.has_parent_path()) std::filesystem::create_directories(sidecar.parent_path());
    std::ofstream out(sidecar, std::ios::app);
    if (!out) fail(ErrorCode::io, "cannot write sidecar: " + sidecar.string());
    for (const AnnotatedTurn& a : turns) out << annotation_to_json(transcript_id, a).dump() << '\n';
    out.flush();
}

std::map<std::string, std::vector<AnnotatedTurn>> load_annotations(const std::filesystem::path& sidecar) {
    std::map<std::string, std::vector<AnnotatedTurn>> out;
    std::ifstream in(sidecar);
    if (!in) return out;
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        json j = json::parse(line);
        AnnotatedTurn a;
        a.turn_index = j.at("turn_index").get<int>();
        a.action = j.at("action").get<std::string>();
        if (j.contains("critic_label")) {
            std::string l = j["critic_label"].get<std::string>();
            a.critic_label = l == "better"  ? CriticLabel::better
                             : l == "worse" ? CriticLabel::worse
                                            : CriticLabel::neutral;
        }
        if (j.contains("expanded_action")) {
            a.expanded_action = j["expanded_action"].get<std::string>();
            a.rationale = j.value("rationale", "");
            a.principle_kind =
                j.value("principle_kind", "avoid") == "do" ? PrincipleKind::do_ : PrincipleKind::avoid;
        }
        out[j.at("transcript_id").get<std::string>()].push_back(std::move(a));
    }
    return out;
}

}  // namespace metro
