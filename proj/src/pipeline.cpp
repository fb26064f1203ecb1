#include "pipeline.hpp"

#include <iostream>

#include <nlohmann/json.hpp>

#include "analysis.hpp"
#include "annotator.hpp"
#include "state_space.hpp"

namespace metro {

using nlohmann::json;

uint64_t file_hash(const std::filesystem::path& path) { return fnv1a(read_file(path)); }

namespace {

constexpr const char* kToolVersion = "0.1.0";

void write_manifest(const RunConfig& cfg, const std::string& command,
                    const std::map<std::string, std::string>& extra) {
    if (cfg.logs_dir.empty()) return;
    json j;
    j["command"] = command;
    j["tool_version"] = kToolVersion;
    j["seed"] = cfg.seed;
    j["config_hash"] = hex64(fnv1a(cfg.to_json()));
    j["config"] = json::parse(cfg.to_json());
    for (const auto& [k, v] : extra) j[k] = v;
    write_file(cfg.logs_dir / (command + ".manifest.json"), j.dump(2));
}

const ActionTaxonomy* taxonomy_for(const RunConfig& cfg, ActionTaxonomy& storage) {
    if (cfg.taxonomy == "none") return nullptr;
    storage = cfg.task == Task::persuasion ? ActionTaxonomy::p4g_default()
                                           : ActionTaxonomy::cb_default();
    return &storage;
}

}  // namespace

void run_induce(const RunConfig& cfg) {
    if (cfg.corpus_path.empty() || !std::filesystem::exists(cfg.corpus_path))
        fail(ErrorCode::ingest, "corpus not found: " + cfg.corpus_path.string());
    if (cfg.forest_path.empty()) fail(ErrorCode::config, "no forest output path configured");

    IngestResult ingest = ingest_transcripts(cfg.corpus_path, cfg.task);
    for (const IngestDiagnostic& d : ingest.diagnostics)
        std::cerr << "ingest: line " << d.line << ": " << d.message << "\n";
    if (ingest.transcripts.empty()) fail(ErrorCode::ingest, "no valid transcripts in corpus");

    Gateway gateway(cfg.gateway);
    PromptLibrary prompts(cfg.prompts_dir);
    Annotator annotator(gateway, prompts);

    ActionTaxonomy taxonomy_storage;
    const ActionTaxonomy* taxonomy = taxonomy_for(cfg, taxonomy_storage);
    std::filesystem::path sidecar =
        cfg.logs_dir.empty() ? std::filesystem::path{} : cfg.logs_dir / "annotations.jsonl";
    auto annotations = annotator.annotate_corpus(ingest.transcripts, taxonomy, sidecar);

    std::vector<StateRecord> records =
        build_state_records(ingest.transcripts, annotations, gateway);
    size_t k = std::min(cfg.cluster_k, records.size());
    if (k == 0) fail(ErrorCode::ingest, "corpus produced no state records");
    ClusterModel model = fit_kmeans(records, k, cfg.seed, cfg.cluster_normalized);

    // attach each micro-principle to the cluster of its preceding state
    std::map<std::pair<std::string, int>, size_t> state_cluster;
    for (const StateRecord& r : records)
        state_cluster[{r.transcript_id, r.prefix_end}] = *r.cluster;
    std::vector<ClusteredPrinciple> principles;
    for (const Transcript& t : ingest.transcripts) {
        auto it = annotations.find(t.id);
        if (it == annotations.end()) continue;
        for (const AnnotatedTurn& a : it->second) {
            if (!a.has_principle() || a.turn_index == 0) continue;
            auto cluster_it = state_cluster.find({t.id, a.turn_index - 1});
            if (cluster_it == state_cluster.end()) continue;
            ClusteredPrinciple cp;
            cp.cluster = cluster_it->second;
            cp.principle.text = a.expanded_action;
            cp.principle.kind = a.principle_kind;
            cp.principle.transcript_id = t.id;
            cp.principle.turn_index = a.turn_index;
            cp.principle.anchor =
                gateway.embed(t.turns[static_cast<size_t>(a.turn_index) - 1].text);
            principles.push_back(std::move(cp));
        }
    }

    StrategyForest forest = build_forest(records, model, principles, cfg.scoring);
    save_forest(forest, cfg.forest_path);
    if (!cfg.logs_dir.empty())
        write_file(cfg.logs_dir / "cluster_model.json", model.to_json());

    write_manifest(cfg, "induce",
                   {{"corpus_hash", hex64(file_hash(cfg.corpus_path))},
                    {"forest_hash", hex64(file_hash(cfg.forest_path))}});
}

EvalReport run_eval(const RunConfig& cfg) {
    if (cfg.arena.sessions < 1) fail(ErrorCode::invalid_argument, "sessions must be >= 1");
    if (cfg.forest_path.empty() || !std::filesystem::exists(cfg.forest_path))
        fail(ErrorCode::io, "forest not found: " + cfg.forest_path.string());

    StrategyForest forest = load_forest(cfg.forest_path);
    Gateway gateway(cfg.gateway);
    PromptLibrary prompts(cfg.prompts_dir);
    InferenceEngine engine(forest, gateway, prompts, cfg.inference);

    std::vector<Persona> personas = generate_personas(cfg.arena.personas_per_cell, gateway, prompts);
    CriticFn critic = cfg.task == Task::persuasion
                          ? make_p4g_critic(gateway, prompts, cfg.arena.critic_samples)
                          : make_cb_critic(gateway, prompts, cfg.arena.critic_samples);

    SessionSettings settings;
    settings.max_turns = cfg.arena.max_turns;
    settings.task = cfg.task;
    if (cfg.task == Task::negotiation) {
        settings.buyer_target = cfg.arena.buyer_target;
        settings.seller_target = cfg.arena.seller_target;
    }

    AgentFn agent = [&engine](const std::vector<Turn>& history) {
        return engine.next_utterance(history);
    };

    std::vector<SessionResult> results;
    std::string log_lines;
    for (int i = 0; i < cfg.arena.sessions; ++i) {
        const Persona& persona = personas[static_cast<size_t>(i) % personas.size()];
        SimulatorFn simulator =
            make_simulator(persona, cfg.inference.task_goal, gateway, prompts);
        SessionResult r = run_session(agent, simulator, critic, settings);
        log_lines += r.to_json() + "\n";
        results.push_back(std::move(r));
    }
    if (!cfg.logs_dir.empty()) write_file(cfg.logs_dir / "sessions.jsonl", log_lines);

    AggregateMetrics metrics = aggregate(results, cfg.arena.at_successful_only);
    json report = {{"sr", metrics.sr},
                   {"at", metrics.at},
                   {"sl", metrics.sl},
                   {"sessions", metrics.sessions},
                   {"aborted", metrics.aborted},
                   {"mode", to_string(cfg.inference.mode)}};
    std::string report_json = report.dump(2);
    if (!cfg.logs_dir.empty()) write_file(cfg.logs_dir / "report.json", report_json);

    write_manifest(cfg, "eval", {{"forest_hash", hex64(file_hash(cfg.forest_path))}});
    return {metrics, report_json};
}

std::string run_analyze(const RunConfig& cfg, const std::filesystem::path& actions_path,
                        size_t k1) {
    if (cfg.forest_path.empty() || !std::filesystem::exists(cfg.forest_path))
        fail(ErrorCode::io, "forest not found: " + cfg.forest_path.string());
    StrategyForest forest = load_forest(cfg.forest_path);
    Gateway gateway(cfg.gateway);

    json out;
    std::vector<BranchSample> samples =
        sample_branches(forest, gateway, 3, std::min<size_t>(150, forest.trees.size() * 3), cfg.seed);
    out["branch_samples"] = samples.size();
    out["unique_ratio"] = unique_ratio(samples);
    if (samples.size() >= 2) out["mean_edit_distance"] = mean_edit_distance(samples);
    std::vector<BranchSample> collapsed;
    for (const BranchSample& b : samples)
        collapsed.push_back({remove_redundancy(b.actions), b.source});
    out["unique_ratio_after_redundancy_removal"] = unique_ratio(collapsed);
    if (collapsed.size() >= 2)
        out["mean_edit_distance_after_redundancy_removal"] = mean_edit_distance(collapsed);

    if (!actions_path.empty()) {
        std::vector<LabeledAction> pool;
        std::ifstream in(actions_path);
        if (!in) fail(ErrorCode::io, "cannot open actions file: " + actions_path.string());
        std::string line;
        while (std::getline(in, line)) {
            if (trim(line).empty()) continue;
            json j = json::parse(line);
            LabeledAction a;
            a.text = j.at("text").get<std::string>();
            std::string src = j.value("source", "other");
            a.source = src == "human"     ? ActionSource::human
                       : src == "induced" ? ActionSource::induced
                                          : ActionSource::other;
            a.embedding = gateway.embed(a.text);
            pool.push_back(std::move(a));
        }
        if (k1 == 0) k1 = std::min<size_t>(10, pool.size());
        json coverage = json::object();
        for (ActionSource src : {ActionSource::human, ActionSource::induced, ActionSource::other}) {
            bool present = std::any_of(pool.begin(), pool.end(),
                                       [&](const LabeledAction& a) { return a.source == src; });
            if (!present) continue;
            WccResult wcc = within_cluster_coverage(pool, k1, src, cfg.seed);
            coverage[to_string(src)] = {{"cc", cluster_coverage(pool, k1, src, cfg.seed)},
                                        {"wcc_mean", wcc.mean},
                                        {"wcc_std", wcc.stddev}};
        }
        out["action_pool"] = {{"k1", k1}, {"size", pool.size()}, {"by_source", coverage}};
    }
    return out.dump(2);
}

SessionResult run_chat(const RunConfig& cfg, std::istream& in, std::ostream& out) {
    if (cfg.forest_path.empty() || !std::filesystem::exists(cfg.forest_path))
        fail(ErrorCode::io, "forest not found: " + cfg.forest_path.string());
    StrategyForest forest = load_forest(cfg.forest_path);
    Gateway gateway(cfg.gateway);
    PromptLibrary prompts(cfg.prompts_dir);
    InferenceEngine engine(forest, gateway, prompts, cfg.inference);
    CriticFn critic = cfg.task == Task::persuasion
                          ? make_p4g_critic(gateway, prompts, cfg.arena.critic_samples)
                          : make_cb_critic(gateway, prompts, cfg.arena.critic_samples);
    SessionSettings settings;
    settings.max_turns = cfg.arena.max_turns;
    settings.task = cfg.task;
    if (cfg.task == Task::negotiation) {
        settings.buyer_target = cfg.arena.buyer_target;
        settings.seller_target = cfg.arena.seller_target;
    }
    SessionResult result = chat_repl(engine, critic, settings, in, out);
    if (!cfg.logs_dir.empty())
        write_file(cfg.logs_dir / "chat_session.json", result.to_json());
    return result;
}

}  // namespace metro
