#pragma once

#include <string>

#include "arena.hpp"
#include "config.hpp"

namespace metro {

// annotate -> embed -> cluster -> build-forest; writes the forest file, the
// annotation sidecar, the cluster model, and a run manifest under logs_dir.
void run_induce(const RunConfig& cfg);

struct EvalReport {
    AggregateMetrics metrics;
    std::string report_json;
};

// Runs cfg.arena.sessions self-play sessions against generated personas,
// writes session logs (JSONL) and a metrics report.
EvalReport run_eval(const RunConfig& cfg);

// Branch-diversity metrics over the forest; optionally CC/WCC over a labeled
// action pool (JSONL with {"text", "source"}).
std::string run_analyze(const RunConfig& cfg, const std::filesystem::path& actions_path = {},
                        size_t k1 = 0);

SessionResult run_chat(const RunConfig& cfg, std::istream& in, std::ostream& out);

uint64_t file_hash(const std::filesystem::path& path);

}  // namespace metro
