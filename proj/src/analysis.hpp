#pragma once

#include <string>
#include <vector>

#include "forest.hpp"
#include "gateway.hpp"

namespace metro {

enum class ActionSource { human, induced, other };
std::string to_string(ActionSource s);

struct LabeledAction {
    std::string text;
    ActionSource source = ActionSource::induced;
    EmbeddingVector embedding;
};

struct BranchSample {
    std::vector<std::string> actions;
    ActionSource source = ActionSource::induced;
};

// Fraction of K-means clusters (k1 over the pooled embeddings) containing at
// least one action of the source.
double cluster_coverage(const std::vector<LabeledAction>& actions, size_t k1, ActionSource source,
                        uint64_t seed);

struct WccResult {
    double mean = 0;
    double stddev = 0;  // population std over contributing clusters
};

// Per cluster containing the source: source count / cluster size; mean and
// std over those clusters. average_over_all extends the average to every
// cluster (absent source contributes 0).
WccResult within_cluster_coverage(const std::vector<LabeledAction>& actions, size_t k1,
                                  ActionSource source, uint64_t seed,
                                  bool average_over_all = false);

double unique_ratio(const std::vector<BranchSample>& branches);

// Token-level Levenshtein distance normalized by the longer sequence length,
// averaged over all unordered pairs.
double mean_edit_distance(const std::vector<BranchSample>& branches);

size_t levenshtein(const std::vector<std::string>& a, const std::vector<std::string>& b);

// Run-length collapse of adjacent duplicate actions.
std::vector<std::string> remove_redundancy(const std::vector<std::string>& branch);

// Embeds joined branch labels, clusters to k, samples per_cluster branches
// per non-empty cluster under the seed.
std::vector<BranchSample> sample_branches(const StrategyForest& forest, Gateway& gateway,
                                          int per_cluster, size_t k, uint64_t seed);

}  // namespace metro
