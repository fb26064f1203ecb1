#include "analysis.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "state_space.hpp"

namespace metro {

std::string to_string(ActionSource s) {
    switch (s) {
        case ActionSource::human: return "human";
        case ActionSource::induced: return "induced";
        default: return "other";
    }
}

namespace {

std::vector<size_t> cluster_actions(const std::vector<LabeledAction>& actions, size_t k1,
                                    uint64_t seed) {
    if (actions.size() < k1) fail(ErrorCode::invalid_argument, "fewer actions than clusters");
    std::vector<EmbeddingVector> points;
    for (const LabeledAction& a : actions) points.push_back(a.embedding);
    return kmeans_assign(points, k1, seed, true);
}

}  // namespace

double cluster_coverage(const std::vector<LabeledAction>& actions, size_t k1, ActionSource source,
                        uint64_t seed) {
    std::vector<size_t> assignment = cluster_actions(actions, k1, seed);
    std::set<size_t> covered;
    for (size_t i = 0; i < actions.size(); ++i)
        if (actions[i].source == source) covered.insert(assignment[i]);
    return static_cast<double>(covered.size()) / static_cast<double>(k1);
}

WccResult within_cluster_coverage(const std::vector<LabeledAction>& actions, size_t k1,
                                  ActionSource source, uint64_t seed, bool average_over_all) {
    std::vector<size_t> assignment = cluster_actions(actions, k1, seed);
    std::vector<size_t> total(k1, 0), from_source(k1, 0);
    for (size_t i = 0; i < actions.size(); ++i) {
        ++total[assignment[i]];
        if (actions[i].source == source) ++from_source[assignment[i]];
    }

    std::vector<double> proportions;
    for (size_t j = 0; j < k1; ++j) {
        if (total[j] == 0) continue;
        if (from_source[j] == 0 && !average_over_all) continue;
        proportions.push_back(static_cast<double>(from_source[j]) / static_cast<double>(total[j]));
    }
    if (proportions.empty())
        fail(ErrorCode::invalid_argument, "source absent from every cluster");

    WccResult result;
    for (double p : proportions) result.mean += p;
    result.mean /= static_cast<double>(proportions.size());
    double var = 0;
    for (double p : proportions) var += (p - result.mean) * (p - result.mean);
    result.stddev = std::sqrt(var / static_cast<double>(proportions.size()));
    return result;
}

double unique_ratio(const std::vector<BranchSample>& branches) {
    if (branches.empty()) fail(ErrorCode::invalid_argument, "no branches");
    std::set<std::vector<std::string>> distinct;
    for (const BranchSample& b : branches) distinct.insert(b.actions);
    return static_cast<double>(distinct.size()) / static_cast<double>(branches.size());
}

size_t levenshtein(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    std::vector<size_t> prev(b.size() + 1), cur(b.size() + 1);
    for (size_t j = 0; j <= b.size(); ++j) prev[j] = j;
    for (size_t i = 1; i <= a.size(); ++i) {
        cur[0] = i;
        for (size_t j = 1; j <= b.size(); ++j) {
            size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

double mean_edit_distance(const std::vector<BranchSample>& branches) {
    if (branches.size() < 2)
        fail(ErrorCode::invalid_argument, "need at least two branches");
    double sum = 0;
    size_t pairs = 0;
    for (size_t i = 0; i < branches.size(); ++i) {
        for (size_t j = i + 1; j < branches.size(); ++j) {
            size_t longer = std::max(branches[i].actions.size(), branches[j].actions.size());
            double d = longer == 0 ? 0.0
                                   : static_cast<double>(levenshtein(branches[i].actions,
                                                                     branches[j].actions)) /
                                         static_cast<double>(longer);
            sum += d;
            ++pairs;
        }
    }
    return sum / static_cast<double>(pairs);
}

std::vector<std::string> remove_redundancy(const std::vector<std::string>& branch) {
    if (branch.empty()) fail(ErrorCode::invalid_argument, "empty branch");
    std::vector<std::string> out;
    for (const std::string& action : branch)
        if (out.empty() || out.back() != action) out.push_back(action);
    return out;
}

std::vector<BranchSample> sample_branches(const StrategyForest& forest, Gateway& gateway,
                                          int per_cluster, size_t k, uint64_t seed) {
    std::vector<std::vector<std::string>> all_branches;
    for (const StrategyTree& tree : forest.trees)
        for (const Branch& b : tree.kept_branches) all_branches.push_back(b.actions);
    if (all_branches.empty()) fail(ErrorCode::invalid_argument, "forest has no branches");

    size_t effective_k = std::min(k, all_branches.size());
    std::vector<EmbeddingVector> points;
    for (const auto& actions : all_branches) points.push_back(gateway.embed(join(actions, " ")));
    std::vector<size_t> assignment = kmeans_assign(points, effective_k, seed, true);

    std::map<size_t, std::vector<size_t>> members;
    for (size_t i = 0; i < assignment.size(); ++i) members[assignment[i]].push_back(i);

    Rng rng(seed);
    std::vector<BranchSample> out;
    for (auto& [cluster, ids] : members) {
        // draw without replacement
        for (int draw = 0; draw < per_cluster && !ids.empty(); ++draw) {
            size_t pick = rng.next_index(ids.size());
            out.push_back({all_branches[ids[pick]], ActionSource::induced});
            ids.erase(ids.begin() + static_cast<std::ptrdiff_t>(pick));
        }
    }
    return out;
}

}  // namespace metro
