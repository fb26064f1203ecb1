#pragma once

#include <string>
#include <vector>

#include "corpus.hpp"
#include "gateway.hpp"
#include "state_space.hpp"

namespace metro {

struct ScoringConfig {
    double lambda_len = 0.2;
    double gamma = 0.9;
    double w_sr = 1.0;
    double w_val = 0.2;
    double w_cnt = 0.05;
    double z = 1.96;
    size_t top_k_branches = 3;
    size_t beam_width = 16;
};

struct TreeNode {
    std::string action;
    size_t n = 0;          // visit count
    size_t s = 0;          // success count
    double value_sum = 0;  // accumulated depth-discounted contributions
    int depth = 1;         // root children at depth 1; the root state is depth 0
    double score = 0;      // computed by score_tree
    std::vector<TreeNode> children;
};

struct Branch {
    std::vector<std::string> actions;  // root-to-leaf
    std::vector<double> node_scores;
    double branch_score = 0;
    size_t support = 0;  // leaf visit count
};

struct Principle {
    std::string text;  // "When ..." form
    PrincipleKind kind = PrincipleKind::do_;
    EmbeddingVector anchor;  // embedding of the preceding counterpart utterance
    std::string transcript_id;
    int turn_index = 0;
};

struct RootStats {
    size_t count = 0;
    size_t successes = 0;
    double value_total = 0;  // sum of adjusted terminal values

    double avg_value() const { return count ? value_total / static_cast<double>(count) : 0.0; }
    double success_rate() const {
        return count ? static_cast<double>(successes) / static_cast<double>(count) : 0.0;
    }
};

struct StrategyTree {
    size_t cluster = 0;
    EmbeddingVector root_embedding;  // cluster centroid
    RootStats root_stats;
    std::vector<TreeNode> children;  // root-level actions (breadth logic)
    std::vector<Branch> kept_branches;  // post-pruning, sorted by branch_score desc
    std::vector<Principle> principles;
};

struct StrategyForest {
    size_t dim = 0;
    ScoringConfig scoring;
    std::vector<StrategyTree> trees;
};

// pen(d,t) = lambda_len * (t+1) / N_d
double position_penalty(int t, int n_turns, double lambda_len);

// v(d,t) = r - pen; may go negative, not clamped
double adjusted_value(double r, double pen);

// Inserts/merges the trajectory as a root path; node at depth k receives
// n += 1, s += success, value_sum += v * gamma^k.
void backpropagate(StrategyTree& tree, const std::vector<std::string>& trajectory, double v,
                   bool success, double gamma);

double mean_value(const TreeNode& node);

// Closed-form Wilson score lower bound, 0 at n = 0, clamped below at 0.
double wilson_lower_bound(size_t s, size_t n, double z);

// S(u) = w_sr * p_lb + w_val * mean value + w_cnt * ln(1 + n)
double node_score(const TreeNode& node, const ScoringConfig& cfg);

// Fills node.score for the whole tree.
void score_tree(StrategyTree& tree, const ScoringConfig& cfg);

// Beam search over cumulative node-score prefixes; fills kept_branches with
// the top-K root-to-leaf branches. Root-level children stay untouched.
void prune_tree(StrategyTree& tree, const ScoringConfig& cfg);

// Exhaustive reference enumeration of all root-to-leaf branches, same
// ordering rules as prune_tree. Used by tests and inspect.
std::vector<Branch> enumerate_branches(const StrategyTree& tree);

struct ClusteredPrinciple {
    size_t cluster = 0;
    Principle principle;
};

StrategyForest build_forest(const std::vector<StateRecord>& records, const ClusterModel& model,
                            const std::vector<ClusteredPrinciple>& principles,
                            const ScoringConfig& cfg);

// Concatenates trees with clusters re-indexed; no re-clustering.
StrategyForest merge_forests(const StrategyForest& a, const StrategyForest& b);

std::string forest_to_json(const StrategyForest& forest);
StrategyForest forest_from_json(const std::string& text);

void save_forest(const StrategyForest& forest, const std::filesystem::path& path);
StrategyForest load_forest(const std::filesystem::path& path);

// Human-readable dump of one tree ("ROOT [count=.., avg=.., SR=..]" style).
std::string inspect_tree(const StrategyForest& forest, size_t cluster,
                         double branch_sr_threshold = 0.5);

}  // namespace metro
