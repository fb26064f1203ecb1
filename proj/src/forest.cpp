#include "forest.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

namespace metro {

using nlohmann::json;

double position_penalty(int t, int n_turns, double lambda_len) {
    if (n_turns < 1 || t < 0 || t >= n_turns)
        fail(ErrorCode::invalid_argument, "position_penalty: bad turn index");
    return lambda_len * static_cast<double>(t + 1) / static_cast<double>(n_turns);
}

double adjusted_value(double r, double pen) {
    if (r < 0.0 || r > 1.0) fail(ErrorCode::invalid_argument, "terminal value outside [0,1]");
    return r - pen;
}

void backpropagate(StrategyTree& tree, const std::vector<std::string>& trajectory, double v,
                   bool success, double gamma) {
    if (trajectory.empty()) fail(ErrorCode::invalid_argument, "cannot backpropagate empty trajectory");
    std::vector<TreeNode>* level = &tree.children;
    int depth = 1;
    double discount = gamma;
    for (const std::string& action : trajectory) {
        TreeNode* node = nullptr;
        for (TreeNode& child : *level)
            if (child.action == action) {
                node = &child;
                break;
            }
        if (!node) {
            TreeNode fresh;
            fresh.action = action;
            fresh.depth = depth;
            level->push_back(std::move(fresh));
            node = &level->back();
        }
        node->n += 1;
        if (success) node->s += 1;
        node->value_sum += v * discount;
        level = &node->children;
        ++depth;
        discount *= gamma;
    }
}

double mean_value(const TreeNode& node) {
    if (node.n == 0) fail(ErrorCode::invalid_argument, "mean_value of unvisited node");
    return node.value_sum / static_cast<double>(node.n);
}

double wilson_lower_bound(size_t s, size_t n, double z) {
    if (s > n) fail(ErrorCode::invalid_argument, "success count exceeds visit count");
    if (n == 0) return 0.0;
    double nn = static_cast<double>(n);
    double p = static_cast<double>(s) / nn;
    double z2 = z * z;
    double lb = (p + z2 / (2 * nn) - z * std::sqrt(p * (1 - p) / nn + z2 / (4 * nn * nn))) /
                (1 + z2 / nn);
    return std::max(0.0, lb);
}

double node_score(const TreeNode& node, const ScoringConfig& cfg) {
    if (node.n == 0) fail(ErrorCode::invalid_argument, "node_score of unvisited node");
    return cfg.w_sr * wilson_lower_bound(node.s, node.n, cfg.z) + cfg.w_val * mean_value(node) +
           cfg.w_cnt * std::log(1.0 + static_cast<double>(node.n));
}

namespace {

void score_subtree(TreeNode& node, const ScoringConfig& cfg) {
    node.score = node_score(node, cfg);
    for (TreeNode& child : node.children) score_subtree(child, cfg);
}

// branch_score desc, then leaf support desc, then lexicographic actions
bool branch_before(const Branch& a, const Branch& b) {
    if (a.branch_score != b.branch_score) return a.branch_score > b.branch_score;
    if (a.support != b.support) return a.support > b.support;
    return a.actions < b.actions;
}

struct BeamItem {
    const TreeNode* node;
    std::vector<std::string> actions;
    std::vector<double> scores;
    double cum = 0;
};

void collect_branches(const TreeNode& node, std::vector<std::string>& actions,
                      std::vector<double>& scores, double cum, std::vector<Branch>& out) {
    actions.push_back(node.action);
    scores.push_back(node.score);
    cum += node.score;
    if (node.children.empty()) {
        out.push_back({actions, scores, cum, node.n});
    } else {
        for (const TreeNode& child : node.children) collect_branches(child, actions, scores, cum, out);
    }
    actions.pop_back();
    scores.pop_back();
}

}  // namespace

void score_tree(StrategyTree& tree, const ScoringConfig& cfg) {
    for (TreeNode& child : tree.children) score_subtree(child, cfg);
}

std::vector<Branch> enumerate_branches(const StrategyTree& tree) {
    std::vector<Branch> out;
    std::vector<std::string> actions;
    std::vector<double> scores;
    for (const TreeNode& child : tree.children) collect_branches(child, actions, scores, 0.0, out);
    std::sort(out.begin(), out.end(), branch_before);
    return out;
}

void prune_tree(StrategyTree& tree, const ScoringConfig& cfg) {
    if (tree.children.empty()) fail(ErrorCode::invalid_argument, "cannot prune an empty tree");

    std::vector<Branch> completed;
    std::vector<BeamItem> beam;
    for (const TreeNode& child : tree.children)
        beam.push_back({&child, {child.action}, {child.score}, child.score});

    auto beam_before = [](const BeamItem& a, const BeamItem& b) {
        if (a.cum != b.cum) return a.cum > b.cum;
        return a.actions < b.actions;
    };

    while (!beam.empty()) {
        std::sort(beam.begin(), beam.end(), beam_before);
        if (beam.size() > cfg.beam_width) beam.resize(cfg.beam_width);

        std::vector<BeamItem> next;
        for (const BeamItem& item : beam) {
            if (item.node->children.empty()) {
                completed.push_back({item.actions, item.scores, item.cum, item.node->n});
                continue;
            }
            for (const TreeNode& child : item.node->children) {
                BeamItem ext = item;
                ext.node = &child;
                ext.actions.push_back(child.action);
                ext.scores.push_back(child.score);
                ext.cum += child.score;
                next.push_back(std::move(ext));
            }
        }
        beam = std::move(next);
    }

    std::sort(completed.begin(), completed.end(), branch_before);
    if (completed.size() > cfg.top_k_branches) completed.resize(cfg.top_k_branches);
    tree.kept_branches = std::move(completed);
}

StrategyForest build_forest(const std::vector<StateRecord>& records, const ClusterModel& model,
                            const std::vector<ClusteredPrinciple>& principles,
                            const ScoringConfig& cfg) {
    StrategyForest forest;
    forest.scoring = cfg;
    forest.dim = model.centroids.empty() ? 0 : model.centroids[0].dim();

    std::map<size_t, std::vector<const StateRecord*>> by_cluster;
    for (const StateRecord& r : records) {
        if (!r.cluster) fail(ErrorCode::invalid_argument, "unclustered state record " + r.transcript_id);
        by_cluster[*r.cluster].push_back(&r);
    }

    for (const auto& [cluster, members] : by_cluster) {
        StrategyTree tree;
        tree.cluster = cluster;
        tree.root_embedding = model.centroids.at(cluster);
        for (const StateRecord* rec : members) {
            double pen = position_penalty(rec->prefix_end, rec->total_turns, cfg.lambda_len);
            double v = adjusted_value(rec->outcome.value, pen);
            backpropagate(tree, rec->trajectory, v, rec->outcome.success, cfg.gamma);
            tree.root_stats.count += 1;
            if (rec->outcome.success) tree.root_stats.successes += 1;
            tree.root_stats.value_total += v;
        }
        score_tree(tree, cfg);
        prune_tree(tree, cfg);
        for (const ClusteredPrinciple& p : principles)
            if (p.cluster == cluster) tree.principles.push_back(p.principle);
        forest.trees.push_back(std::move(tree));
    }
    return forest;
}

StrategyForest merge_forests(const StrategyForest& a, const StrategyForest& b) {
    if (!a.trees.empty() && !b.trees.empty() && a.dim != b.dim)
        fail(ErrorCode::invalid_argument, "cannot merge forests with different embedding dims");
    StrategyForest out;
    out.dim = a.trees.empty() ? b.dim : a.dim;
    out.scoring = a.scoring;
    out.trees = a.trees;
    out.trees.insert(out.trees.end(), b.trees.begin(), b.trees.end());
    for (size_t i = 0; i < out.trees.size(); ++i) out.trees[i].cluster = i;
    return out;
}

// ---- serialization ----

namespace {

constexpr int kForestVersion = 1;

void flatten_nodes(const TreeNode& node, json& table, std::vector<size_t>& child_ids) {
    json entry;
    entry["action"] = node.action;
    entry["n"] = node.n;
    entry["s"] = node.s;
    entry["value_sum"] = node.value_sum;
    entry["depth"] = node.depth;
    entry["score"] = node.score;
    std::vector<size_t> grandchildren;
    // reserve the slot first so parents precede children in the table
    size_t id = table.size();
    table.push_back(nullptr);
    for (const TreeNode& child : node.children) flatten_nodes(child, table, grandchildren);
    entry["children"] = grandchildren;
    table[id] = std::move(entry);
    child_ids.push_back(id);
}

TreeNode unflatten_node(const json& table, size_t id) {
    const json& entry = table.at(id);
    TreeNode node;
    node.action = entry.at("action").get<std::string>();
    node.n = entry.at("n").get<size_t>();
    node.s = entry.at("s").get<size_t>();
    node.value_sum = entry.at("value_sum").get<double>();
    node.depth = entry.at("depth").get<int>();
    node.score = entry.at("score").get<double>();
    for (size_t child_id : entry.at("children").get<std::vector<size_t>>())
        node.children.push_back(unflatten_node(table, child_id));
    return node;
}

json scoring_to_json(const ScoringConfig& cfg) {
    return {{"lambda_len", cfg.lambda_len}, {"gamma", cfg.gamma},   {"w_sr", cfg.w_sr},
            {"w_val", cfg.w_val},           {"w_cnt", cfg.w_cnt},   {"z", cfg.z},
            {"top_k_branches", cfg.top_k_branches}, {"beam_width", cfg.beam_width}};
}

ScoringConfig scoring_from_json(const json& j) {
    ScoringConfig cfg;
    cfg.lambda_len = j.at("lambda_len").get<double>();
    cfg.gamma = j.at("gamma").get<double>();
    cfg.w_sr = j.at("w_sr").get<double>();
    cfg.w_val = j.at("w_val").get<double>();
    cfg.w_cnt = j.at("w_cnt").get<double>();
    cfg.z = j.at("z").get<double>();
    cfg.top_k_branches = j.at("top_k_branches").get<size_t>();
    cfg.beam_width = j.at("beam_width").get<size_t>();
    return cfg;
}

}  // namespace

std::string forest_to_json(const StrategyForest& forest) {
    json j;
    j["version"] = kForestVersion;
    j["dim"] = forest.dim;
    j["scoring"] = scoring_to_json(forest.scoring);
    json trees = json::array();
    for (const StrategyTree& tree : forest.trees) {
        json jt;
        jt["cluster"] = tree.cluster;
        jt["centroid"] = tree.root_embedding.values;
        jt["root_stats"] = {{"count", tree.root_stats.count},
                            {"successes", tree.root_stats.successes},
                            {"value_total", tree.root_stats.value_total}};
        json table = json::array();
        std::vector<size_t> roots;
        for (const TreeNode& child : tree.children) flatten_nodes(child, table, roots);
        jt["nodes"] = table;
        jt["root_children"] = roots;
        json branches = json::array();
        for (const Branch& b : tree.kept_branches)
            branches.push_back({{"actions", b.actions},
                                {"node_scores", b.node_scores},
                                {"branch_score", b.branch_score},
                                {"support", b.support}});
        jt["kept_branches"] = branches;
        json principles = json::array();
        for (const Principle& p : tree.principles)
            principles.push_back({{"text", p.text},
                                  {"kind", to_string(p.kind)},
                                  {"anchor", p.anchor.values},
                                  {"transcript_id", p.transcript_id},
                                  {"turn_index", p.turn_index}});
        jt["principles"] = principles;
        trees.push_back(std::move(jt));
    }
    j["trees"] = trees;
    return j.dump();
}

StrategyForest forest_from_json(const std::string& text) {
    json j = json::parse(text);
    if (j.at("version").get<int>() != kForestVersion)
        fail(ErrorCode::io, "unsupported forest file version");
    StrategyForest forest;
    forest.dim = j.at("dim").get<size_t>();
    forest.scoring = scoring_from_json(j.at("scoring"));
    for (const auto& jt : j.at("trees")) {
        StrategyTree tree;
        tree.cluster = jt.at("cluster").get<size_t>();
        tree.root_embedding.values = jt.at("centroid").get<std::vector<double>>();
        tree.root_stats.count = jt.at("root_stats").at("count").get<size_t>();
        tree.root_stats.successes = jt.at("root_stats").at("successes").get<size_t>();
        tree.root_stats.value_total = jt.at("root_stats").at("value_total").get<double>();
        const json& table = jt.at("nodes");
        for (size_t root_id : jt.at("root_children").get<std::vector<size_t>>())
            tree.children.push_back(unflatten_node(table, root_id));
        for (const auto& jb : jt.at("kept_branches")) {
            Branch b;
            b.actions = jb.at("actions").get<std::vector<std::string>>();
            b.node_scores = jb.at("node_scores").get<std::vector<double>>();
            b.branch_score = jb.at("branch_score").get<double>();
            b.support = jb.at("support").get<size_t>();
            tree.kept_branches.push_back(std::move(b));
        }
        for (const auto& jp : jt.at("principles")) {
            Principle p;
            p.text = jp.at("text").get<std::string>();
            p.kind = jp.at("kind").get<std::string>() == "do" ? PrincipleKind::do_ : PrincipleKind::avoid;
            p.anchor.values = jp.at("anchor").get<std::vector<double>>();
            p.transcript_id = jp.at("transcript_id").get<std::string>();
            p.turn_index = jp.at("turn_index").get<int>();
            tree.principles.push_back(std::move(p));
        }
        forest.trees.push_back(std::move(tree));
    }
    return forest;
}

void save_forest(const StrategyForest& forest, const std::filesystem::path& path) {
    write_file(path, forest_to_json(forest));
}

StrategyForest load_forest(const std::filesystem::path& path) {
    return forest_from_json(read_file(path));
}

std::string inspect_tree(const StrategyForest& forest, size_t cluster, double branch_sr_threshold) {
    const StrategyTree* tree = nullptr;
    for (const StrategyTree& t : forest.trees)
        if (t.cluster == cluster) tree = &t;
    if (!tree) fail(ErrorCode::invalid_argument, "no tree for cluster " + std::to_string(cluster));

    std::ostringstream out;
    char buf[160];
    std::snprintf(buf, sizeof(buf), "ROOT [count=%zu, avg=%.2f, SR=%.2f]\n", tree->root_stats.count,
                  tree->root_stats.avg_value(), tree->root_stats.success_rate());
    out << buf;
    for (const TreeNode& child : tree->children) {
        double sr = child.n ? static_cast<double>(child.s) / static_cast<double>(child.n) : 0.0;
        std::snprintf(buf, sizeof(buf), "  %s [count=%zu, avg=%.2f, SR=%.2f]\n", child.action.c_str(),
                      child.n, mean_value(child), sr);
        out << buf;
    }
    if (!tree->kept_branches.empty()) {
        out << "branches:\n";
        for (const Branch& b : tree->kept_branches) {
            // flag branches whose leaf success rate clears the threshold
            const TreeNode* node = nullptr;
            const std::vector<TreeNode>* level = &tree->children;
            for (const std::string& action : b.actions) {
                node = nullptr;
                for (const TreeNode& c : *level)
                    if (c.action == action) node = &c;
                if (!node) break;
                level = &node->children;
            }
            double leaf_sr =
                node && node->n ? static_cast<double>(node->s) / static_cast<double>(node->n) : 0.0;
            std::snprintf(buf, sizeof(buf), "  %s %s [score=%.4f, support=%zu]\n",
                          leaf_sr >= branch_sr_threshold ? "✓" : "✗",
                          join(b.actions, " -> ").c_str(), b.branch_score, b.support);
            out << buf;
        }
    }
    if (!tree->principles.empty()) {
        out << "principles:\n";
        for (const Principle& p : tree->principles)
            out << "  [" << to_string(p.kind) << "] " << p.text << "\n";
    }
    return out.str();
}

}  // namespace metro
