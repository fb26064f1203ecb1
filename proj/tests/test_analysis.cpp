#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "analysis.hpp"

using namespace metro;

namespace {

Gateway stub_gateway() {
    GatewayConfig cfg;
    cfg.mode = GatewayMode::stub;
    cfg.stub_embedding_dim = 8;
    return Gateway(std::move(cfg));
}

BranchSample branch(std::vector<std::string> actions) {
    return {std::move(actions), ActionSource::induced};
}

LabeledAction at(double x, double y, ActionSource source) {
    LabeledAction a;
    a.text = "p";
    a.source = source;
    a.embedding.values = {x, y};
    return a;
}

}  // namespace

TEST_CASE("levenshtein on token sequences") {
    CHECK(levenshtein({"A", "B", "C"}, {"A", "C"}) == 1);
    CHECK(levenshtein({"A", "B"}, {"A", "B"}) == 0);
    CHECK(levenshtein({}, {"A", "B"}) == 2);
    CHECK(levenshtein({"A"}, {"B"}) == 1);
    CHECK(levenshtein({"A", "B", "C", "D"}, {"D", "C", "B", "A"}) == 4);
    CHECK(levenshtein({"x", "y", "z"}, {"y"}) == 2);
}

TEST_CASE("mean edit distance normalizes by the longer branch") {
    // single pair: distance 1 over length 3
    CHECK(mean_edit_distance({branch({"A", "B", "C"}), branch({"A", "C"})}) ==
          doctest::Approx(1.0 / 3.0));

    // three branches, all pairs averaged
    std::vector<BranchSample> three = {branch({"A", "B"}), branch({"A", "B"}), branch({"A", "C"})};
    CHECK(mean_edit_distance(three) == doctest::Approx((0.0 + 0.5 + 0.5) / 3.0));

    CHECK_THROWS_AS(mean_edit_distance({branch({"A"})}), Error);
}

TEST_CASE("unique ratio counts distinct action sequences") {
    std::vector<BranchSample> branches = {branch({"A", "B"}), branch({"A", "B"}),
                                          branch({"A", "C"})};
    CHECK(unique_ratio(branches) == doctest::Approx(2.0 / 3.0));
    CHECK(unique_ratio({branch({"A"})}) == doctest::Approx(1.0));
    CHECK_THROWS_AS(unique_ratio({}), Error);
}

TEST_CASE("remove_redundancy collapses adjacent repeats only") {
    CHECK(remove_redundancy({"A", "A", "B", "B", "B", "A"}) ==
          std::vector<std::string>{"A", "B", "A"});
    CHECK(remove_redundancy({"A", "B", "C"}) == std::vector<std::string>{"A", "B", "C"});
    CHECK(remove_redundancy({"A"}) == std::vector<std::string>{"A"});
    CHECK_THROWS_AS(remove_redundancy({}), Error);
}

TEST_CASE("cluster coverage over hand-placed clusters") {
    // two tight groups near (1,0) and (0,1); k=2 must recover them
    std::vector<LabeledAction> actions = {
        at(1.0, 0.0, ActionSource::induced),  at(0.99, 0.01, ActionSource::induced),
        at(0.98, -0.01, ActionSource::human), at(0.0, 1.0, ActionSource::human),
        at(0.01, 0.99, ActionSource::human),  at(-0.01, 0.98, ActionSource::human),
    };
    // induced actions live only in the first group: coverage 1/2
    CHECK(cluster_coverage(actions, 2, ActionSource::induced, 3) == doctest::Approx(0.5));
    // human actions appear in both: coverage 1
    CHECK(cluster_coverage(actions, 2, ActionSource::human, 3) == doctest::Approx(1.0));
    CHECK_THROWS_AS(cluster_coverage(actions, 7, ActionSource::human, 3), Error);
}

TEST_CASE("within-cluster coverage mean and spread") {
    std::vector<LabeledAction> actions = {
        at(1.0, 0.0, ActionSource::induced),  at(0.99, 0.01, ActionSource::induced),
        at(0.98, -0.01, ActionSource::human), at(0.0, 1.0, ActionSource::human),
        at(0.01, 0.99, ActionSource::human),  at(-0.01, 0.98, ActionSource::induced),
    };
    // group 1: 2 of 3 induced; group 2: 1 of 3 induced
    WccResult r = within_cluster_coverage(actions, 2, ActionSource::induced, 3);
    CHECK(r.mean == doctest::Approx((2.0 / 3.0 + 1.0 / 3.0) / 2.0));
    double expected_std = std::abs(2.0 / 3.0 - r.mean);  // two points, population std
    CHECK(r.stddev == doctest::Approx(expected_std));

    // source present in only one cluster: contributing-only vs all-cluster average
    std::vector<LabeledAction> lopsided = {
        at(1.0, 0.0, ActionSource::induced), at(0.99, 0.01, ActionSource::human),
        at(0.0, 1.0, ActionSource::human),   at(0.01, 0.99, ActionSource::human),
    };
    WccResult contributing = within_cluster_coverage(lopsided, 2, ActionSource::induced, 3);
    CHECK(contributing.mean == doctest::Approx(0.5));
    WccResult over_all = within_cluster_coverage(lopsided, 2, ActionSource::induced, 3, true);
    CHECK(over_all.mean == doctest::Approx(0.25));

    std::vector<LabeledAction> none = {at(1.0, 0.0, ActionSource::human),
                                       at(0.0, 1.0, ActionSource::human)};
    CHECK_THROWS_AS(within_cluster_coverage(none, 2, ActionSource::induced, 3), Error);
}

TEST_CASE("sample_branches draws per cluster without replacement") {
    Gateway gw = stub_gateway();
    ScoringConfig scoring;
    StrategyForest forest;
    forest.dim = 8;
    // 10 trees, each keeping distinct branches
    for (int t = 0; t < 10; ++t) {
        StrategyTree tree;
        tree.cluster = static_cast<size_t>(t);
        tree.root_embedding = gw.embed("root " + std::to_string(t));
        backpropagate(tree, {"open-" + std::to_string(t), "mid-" + std::to_string(t), "close"}, 0.8,
                      true, scoring.gamma);
        backpropagate(tree, {"open-" + std::to_string(t), "alt-" + std::to_string(t)}, 0.4, false,
                      scoring.gamma);
        score_tree(tree, scoring);
        prune_tree(tree, scoring);
        forest.trees.push_back(std::move(tree));
    }

    auto samples = sample_branches(forest, gw, 3, 5, 42);
    CHECK(!samples.empty());
    CHECK(samples.size() <= 20);  // at most every stored branch once
    std::set<std::vector<std::string>> seen;
    for (const BranchSample& s : samples) {
        CHECK(!s.actions.empty());
        CHECK(seen.insert(s.actions).second);  // no duplicates within a run
    }

    // deterministic under the seed
    auto again = sample_branches(forest, gw, 3, 5, 42);
    REQUIRE(again.size() == samples.size());
    for (size_t i = 0; i < samples.size(); ++i) CHECK(again[i].actions == samples[i].actions);

    StrategyForest empty;
    CHECK_THROWS_AS(sample_branches(empty, gw, 3, 5, 42), Error);
}
