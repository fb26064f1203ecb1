#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "arena.hpp"

using namespace metro;

namespace {

Gateway stub_gateway() {
    GatewayConfig cfg;
    cfg.mode = GatewayMode::stub;
    cfg.stub_embedding_dim = 8;
    return Gateway(std::move(cfg));
}

using CbVote = std::optional<std::pair<bool, std::optional<double>>>;

AgentFn fixed_agent(const std::string& text) {
    return [text](const std::vector<Turn>&) { return text; };
}

SimulatorFn fixed_user(const std::string& text) {
    return [text](const std::vector<Turn>&) { return text; };
}

CriticFn scripted_critic(std::vector<CriticResult> verdicts) {
    auto state = std::make_shared<std::pair<std::vector<CriticResult>, size_t>>(std::move(verdicts), 0);
    return [state](const std::vector<Turn>&) {
        if (state->second >= state->first.size()) return CriticResult{};
        return state->first[state->second++];
    };
}

}  // namespace

TEST_CASE("attitude verdict maps letters to rewards with thresholds") {
    using V = std::vector<std::optional<char>>;

    CriticResult all_donate = p4g_decide(V{'D', 'D', 'D', 'D', 'D'});
    CHECK(all_donate.decision == CriticDecision::success);
    CHECK(all_donate.reward == doctest::Approx(1.0));

    // mean of {D, D, C, B, A} = (1 + 1 + 0.1 - 0.5 - 1) / 5 = 0.12 -> continue
    CriticResult mixed = p4g_decide(V{'D', 'D', 'C', 'B', 'A'});
    CHECK(mixed.decision == CriticDecision::continue_);
    CHECK(mixed.reward == doctest::Approx(0.12));

    // mean of {A, A, A, B, B} = -0.8 -> failure
    CriticResult reject = p4g_decide(V{'A', 'A', 'A', 'B', 'B'});
    CHECK(reject.decision == CriticDecision::failure);
    CHECK(reject.reward == doctest::Approx(-0.8));

    // boundary means do not trigger: {D, D, C, C, C} = 0.46, {A, A, B, D, C} = ...
    CHECK(p4g_decide(V{'D', 'D', 'C', 'C', 'C'}).decision == CriticDecision::continue_);
    // exactly -0.7 is not below the failure threshold
    CHECK(p4g_decide(V{'A', 'A', 'B', 'B', 'C'}).decision ==
          CriticDecision::continue_);  // mean -0.58

    // fewer than three parseable letters: conservative continue with zero reward
    CriticResult thin = p4g_decide(V{'D', 'D', std::nullopt, 'x', std::nullopt});
    CHECK(thin.decision == CriticDecision::continue_);
    CHECK(thin.reward == 0.0);
}

TEST_CASE("deal verdict requires unanimity and a majority price") {
    auto deal = [](double price) { return CbVote{{true, price}}; };

    CriticResult ok = cb_decide({deal(150), deal(150), deal(140)});
    CHECK(ok.decision == CriticDecision::success);
    CHECK(*ok.deal_price == doctest::Approx(150));

    // any "no deal" vote blocks success
    CHECK(cb_decide({deal(150), deal(150), CbVote{{false, std::nullopt}}}).decision ==
          CriticDecision::continue_);

    // price tie: no deal
    CHECK(cb_decide({deal(150), deal(140)}).decision == CriticDecision::continue_);

    // unanimous deal but nobody names a price
    CHECK(cb_decide({CbVote{{true, std::nullopt}}, CbVote{{true, std::nullopt}}}).decision ==
          CriticDecision::continue_);

    // unparseable votes are ignored; all-unparseable is continue
    CHECK(cb_decide({std::nullopt, deal(150), deal(150)}).decision == CriticDecision::success);
    CHECK(cb_decide({std::nullopt, std::nullopt}).decision == CriticDecision::continue_);
    CHECK(cb_decide({}).decision == CriticDecision::continue_);
}

TEST_CASE("sl ratio interpolates between the targets") {
    CHECK(sl_ratio(150, 100, 200) == doctest::Approx(0.5));
    CHECK(sl_ratio(100, 100, 200) == doctest::Approx(1.0));  // buyer's target
    CHECK(sl_ratio(200, 100, 200) == doctest::Approx(0.0));  // seller's target
    CHECK(sl_ratio(250, 100, 200) == doctest::Approx(-0.5));  // out of range is representable
    CHECK_THROWS_AS(sl_ratio(150, 100, 100), Error);
}

TEST_CASE("persona grid covers every trait/style cell") {
    Gateway gw = stub_gateway();
    PromptLibrary prompts;
    auto personas = generate_personas(1, gw, prompts);
    REQUIRE(personas.size() == 20);
    std::set<std::pair<std::string, std::string>> cells;
    for (const Persona& p : personas) {
        cells.insert({p.big_five, p.decision_style});
        CHECK(!p.description.empty());
        CHECK(p.description.find("You ") != std::string::npos);
    }
    CHECK(cells.size() == 20);

    auto doubled = generate_personas(2, gw, prompts);
    CHECK(doubled.size() == 40);
    // variants within a cell get distinct descriptions
    CHECK(doubled[0].description != doubled[1].description);
    CHECK_THROWS_AS(generate_personas(0, gw, prompts), Error);
}

TEST_CASE("simulator responds in persona deterministically") {
    Gateway gw = stub_gateway();
    PromptLibrary prompts;
    Persona p{"openness", "analytical", "You question everything."};
    SimulatorFn sim = make_simulator(p, "price negotiation", gw, prompts);
    std::vector<Turn> history = {{0, Speaker::agent, "Interested in the bike?"}};
    std::string a = sim(history);
    CHECK(!a.empty());
    CHECK(sim(history) == a);
    CHECK(!sim({}).empty());
}

TEST_CASE("session stops on critic success and records the deal") {
    SessionSettings settings;
    settings.max_turns = 8;
    settings.buyer_target = 100;
    settings.seller_target = 200;

    CriticResult win;
    win.decision = CriticDecision::success;
    win.deal_price = 150;
    SessionResult r = run_session(fixed_agent("offer"), fixed_user("counter"),
                                  scripted_critic({CriticResult{}, CriticResult{}, win}), settings);
    CHECK(r.outcome == SessionOutcome::success);
    CHECK(r.n_turns == 3);
    CHECK(r.turns.size() == 3);
    CHECK(*r.deal_price == doctest::Approx(150));
    CHECK(r.sl_ratio == doctest::Approx(0.5));
    CHECK(r.reward == doctest::Approx(0.5));  // negotiation reward is the ratio
    CHECK(!r.price_out_of_range);

    nlohmann::json j = nlohmann::json::parse(r.to_json());
    CHECK(j.at("outcome") == "success");
    CHECK(j.at("n_turns") == 3);
    CHECK(j.at("deal_price") == 150.0);
}

TEST_CASE("session flags prices outside the target band") {
    SessionSettings settings;
    settings.buyer_target = 100;
    settings.seller_target = 200;
    CriticResult win;
    win.decision = CriticDecision::success;
    win.deal_price = 260;
    SessionResult r =
        run_session(fixed_agent("a"), fixed_user("u"), scripted_critic({win}), settings);
    CHECK(r.outcome == SessionOutcome::success);
    CHECK(r.price_out_of_range);
    CHECK(r.sl_ratio == doctest::Approx(-0.6));
}

TEST_CASE("session failure, turn cap, and abort paths") {
    SessionSettings settings;
    settings.max_turns = 4;

    CriticResult lose;
    lose.decision = CriticDecision::failure;
    lose.reward = -0.9;
    SessionResult failed =
        run_session(fixed_agent("a"), fixed_user("u"), scripted_critic({CriticResult{}, lose}), settings);
    CHECK(failed.outcome == SessionOutcome::failure);
    CHECK(failed.n_turns == 2);
    CHECK(failed.reward == doctest::Approx(-0.9));

    SessionResult capped =
        run_session(fixed_agent("a"), fixed_user("u"), scripted_critic({}), settings);
    CHECK(capped.outcome == SessionOutcome::exhausted);
    CHECK(capped.n_turns == 4);

    AgentFn broken = [](const std::vector<Turn>&) -> std::string {
        fail(ErrorCode::gateway, "provider down");
    };
    SessionResult aborted = run_session(broken, fixed_user("u"), scripted_critic({}), settings);
    CHECK(aborted.outcome == SessionOutcome::aborted);
    CHECK(aborted.n_turns == 0);
}

TEST_CASE("p4g critic parses letters strictly") {
    Gateway gw = stub_gateway();
    PromptLibrary prompts;
    CriticFn critic = make_p4g_critic(gw, prompts, 5);
    std::vector<Turn> conversation = {{0, Speaker::agent, "Please donate."},
                                      {1, Speaker::user, "Okay, I will."}};
    CriticResult r = critic(conversation);
    // stub letters are uniform-ish; the decision must be one of the three
    CHECK((r.decision == CriticDecision::success || r.decision == CriticDecision::failure ||
           r.decision == CriticDecision::continue_));
    CHECK_THROWS_AS(critic({}), Error);
}

TEST_CASE("cb critic extracts the json verdict") {
    Gateway gw = stub_gateway();
    PromptLibrary prompts;
    CriticFn critic = make_cb_critic(gw, prompts, 5);
    std::vector<Turn> conversation = {{0, Speaker::agent, "Deal at 150?"},
                                      {1, Speaker::user, "Deal."}};
    CriticResult r = critic(conversation);
    if (r.decision == CriticDecision::success) {
        REQUIRE(r.deal_price);
        CHECK(*r.deal_price >= 100.0);
    }
    CHECK_THROWS_AS(critic({}), Error);
}

TEST_CASE("aggregate computes SR, AT, and SL over completed sessions") {
    std::vector<SessionResult> results(4);
    results[0].outcome = SessionOutcome::success;
    results[0].n_turns = 2;
    results[0].sl_ratio = 0.5;
    results[1].outcome = SessionOutcome::failure;
    results[1].n_turns = 6;
    results[2].outcome = SessionOutcome::exhausted;
    results[2].n_turns = 8;
    results[3].outcome = SessionOutcome::aborted;
    results[3].n_turns = 1;

    AggregateMetrics m = aggregate(results);
    CHECK(m.sessions == 3);
    CHECK(m.aborted == 1);
    CHECK(m.sr == doctest::Approx(1.0 / 3.0));
    CHECK(m.at == doctest::Approx((2 + 6 + 8) / 3.0));
    CHECK(m.sl == doctest::Approx(0.5 / 3.0));

    AggregateMetrics succ_only = aggregate(results, true);
    CHECK(succ_only.at == doctest::Approx(2.0));

    std::vector<SessionResult> only_aborted(1);
    only_aborted[0].outcome = SessionOutcome::aborted;
    CHECK_THROWS_AS(aggregate(only_aborted), Error);
    CHECK_THROWS_AS(aggregate({}), Error);
}

TEST_CASE("chat repl honors /state and /quit") {
    Gateway gw = stub_gateway();
    PromptLibrary prompts;
    StrategyForest forest;
    forest.dim = 8;
    StrategyTree tree;
    tree.root_embedding = gw.embed("anything");
    ScoringConfig scoring;
    backpropagate(tree, {"probe", "close"}, 0.7, true, scoring.gamma);
    score_tree(tree, scoring);
    prune_tree(tree, scoring);
    forest.trees.push_back(std::move(tree));
    InferenceEngine engine(forest, gw, prompts, InferenceConfig{});

    SessionSettings settings;
    settings.max_turns = 3;

    std::istringstream in("hello there\n/state\n/quit\n");
    std::ostringstream out;
    SessionResult r = chat_repl(engine, scripted_critic({}), settings, in, out);
    CHECK(r.outcome == SessionOutcome::aborted);
    CHECK(r.n_turns == 1);
    std::string log = out.str();
    CHECK(log.find("Agent: ") != std::string::npos);
    CHECK(log.find("\"cluster\"") != std::string::npos);  // /state dumped the trace

    // EOF with no input aborts immediately
    std::istringstream empty_in("");
    std::ostringstream out2;
    SessionResult eof = chat_repl(engine, scripted_critic({}), settings, empty_in, out2);
    CHECK(eof.outcome == SessionOutcome::aborted);
    CHECK(eof.n_turns == 0);
}
