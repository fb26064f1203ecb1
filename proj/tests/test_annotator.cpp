#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <deque>
#include <filesystem>
#include <unistd.h>

#include "annotator.hpp"

using namespace metro;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        static size_t counter = 0;
        path = fs::temp_directory_path() / ("metro_annotator_" + std::to_string(::getpid()) + "_" +
                                            std::to_string(counter++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

class QueueProvider : public Provider {
public:
    explicit QueueProvider(std::deque<std::string> replies) : replies_(std::move(replies)) {}

    std::string id() const override { return "queued"; }
    std::vector<std::string> chat(const ChatRequest& request) override {
        std::vector<std::string> out;
        for (int i = 0; i < request.n_samples; ++i) {
            if (replies_.empty()) fail(ErrorCode::internal, "queue exhausted");
            out.push_back(replies_.front());
            replies_.pop_front();
        }
        return out;
    }
    EmbeddingVector embed(const std::string&) override {
        EmbeddingVector v;
        v.values = {1.0, 0.0};
        return v;
    }

private:
    std::deque<std::string> replies_;
};

Gateway stub_gateway() {
    GatewayConfig cfg;
    cfg.mode = GatewayMode::stub;
    cfg.stub_embedding_dim = 8;
    return Gateway(std::move(cfg));
}

Gateway queued_gateway(std::deque<std::string> replies) {
    GatewayConfig cfg;
    cfg.mode = GatewayMode::stub;
    return Gateway(std::move(cfg), std::make_unique<QueueProvider>(std::move(replies)));
}

Transcript sample_transcript(const std::string& id = "t0") {
    Transcript t;
    t.id = id;
    t.task = Task::negotiation;
    t.turns = {{0, Speaker::user, "Is the bike still available?"},
               {1, Speaker::agent, "It is, asking 200."},
               {2, Speaker::user, "Would you take 120?"},
               {3, Speaker::agent, "I could do 170 with the lock included."},
               {4, Speaker::user, "Let me think."}};
    t.outcome = {false, 0.0};
    t.metadata = {{"buyer_target", "100"}, {"seller_target", "200"}};
    return t;
}

}  // namespace

TEST_CASE("default taxonomies are well-formed") {
    for (ActionTaxonomy tax : {ActionTaxonomy::p4g_default(), ActionTaxonomy::cb_default()}) {
        CHECK(tax.actions.size() == 10);
        for (const auto& [label, desc] : tax.actions) {
            CHECK(normalize_action_label(label) == label);
            CHECK(!desc.empty());
            CHECK(tax.contains(label));
        }
        CHECK(!tax.contains("no-such-action"));
        // each label appears as a parseable listing line
        std::string listing = tax.listing();
        CHECK(listing.find("- " + tax.actions[0].first + ": ") != std::string::npos);
    }
    CHECK(ActionTaxonomy::p4g_default().contains("credibility-appeal"));
    CHECK(ActionTaxonomy::cb_default().contains("counter-price"));
}

TEST_CASE("normalize_action_label cleans model output") {
    CHECK(normalize_action_label("  Logical Appeal. ") == "logical-appeal");
    CHECK(normalize_action_label("\"counter_price\"") == "counter-price");
    CHECK(normalize_action_label("`offer-concession`") == "offer-concession");
    CHECK(normalize_action_label("") == "");
}

TEST_CASE("tally_votes majority with ties toward neutral") {
    using L = CriticLabel;
    auto v = [](std::initializer_list<std::optional<L>> xs) {
        return Annotator::tally_votes(std::vector<std::optional<L>>(xs));
    };

    CriticVerdict verdict = v({L::better, L::better, L::worse, L::neutral, L::better});
    CHECK(verdict.valid);
    CHECK(verdict.label == L::better);
    CHECK(verdict.votes.size() == 5);

    CHECK(v({L::worse, L::worse, L::better}).label == L::worse);
    CHECK(v({L::neutral, L::neutral, L::better}).label == L::neutral);

    // two-way tie falls back to neutral
    CHECK(v({L::better, L::better, L::worse, L::worse, std::nullopt}).label == L::neutral);
    CHECK(v({L::better, L::worse, L::neutral}).label == L::neutral);

    // fewer than three parseable votes is invalid
    CriticVerdict thin = v({L::better, L::better, std::nullopt, std::nullopt, std::nullopt});
    CHECK(!thin.valid);
    CHECK(thin.votes.size() == 2);
    CHECK(!v({}).valid);
}

TEST_CASE("extract_action respects the taxonomy with one re-ask") {
    PromptLibrary prompts;
    ActionTaxonomy tax = ActionTaxonomy::cb_default();
    std::vector<Turn> history = {{0, Speaker::user, "Is it available?"}};

    {
        Gateway gw = stub_gateway();
        Annotator ann(gw, prompts);
        std::string label = ann.extract_action(history, "I could go to 180.", &tax);
        CHECK(tax.contains(label));
    }
    {
        // first answer off-list, corrected on the re-ask
        Gateway gw = queued_gateway({"bogus-move", "counter_price"});
        Annotator ann(gw, prompts);
        CHECK(ann.extract_action(history, "180 then.", &tax) == "counter-price");
        CHECK(gw.call_log().chat_calls == 2);
    }
    {
        Gateway gw = queued_gateway({"bogus-move", "still-bogus"});
        Annotator ann(gw, prompts);
        CHECK_THROWS_AS(ann.extract_action(history, "180 then.", &tax), Error);
    }
}

TEST_CASE("taxonomy-free extraction pools induced labels") {
    PromptLibrary prompts;
    Gateway gw = queued_gateway({"Probe Budget", "probe_budget", "anchor-high"});
    Annotator ann(gw, prompts);
    CHECK(ann.extract_action({}, "What can you spend?", nullptr) == "probe-budget");
    CHECK(ann.extract_action({}, "How much?", nullptr) == "probe-budget");
    CHECK(ann.extract_action({}, "It lists at 500.", nullptr) == "anchor-high");
    CHECK(ann.induced_actions() == std::vector<std::string>{"probe-budget", "anchor-high"});
}

TEST_CASE("run_critic parses votes and enforces sampling rules") {
    PromptLibrary prompts;
    std::vector<Turn> history = {{0, Speaker::user, "hello"}};

    Gateway gw = stub_gateway();
    Annotator ann(gw, prompts);
    CHECK_THROWS_AS(ann.run_critic(history, "u", "r", 2), Error);
    CHECK_THROWS_AS(ann.run_critic(history, "u", "r", 4), Error);

    CriticVerdict verdict = ann.run_critic(history, "I can include the lock.", "Tempting.", 5);
    CHECK(verdict.valid);
    CHECK(verdict.votes.size() == 5);
    // recompute the majority independently
    int c[3] = {0, 0, 0};
    for (CriticLabel l : verdict.votes) c[static_cast<int>(l)]++;
    int best = std::max({c[0], c[1], c[2]});
    if ((c[0] == best) + (c[1] == best) + (c[2] == best) > 1)
        CHECK(verdict.label == CriticLabel::neutral);
    else
        CHECK(c[static_cast<int>(verdict.label)] == best);

    // ambiguous completions (two keywords) do not count as votes
    Gateway noisy = queued_gateway({"better or worse, hard to say", "gibberish", "worse",
                                    "worse", "neutral"});
    Annotator ann2(noisy, prompts);
    CriticVerdict v2 = ann2.run_critic(history, "u", "r", 5);
    CHECK(v2.valid);
    CHECK(v2.votes.size() == 3);
    CHECK(v2.label == CriticLabel::worse);
}

TEST_CASE("expand_action derives do/avoid principles") {
    PromptLibrary prompts;
    Gateway gw = stub_gateway();
    Annotator ann(gw, prompts);
    std::vector<Turn> history = {{0, Speaker::user, "Would you take 120?"}};

    CriticVerdict better;
    better.valid = true;
    better.label = CriticLabel::better;
    auto exp = ann.expand_action(history, "offer-concession", better, "Would you take 120?");
    CHECK(exp.kind == PrincipleKind::do_);
    CHECK(starts_with_ci(exp.expanded_action, "When"));
    CHECK(!exp.rationale.empty());

    CriticVerdict worse = better;
    worse.label = CriticLabel::worse;
    CHECK(ann.expand_action(history, "propose-price", worse, "u").kind == PrincipleKind::avoid);
    CriticVerdict neutral = better;
    neutral.label = CriticLabel::neutral;
    CHECK(ann.expand_action(history, "propose-price", neutral, "u").kind == PrincipleKind::avoid);

    CriticVerdict invalid;
    CHECK_THROWS_AS(ann.expand_action(history, "a", invalid, "u"), Error);

    // malformed completion triggers one re-ask, then an error
    Gateway bad = queued_gateway({"no principle here", "still nothing"});
    Annotator ann_bad(bad, prompts);
    CHECK_THROWS_AS(ann_bad.expand_action(history, "a", better, "u"), Error);
    Gateway fixed = queued_gateway({"no principle here",
                                    "Principle: When pressed on price, do add value instead.\n"
                                    "Rationale: concessions beat discounts."});
    Annotator ann_fixed(fixed, prompts);
    auto exp2 = ann_fixed.expand_action(history, "a", better, "u");
    CHECK(exp2.expanded_action == "When pressed on price, do add value instead.");
    CHECK(exp2.rationale == "concessions beat discounts.");
}

TEST_CASE("annotate_corpus covers agent turns and resumes from the sidecar") {
    TempDir dir;
    fs::path sidecar = dir.path / "annotations.jsonl";
    PromptLibrary prompts;
    Gateway gw = stub_gateway();
    Annotator ann(gw, prompts);
    ActionTaxonomy tax = ActionTaxonomy::cb_default();

    std::vector<Transcript> corpus = {sample_transcript("a"), sample_transcript("b")};
    auto first = ann.annotate_corpus(corpus, &tax, sidecar);
    REQUIRE(first.size() == 2);
    for (const auto& [id, turns] : first) {
        REQUIRE(turns.size() == 2);  // one per agent turn
        for (const AnnotatedTurn& a : turns) {
            CHECK(tax.contains(a.action));
            // both agent turns sit between user turns, so the critic ran
            CHECK(a.critic_label);
            if (a.critic_label == CriticLabel::better)
                CHECK(a.principle_kind == PrincipleKind::do_);
        }
    }

    // a second pass over the same corpus is served from the sidecar
    size_t calls_before = gw.call_log().chat_calls;
    auto second = ann.annotate_corpus(corpus, &tax, sidecar);
    CHECK(gw.call_log().chat_calls == calls_before);
    REQUIRE(second.size() == 2);
    CHECK(second.at("a").size() == first.at("a").size());
    CHECK(second.at("a")[0].action == first.at("a")[0].action);

    // new transcripts are appended, existing ones stay untouched
    corpus.push_back(sample_transcript("c"));
    auto third = ann.annotate_corpus(corpus, &tax, sidecar);
    CHECK(third.size() == 3);
    CHECK(gw.call_log().chat_calls > calls_before);
    CHECK(load_annotations(sidecar).size() == 3);
}

TEST_CASE("agent-opening turn gets an action but no principle") {
    PromptLibrary prompts;
    Gateway gw = stub_gateway();
    Annotator ann(gw, prompts);
    ActionTaxonomy tax = ActionTaxonomy::cb_default();

    Transcript t;
    t.id = "opener";
    t.task = Task::custom;
    t.turns = {{0, Speaker::agent, "Hi, interested in the bike?"},
               {1, Speaker::user, "Maybe."},
               {2, Speaker::agent, "It is in great shape."},
               {3, Speaker::user, "Price?"}};
    t.outcome = {false, 0.0};

    auto result = ann.annotate_corpus({t}, &tax, {});
    const auto& turns = result.at("opener");
    REQUIRE(turns.size() == 2);
    CHECK(!turns[0].critic_label);  // no preceding user utterance to anchor on
    CHECK(!turns[0].has_principle());
    CHECK(turns[1].critic_label);
}
