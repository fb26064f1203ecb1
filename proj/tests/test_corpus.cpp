#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <unistd.h>

#include "corpus.hpp"

using namespace metro;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("metro_corpus_" + std::to_string(::getpid()) + "_" +
                                            std::to_string(counter()++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    static size_t& counter() {
        static size_t c = 0;
        return c;
    }
};

Transcript make_valid(const std::string& id = "t1") {
    Transcript t;
    t.id = id;
    t.task = Task::persuasion;
    t.turns = {{0, Speaker::agent, "Hello there."},
               {1, Speaker::user, "Hi."},
               {2, Speaker::agent, "Would you consider donating?"},
               {3, Speaker::user, "Maybe."}};
    t.outcome = {true, 1.0};
    return t;
}

}  // namespace

TEST_CASE("validate_transcript accepts a well-formed record") {
    CHECK(validate_transcript(make_valid()).empty());
}

TEST_CASE("validate_transcript rejects structural violations") {
    Transcript t = make_valid();
    t.id.clear();
    CHECK(!validate_transcript(t).empty());

    t = make_valid();
    t.turns[2].index = 5;
    CHECK(validate_transcript(t).find("contiguous") != std::string::npos);

    t = make_valid();
    t.turns[1].text = "   ";
    CHECK(validate_transcript(t).find("empty utterance") != std::string::npos);

    t = make_valid();
    t.turns[1].speaker = Speaker::agent;
    CHECK(validate_transcript(t).find("same-speaker") != std::string::npos);

    t = make_valid();
    t.outcome = {false, 0.4};
    CHECK(validate_transcript(t).find("value 0") != std::string::npos);

    t = make_valid();
    t.outcome = {true, 1.2};
    CHECK(!validate_transcript(t).empty());
}

TEST_CASE("negotiation transcripts need price metadata") {
    Transcript t = make_valid();
    t.task = Task::negotiation;
    CHECK(validate_transcript(t).find("buyer_target") != std::string::npos);

    t.metadata["buyer_target"] = "100";
    t.metadata["seller_target"] = "100";
    CHECK(validate_transcript(t).find("equals") != std::string::npos);

    t.metadata["seller_target"] = "200";
    CHECK(validate_transcript(t).find("deal_price") != std::string::npos);

    t.metadata["deal_price"] = "140";
    CHECK(validate_transcript(t).empty());

    t.outcome = {false, 0.0};
    t.metadata.erase("deal_price");
    CHECK(validate_transcript(t).empty());
}

TEST_CASE("metadata_number parses numerics only") {
    Transcript t = make_valid();
    t.metadata["price"] = "123.5";
    t.metadata["label"] = "cheap";
    CHECK(*t.metadata_number("price") == doctest::Approx(123.5));
    CHECK(!t.metadata_number("label"));
    CHECK(!t.metadata_number("missing"));
}

TEST_CASE("ingest keeps good lines and reports bad ones") {
    TempDir dir;
    fs::path corpus = dir.path / "corpus.jsonl";
    std::string good = transcript_to_json_line(make_valid("a"));
    std::string dup = transcript_to_json_line(make_valid("a"));
    Transcript bad = make_valid("b");
    bad.turns[1].text = "";
    std::string invalid = transcript_to_json_line(bad);
    write_file(corpus, good + "\n" + "{not json\n" + dup + "\n" + invalid + "\n\n" +
                           transcript_to_json_line(make_valid("c")) + "\n");

    IngestResult result = ingest_transcripts(corpus, Task::persuasion);
    REQUIRE(result.transcripts.size() == 2);
    CHECK(result.transcripts[0].id == "a");
    CHECK(result.transcripts[1].id == "c");
    REQUIRE(result.diagnostics.size() == 3);
    CHECK(result.diagnostics[0].line == 2);
    CHECK(result.diagnostics[1].message.find("duplicate") != std::string::npos);
    CHECK(result.diagnostics[2].message.find("empty utterance") != std::string::npos);

    CHECK_THROWS_AS(ingest_transcripts(dir.path / "nope.jsonl", Task::persuasion), Error);
}

TEST_CASE("transcript json line round-trips through ingest") {
    TempDir dir;
    Transcript t = make_valid("rt");
    t.metadata["note"] = "hello";
    fs::path corpus = dir.path / "c.jsonl";
    write_file(corpus, transcript_to_json_line(t) + "\n");
    IngestResult result = ingest_transcripts(corpus, Task::persuasion);
    REQUIRE(result.transcripts.size() == 1);
    const Transcript& back = result.transcripts[0];
    CHECK(back.id == t.id);
    CHECK(back.turns.size() == t.turns.size());
    CHECK(back.turns[2].text == t.turns[2].text);
    CHECK(back.outcome.success == t.outcome.success);
    CHECK(back.metadata.at("note") == "hello");
}

TEST_CASE("history_prefix slices inclusively and bounds-checks") {
    Transcript t = make_valid();
    std::vector<Turn> prefix = history_prefix(t, 2);
    REQUIRE(prefix.size() == 3);
    CHECK(prefix.back().index == 2);
    CHECK_THROWS_AS(history_prefix(t, -1), Error);
    CHECK_THROWS_AS(history_prefix(t, 4), Error);
}

TEST_CASE("future_trajectory returns later agent actions in order") {
    Transcript t = make_valid();
    std::vector<AnnotatedTurn> ann;
    ann.push_back({0, "greet"});
    ann.push_back({2, "ask-donation"});
    CHECK(future_trajectory(t, ann, 0) == std::vector<std::string>{"ask-donation"});
    CHECK(future_trajectory(t, ann, -1) == std::vector<std::string>{"greet", "ask-donation"});
    CHECK(future_trajectory(t, ann, 3).empty());

    std::vector<AnnotatedTurn> missing = {{0, "greet"}};
    CHECK_THROWS_AS(future_trajectory(t, missing, 0), Error);
}

TEST_CASE("annotation sidecar appends and reloads") {
    TempDir dir;
    fs::path sidecar = dir.path / "ann.jsonl";
    std::vector<AnnotatedTurn> turns(2);
    turns[0].turn_index = 0;
    turns[0].action = "greet";
    turns[1].turn_index = 2;
    turns[1].action = "ask-donation";
    turns[1].critic_label = CriticLabel::better;
    turns[1].expanded_action = "When the user is undecided, do ask directly.";
    turns[1].rationale = "direct asks landed well";
    turns[1].principle_kind = PrincipleKind::do_;
    append_annotations(sidecar, "t1", turns);
    append_annotations(sidecar, "t2", {turns[0]});

    auto loaded = load_annotations(sidecar);
    REQUIRE(loaded.size() == 2);
    REQUIRE(loaded.at("t1").size() == 2);
    const AnnotatedTurn& a = loaded.at("t1")[1];
    CHECK(a.action == "ask-donation");
    CHECK(a.critic_label == CriticLabel::better);
    CHECK(a.has_principle());
    CHECK(a.principle_kind == PrincipleKind::do_);
    CHECK(a.rationale == "direct asks landed well");
    CHECK(!loaded.at("t1")[0].has_principle());
    CHECK(load_annotations(dir.path / "absent.jsonl").empty());
}
