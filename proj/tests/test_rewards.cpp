#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "kagpipe/rewards.hpp"
#include "test_util.hpp"

using namespace kagpipe;

TEST_CASE("outcome reward: identity, disjoint, and partial overlap") {
    CHECK(outcome_reward("Kreuzlingen", "Kreuzlingen") == doctest::Approx(1.0));
    CHECK(outcome_reward("Berlin", "Kreuzlingen") == doctest::Approx(0.0));
    CHECK(outcome_reward("in Kreuzlingen", "Kreuzlingen") == doctest::Approx(2.0 / 3.0));
    CHECK(outcome_reward("", "Kreuzlingen") == 0.0);
    CHECK(outcome_reward("the", "the") == 0.0);  // both empty after normalization
}

TEST_CASE("outcome reward equals the brute-force multiset oracle on random pairs") {
    std::mt19937 rng(5);
    for (int i = 0; i < 300; ++i) {
        auto a = testutil::random_words(rng, 0, 8);
        auto b = testutil::random_words(rng, 0, 8);
        double expected = testutil::oracle_multiset_f1(qa_tokens(a), qa_tokens(b));
        CHECK(outcome_reward(a, b) == doctest::Approx(expected).epsilon(1e-12));
    }
}

namespace {

ReasoningPath well_formed_path() {
    ReasoningPath path;
    path.question = "Where did X's father die?";
    ReasoningStep step;
    step.index = 1;
    step.key_entities = {"X"};
    step.subquery = "Who was the father of X?";
    step.context = {"Triplet: X son of Y"};
    step.summary = "Y is the father.";
    step.has_reference = true;
    path.steps = {step};
    path.final_answer = "Z";
    path.terminated_by = TerminatedBy::answer;
    path.transcript = render_transcript(path);
    return path;
}

}  // namespace

TEST_CASE("format reward: well-formed path scores 1") {
    CHECK(format_reward(well_formed_path()) == 1.0);
}

TEST_CASE("format reward: missing reference closer scores 0") {
    auto path = well_formed_path();
    auto pos = path.transcript.find("</Reference>");
    REQUIRE(pos != std::string::npos);
    path.transcript.erase(pos, 12);
    CHECK(format_reward(path) == 0.0);
}

TEST_CASE("format reward: answer without the exact prefix scores 0") {
    // The generator emitted a bare answer; the parse records a violation and
    // the path runs on without a final answer.
    auto path = parse_transcript("q", "Important entity: X\nSubquery: s?\n"
                                      "<Reference>item</Reference>\nSummary: ok.\nKreuzlingen");
    CHECK(format_reward(path) == 0.0);
}

TEST_CASE("format reward: step without reference block scores 0") {
    auto path = well_formed_path();
    path.steps[0].has_reference = false;
    CHECK(format_reward(path) == 0.0);
}

TEST_CASE("consistency reward: containment, mixed steps, case folding") {
    auto path = well_formed_path();
    CHECK(consistency_reward(path) == doctest::Approx(1.0));

    ReasoningStep uncovered;
    uncovered.index = 2;
    uncovered.key_entities = {"Nowhere Mentioned"};
    uncovered.subquery = "what about something else?";
    path.steps.push_back(uncovered);
    CHECK(consistency_reward(path) == doctest::Approx(0.5));

    ReasoningPath cased;
    ReasoningStep s;
    s.key_entities = {"ALEXANDER   carl OTTO westphal"};
    s.subquery = "Who was the father of Alexander Carl Otto Westphal?";
    cased.steps = {s};
    CHECK(consistency_reward(cased) == doctest::Approx(1.0));

    ReasoningPath empty;
    CHECK(consistency_reward(empty) == 0.0);
}

TEST_CASE("memory vectors: identical text saturates at sigmoid(10)") {
    ReasoningPath path;
    ReasoningStep s;
    s.subquery = "Who was the father of Alexander Carl Otto Westphal?";
    s.summary = "something else entirely";
    path.steps = {s};
    GoldenEvidence golden{{"Who was the father of Alexander Carl Otto Westphal?"}};
    JaccardLogitScorer scorer;
    auto mem = memory_vectors(path, golden, scorer);
    REQUIRE(mem.q.size() == 1);
    CHECK(mem.q[0] == doctest::Approx(0.9999546021312976).epsilon(1e-12));
}

TEST_CASE("memory vectors: empty context gives a zero context memory") {
    ReasoningPath path;
    ReasoningStep s;
    s.subquery = "anything";
    s.summary = "anything";
    path.steps = {s};
    GoldenEvidence golden{{"some golden evidence"}};
    JaccardLogitScorer scorer;
    auto mem = memory_vectors(path, golden, scorer);
    CHECK(mem.c[0] == 0.0);
}

namespace {

ReasoningPath random_path(std::mt19937& rng, int max_steps = 5) {
    ReasoningPath path;
    path.question = testutil::random_words(rng, 2, 6);
    int k = std::uniform_int_distribution<int>(0, max_steps)(rng);
    for (int i = 0; i < k; ++i) {
        ReasoningStep s;
        s.index = i + 1;
        s.subquery = testutil::random_words(rng, 1, 8);
        if (rng() % 2 == 0) s.key_entities.push_back(testutil::random_words(rng, 1, 2));
        int nc = std::uniform_int_distribution<int>(0, 3)(rng);
        for (int c = 0; c < nc; ++c) s.context.push_back(testutil::random_words(rng, 1, 10));
        s.summary = testutil::random_words(rng, 1, 8);
        s.has_reference = true;
        path.steps.push_back(s);
    }
    if (rng() % 4 != 0) {
        path.final_answer = testutil::random_words(rng, 1, 3);
        path.terminated_by = TerminatedBy::answer;
    } else {
        path.terminated_by = TerminatedBy::step_cap;
    }
    path.transcript = render_transcript(path);
    return path;
}

GoldenEvidence random_golden(std::mt19937& rng, int max_items = 4) {
    GoldenEvidence g;
    int l = std::uniform_int_distribution<int>(0, max_items)(rng);
    for (int i = 0; i < l; ++i) g.items.push_back(testutil::random_words(rng, 2, 8));
    return g;
}

}  // namespace

TEST_CASE("the similarity scorer is always called as (evidence, candidate)") {
    struct OrderSensitive final : TextScorer {
        std::vector<std::string> first_args;
        std::vector<double> score(const std::string& query,
                                  const std::vector<std::string>& candidates) override {
            first_args.push_back(query);
            return std::vector<double>(candidates.size(), 0.0);
        }
    };
    ReasoningPath path;
    ReasoningStep s;
    s.subquery = "the subquery";
    s.summary = "the summary";
    s.context = {"a context item"};
    path.steps = {s};
    GoldenEvidence golden{{"the golden fact"}};
    OrderSensitive scorer;
    memory_vectors(path, golden, scorer);
    REQUIRE(!scorer.first_args.empty());
    for (const auto& q : scorer.first_args) CHECK(q == "the golden fact");
}

TEST_CASE("memory vectors equal the brute-force double loop on random paths") {
    std::mt19937 rng(17);
    JaccardLogitScorer scorer;
    for (int round = 0; round < 40; ++round) {
        auto path = random_path(rng);
        auto golden = random_golden(rng);
        auto mem = memory_vectors(path, golden, scorer);
        for (size_t t = 0; t < golden.items.size(); ++t) {
            double mq = 0.0;
            double mc = 0.0;
            double ms = 0.0;
            for (const auto& step : path.steps) {
                mq = std::max(mq, sigmoid(jaccard_logit(golden.items[t], step.subquery)));
                for (const auto& item : step.context) {
                    mc = std::max(mc, sigmoid(jaccard_logit(golden.items[t], item)));
                }
                ms = std::max(ms, sigmoid(jaccard_logit(golden.items[t], step.summary)));
            }
            CHECK(mem.q[t] == doctest::Approx(mq).epsilon(1e-12));
            CHECK(mem.c[t] == doctest::Approx(mc).epsilon(1e-12));
            CHECK(mem.s[t] == doctest::Approx(ms).epsilon(1e-12));
        }
    }
}

TEST_CASE("process reward: four perfect components give exactly 1.0") {
    RewardBreakdown r;
    r.r_consistency = 1.0;
    r.r_q = r.r_c = r.r_s = 1.0;
    double process = 0.1 * r.r_consistency + 0.3 * r.r_q + 0.3 * r.r_c + 0.3 * r.r_s;
    CHECK(process == 1.0);  // exact, not approximate
}

TEST_CASE("process reward: consistency alone is worth 0.1") {
    // A path whose steps contain their entities but share nothing with the
    // golden evidence.
    ReasoningPath path;
    ReasoningStep s;
    s.key_entities = {"alpha"};
    s.subquery = "alpha beta gamma";
    s.summary = "delta epsilon";
    s.has_reference = true;
    path.steps = {s};
    path.final_answer = "zeta";
    path.terminated_by = TerminatedBy::answer;
    path.transcript = render_transcript(path);
    GoldenEvidence golden{{"qqq www eee"}};
    JaccardLogitScorer scorer;
    auto r = score_path(path, golden, "different", scorer, HopKind::multi_hop);
    CHECK(r.r_consistency == doctest::Approx(1.0));
    // The knowledge-matching terms are sigmoid(-10), tiny but nonzero.
    CHECK(r.r_process == doctest::Approx(0.1).epsilon(1e-3));
}

TEST_CASE("single-hop: outcome scaled by k, process zeroed") {
    ReasoningPath path;
    for (int i = 0; i < 2; ++i) {
        ReasoningStep s;
        s.index = i + 1;
        s.subquery = "sub";
        s.summary = "sum";
        s.has_reference = true;
        path.steps.push_back(s);
    }
    path.final_answer = "Kreuzlingen";
    path.terminated_by = TerminatedBy::answer;
    path.transcript = render_transcript(path);
    JaccardLogitScorer scorer;
    auto r = score_path(path, GoldenEvidence{}, "Kreuzlingen", scorer, HopKind::single_hop);
    CHECK(r.r_outcome == doctest::Approx(0.5));
    CHECK(r.r_process == 0.0);
    CHECK(r.memory_q.empty());
}

TEST_CASE("single-hop with zero steps floors the divisor at 1") {
    ReasoningPath path;
    path.final_answer = "yes";
    path.terminated_by = TerminatedBy::answer;
    path.transcript = render_transcript(path);
    JaccardLogitScorer scorer;
    auto r = score_path(path, GoldenEvidence{}, "yes", scorer, HopKind::single_hop);
    CHECK(r.r_outcome == doctest::Approx(1.0));
}

TEST_CASE("all reward components stay in [0,1] on random paths") {
    std::mt19937 rng(31);
    JaccardLogitScorer scorer;
    for (int round = 0; round < 120; ++round) {
        auto path = random_path(rng);
        auto golden = random_golden(rng);
        auto hop = rng() % 2 == 0 ? HopKind::single_hop : HopKind::multi_hop;
        auto gt = testutil::random_words(rng, 1, 3);
        auto r = score_path(path, golden, gt, scorer, hop);
        for (double v : {r.r_outcome, r.r_format, r.r_consistency, r.r_q, r.r_c, r.r_s,
                         r.r_process}) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
        // r_q, r_c, r_s are bounded by l/k.
        if (!path.steps.empty()) {
            double cap = static_cast<double>(golden.items.size()) /
                         static_cast<double>(path.steps.size());
            CHECK(r.r_q <= cap + 1e-12);
            CHECK(r.r_c <= cap + 1e-12);
            CHECK(r.r_s <= cap + 1e-12);
        }
        CHECK(r.total == doctest::Approx(r.r_format + r.r_outcome + r.r_process));
    }
}

TEST_CASE("memory is monotone under appended steps; normalized r_q can drop") {
    std::mt19937 rng(41);
    JaccardLogitScorer scorer;
    for (int round = 0; round < 40; ++round) {
        auto path = random_path(rng, 4);
        if (path.steps.empty()) continue;
        auto golden = random_golden(rng, 3);
        if (golden.items.empty()) continue;
        auto before = memory_vectors(path, golden, scorer);

        ReasoningStep extra;
        extra.index = static_cast<int>(path.steps.size()) + 1;
        extra.subquery = testutil::random_words(rng, 1, 6);
        extra.summary = testutil::random_words(rng, 1, 6);
        extra.has_reference = true;
        path.steps.push_back(extra);
        auto after = memory_vectors(path, golden, scorer);

        for (size_t t = 0; t < golden.items.size(); ++t) {
            CHECK(after.q[t] >= before.q[t]);
            CHECK(after.c[t] >= before.c[t]);
            CHECK(after.s[t] >= before.s[t]);
        }
    }

    // A concrete case where the per-step normalization drops r_q: one step
    // that nails the evidence, then one useless step.
    ReasoningPath path;
    ReasoningStep hit;
    hit.index = 1;
    hit.subquery = "the exact golden evidence";
    hit.summary = "x";
    hit.has_reference = true;
    path.steps = {hit};
    path.final_answer = "a";
    path.terminated_by = TerminatedBy::answer;
    path.transcript = render_transcript(path);
    GoldenEvidence golden{{"the exact golden evidence"}};
    auto one = score_path(path, golden, "a", scorer, HopKind::multi_hop);

    ReasoningStep useless;
    useless.index = 2;
    useless.subquery = "zzz yyy";
    useless.summary = "qqq";
    useless.has_reference = true;
    path.steps.push_back(useless);
    path.transcript = render_transcript(path);
    auto two = score_path(path, golden, "a", scorer, HopKind::multi_hop);
    CHECK(two.r_q < one.r_q);
}
