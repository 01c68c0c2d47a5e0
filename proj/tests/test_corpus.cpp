#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <random>
#include <sstream>

#include "kagpipe/corpus.hpp"
#include "kagpipe/extract.hpp"
#include "test_util.hpp"

using namespace kagpipe;

TEST_CASE("ingest: empty stream gives an empty corpus") {
    std::istringstream in("");
    auto corpus = ChunkCorpus::ingest(in);
    CHECK(corpus.size() == 0);
}

TEST_CASE("ingest: well-formed records keep their ids") {
    std::istringstream in(
        R"({"id":"a","title":"A","text":"alpha text"})"
        "\n"
        R"({"id":"b","title":"B","text":"beta text"})"
        "\n"
        R"({"id":"c","title":"C","text":"gamma text"})"
        "\n");
    auto corpus = ChunkCorpus::ingest(in);
    REQUIRE(corpus.size() == 3);
    CHECK(corpus.at(0).id == "a");
    CHECK(corpus.at(2).id == "c");
    CHECK(corpus.at(0).token_count == 2);
}

TEST_CASE("ingest: duplicate id is rejected naming the id") {
    std::istringstream in(
        R"({"id":"c1","title":"A","text":"x"})"
        "\n"
        R"({"id":"c1","title":"B","text":"y"})"
        "\n");
    CHECK_THROWS_WITH_AS(ChunkCorpus::ingest(in), doctest::Contains("c1"), IngestError);
}

TEST_CASE("ingest: malformed record is rejected with its line number") {
    std::istringstream in(
        R"({"id":"a","title":"A","text":"x"})"
        "\n"
        "not json\n");
    CHECK_THROWS_WITH_AS(ChunkCorpus::ingest(in), doctest::Contains("line 2"), IngestError);
}

TEST_CASE("rule extractor: appositive and verb-phrase rules") {
    Chunk chunk{"k1", "Karl Westphal", "Karl Westphal (born in Berlin) died in Kreuzlingen.", 0};
    RuleBasedExtractor extractor;
    auto outcome = extractor.extract(chunk);
    auto has = [&](const char* h, const char* r, const char* t) {
        for (const auto& trip : outcome.triplets) {
            if (trip.head == h && trip.relation == r && trip.tail == t) return true;
        }
        return false;
    };
    CHECK(has("Karl Westphal", "died in", "Kreuzlingen"));
    CHECK(has("Karl Westphal", "born in", "Berlin"));
}

TEST_CASE("rule extractor: no pattern, no triplets") {
    Chunk chunk{"k2", "T", "Nothing interesting here at all.", 0};
    RuleBasedExtractor extractor;
    CHECK(extractor.extract(chunk).triplets.empty());
}

namespace {

// Scripted extraction client for provenance checks.
class FixedExtractor final : public ExtractionClient {
public:
    explicit FixedExtractor(std::vector<Triplet> triplets) : triplets_(std::move(triplets)) {}
    ExtractionOutcome extract(const Chunk&) override { return {triplets_, 0}; }

private:
    std::vector<Triplet> triplets_;
};

}  // namespace

TEST_CASE("extract_triplets stamps source_chunk_id and registers entities") {
    Chunk chunk{"c9", "T", "text", 1};
    FixedExtractor extractor({{"A", "r", "B", std::nullopt}, {"B", "s", "C", std::nullopt}});
    KnowledgeGraphIndex kg;
    auto added = extract_triplets(chunk, extractor, kg);
    REQUIRE(added.size() == 2);
    for (const auto& t : added) {
        REQUIRE(t.source_chunk_id.has_value());
        CHECK(*t.source_chunk_id == "c9");
    }
    CHECK(kg.entity_count() == 3);
    CHECK(kg.find_entity("a").has_value());
}

TEST_CASE("extractor failure carries the chunk id") {
    struct Failing final : ExtractionClient {
        ExtractionOutcome extract(const Chunk&) override { throw std::runtime_error("boom"); }
    };
    Chunk chunk{"bad-chunk", "T", "text", 1};
    Failing extractor;
    KnowledgeGraphIndex kg;
    CHECK_THROWS_WITH_AS(extract_triplets(chunk, extractor, kg),
                         doctest::Contains("bad-chunk"), ExtractionError);
}

namespace {

KnowledgeGraphIndex five_triplet_fixture() {
    KnowledgeGraphIndex kg;
    kg.add_triplet({"A", "r1", "B", std::nullopt});
    kg.add_triplet({"A", "r2", "C", std::nullopt});
    kg.add_triplet({"D", "r3", "A", std::nullopt});
    kg.add_triplet({"B", "r4", "C", std::nullopt});
    kg.add_triplet({"D", "r5", "E", std::nullopt});
    return kg;
}

std::vector<uint32_t> brute_force_one_hop(const KnowledgeGraphIndex& kg,
                                          const std::vector<std::string>& names) {
    std::vector<uint32_t> out;
    for (uint32_t i = 0; i < kg.triplet_count(); ++i) {
        const auto& t = kg.triplet(i);
        for (const auto& name : names) {
            if (normalize_entity(t.head) == normalize_entity(name) ||
                normalize_entity(t.tail) == normalize_entity(name)) {
                out.push_back(i);
                break;
            }
        }
    }
    return out;
}

}  // namespace

TEST_CASE("one_hop: isolated entity yields nothing") {
    auto kg = five_triplet_fixture();
    CHECK(kg.one_hop({"Z"}).empty());
}

TEST_CASE("one_hop: A heads two and tails one") {
    auto kg = five_triplet_fixture();
    auto got = kg.one_hop({"A"});
    CHECK(got == brute_force_one_hop(kg, {"A"}));
    CHECK(got.size() == 3);
}

TEST_CASE("one_hop: union query deduplicates") {
    auto kg = five_triplet_fixture();
    auto got = kg.one_hop({"A", "B"});
    CHECK(got == brute_force_one_hop(kg, {"A", "B"}));
}

TEST_CASE("one_hop equals brute force on random small graphs") {
    std::mt19937 rng(7);
    std::uniform_int_distribution<int> ent(0, 19);
    for (int round = 0; round < 50; ++round) {
        KnowledgeGraphIndex kg;
        int n = std::uniform_int_distribution<int>(0, 100)(rng);
        for (int i = 0; i < n; ++i) {
            kg.add_triplet({"e" + std::to_string(ent(rng)), "rel" + std::to_string(i),
                            "e" + std::to_string(ent(rng)), std::nullopt});
        }
        std::vector<std::string> query;
        int qn = std::uniform_int_distribution<int>(0, 5)(rng);
        for (int i = 0; i < qn; ++i) query.push_back("e" + std::to_string(ent(rng)));
        CHECK(kg.one_hop(query) == brute_force_one_hop(kg, query));
    }
}

TEST_CASE("graph_stats on the toy two-triplet graph") {
    KnowledgeGraphIndex kg;
    kg.add_triplet({"A", "r", "B", std::nullopt});
    kg.add_triplet({"A", "r", "C", std::nullopt});
    auto s = kg.stats();
    CHECK(s.entity_count == 3);
    CHECK(s.triplet_count == 2);
    CHECK(s.avg_out_degree_per_head == doctest::Approx(2.0));
    CHECK(s.avg_in_degree_per_tail == doctest::Approx(1.0));
    CHECK(s.avg_degree_per_entity == doctest::Approx(4.0 / 3.0));
}

TEST_CASE("graph_stats: empty graph reports zeros") {
    KnowledgeGraphIndex kg;
    auto s = kg.stats();
    CHECK(s.entity_count == 0);
    CHECK(s.triplet_count == 0);
    CHECK(s.avg_degree_per_entity == 0.0);
}

TEST_CASE("degree handshake identity on random graphs") {
    std::mt19937 rng(21);
    std::uniform_int_distribution<int> ent(0, 14);
    for (int round = 0; round < 20; ++round) {
        KnowledgeGraphIndex kg;
        int n = std::uniform_int_distribution<int>(1, 60)(rng);
        for (int i = 0; i < n; ++i) {
            kg.add_triplet({"e" + std::to_string(ent(rng)), "rel" + std::to_string(i),
                            "e" + std::to_string(ent(rng)), std::nullopt});
        }
        // Handshake: per-entity degree counted with head/tail multiplicity
        // sums to twice the triplet count, which is what the average reports.
        std::map<std::string, long> degree;
        for (uint32_t i = 0; i < kg.triplet_count(); ++i) {
            const auto& t = kg.triplet(i);
            ++degree[normalize_entity(t.head)];
            ++degree[normalize_entity(t.tail)];
        }
        long degree_sum = 0;
        for (const auto& [_, d] : degree) degree_sum += d;
        CHECK(degree_sum == 2 * static_cast<long>(kg.triplet_count()));
        CHECK(kg.stats().avg_degree_per_entity ==
              doctest::Approx(static_cast<double>(degree_sum) /
                              static_cast<double>(kg.entity_count())));
        // Adjacency lists each triplet once per distinct incident entity.
        size_t incidences = 0;
        for (uint32_t e = 0; e < kg.entity_count(); ++e) {
            incidences += kg.incident_triplets(e).size();
        }
        size_t expected = 0;
        for (uint32_t i = 0; i < kg.triplet_count(); ++i) {
            const auto& t = kg.triplet(i);
            expected += normalize_entity(t.head) == normalize_entity(t.tail) ? 1 : 2;
        }
        CHECK(incidences == expected);
    }
}

TEST_CASE("duplicate triplets are kept once per (h, r, t, source)") {
    KnowledgeGraphIndex kg;
    CHECK(kg.add_triplet({"A", "r", "B", std::string("c1")}).has_value());
    CHECK_FALSE(kg.add_triplet({"A", "r", "B", std::string("c1")}).has_value());
    CHECK(kg.add_triplet({"A", "r", "B", std::string("c2")}).has_value());
    CHECK(kg.triplet_count() == 2);
}

TEST_CASE("entity identity is case-insensitive, original casing stored") {
    KnowledgeGraphIndex kg;
    kg.add_triplet({"Berlin", "r", "Germany", std::nullopt});
    kg.add_triplet({"BERLIN", "s", "Prussia", std::nullopt});
    CHECK(kg.entity_count() == 3);
    CHECK(kg.entities()[0] == "Berlin");
    CHECK(kg.one_hop({"berlin"}).size() == 2);
}

TEST_CASE("persistence round-trips and rebuilds on checksum mismatch") {
    namespace fs = std::filesystem;
    auto dir = fs::temp_directory_path() / "kagpipe_kg_test";
    fs::remove_all(dir);

    auto kg = five_triplet_fixture();
    kg.save(dir.string());

    bool rebuilt = true;
    auto loaded = KnowledgeGraphIndex::load(dir.string(), &rebuilt);
    CHECK_FALSE(rebuilt);
    CHECK(loaded.entity_count() == kg.entity_count());
    CHECK(loaded.triplet_count() == kg.triplet_count());
    for (uint32_t e = 0; e < kg.entity_count(); ++e) {
        CHECK(loaded.incident_triplets(e) == kg.incident_triplets(e));
    }
    CHECK(loaded.one_hop({"A"}) == kg.one_hop({"A"}));

    // Corrupt the triplet file; the snapshot checksum no longer matches and
    // the adjacency is rebuilt from the records.
    {
        auto triplets = read_triplets_file((dir / "triplets.jsonl").string());
        triplets.push_back({"X", "r9", "Y", std::nullopt});
        write_triplets_file((dir / "triplets.jsonl").string(), triplets);
    }
    auto reloaded = KnowledgeGraphIndex::load(dir.string(), &rebuilt);
    CHECK(rebuilt);
    CHECK(reloaded.triplet_count() == 6);
    CHECK(reloaded.one_hop({"X"}).size() == 1);
    fs::remove_all(dir);
}
