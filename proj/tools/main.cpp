#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>

#include <CLI11.hpp>
#include <json.hpp>

#include "kagpipe/agent.hpp"
#include "kagpipe/corpus.hpp"
#include "kagpipe/endpoint.hpp"
#include "kagpipe/extract.hpp"
#include "kagpipe/kag.hpp"
#include "kagpipe/metrics.hpp"
#include "kagpipe/pairs.hpp"
#include "kagpipe/records.hpp"
#include "kagpipe/retrieval.hpp"
#include "kagpipe/rewards.hpp"

namespace {

using namespace kagpipe;
using nlohmann::json;

struct Store {
    ChunkCorpus corpus;
    KnowledgeGraphIndex kg;
};

Store load_store(const std::string& dir) {
    Store store;
    store.corpus = ChunkCorpus::ingest_file(dir + "/chunks.jsonl");
    store.kg = KnowledgeGraphIndex::load(dir);
    return store;
}

int cmd_build_kg(const std::string& chunks_path, const std::string& extractor,
                 const std::string& triplets_path, const std::string& endpoint_url,
                 const std::string& model, const std::string& out_dir) {
    auto corpus = ChunkCorpus::ingest_file(chunks_path);

    KnowledgeGraphIndex kg;
    int warnings = 0;
    if (!triplets_path.empty()) {
        // Pre-extracted triplet file; provenance must resolve in the corpus.
        for (auto& t : read_triplets_file(triplets_path)) {
            if (t.source_chunk_id && corpus.find(*t.source_chunk_id) == nullptr) {
                throw IngestError("triplet references unknown chunk: " + *t.source_chunk_id);
            }
            kg.add_triplet(std::move(t));
        }
    } else {
        std::unique_ptr<GenerationClient> endpoint_client;
        std::unique_ptr<ExtractionClient> client;
        if (extractor == "rule") {
            client = std::make_unique<RuleBasedExtractor>();
        } else {
            EndpointConfig cfg;
            cfg.base_url = endpoint_url;
            cfg.model = model;
            endpoint_client = std::make_unique<HttpGenerationClient>(cfg);
            client = std::make_unique<EndpointExtractor>(*endpoint_client);
        }
        for (const auto& chunk : corpus.chunks()) {
            extract_triplets(chunk, *client, kg, &warnings);
        }
    }

    std::filesystem::create_directories(out_dir);
    write_chunks_file(out_dir + "/chunks.jsonl", corpus);
    kg.save(out_dir);

    std::cout << "chunks:   " << corpus.size() << "\n";
    std::cout << "entities: " << kg.entity_count() << "\n";
    std::cout << "triplets: " << kg.triplet_count() << "\n";
    if (warnings > 0) std::cout << "warnings: " << warnings << " unparsable extractions\n";
    return 0;
}

int cmd_kg_stats(const std::string& dir) {
    auto kg = KnowledgeGraphIndex::load(dir);
    auto s = kg.stats();
    std::cout << "entities:                    " << s.entity_count << "\n";
    std::cout << "triplets:                    " << s.triplet_count << "\n";
    std::cout << "avg out-degree per head:     " << s.avg_out_degree_per_head << "\n";
    std::cout << "avg in-degree per tail:      " << s.avg_in_degree_per_tail << "\n";
    std::cout << "avg degree per entity:       " << s.avg_degree_per_entity << "\n";
    return 0;
}

std::vector<std::string> parse_entities(const std::string& csv) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : csv) {
        if (c == ',') {
            auto e = trim(cur);
            if (!e.empty()) out.push_back(e);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    auto e = trim(cur);
    if (!e.empty()) out.push_back(e);
    return out;
}

void print_hits(const std::vector<ScoredHit>& hits, const Retriever& retriever) {
    for (const auto& hit : hits) {
        const char* kind = hit.kind == HitKind::chunk ? "chunk" : "triplet";
        std::cout << kind << "\t" << hit.item_id << "\t" << hit.raw_score << "\t"
                  << retriever.hit_text(hit) << "\n";
    }
}

int cmd_retrieve(const std::string& dir, const std::string& query, const std::string& entities_csv,
                 const std::string& mode, const std::string& reranker_url) {
    auto store = load_store(dir);
    JaccardLogitScorer local;
    std::unique_ptr<HttpScorerEndpoint> remote;
    TextScorer* reranker = &local;
    if (!reranker_url.empty()) {
        EndpointConfig cfg;
        cfg.base_url = reranker_url;
        remote = std::make_unique<HttpScorerEndpoint>(cfg);
        reranker = remote.get();
    }
    Retriever retriever(store.corpus, store.kg, *reranker);
    RetrievalConfig cfg;
    auto entities = parse_entities(entities_csv);

    if (mode == "semantic" || mode == "hybrid") {
        print_hits(retriever.semantic_retrieve(query, cfg), retriever);
    }
    if (mode == "graph" || mode == "hybrid") {
        print_hits(retriever.graph_retrieve(entities, query, cfg), retriever);
    }
    return 0;
}

int cmd_kag_dump(const std::string& dir, const std::string& query,
                 const std::string& entities_csv, bool with_ppr, const std::string& out_path) {
    auto store = load_store(dir);
    JaccardLogitScorer reranker;
    Retriever retriever(store.corpus, store.kg, reranker);
    RetrievalConfig rcfg;
    PprConfig pcfg;
    auto entities = parse_entities(entities_csv);

    auto chunks = retriever.semantic_retrieve(query, rcfg);
    auto triplets = retriever.graph_retrieve(entities, query, rcfg);
    Kag graph = build_kag(query, entities, chunks, triplets, store.corpus, store.kg, pcfg);

    std::string dot;
    if (with_ppr) {
        auto pi = ppr(graph, pcfg);
        dot = to_dot(graph, &pi);
    } else {
        dot = to_dot(graph);
    }
    if (out_path.empty()) {
        std::cout << dot;
    } else {
        std::ofstream out(out_path);
        out << dot;
    }
    return 0;
}

int cmd_run(const std::string& dir, const std::string& questions_path, int samples,
            double temperature, const std::string& mock_path, const std::string& endpoint_url,
            const std::string& model, const std::string& out_path) {
    auto store = load_store(dir);
    JaccardLogitScorer reranker;
    Retriever retriever(store.corpus, store.kg, reranker);

    std::unique_ptr<GenerationBackend> backend;
    if (!mock_path.empty()) {
        backend = std::make_unique<ScriptedMockBackend>(ScriptedMockBackend::from_file(mock_path));
    } else {
        EndpointConfig cfg;
        cfg.base_url = endpoint_url;
        cfg.model = model;
        backend = std::make_unique<HttpGenerationBackend>(cfg);
    }

    AgentConfig cfg;
    AgentRunner runner(retriever, *backend, cfg);
    auto questions = read_qa_file(questions_path);

    std::vector<ReasoningPath> all;
    for (const auto& q : questions) {
        std::string qid = q.id.empty() ? q.question : q.id;
        auto paths = runner.sample(q.question, samples, temperature, qid);
        all.insert(all.end(), paths.begin(), paths.end());
    }
    write_paths_file(out_path, all);
    std::cout << "wrote " << all.size() << " paths to " << out_path << "\n";
    return 0;
}

int cmd_score(const std::string& paths_path, const std::string& golden_path,
              const std::string& out_path) {
    auto paths = read_paths_file(paths_path);
    auto qa = read_qa_file(golden_path);
    std::unordered_map<std::string, const QaRecord*> by_question;
    for (const auto& rec : qa) by_question.emplace(rec.question, &rec);

    JaccardLogitScorer scorer;
    std::vector<SampleRecord> samples;
    size_t skipped = 0;
    for (auto& path : paths) {
        auto it = by_question.find(path.question);
        if (it == by_question.end() || it->second->answers.empty()) {
            ++skipped;
            continue;
        }
        const QaRecord& rec = *it->second;
        SampleRecord sample;
        sample.question_id = rec.id.empty() ? rec.question : rec.id;
        sample.question = rec.question;
        sample.hop = rec.hop;
        sample.path = std::move(path);
        GoldenEvidence golden{rec.golden};
        sample.rewards = score_path(sample.path, golden, rec.answers.front(), scorer, rec.hop);
        samples.push_back(std::move(sample));
    }
    write_samples_file(out_path, samples);
    std::cout << "scored " << samples.size() << " paths";
    if (skipped > 0) std::cout << " (no golden record for " << skipped << ")";
    std::cout << "\n";
    return 0;
}

int cmd_pairs(const std::string& scored_path, const std::string& instruction,
              const std::string& out_path) {
    auto samples = read_samples_file(scored_path);
    auto pairs = build_pairs(samples, instruction);
    write_pairs_file(out_path, pairs);
    std::cout << "built " << pairs.size() << " preference pairs\n";
    return 0;
}

int cmd_sft_build(const std::string& decomp_path, uint64_t seed, const std::string& out_path) {
    auto decomps = read_decomposition_file(decomp_path);
    write_sft_file(out_path, decomps, seed);
    std::cout << "wrote " << decomps.size() << " sft records\n";
    return 0;
}

int cmd_eval(const std::string& paths_path, const std::string& qa_path,
             const std::string& tokenizer_kind, const std::string& tokenizer_url,
             const std::string& out_path) {
    auto paths = read_paths_file(paths_path);
    auto qa = read_qa_file(qa_path);

    std::unique_ptr<HttpTokenizer> remote_tok;
    const Tokenizer* tok = &whitespace_tokenizer();
    if (tokenizer_kind == "external") {
        EndpointConfig cfg;
        cfg.base_url = tokenizer_url;
        remote_tok = std::make_unique<HttpTokenizer>(cfg);
        tok = remote_tok.get();
    }

    auto rep = report(paths, qa, *tok);
    json out{{"paths", rep.paths},
             {"scored", rep.scored},
             {"em", rep.em},
             {"f1", rep.f1},
             {"avg_steps", rep.avg_steps},
             {"avg_thinking_tokens", rep.avg_thinking_tokens},
             {"avg_retrieved_tokens", rep.avg_retrieved_tokens},
             {"avg_total_tokens", rep.avg_total_tokens},
             {"avg_content_per_retrieval", rep.avg_content_per_retrieval}};
    json hist = json::array();
    for (const auto& [k, frac] : rep.step_histogram) {
        hist.push_back(json{{"steps", k}, {"fraction", frac}});
    }
    out["step_histogram"] = hist;

    if (!out_path.empty()) {
        std::ofstream f(out_path);
        f << out.dump(2) << "\n";
    }
    std::cout << rep.to_text();
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Agentic RAG pipeline: hybrid retrieval, association-graph "
                 "context filtering, reward scoring, preference-pair datasets"};
    app.require_subcommand(1);

    // build-kg
    std::string chunks_path, extractor = "rule", triplets_path, endpoint_url, model, out_dir;
    auto* build = app.add_subcommand("build-kg", "Ingest chunks and extract a knowledge graph");
    build->add_option("--chunks", chunks_path, "Chunks file (jsonl)")->required();
    build->add_option("--extractor", extractor, "rule|endpoint")
        ->check(CLI::IsMember({"rule", "endpoint"}));
    build->add_option("--triplets", triplets_path,
                      "Pre-extracted triplets file (skips extraction)");
    build->add_option("--endpoint-url", endpoint_url, "Generation endpoint base URL");
    build->add_option("--model", model, "Generation model name");
    build->add_option("--out", out_dir, "Output store directory")->required();

    // kg-stats
    std::string stats_dir;
    auto* stats = app.add_subcommand("kg-stats", "Print knowledge graph statistics");
    stats->add_option("dir", stats_dir, "Store directory")->required();

    // retrieve
    std::string r_dir, r_query, r_entities, r_mode = "hybrid", r_reranker_url;
    auto* retr = app.add_subcommand("retrieve", "Run retrieval and print ranked hits");
    retr->add_option("--store", r_dir, "Store directory")->required();
    retr->add_option("--query", r_query, "Query / subquery text")->required();
    retr->add_option("--entities", r_entities, "Comma-separated key entities");
    retr->add_option("--mode", r_mode, "semantic|graph|hybrid")
        ->check(CLI::IsMember({"semantic", "graph", "hybrid"}));
    retr->add_option("--reranker-url", r_reranker_url, "Reranker endpoint base URL");

    // kag dump
    std::string k_dir, k_query, k_entities, k_out;
    bool k_dot = false;
    bool k_ppr = false;
    auto* kag_cmd = app.add_subcommand("kag", "Knowledge association graph tools");
    auto* dump = kag_cmd->add_subcommand("dump", "Build the KAG for a query and dump it");
    dump->add_option("--store", k_dir, "Store directory")->required();
    dump->add_option("--query", k_query, "Subquery text")->required();
    dump->add_option("--entities", k_entities, "Comma-separated key entities");
    dump->add_flag("--dot", k_dot, "Emit Graphviz DOT");
    dump->add_flag("--ppr", k_ppr, "Annotate nodes with PPR scores");
    dump->add_option("--out", k_out, "Output file (stdout when omitted)");

    // run
    std::string run_dir, run_questions, run_mock, run_endpoint, run_model, run_out;
    int run_samples = 1;
    double run_temperature = 0.0;
    auto* run = app.add_subcommand("run", "Run the reasoning loop over a question file");
    run->add_option("--store", run_dir, "Store directory")->required();
    run->add_option("--questions", run_questions, "Questions file (jsonl)")->required();
    run->add_option("--samples", run_samples, "Paths per question (R)");
    run->add_option("--temperature", run_temperature, "Sampling temperature");
    run->add_option("--mock", run_mock, "Scripted mock fixture (json)");
    run->add_option("--endpoint-url", run_endpoint, "Generation endpoint base URL");
    run->add_option("--model", run_model, "Generation model name");
    run->add_option("--out", run_out, "Output paths file (jsonl)")->required();

    // score
    std::string score_paths, score_golden, score_out;
    auto* score = app.add_subcommand("score", "Score reasoning paths with the reward suite");
    score->add_option("--paths", score_paths, "Paths file (jsonl)")->required();
    score->add_option("--golden", score_golden, "Golden/QA file (jsonl)")->required();
    score->add_option("--out", score_out, "Output scored file (jsonl)")->required();

    // pairs
    std::string pairs_scored, pairs_out;
    std::string pairs_instruction =
        "Answer the question by reasoning in steps and retrieving evidence.";
    auto* pairs_cmd = app.add_subcommand("pairs", "Build preference pairs from scored samples");
    pairs_cmd->add_option("--scored", pairs_scored, "Scored samples file (jsonl)")->required();
    pairs_cmd->add_option("--instruction", pairs_instruction, "Instruction text for the pairs");
    pairs_cmd->add_option("--out", pairs_out, "Output pairs file (jsonl)")->required();

    // sft-build
    std::string sft_decomp, sft_out;
    uint64_t sft_seed = 0;
    auto* sft = app.add_subcommand("sft-build", "Assemble SFT transcripts from decompositions");
    sft->add_option("--decomp", sft_decomp, "Decomposition file (jsonl)")->required();
    sft->add_option("--seed", sft_seed, "Seed for context simulation");
    sft->add_option("--out", sft_out, "Output sft file (jsonl)")->required();

    // eval
    std::string eval_paths, eval_qa, eval_out, eval_tok = "whitespace", eval_tok_url;
    auto* eval_cmd = app.add_subcommand("eval", "EM/F1 and token-efficiency report");
    eval_cmd->add_option("--paths", eval_paths, "Paths file (jsonl)")->required();
    eval_cmd->add_option("--qa", eval_qa, "QA file (jsonl)")->required();
    eval_cmd->add_option("--tokenizer", eval_tok, "whitespace|external")
        ->check(CLI::IsMember({"whitespace", "external"}));
    eval_cmd->add_option("--tokenizer-url", eval_tok_url, "Tokenizer endpoint base URL");
    eval_cmd->add_option("--out", eval_out, "Output report json");

    CLI11_PARSE(app, argc, argv);

    try {
        if (build->parsed()) {
            return cmd_build_kg(chunks_path, extractor, triplets_path, endpoint_url, model,
                                out_dir);
        }
        if (stats->parsed()) return cmd_kg_stats(stats_dir);
        if (retr->parsed()) return cmd_retrieve(r_dir, r_query, r_entities, r_mode, r_reranker_url);
        if (kag_cmd->parsed() && dump->parsed()) {
            (void)k_dot;  // DOT is the only format
            return cmd_kag_dump(k_dir, k_query, k_entities, k_ppr, k_out);
        }
        if (run->parsed()) {
            return cmd_run(run_dir, run_questions, run_samples, run_temperature, run_mock,
                           run_endpoint, run_model, run_out);
        }
        if (score->parsed()) return cmd_score(score_paths, score_golden, score_out);
        if (pairs_cmd->parsed()) return cmd_pairs(pairs_scored, pairs_instruction, pairs_out);
        if (sft->parsed()) return cmd_sft_build(sft_decomp, sft_seed, sft_out);
        if (eval_cmd->parsed()) {
            return cmd_eval(eval_paths, eval_qa, eval_tok, eval_tok_url, eval_out);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
