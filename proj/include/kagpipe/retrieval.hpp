#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "kagpipe/corpus.hpp"

namespace kagpipe {

enum class HitKind { chunk, triplet, entity };

struct ScoredHit {
    std::string item_id;  // chunk id, triplet id (decimal), or entity name
    HitKind kind = HitKind::chunk;
    double raw_score = 0.0;  // unbounded scorer output, pre-sigmoid
};

struct RetrievalConfig {
    int chunk_fetch = 20;
    int chunk_keep = 5;  // k_d
    int entity_fetch = 10;
    int entity_keep = 5;
    int edge_fetch = 20;
    int edge_keep = 10;  // k_t

    void validate() const;  // throws std::invalid_argument when keep > fetch
};

/// Scorer contract shared by the local lexical backends and the remote
/// reranker endpoint: raw (logit-scale) scores aligned to the candidates.
class TextScorer {
public:
    virtual ~TextScorer() = default;
    virtual std::vector<double> score(const std::string& query,
                                      const std::vector<std::string>& candidates) = 0;
};

/// Local reranker default: log-odds of token-overlap Jaccard in [-10, 10].
class JaccardLogitScorer final : public TextScorer {
public:
    std::vector<double> score(const std::string& query,
                              const std::vector<std::string>& candidates) override;
};

/// Okapi BM25 (k1 = 1.2, b = 0.75) over the lexical analyzer's tokens.
class Bm25Index {
public:
    static constexpr double kK1 = 1.2;
    static constexpr double kB = 0.75;

    explicit Bm25Index(const std::vector<std::string>& docs);

    size_t size() const { return doc_len_.size(); }

    /// Top `fetch` documents by BM25, score-descending, doc order on ties.
    /// Zero-score documents fill the tail so a fetch larger than the corpus
    /// returns everything.
    std::vector<std::pair<size_t, double>> top(const std::string& query, size_t fetch) const;

    std::vector<double> score_all(const std::string& query) const;

    /// Scores a free-standing candidate pool (stats computed over the pool).
    static std::vector<double> score_pool(const std::string& query,
                                          const std::vector<std::string>& pool);

private:
    struct Posting {
        uint32_t doc;
        uint32_t tf;
    };
    std::unordered_map<std::string, std::vector<Posting>> postings_;
    std::vector<double> doc_len_;
    double avg_len_ = 0.0;
};

/// Re-scores hits with the reranker contract and keeps the top `keep` by new
/// raw score. Ties keep the original relative order. `texts` is aligned to
/// `hits`.
std::vector<ScoredHit> rerank(const std::string& query, const std::vector<ScoredHit>& hits,
                              const std::vector<std::string>& texts, int keep,
                              TextScorer& scorer);

/// Hybrid retrieval front-end over an immutable corpus + knowledge graph.
/// Pure reads; safe for concurrent calls.
class Retriever {
public:
    Retriever(const ChunkCorpus& corpus, const KnowledgeGraphIndex& kg, TextScorer& reranker);

    /// Chunk retrieval: BM25 fetch then rerank to k_d.
    std::vector<ScoredHit> semantic_retrieve(const std::string& query,
                                             const RetrievalConfig& cfg) const;

    /// Stage 1 of graph retrieval: per key entity, query the entity index
    /// with `Key entity: <v>. Query: <q>.`; union of per-query top results.
    /// An empty key-entity list falls back to the bare subquery.
    std::vector<std::string> retrieve_entities(const std::vector<std::string>& key_entities,
                                               const std::string& subquery,
                                               const RetrievalConfig& cfg) const;

    /// Two-stage graph retrieval: entities, then their one-hop triplets
    /// scored against the subquery and reranked to k_t.
    std::vector<ScoredHit> graph_retrieve(const std::vector<std::string>& key_entities,
                                          const std::string& subquery,
                                          const RetrievalConfig& cfg) const;

    std::string hit_text(const ScoredHit& hit) const;

    const ChunkCorpus& corpus() const { return corpus_; }
    const KnowledgeGraphIndex& kg() const { return kg_; }

private:
    const ChunkCorpus& corpus_;
    const KnowledgeGraphIndex& kg_;
    TextScorer& reranker_;
    Bm25Index chunk_index_;
    Bm25Index entity_index_;
};

}  // namespace kagpipe
