#include "kagpipe/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <unordered_set>

namespace kagpipe {

void RetrievalConfig::validate() const {
    auto check = [](int keep, int fetch, const char* what) {
        if (keep < 1 || fetch < 1 || keep > fetch) {
            throw std::invalid_argument(std::string("invalid retrieval config: ") + what);
        }
    };
    check(chunk_keep, chunk_fetch, "chunk keep/fetch");
    check(entity_keep, entity_fetch, "entity keep/fetch");
    check(edge_keep, edge_fetch, "edge keep/fetch");
}

std::vector<double> JaccardLogitScorer::score(const std::string& query,
                                              const std::vector<std::string>& candidates) {
    std::vector<double> out;
    out.reserve(candidates.size());
    for (const auto& c : candidates) out.push_back(jaccard_logit(query, c));
    return out;
}

Bm25Index::Bm25Index(const std::vector<std::string>& docs) {
    doc_len_.reserve(docs.size());
    for (size_t d = 0; d < docs.size(); ++d) {
        auto tokens = lex_tokens(docs[d]);
        doc_len_.push_back(static_cast<double>(tokens.size()));
        std::unordered_map<std::string, uint32_t> tf;
        for (auto& t : tokens) ++tf[t];
        for (auto& [term, freq] : tf) {
            postings_[term].push_back({static_cast<uint32_t>(d), freq});
        }
    }
    if (!doc_len_.empty()) {
        avg_len_ = std::accumulate(doc_len_.begin(), doc_len_.end(), 0.0) /
                   static_cast<double>(doc_len_.size());
    }
}

std::vector<double> Bm25Index::score_all(const std::string& query) const {
    std::vector<double> scores(doc_len_.size(), 0.0);
    if (doc_len_.empty()) return scores;
    auto n_docs = static_cast<double>(doc_len_.size());

    // A repeated query term contributes once per distinct term.
    auto terms = lex_tokens(query);
    std::unordered_set<std::string> seen;
    for (const auto& term : terms) {
        if (!seen.insert(term).second) continue;
        auto it = postings_.find(term);
        if (it == postings_.end()) continue;
        auto df = static_cast<double>(it->second.size());
        double idf = std::log(1.0 + (n_docs - df + 0.5) / (df + 0.5));
        for (const auto& post : it->second) {
            double tf = post.tf;
            double norm = avg_len_ > 0.0 ? doc_len_[post.doc] / avg_len_ : 1.0;
            scores[post.doc] +=
                idf * tf * (kK1 + 1.0) / (tf + kK1 * (1.0 - kB + kB * norm));
        }
    }
    return scores;
}

std::vector<std::pair<size_t, double>> Bm25Index::top(const std::string& query,
                                                      size_t fetch) const {
    auto scores = score_all(query);
    std::vector<size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](size_t a, size_t b) { return scores[a] > scores[b]; });
    if (order.size() > fetch) order.resize(fetch);
    std::vector<std::pair<size_t, double>> out;
    out.reserve(order.size());
    for (size_t d : order) out.emplace_back(d, scores[d]);
    return out;
}

std::vector<double> Bm25Index::score_pool(const std::string& query,
                                          const std::vector<std::string>& pool) {
    return Bm25Index(pool).score_all(query);
}

std::vector<ScoredHit> rerank(const std::string& query, const std::vector<ScoredHit>& hits,
                              const std::vector<std::string>& texts, int keep,
                              TextScorer& scorer) {
    if (keep < 0) throw std::invalid_argument("rerank keep must be >= 0");
    if (keep == 0 || hits.empty()) return {};
    if (texts.size() != hits.size()) {
        throw std::invalid_argument("rerank texts must align with hits");
    }
    auto scores = scorer.score(query, texts);
    if (scores.size() != hits.size()) {
        throw std::runtime_error("scorer returned misaligned scores");
    }
    for (double s : scores) {
        if (!std::isfinite(s)) throw std::runtime_error("scorer returned non-finite score");
    }
    std::vector<size_t> order(hits.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](size_t a, size_t b) { return scores[a] > scores[b]; });
    if (order.size() > static_cast<size_t>(keep)) order.resize(static_cast<size_t>(keep));

    std::vector<ScoredHit> out;
    out.reserve(order.size());
    for (size_t i : order) {
        ScoredHit hit = hits[i];
        hit.raw_score = scores[i];
        out.push_back(std::move(hit));
    }
    return out;
}

namespace {

std::vector<std::string> chunk_docs(const ChunkCorpus& corpus) {
    std::vector<std::string> docs;
    docs.reserve(corpus.size());
    for (const auto& c : corpus.chunks()) docs.push_back(c.title + " " + c.text);
    return docs;
}

}  // namespace

Retriever::Retriever(const ChunkCorpus& corpus, const KnowledgeGraphIndex& kg,
                     TextScorer& reranker)
    : corpus_(corpus),
      kg_(kg),
      reranker_(reranker),
      chunk_index_(chunk_docs(corpus)),
      entity_index_(kg.entities()) {}

std::vector<ScoredHit> Retriever::semantic_retrieve(const std::string& query,
                                                    const RetrievalConfig& cfg) const {
    cfg.validate();
    if (trim(query).empty()) throw std::invalid_argument("semantic_retrieve: empty query");
    if (corpus_.empty()) return {};

    auto fetched = chunk_index_.top(query, static_cast<size_t>(cfg.chunk_fetch));
    std::vector<ScoredHit> hits;
    std::vector<std::string> texts;
    hits.reserve(fetched.size());
    for (const auto& [doc, score] : fetched) {
        const auto& chunk = corpus_.at(doc);
        hits.push_back({chunk.id, HitKind::chunk, score});
        texts.push_back(chunk.title + " " + chunk.text);
    }
    return rerank(query, hits, texts, cfg.chunk_keep, reranker_);
}

std::vector<std::string> Retriever::retrieve_entities(
    const std::vector<std::string>& key_entities, const std::string& subquery,
    const RetrievalConfig& cfg) const {
    cfg.validate();
    if (trim(subquery).empty()) throw std::invalid_argument("retrieve_entities: empty subquery");
    if (kg_.entity_count() == 0) return {};

    std::vector<std::string> queries;
    for (const auto& v : key_entities) {
        if (trim(v).empty()) continue;
        queries.push_back("Key entity: " + v + ". Query: " + subquery + ".");
    }
    if (queries.empty()) queries.push_back(subquery);  // malformed-step fallback

    std::vector<std::string> result;
    std::unordered_set<std::string> seen;
    for (const auto& q : queries) {
        auto fetched = entity_index_.top(q, static_cast<size_t>(cfg.entity_fetch));
        std::vector<ScoredHit> hits;
        std::vector<std::string> texts;
        for (const auto& [idx, score] : fetched) {
            const auto& name = kg_.entities()[idx];
            hits.push_back({name, HitKind::entity, score});
            texts.push_back(name);
        }
        for (const auto& hit : rerank(q, hits, texts, cfg.entity_keep, reranker_)) {
            if (seen.insert(normalize_entity(hit.item_id)).second) {
                result.push_back(hit.item_id);
            }
        }
    }
    return result;
}

std::vector<ScoredHit> Retriever::graph_retrieve(const std::vector<std::string>& key_entities,
                                                 const std::string& subquery,
                                                 const RetrievalConfig& cfg) const {
    auto entities = retrieve_entities(key_entities, subquery, cfg);
    auto candidate_ids = kg_.one_hop(entities);
    if (candidate_ids.empty()) return {};

    std::vector<std::string> pool;
    pool.reserve(candidate_ids.size());
    for (uint32_t tid : candidate_ids) pool.push_back(kg_.triplet(tid).render_plain());

    auto scores = Bm25Index::score_pool(subquery, pool);
    std::vector<size_t> order(pool.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](size_t a, size_t b) { return scores[a] > scores[b]; });
    if (order.size() > static_cast<size_t>(cfg.edge_fetch)) {
        order.resize(static_cast<size_t>(cfg.edge_fetch));
    }

    std::vector<ScoredHit> hits;
    std::vector<std::string> texts;
    for (size_t i : order) {
        hits.push_back({std::to_string(candidate_ids[i]), HitKind::triplet, scores[i]});
        texts.push_back(pool[i]);
    }
    return rerank(subquery, hits, texts, cfg.edge_keep, reranker_);
}

std::string Retriever::hit_text(const ScoredHit& hit) const {
    switch (hit.kind) {
        case HitKind::chunk: {
            const Chunk* c = corpus_.find(hit.item_id);
            if (!c) throw std::out_of_range("unknown chunk id: " + hit.item_id);
            return c->title + " " + c->text;
        }
        case HitKind::triplet:
            return kg_.triplet(static_cast<uint32_t>(std::stoul(hit.item_id))).render_plain();
        case HitKind::entity:
            return hit.item_id;
    }
    return {};
}

}  // namespace kagpipe
