#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "kagpipe/corpus.hpp"
#include "kagpipe/retrieval.hpp"

namespace kagpipe {

enum class NodeKind { subquery, chunk, triplet, entity };

struct KagNode {
    std::string id;       // "q", "c:<chunk id>", "t:<triplet id>", "e:<normalized entity>"
    NodeKind kind = NodeKind::entity;
    std::string payload;  // subquery text, chunk id, triplet id, or entity (original casing)
};

enum class EdgeKind { cooccurrence, relevance };

struct KagEdge {
    uint32_t a = 0;  // a < b, node indexes
    uint32_t b = 0;
    EdgeKind kind = EdgeKind::cooccurrence;
    double weight = 1.0;  // co-occurrence exactly 1; relevance in [0, 1]
};

/// Per-step Knowledge Association Graph. Undirected, no self-edges, at most
/// one edge per unordered pair (max weight wins on duplicates).
struct Kag {
    std::vector<KagNode> nodes;
    std::vector<KagEdge> edges;  // sorted by (a, b)
    std::vector<uint32_t> key_entity_ids;

    std::optional<uint32_t> subquery_node() const;
};

struct PprConfig {
    double alpha = 0.5;
    int iterations = 200;  // N
    double tau = 0.2;
    int context_keep = 5;  // k_f
    std::optional<double> epsilon;  // early stop on max-abs change; off by default

    void validate() const;
};

/// Assembles the KAG for one reasoning step from the retrieval outcome.
///
/// Nodes: the subquery, every retrieved chunk and triplet, and entity nodes
/// for key entities (injected even when nothing retrieved touches them),
/// chunk titles, and triplet heads/tails. Edges:
///   1. entity-entity per retrieved triplet            (co-occurrence, w=1)
///   2. triplet-entity to its head and tail            (co-occurrence, w=1)
///   3. chunk-triplet when the triplet's source chunk
///      was retrieved too                              (co-occurrence, w=1)
///   4. chunk-entity for that triplet's head/tail, and
///      chunk-title for every retrieved chunk          (co-occurrence, w=1)
///   5. chunk-subquery, w = sigmoid(raw score)         (relevance)
///   6. triplet-subquery, w = max(sigmoid(raw) - tau, 0), dropped at 0
Kag build_kag(const std::string& subquery, const std::vector<std::string>& key_entities,
              const std::vector<ScoredHit>& chunks, const std::vector<ScoredHit>& triplets,
              const ChunkCorpus& corpus, const KnowledgeGraphIndex& kg, const PprConfig& cfg);

/// Personalized PageRank over the KAG: pi <- alpha * W * pi + (1 - alpha) * p
/// for N rounds from pi0 = p. W is column-stochastic over the symmetric
/// weighted adjacency (isolated nodes get a unit self-loop); p puts 1 on the
/// subquery node and 0.5 on each key entity, then is normalized to sum 1.
/// The observer, when set, sees pi after every iteration.
std::vector<double> ppr(const Kag& graph, const PprConfig& cfg,
                        const std::function<void(int, const std::vector<double>&)>& observer = {});

struct ContextItem {
    uint32_t node = 0;
    NodeKind kind = NodeKind::chunk;
    std::string payload_id;
    std::string rendered;
    double score = 0.0;
};

/// Ranks chunk and triplet nodes by pi (ties: higher subquery-relevance
/// weight, chunks before triplets, lexicographic node id) and returns the
/// top k_f rendered payloads.
std::vector<ContextItem> select_context(const Kag& graph, const std::vector<double>& pi,
                                        const PprConfig& cfg, const ChunkCorpus& corpus,
                                        const KnowledgeGraphIndex& kg);

/// Graphviz dump for debugging; pi scores become node labels when given.
std::string to_dot(const Kag& graph, const std::vector<double>* pi = nullptr);

}  // namespace kagpipe
