#include "kagpipe/kag.hpp"

#include <algorithm>
#include <map>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace kagpipe {

void PprConfig::validate() const {
    if (alpha < 0.0 || alpha > 1.0) throw std::invalid_argument("ppr alpha must be in [0,1]");
    if (iterations < 1) throw std::invalid_argument("ppr iterations must be positive");
    if (tau < 0.0) throw std::invalid_argument("ppr tau must be nonnegative");
    if (context_keep < 1) throw std::invalid_argument("ppr context size must be positive");
    if (epsilon && *epsilon < 0.0) throw std::invalid_argument("ppr epsilon must be nonnegative");
}

std::optional<uint32_t> Kag::subquery_node() const {
    for (uint32_t i = 0; i < nodes.size(); ++i) {
        if (nodes[i].kind == NodeKind::subquery) return i;
    }
    return std::nullopt;
}

namespace {

class KagBuilder {
public:
    uint32_t add_node(KagNode node) {
        auto it = by_id_.find(node.id);
        if (it != by_id_.end()) return it->second;
        auto idx = static_cast<uint32_t>(nodes_.size());
        by_id_.emplace(node.id, idx);
        nodes_.push_back(std::move(node));
        return idx;
    }

    std::optional<uint32_t> find(const std::string& id) const {
        auto it = by_id_.find(id);
        if (it == by_id_.end()) return std::nullopt;
        return it->second;
    }

    // No self-edges; duplicate pairs collapse to the max weight.
    void add_edge(uint32_t a, uint32_t b, EdgeKind kind, double weight) {
        if (a == b || weight <= 0.0) return;
        if (a > b) std::swap(a, b);
        auto key = std::make_pair(a, b);
        auto it = edges_.find(key);
        if (it == edges_.end()) {
            edges_.emplace(key, KagEdge{a, b, kind, weight});
        } else if (weight > it->second.weight) {
            it->second.kind = kind;
            it->second.weight = weight;
        }
    }

    Kag finish(std::vector<uint32_t> key_entity_ids) {
        Kag g;
        g.nodes = std::move(nodes_);
        g.edges.reserve(edges_.size());
        for (auto& [_, e] : edges_) g.edges.push_back(e);
        g.key_entity_ids = std::move(key_entity_ids);
        return g;
    }

private:
    std::vector<KagNode> nodes_;
    std::unordered_map<std::string, uint32_t> by_id_;
    std::map<std::pair<uint32_t, uint32_t>, KagEdge> edges_;
};

std::string entity_node_id(const std::string& name) {
    return "e:" + normalize_entity(name);
}

}  // namespace

Kag build_kag(const std::string& subquery, const std::vector<std::string>& key_entities,
              const std::vector<ScoredHit>& chunks, const std::vector<ScoredHit>& triplets,
              const ChunkCorpus& corpus, const KnowledgeGraphIndex& kg, const PprConfig& cfg) {
    cfg.validate();
    KagBuilder b;
    uint32_t q = b.add_node({"q", NodeKind::subquery, subquery});

    std::vector<uint32_t> key_ids;
    for (const auto& v : key_entities) {
        if (trim(v).empty()) continue;
        uint32_t e = b.add_node({entity_node_id(v), NodeKind::entity, trim(v)});
        if (std::find(key_ids.begin(), key_ids.end(), e) == key_ids.end()) key_ids.push_back(e);
    }

    // Chunk nodes, their title entities, and the subquery relevance edges.
    std::unordered_map<std::string, uint32_t> chunk_nodes;
    for (const auto& hit : chunks) {
        const Chunk* chunk = corpus.find(hit.item_id);
        if (!chunk) throw std::out_of_range("build_kag: unknown chunk id " + hit.item_id);
        uint32_t c = b.add_node({"c:" + chunk->id, NodeKind::chunk, chunk->id});
        chunk_nodes.emplace(chunk->id, c);
        uint32_t title = b.add_node({entity_node_id(chunk->title), NodeKind::entity,
                                     trim(chunk->title)});
        b.add_edge(c, title, EdgeKind::cooccurrence, 1.0);
        b.add_edge(c, q, EdgeKind::relevance, sigmoid(hit.raw_score));
    }

    for (const auto& hit : triplets) {
        auto tid = static_cast<uint32_t>(std::stoul(hit.item_id));
        const Triplet& trip = kg.triplet(tid);
        uint32_t t = b.add_node({"t:" + hit.item_id, NodeKind::triplet, hit.item_id});
        uint32_t head = b.add_node({entity_node_id(trip.head), NodeKind::entity, trim(trip.head)});
        uint32_t tail = b.add_node({entity_node_id(trip.tail), NodeKind::entity, trim(trip.tail)});

        b.add_edge(head, tail, EdgeKind::cooccurrence, 1.0);
        b.add_edge(t, head, EdgeKind::cooccurrence, 1.0);
        b.add_edge(t, tail, EdgeKind::cooccurrence, 1.0);

        double w = sigmoid(hit.raw_score) - cfg.tau;
        if (w > 0.0) b.add_edge(t, q, EdgeKind::relevance, w);

        if (trip.source_chunk_id) {
            auto it = chunk_nodes.find(*trip.source_chunk_id);
            if (it != chunk_nodes.end()) {
                // Retrieved triplet co-occurring with its retrieved source chunk.
                b.add_edge(t, it->second, EdgeKind::cooccurrence, 1.0);
                b.add_edge(it->second, head, EdgeKind::cooccurrence, 1.0);
                b.add_edge(it->second, tail, EdgeKind::cooccurrence, 1.0);
            }
        }
    }

    return b.finish(std::move(key_ids));
}

std::vector<double> ppr(const Kag& graph, const PprConfig& cfg,
                        const std::function<void(int, const std::vector<double>&)>& observer) {
    cfg.validate();
    auto n = graph.nodes.size();
    if (n == 0) throw std::invalid_argument("ppr: empty graph");
    auto q = graph.subquery_node();
    if (!q) throw std::invalid_argument("ppr: graph has no subquery node");

    std::vector<double> weighted_degree(n, 0.0);
    for (const auto& e : graph.edges) {
        weighted_degree[e.a] += e.weight;
        weighted_degree[e.b] += e.weight;
    }

    std::vector<double> p(n, 0.0);
    p[*q] = 1.0;
    for (uint32_t e : graph.key_entity_ids) p[e] = 0.5;
    double p_sum = 0.0;
    for (double v : p) p_sum += v;
    for (double& v : p) v /= p_sum;

    std::vector<double> pi = p;
    std::vector<double> next(n, 0.0);
    for (int iter = 0; iter < cfg.iterations; ++iter) {
        // next = alpha * W * pi + (1 - alpha) * p, column-stochastic W.
        for (size_t i = 0; i < n; ++i) {
            double self = weighted_degree[i] == 0.0 ? pi[i] : 0.0;  // isolated: self-loop
            next[i] = cfg.alpha * self + (1.0 - cfg.alpha) * p[i];
        }
        for (const auto& e : graph.edges) {
            next[e.a] += cfg.alpha * e.weight / weighted_degree[e.b] * pi[e.b];
            next[e.b] += cfg.alpha * e.weight / weighted_degree[e.a] * pi[e.a];
        }

        double delta = 0.0;
        for (size_t i = 0; i < n; ++i) delta = std::max(delta, std::abs(next[i] - pi[i]));
        pi.swap(next);
        if (observer) observer(iter + 1, pi);
        if (cfg.epsilon && delta < *cfg.epsilon) break;
    }
    return pi;
}

std::vector<ContextItem> select_context(const Kag& graph, const std::vector<double>& pi,
                                        const PprConfig& cfg, const ChunkCorpus& corpus,
                                        const KnowledgeGraphIndex& kg) {
    if (pi.size() != graph.nodes.size()) {
        throw std::invalid_argument("select_context: pi not aligned to graph nodes");
    }
    auto q = graph.subquery_node();

    // Relevance-edge weight to the subquery, used as the first tie-break.
    std::vector<double> relevance(graph.nodes.size(), 0.0);
    if (q) {
        for (const auto& e : graph.edges) {
            if (e.kind != EdgeKind::relevance) continue;
            if (e.a == *q) relevance[e.b] = std::max(relevance[e.b], e.weight);
            if (e.b == *q) relevance[e.a] = std::max(relevance[e.a], e.weight);
        }
    }

    std::vector<uint32_t> eligible;
    for (uint32_t i = 0; i < graph.nodes.size(); ++i) {
        auto kind = graph.nodes[i].kind;
        if (kind == NodeKind::chunk || kind == NodeKind::triplet) eligible.push_back(i);
    }
    std::sort(eligible.begin(), eligible.end(), [&](uint32_t a, uint32_t b) {
        if (pi[a] != pi[b]) return pi[a] > pi[b];
        if (relevance[a] != relevance[b]) return relevance[a] > relevance[b];
        bool a_chunk = graph.nodes[a].kind == NodeKind::chunk;
        bool b_chunk = graph.nodes[b].kind == NodeKind::chunk;
        if (a_chunk != b_chunk) return a_chunk;
        return graph.nodes[a].id < graph.nodes[b].id;
    });
    if (eligible.size() > static_cast<size_t>(cfg.context_keep)) {
        eligible.resize(static_cast<size_t>(cfg.context_keep));
    }

    std::vector<ContextItem> out;
    out.reserve(eligible.size());
    for (uint32_t i : eligible) {
        ContextItem item;
        item.node = i;
        item.kind = graph.nodes[i].kind;
        item.payload_id = graph.nodes[i].payload;
        item.score = pi[i];
        if (item.kind == NodeKind::chunk) {
            const Chunk* chunk = corpus.find(item.payload_id);
            if (!chunk) throw std::out_of_range("select_context: unknown chunk " + item.payload_id);
            item.rendered = corpus.render_context(*chunk);
        } else {
            item.rendered =
                kg.triplet(static_cast<uint32_t>(std::stoul(item.payload_id))).render_context();
        }
        out.push_back(std::move(item));
    }
    return out;
}

std::string to_dot(const Kag& graph, const std::vector<double>* pi) {
    std::ostringstream out;
    out << "graph kag {\n";
    for (uint32_t i = 0; i < graph.nodes.size(); ++i) {
        const auto& node = graph.nodes[i];
        const char* shape = "ellipse";
        switch (node.kind) {
            case NodeKind::subquery: shape = "doubleoctagon"; break;
            case NodeKind::chunk: shape = "box"; break;
            case NodeKind::triplet: shape = "diamond"; break;
            case NodeKind::entity: shape = "ellipse"; break;
        }
        out << "  n" << i << " [shape=" << shape << ", label=\"";
        for (char c : node.id) {
            if (c == '"' || c == '\\') out << '\\';
            out << c;
        }
        if (pi && i < pi->size()) out << "\\n" << (*pi)[i];
        out << "\"];\n";
    }
    for (const auto& e : graph.edges) {
        out << "  n" << e.a << " -- n" << e.b << " [label=\"" << e.weight << "\"";
        if (e.kind == EdgeKind::relevance) out << ", style=dashed";
        out << "];\n";
    }
    out << "}\n";
    return out.str();
}

}  // namespace kagpipe
