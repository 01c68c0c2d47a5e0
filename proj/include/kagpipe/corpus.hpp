#pragma once

#include <cstdint>
#include <istream>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "kagpipe/text.hpp"

namespace kagpipe {

struct Chunk {
    std::string id;
    std::string title;
    std::string text;
    int token_count = 0;
};

struct Triplet {
    std::string head;
    std::string relation;
    std::string tail;
    std::optional<std::string> source_chunk_id;

    /// Plain text rendering used for lexical scoring: "head relation tail".
    std::string render_plain() const;
    /// Context rendering: `Triplet: head relation tail`.
    std::string render_context() const;
};

class IngestError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Immutable after ingestion; readers may share freely.
class ChunkCorpus {
public:
    /// Reads line-delimited JSON records with fields id, title, text.
    /// Throws IngestError on a duplicate id (naming the id) or a malformed
    /// record (naming the line number).
    static ChunkCorpus ingest(std::istream& in, const Tokenizer& tok = whitespace_tokenizer());
    static ChunkCorpus ingest_file(const std::string& path,
                                   const Tokenizer& tok = whitespace_tokenizer());

    void add(Chunk chunk);  // throws IngestError on duplicate id

    size_t size() const { return chunks_.size(); }
    bool empty() const { return chunks_.empty(); }
    const std::vector<Chunk>& chunks() const { return chunks_; }
    const Chunk& at(size_t idx) const { return chunks_.at(idx); }
    const Chunk* find(const std::string& id) const;

    std::string render_context(const Chunk& chunk) const;

private:
    std::vector<Chunk> chunks_;
    std::unordered_map<std::string, size_t> by_id_;
};

struct GraphStats {
    size_t entity_count = 0;
    size_t triplet_count = 0;
    double avg_out_degree_per_head = 0.0;
    double avg_in_degree_per_tail = 0.0;
    double avg_degree_per_entity = 0.0;
};

/// Entity + triplet store with adjacency and per-chunk provenance indexes.
///
/// Entity identity is case-insensitive after whitespace normalization; the
/// first-seen casing is the stored one. One Triplet is kept per distinct
/// (head, relation, tail, source_chunk_id). Build is single-writer; after
/// that the index is immutable and safe for concurrent readers.
class KnowledgeGraphIndex {
public:
    /// Returns the triplet id, or nullopt if it was a duplicate.
    std::optional<uint32_t> add_triplet(Triplet triplet);

    size_t entity_count() const { return entities_.size(); }
    size_t triplet_count() const { return triplets_.size(); }
    const std::vector<std::string>& entities() const { return entities_; }
    const std::vector<Triplet>& triplets() const { return triplets_; }
    const Triplet& triplet(uint32_t id) const { return triplets_.at(id); }

    std::optional<uint32_t> find_entity(const std::string& name) const;
    const std::vector<uint32_t>& incident_triplets(uint32_t entity_id) const;
    std::vector<uint32_t> triplets_from_chunk(const std::string& chunk_id) const;

    /// One-hop neighborhood: ids of every triplet whose head or tail is in
    /// the entity set, deduplicated and sorted. Unknown entities contribute
    /// nothing.
    std::vector<uint32_t> one_hop(const std::vector<std::string>& entity_names) const;

    GraphStats stats() const;

    /// Persists triplets as line-delimited records plus a binary adjacency
    /// snapshot. Loading verifies a checksum over the triplet list and
    /// rebuilds the snapshot when it does not match.
    void save(const std::string& dir) const;
    static KnowledgeGraphIndex load(const std::string& dir, bool* rebuilt = nullptr);

    static KnowledgeGraphIndex from_triplets(std::vector<Triplet> triplets);

private:
    uint32_t intern_entity(const std::string& name);

    std::vector<std::string> entities_;                       // original casing
    std::unordered_map<std::string, uint32_t> entity_ids_;    // normalized -> id
    std::vector<Triplet> triplets_;
    std::vector<std::vector<uint32_t>> adjacency_;            // entity id -> triplet ids
    std::unordered_map<std::string, std::vector<uint32_t>> by_chunk_;
    std::unordered_set<std::string> dedup_;
};

/// Reads/writes the line-delimited triplet file (fields head, relation,
/// tail, source_chunk_id with null allowed).
std::vector<Triplet> read_triplets_file(const std::string& path);
void write_triplets_file(const std::string& path, const std::vector<Triplet>& triplets);

void write_chunks_file(const std::string& path, const ChunkCorpus& corpus);

}  // namespace kagpipe
