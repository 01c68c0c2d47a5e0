#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "kagpipe/corpus.hpp"

namespace kagpipe {

class ExtractionError : public std::runtime_error {
public:
    ExtractionError(const std::string& chunk_id, const std::string& what)
        : std::runtime_error("extraction failed for chunk '" + chunk_id + "': " + what),
          chunk_id_(chunk_id) {}
    const std::string& chunk_id() const { return chunk_id_; }

private:
    std::string chunk_id_;
};

struct ExtractionOutcome {
    std::vector<Triplet> triplets;  // source_chunk_id not yet stamped
    int warnings = 0;               // unparsable extractor output skipped
};

class ExtractionClient {
public:
    virtual ~ExtractionClient() = default;
    virtual ExtractionOutcome extract(const Chunk& chunk) = 0;
};

/// Deterministic extractor: an appositive rule plus "X verb-phrase Y"
/// against a small closed verb-phrase list. Good enough to build test
/// corpora without a model in the loop.
class RuleBasedExtractor final : public ExtractionClient {
public:
    ExtractionOutcome extract(const Chunk& chunk) override;

    static const std::vector<std::string>& verb_phrases();
};

class GenerationClient;

/// Asks a text-generation endpoint for triplets, one per line in the form
/// `head | relation | tail`. Non-empty lines that do not parse are skipped
/// and counted as warnings.
class EndpointExtractor final : public ExtractionClient {
public:
    explicit EndpointExtractor(GenerationClient& client) : client_(client) {}
    ExtractionOutcome extract(const Chunk& chunk) override;

private:
    GenerationClient& client_;
};

/// Runs the extractor on one chunk, stamps provenance, registers the result
/// in the knowledge graph. Returns the triplets added (duplicates dropped by
/// the index). Extractor failures surface as ExtractionError with the chunk
/// id attached.
std::vector<Triplet> extract_triplets(const Chunk& chunk, ExtractionClient& extractor,
                                      KnowledgeGraphIndex& kg, int* warnings = nullptr);

}  // namespace kagpipe
