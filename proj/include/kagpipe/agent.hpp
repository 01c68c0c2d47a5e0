#pragma once

#include <optional>
#include <string>
#include <vector>

#include "kagpipe/endpoint.hpp"
#include "kagpipe/kag.hpp"
#include "kagpipe/retrieval.hpp"

namespace kagpipe {

inline constexpr const char* kReferenceOpen = "<Reference>";
inline constexpr const char* kReferenceClose = "</Reference>";
inline constexpr const char* kFinalAnswerPrefix = "Final answer: ";

struct ReasoningStep {
    int index = 1;
    std::vector<std::string> key_entities;
    std::string subquery;
    std::vector<std::string> context;  // rendered items, length <= k_f
    std::string summary;
    bool has_reference = false;
    int thinking_tokens = 0;
    int retrieved_tokens = 0;
};

enum class TerminatedBy { answer, step_cap, error };

std::string to_string(TerminatedBy t);
TerminatedBy terminated_from_string(const std::string& s);

struct ReasoningPath {
    std::string id;
    std::string question;
    std::vector<ReasoningStep> steps;
    std::optional<std::string> final_answer;  // present iff terminated_by == answer
    TerminatedBy terminated_by = TerminatedBy::error;
    std::string transcript;
    std::vector<std::string> violations;  // format problems, recorded not thrown

    size_t step_count() const { return steps.size(); }
};

/// Parse of one generated segment (the text since the last reference block).
/// Violations are data for the format reward, never exceptions.
struct ParsedSegment {
    bool has_entities = false;
    std::vector<std::string> key_entities;
    std::optional<std::string> subquery;
    std::optional<std::string> summary;
    std::optional<std::string> final_answer;
    std::vector<std::string> violations;
};

/// Recognizes, in order, `Important entity:` (comma-separated), `Subquery:`,
/// later `Summary:`; a line starting exactly `Final answer: ` is terminal.
/// Blank lines and decorative `Step <n>:` markers are skipped; anything else
/// is recorded as a violation.
ParsedSegment parse_step(const std::string& segment);

/// Interior spans of <Reference>...</Reference> blocks, as [begin, end)
/// character offsets excluding the tags. Tags must strictly alternate
/// open/close; anything else throws std::invalid_argument.
std::vector<std::pair<size_t, size_t>> reference_spans(const std::string& transcript);

/// Canonical transcript for a structured path (used for SFT assembly and the
/// round-trip property; live transcripts keep the generator's raw text).
std::string render_transcript(const ReasoningPath& path);
std::string render_reference_block(const std::vector<std::string>& items);

/// Rebuilds the structured path from transcript text. Unparseable content
/// lands in `violations`.
ReasoningPath parse_transcript(const std::string& question, const std::string& transcript);

struct GenerationSettings {
    std::vector<std::string> stop = {kReferenceOpen};
    double temperature = 0.0;
    int max_new_tokens = 512;
};

struct AgentConfig {
    int max_steps = 5;
    RetrievalConfig retrieval;
    PprConfig ppr;
    std::string instruction;  // prompt preamble; wording not part of the contract
    GenerationSettings generation;

    AgentConfig();
};

/// Drives the reasoning loop: generate entities + subquery, hybrid retrieval,
/// KAG + PPR context selection, reference injection, summary generation,
/// then either the next step or the final answer. One path is sequential;
/// distinct paths may run concurrently over the shared read-only stores.
class AgentRunner {
public:
    AgentRunner(const Retriever& retriever, GenerationBackend& backend, AgentConfig cfg,
                const Tokenizer& tokenizer = whitespace_tokenizer());

    /// Executes one reasoning step against an open generation session,
    /// appending to the path. Returns false when the segment was a final
    /// answer (no step executed).
    bool run_step(ReasoningPath& path, GenerationClient& gen) const;

    ReasoningPath run(const std::string& question, const std::string& path_id = "path-0",
                      int variant = 0) const;

    /// R independent paths; a failing path is recorded with
    /// terminated_by = error and does not abort the batch.
    std::vector<ReasoningPath> sample(const std::string& question, int samples,
                                      double temperature,
                                      const std::string& id_prefix = "path") const;

    const AgentConfig& config() const { return cfg_; }

private:
    std::string step_prompt(const ReasoningPath& path) const;
    std::string forced_answer_prompt(const ReasoningPath& path) const;

    const Retriever& retriever_;
    GenerationBackend& backend_;
    AgentConfig cfg_;
    const Tokenizer& tokenizer_;
};

}  // namespace kagpipe
