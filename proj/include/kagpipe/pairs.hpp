#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "kagpipe/corpus.hpp"
#include "kagpipe/records.hpp"

namespace kagpipe {

struct MaskSpan {
    size_t begin = 0;  // [begin, end) character offsets, tags excluded
    size_t end = 0;
};

enum class RejectionKind { format, easy, hard };

std::string to_string(RejectionKind k);
RejectionKind rejection_from_string(const std::string& s);

struct RewardTriple {
    double format = 0.0;
    double outcome = 0.0;
    double process = 0.0;
};

struct PreferencePair {
    std::string instruction;
    std::string question;
    std::string question_id;
    std::string chosen_id;
    std::string rejected_id;
    std::string chosen;    // transcript O+
    std::string rejected;  // transcript O-
    std::vector<MaskSpan> chosen_masks;
    std::vector<MaskSpan> rejected_masks;
    RejectionKind rejection_kind = RejectionKind::format;
    RewardTriple chosen_rewards;
    RewardTriple rejected_rewards;
};

class MalformedTranscriptError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// One span per reference block covering exactly the text strictly between
/// the tags; sorted and non-overlapping. Unbalanced tags raise
/// MalformedTranscriptError.
std::vector<MaskSpan> compute_mask_spans(const std::string& transcript);

/// Chosen-set predicate. Single-hop: format = 1 and (scaled) outcome = 1.
/// Multi-hop: format = 1 and either (outcome = 1 and process >= 0.7) or
/// (outcome >= 0.8 and process >= 0.8).
bool is_chosen(const SampleRecord& sample);

/// Samples of one question that pass the chosen predicate, ordered by
/// descending total reward (ties by path id).
std::vector<const SampleRecord*> select_chosen(const std::vector<SampleRecord>& samples);

/// Candidates of one question ranked ascending by format+outcome+process,
/// ties by path id — the traversal order for rejected matching.
std::vector<const SampleRecord*> ranked_candidates(const std::vector<SampleRecord>& samples);

/// Scans `ranked` from `cursor` for the first sample matching a rejection
/// kind against the chosen sample; advances the cursor past the match so no
/// rejected sample is reused. Single-hop admits only format and easy.
std::optional<std::pair<const SampleRecord*, RejectionKind>> match_rejected(
    const SampleRecord& chosen, const std::vector<const SampleRecord*>& ranked, size_t& cursor);

/// Full pair construction over a scored batch (any question mix). Groups by
/// question id, selects chosen sets, matches rejected samples under the
/// shared per-question cursor, and emits pairs with transcripts and mask
/// spans. Deterministic given the input.
std::vector<PreferencePair> build_pairs(const std::vector<SampleRecord>& samples,
                                        const std::string& instruction);

void write_pairs_file(const std::string& path, const std::vector<PreferencePair>& pairs);
std::vector<PreferencePair> read_pairs_file(const std::string& path);

// ---------------------------------------------------------------------------
// SFT assembly from structured decompositions.

struct SftParagraph {
    std::string title;
    std::string text;
};

struct SftHop {
    std::string subquery;
    std::vector<SftParagraph> paragraphs;  // golden evidence, >= 1
    std::vector<Triplet> triplets;         // supporting triplets, >= 1
    std::string answer;                    // sub-answer for the hop
};

struct SftDecomposition {
    std::string question;
    std::string answer;  // final answer
    std::vector<SftHop> hops;
};

struct SftOutput {
    std::string transcript;
    std::vector<MaskSpan> mask_spans;
};

/// Builds one SFT transcript: per hop, entities from the supporting
/// triplets, the natural subquery, a simulated reference block (paragraphs
/// with the triplets inserted at seeded-random positions), and a templated
/// two-part summary (triplets first, then the sub-answer). Ends with the
/// final answer line. Deterministic for a given seed.
SftOutput build_sft_record(const SftDecomposition& decomp, uint64_t seed);

std::vector<SftDecomposition> read_decomposition_file(const std::string& path);
void write_sft_file(const std::string& path, const std::vector<SftDecomposition>& decomps,
                    uint64_t seed);

}  // namespace kagpipe
