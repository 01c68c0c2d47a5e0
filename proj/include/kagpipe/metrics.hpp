#pragma once

#include <string>
#include <vector>

#include "kagpipe/agent.hpp"
#include "kagpipe/text.hpp"

namespace kagpipe {

struct TokenAccount {
    long thinking_tokens = 0;
    long retrieved_tokens = 0;
    long total_tokens = 0;  // always thinking + retrieved
    int retrieval_calls = 0;
    double content_per_retrieval = 0.0;  // retrieved / calls, 0 when no calls
};

/// 1 iff the normalized answer equals any normalized ground truth.
int exact_match(const std::string& answer, const std::vector<std::string>& ground_truths);

/// Max over ground truths of the bag-of-words F1 (same computation as the
/// outcome reward).
double f1_metric(const std::string& answer, const std::vector<std::string>& ground_truths);

/// Splits the transcript at reference blocks: tokens inside block interiors
/// are retrieved content, every other content token (final answer included)
/// is thinking. The literal tags count for neither side. Malformed blocks
/// throw, same matcher as the mask-span computation.
TokenAccount account_tokens(const std::string& transcript,
                            const Tokenizer& tok = whitespace_tokenizer());
TokenAccount account_tokens(const ReasoningPath& path,
                            const Tokenizer& tok = whitespace_tokenizer());

struct BatchReport {
    size_t paths = 0;
    size_t scored = 0;  // paths with a matching QA record
    double em = 0.0;
    double f1 = 0.0;
    double avg_steps = 0.0;
    std::vector<std::pair<int, double>> step_histogram;  // step count -> fraction
    double avg_thinking_tokens = 0.0;
    double avg_retrieved_tokens = 0.0;
    double avg_total_tokens = 0.0;
    double avg_content_per_retrieval = 0.0;

    std::string to_text() const;
};

struct QaRecord;  // records.hpp

BatchReport report(const std::vector<ReasoningPath>& paths, const std::vector<QaRecord>& qa,
                   const Tokenizer& tok = whitespace_tokenizer());

}  // namespace kagpipe
