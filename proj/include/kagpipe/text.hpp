#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace kagpipe {

/// Lexical analyzer used by every local retrieval scorer: lowercase,
/// whitespace-split, leading/trailing ASCII punctuation trimmed per token.
std::vector<std::string> lex_tokens(std::string_view text);

/// QA answer normalization: lowercase, punctuation removed, articles
/// (a/an/the) dropped. Shared by the outcome reward and the EM/F1 metrics.
std::vector<std::string> qa_tokens(std::string_view text);

/// qa_tokens joined with single spaces.
std::string normalize_answer(std::string_view text);

// Entity identity: case-insensitive after whitespace normalization,
// stored casing untouched elsewhere.
std::string normalize_entity(std::string_view name);

std::string trim(std::string_view s);
std::vector<std::string> split_lines(std::string_view text);

double sigmoid(double x);

/// Log-odds of the token-overlap Jaccard between two texts, clamped to
/// [-10, 10]. The local stand-in for a reranker logit.
double jaccard_logit(std::string_view a, std::string_view b);

/// Counts tokens in a piece of text. The engine treats the tokenizer as
/// pluggable; the default splits on whitespace.
class Tokenizer {
public:
    virtual ~Tokenizer() = default;
    virtual int count(std::string_view text) const = 0;
};

class WhitespaceTokenizer final : public Tokenizer {
public:
    int count(std::string_view text) const override;
};

const Tokenizer& whitespace_tokenizer();

}  // namespace kagpipe
