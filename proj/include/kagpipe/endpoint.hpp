#pragma once

#include <memory>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "kagpipe/retrieval.hpp"

namespace kagpipe {

struct EndpointConfig {
    std::string base_url;  // e.g. http://127.0.0.1:8089
    std::string model;
    double timeout_seconds = 30.0;
    int max_attempts = 3;
};

/// Raised after every attempt failed; carries how many were made so callers
/// can tell a flaky backend from a dead one.
class EndpointError : public std::runtime_error {
public:
    EndpointError(const std::string& what, int attempts)
        : std::runtime_error(what + " (attempts: " + std::to_string(attempts) + ")"),
          attempts_(attempts) {}
    int attempts() const { return attempts_; }

private:
    int attempts_;
};

/// Remote scorer speaking the reranker contract:
///   POST /score  {query, candidates[], top_k}  ->  {scores[]}
/// Scores must come back logit-scale and aligned to the candidates. Each
/// call opens its own connection, so concurrent in-flight requests are fine.
class HttpScorerEndpoint final : public TextScorer {
public:
    explicit HttpScorerEndpoint(EndpointConfig cfg) : cfg_(std::move(cfg)) {}
    std::vector<double> score(const std::string& query,
                              const std::vector<std::string>& candidates) override;

private:
    EndpointConfig cfg_;
};

struct GenerationRequest {
    std::string prompt;
    std::vector<std::string> stop;
    double temperature = 0.0;
    int max_new_tokens = 512;
};

class GenerationClient {
public:
    virtual ~GenerationClient() = default;
    virtual std::string generate(const GenerationRequest& req) = 0;
};

/// Text-generation endpoint:
///   POST /generate  {prompt, stop[], temperature, max_new_tokens, model}  ->  {text}
class HttpGenerationClient final : public GenerationClient {
public:
    explicit HttpGenerationClient(EndpointConfig cfg) : cfg_(std::move(cfg)) {}
    std::string generate(const GenerationRequest& req) override;

private:
    EndpointConfig cfg_;
};

/// Hands out one generation session per reasoning path. The HTTP backend is
/// stateless; the scripted mock keys its segment script on (question,
/// variant).
class GenerationBackend {
public:
    virtual ~GenerationBackend() = default;
    virtual std::unique_ptr<GenerationClient> open(const std::string& question, int variant) = 0;
};

class HttpGenerationBackend final : public GenerationBackend {
public:
    explicit HttpGenerationBackend(EndpointConfig cfg) : cfg_(std::move(cfg)) {}
    std::unique_ptr<GenerationClient> open(const std::string& question, int variant) override;

private:
    EndpointConfig cfg_;
};

/// Remote tokenizer used for token accounting when the local whitespace
/// count is not wanted:
///   POST /tokenize  {texts[]}  ->  {counts[]}
class HttpTokenizer final : public Tokenizer {
public:
    explicit HttpTokenizer(EndpointConfig cfg) : cfg_(std::move(cfg)) {}
    int count(std::string_view text) const override;

private:
    EndpointConfig cfg_;
};

/// Scripted generator driven by a fixture file: for each question a list of
/// variants, each variant an ordered list of segments returned one per
/// generate() call. Exhausted scripts return empty text. Sampling variant r
/// uses script r mod (variant count).
class ScriptedMockBackend final : public GenerationBackend {
public:
    static ScriptedMockBackend from_file(const std::string& path);
    static ScriptedMockBackend from_json_text(const std::string& text);

    void add_script(const std::string& question, std::vector<std::string> segments);

    std::unique_ptr<GenerationClient> open(const std::string& question, int variant) override;

    int variant_count(const std::string& question) const;

private:
    std::unordered_map<std::string, std::vector<std::vector<std::string>>> scripts_;
};

}  // namespace kagpipe
