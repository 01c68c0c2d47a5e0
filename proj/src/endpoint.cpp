#include "kagpipe/endpoint.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

namespace kagpipe {

using nlohmann::json;

namespace {

struct ParsedUrl {
    std::string host_port;  // scheme://host:port
    bool ok = false;
};

ParsedUrl parse_base_url(const std::string& base_url) {
    ParsedUrl out;
    if (base_url.empty()) return out;
    out.host_port = base_url;
    while (!out.host_port.empty() && out.host_port.back() == '/') out.host_port.pop_back();
    out.ok = true;
    return out;
}

// One client per request keeps the endpoint safe for concurrent callers.
json post_json(const EndpointConfig& cfg, const std::string& path, const json& body,
               const char* what) {
    auto url = parse_base_url(cfg.base_url);
    if (!url.ok) throw EndpointError(std::string(what) + ": endpoint base URL not configured", 0);

    std::string last_error;
    int attempts = 0;
    for (; attempts < cfg.max_attempts; ++attempts) {
        if (attempts > 0) {
            std::this_thread::sleep_for(std::chrono::milliseconds(50 * attempts));
        }
        httplib::Client client(url.host_port);
        auto secs = static_cast<time_t>(cfg.timeout_seconds);
        auto usecs = static_cast<time_t>((cfg.timeout_seconds - static_cast<double>(secs)) * 1e6);
        client.set_connection_timeout(secs, usecs);
        client.set_read_timeout(secs, usecs);
        client.set_write_timeout(secs, usecs);

        auto res = client.Post(path, body.dump(), "application/json");
        if (!res) {
            last_error = "transport error: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status != 200) {
            last_error = "http status " + std::to_string(res->status);
            continue;
        }
        json parsed = json::parse(res->body, nullptr, false);
        if (parsed.is_discarded()) {
            last_error = "invalid JSON in response body";
            continue;
        }
        return parsed;
    }
    throw EndpointError(std::string(what) + ": " + last_error, attempts);
}

}  // namespace

std::vector<double> HttpScorerEndpoint::score(const std::string& query,
                                              const std::vector<std::string>& candidates) {
    if (candidates.empty()) return {};
    json body{{"query", query}, {"candidates", candidates},
              {"top_k", candidates.size()}};
    json res = post_json(cfg_, "/score", body, "scorer endpoint");
    if (!res.contains("scores") || !res["scores"].is_array() ||
        res["scores"].size() != candidates.size()) {
        throw EndpointError("scorer endpoint: response scores not aligned to candidates",
                            cfg_.max_attempts);
    }
    std::vector<double> scores;
    scores.reserve(candidates.size());
    for (const auto& s : res["scores"]) {
        double v = s.get<double>();
        if (!std::isfinite(v)) {
            throw EndpointError("scorer endpoint: non-finite score", cfg_.max_attempts);
        }
        scores.push_back(v);
    }
    return scores;
}

std::string HttpGenerationClient::generate(const GenerationRequest& req) {
    json body{{"prompt", req.prompt},
              {"stop", req.stop},
              {"temperature", req.temperature},
              {"max_new_tokens", req.max_new_tokens},
              {"model", cfg_.model}};
    json res = post_json(cfg_, "/generate", body, "generation endpoint");
    if (!res.contains("text") || !res["text"].is_string()) {
        throw EndpointError("generation endpoint: response missing text", cfg_.max_attempts);
    }
    return res["text"].get<std::string>();
}

std::unique_ptr<GenerationClient> HttpGenerationBackend::open(const std::string&, int) {
    return std::make_unique<HttpGenerationClient>(cfg_);
}

int HttpTokenizer::count(std::string_view text) const {
    json body{{"texts", json::array({std::string(text)})}};
    json res = post_json(cfg_, "/tokenize", body, "tokenizer endpoint");
    if (!res.contains("counts") || !res["counts"].is_array() || res["counts"].size() != 1) {
        throw EndpointError("tokenizer endpoint: malformed counts", cfg_.max_attempts);
    }
    return res["counts"][0].get<int>();
}

namespace {

class ScriptedSession final : public GenerationClient {
public:
    explicit ScriptedSession(std::vector<std::string> segments)
        : segments_(std::move(segments)) {}

    std::string generate(const GenerationRequest&) override {
        if (next_ >= segments_.size()) return {};
        return segments_[next_++];
    }

private:
    std::vector<std::string> segments_;
    size_t next_ = 0;
};

}  // namespace

ScriptedMockBackend ScriptedMockBackend::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open mock fixture: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return from_json_text(buf.str());
}

ScriptedMockBackend ScriptedMockBackend::from_json_text(const std::string& text) {
    json doc = json::parse(text);
    ScriptedMockBackend backend;
    for (const auto& [question, variants] : doc.at("questions").items()) {
        for (const auto& variant : variants) {
            backend.add_script(question, variant.at("segments").get<std::vector<std::string>>());
        }
    }
    return backend;
}

void ScriptedMockBackend::add_script(const std::string& question,
                                     std::vector<std::string> segments) {
    scripts_[question].push_back(std::move(segments));
}

std::unique_ptr<GenerationClient> ScriptedMockBackend::open(const std::string& question,
                                                            int variant) {
    auto it = scripts_.find(question);
    if (it == scripts_.end() || it->second.empty()) {
        return std::make_unique<ScriptedSession>(std::vector<std::string>{});
    }
    const auto& variants = it->second;
    size_t idx = static_cast<size_t>(variant) % variants.size();
    return std::make_unique<ScriptedSession>(variants[idx]);
}

int ScriptedMockBackend::variant_count(const std::string& question) const {
    auto it = scripts_.find(question);
    return it == scripts_.end() ? 0 : static_cast<int>(it->second.size());
}

}  // namespace kagpipe
