#include "kagpipe/agent.hpp"

#include <sstream>
#include <stdexcept>

namespace kagpipe {

namespace {

constexpr const char* kEntityPrefix = "Important entity:";
constexpr const char* kSubqueryPrefix = "Subquery:";
constexpr const char* kSummaryPrefix = "Summary:";

constexpr const char* kDefaultInstruction =
    "You answer questions by iteratively gathering evidence. Each step names "
    "the important entities, poses one subquery, reads the references provided "
    "to you, and summarizes what they establish. When the evidence suffices, "
    "reply with a single line starting exactly with 'Final answer: '.";

constexpr const char* kAnswerOnlyInstruction =
    "Answer the question now from the evidence already gathered. Reply with a "
    "single line starting exactly with 'Final answer: '.";

bool starts_with(const std::string& s, const char* prefix) {
    return s.rfind(prefix, 0) == 0;
}

// "Step 12:" headers are presentation, not format.
bool is_step_marker(const std::string& line) {
    if (!starts_with(line, "Step ")) return false;
    size_t i = 5;
    size_t digits = 0;
    while (i < line.size() && std::isdigit(static_cast<unsigned char>(line[i]))) {
        ++i;
        ++digits;
    }
    return digits > 0 && i < line.size() && line[i] == ':' && trim(line.substr(i + 1)).empty();
}

std::vector<std::string> split_entities(const std::string& rest) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : rest) {
        if (c == ',') {
            std::string e = trim(cur);
            if (!e.empty()) out.push_back(std::move(e));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    std::string e = trim(cur);
    if (!e.empty()) out.push_back(std::move(e));
    return out;
}

}  // namespace

std::string to_string(TerminatedBy t) {
    switch (t) {
        case TerminatedBy::answer: return "answer";
        case TerminatedBy::step_cap: return "step_cap";
        case TerminatedBy::error: return "error";
    }
    return "error";
}

TerminatedBy terminated_from_string(const std::string& s) {
    if (s == "answer") return TerminatedBy::answer;
    if (s == "step_cap") return TerminatedBy::step_cap;
    if (s == "error") return TerminatedBy::error;
    throw std::invalid_argument("unknown termination kind: " + s);
}

ParsedSegment parse_step(const std::string& segment) {
    ParsedSegment out;
    for (const auto& raw : split_lines(segment)) {
        std::string line = trim(raw);
        if (line.empty() || is_step_marker(line)) continue;

        if (starts_with(line, kFinalAnswerPrefix)) {
            out.final_answer = line.substr(std::string(kFinalAnswerPrefix).size());
            break;  // terminal
        }
        if (starts_with(line, kEntityPrefix)) {
            if (out.has_entities || out.subquery || out.summary) {
                out.violations.push_back("entity line out of order");
                continue;
            }
            out.has_entities = true;
            out.key_entities = split_entities(line.substr(std::string(kEntityPrefix).size()));
            continue;
        }
        if (starts_with(line, kSubqueryPrefix)) {
            if (out.subquery || out.summary) {
                out.violations.push_back("subquery line out of order");
                continue;
            }
            out.subquery = trim(line.substr(std::string(kSubqueryPrefix).size()));
            continue;
        }
        if (starts_with(line, kSummaryPrefix)) {
            if (out.summary) {
                out.violations.push_back("duplicate summary line");
                continue;
            }
            out.summary = trim(line.substr(std::string(kSummaryPrefix).size()));
            continue;
        }
        out.violations.push_back("unrecognized line: " + line);
    }
    return out;
}

std::vector<std::pair<size_t, size_t>> reference_spans(const std::string& transcript) {
    const std::string open = kReferenceOpen;
    const std::string close = kReferenceClose;
    std::vector<std::pair<size_t, size_t>> spans;
    size_t pos = 0;
    bool inside = false;
    size_t interior_start = 0;
    while (pos < transcript.size()) {
        size_t next_open = transcript.find(open, pos);
        size_t next_close = transcript.find(close, pos);
        // "</Reference>" contains "<Reference>"? No: they differ at index 1.
        if (next_open == std::string::npos && next_close == std::string::npos) break;
        if (!inside) {
            if (next_close < next_open) {
                throw std::invalid_argument("closing reference tag without opener");
            }
            inside = true;
            interior_start = next_open + open.size();
            pos = interior_start;
        } else {
            if (next_open < next_close) {
                throw std::invalid_argument("nested reference opener");
            }
            if (next_close == std::string::npos) break;
            spans.emplace_back(interior_start, next_close);
            inside = false;
            pos = next_close + close.size();
        }
    }
    if (inside) throw std::invalid_argument("unclosed reference tag");
    return spans;
}

std::string render_reference_block(const std::vector<std::string>& items) {
    std::string out = kReferenceOpen;
    for (size_t i = 0; i < items.size(); ++i) {
        if (i > 0) out.push_back('\n');
        out += "Evidence " + std::to_string(i + 1) + ": " + items[i];
    }
    out += kReferenceClose;
    return out;
}

std::string render_transcript(const ReasoningPath& path) {
    std::string out;
    for (const auto& step : path.steps) {
        out += std::string(kEntityPrefix) + " ";
        for (size_t i = 0; i < step.key_entities.size(); ++i) {
            if (i > 0) out += ", ";
            out += step.key_entities[i];
        }
        out += "\n" + std::string(kSubqueryPrefix) + " " + step.subquery + "\n";
        out += render_reference_block(step.context);
        out += "\n" + std::string(kSummaryPrefix) + " " + step.summary + "\n";
    }
    if (path.final_answer) {
        out += std::string(kFinalAnswerPrefix) + *path.final_answer;
    }
    return out;
}

ReasoningPath parse_transcript(const std::string& question, const std::string& transcript) {
    ReasoningPath path;
    path.question = question;
    path.transcript = transcript;
    path.terminated_by = TerminatedBy::step_cap;

    std::vector<std::pair<size_t, size_t>> spans;
    try {
        spans = reference_spans(transcript);
    } catch (const std::invalid_argument& e) {
        path.violations.push_back(e.what());
        return path;
    }

    // Pieces: outside text split into lines, with reference blocks in place.
    struct Piece {
        bool is_block;
        std::string text;
    };
    std::vector<Piece> pieces;
    const size_t open_len = std::string(kReferenceOpen).size();
    const size_t close_len = std::string(kReferenceClose).size();
    size_t cursor = 0;
    for (const auto& [b, e] : spans) {
        std::string outside = transcript.substr(cursor, b - open_len - cursor);
        for (auto& line : split_lines(outside)) pieces.push_back({false, std::move(line)});
        pieces.push_back({true, transcript.substr(b, e - b)});
        cursor = e + close_len;
    }
    for (auto& line : split_lines(transcript.substr(cursor))) pieces.push_back({false, std::move(line)});

    ReasoningStep step;
    bool step_open = false;
    auto flush_step = [&] {
        if (!step_open) return;
        step.index = static_cast<int>(path.steps.size()) + 1;
        if (step.subquery.empty()) path.violations.push_back("step missing subquery line");
        if (!step.has_reference) path.violations.push_back("step missing reference block");
        path.steps.push_back(step);
        step = ReasoningStep{};
        step_open = false;
    };

    for (const auto& piece : pieces) {
        if (piece.is_block) {
            if (!step_open) {
                path.violations.push_back("reference block outside a step");
                continue;
            }
            step.has_reference = true;
            for (const auto& raw : split_lines(piece.text)) {
                if (raw.empty()) continue;
                std::string item = raw;
                if (starts_with(item, "Evidence ")) {
                    size_t colon = item.find(": ");
                    if (colon != std::string::npos) item = item.substr(colon + 2);
                }
                step.context.push_back(std::move(item));
            }
            continue;
        }
        std::string line = trim(piece.text);
        if (line.empty() || is_step_marker(line)) continue;
        if (starts_with(line, kFinalAnswerPrefix)) {
            path.final_answer = line.substr(std::string(kFinalAnswerPrefix).size());
            path.terminated_by = TerminatedBy::answer;
            flush_step();
            break;
        }
        if (starts_with(line, kEntityPrefix)) {
            flush_step();
            step_open = true;
            step.key_entities = split_entities(line.substr(std::string(kEntityPrefix).size()));
            continue;
        }
        if (starts_with(line, kSubqueryPrefix)) {
            if (!step_open) {
                step_open = true;
                path.violations.push_back("subquery before entity line");
            }
            step.subquery = trim(line.substr(std::string(kSubqueryPrefix).size()));
            continue;
        }
        if (starts_with(line, kSummaryPrefix)) {
            if (!step_open) {
                path.violations.push_back("summary outside a step");
                continue;
            }
            step.summary = trim(line.substr(std::string(kSummaryPrefix).size()));
            flush_step();
            continue;
        }
        path.violations.push_back("unrecognized line: " + line);
    }
    flush_step();
    return path;
}

AgentConfig::AgentConfig() : instruction(kDefaultInstruction) {}

AgentRunner::AgentRunner(const Retriever& retriever, GenerationBackend& backend, AgentConfig cfg,
                         const Tokenizer& tokenizer)
    : retriever_(retriever), backend_(backend), cfg_(std::move(cfg)), tokenizer_(tokenizer) {
    if (cfg_.max_steps < 1) throw std::invalid_argument("max_steps must be at least 1");
    cfg_.retrieval.validate();
    cfg_.ppr.validate();
}

std::string AgentRunner::step_prompt(const ReasoningPath& path) const {
    return cfg_.instruction + "\n\nQuestion: " + path.question + "\n\n" + path.transcript;
}

std::string AgentRunner::forced_answer_prompt(const ReasoningPath& path) const {
    return std::string(kAnswerOnlyInstruction) + "\n\nQuestion: " + path.question + "\n\n" +
           path.transcript;
}

bool AgentRunner::run_step(ReasoningPath& path, GenerationClient& gen) const {
    GenerationRequest req;
    req.prompt = step_prompt(path);
    req.stop = cfg_.generation.stop;
    req.temperature = cfg_.generation.temperature;
    req.max_new_tokens = cfg_.generation.max_new_tokens;
    std::string head_text = gen.generate(req);

    auto head = parse_step(head_text);
    for (auto& v : head.violations) path.violations.push_back(std::move(v));

    if (head.final_answer) {
        if (!path.transcript.empty() && path.transcript.back() != '\n') path.transcript += "\n";
        path.transcript += trim(head_text);
        path.final_answer = head.final_answer;
        path.terminated_by = TerminatedBy::answer;
        return false;
    }

    ReasoningStep step;
    step.index = static_cast<int>(path.steps.size()) + 1;
    step.key_entities = head.key_entities;
    if (!head.has_entities) path.violations.push_back("step missing entity line");
    if (head.subquery && !head.subquery->empty()) {
        step.subquery = *head.subquery;
    } else {
        path.violations.push_back("step missing subquery line");
        // Retrieval still needs a query; fall back to the raw segment, then
        // the question itself.
        std::string fallback = trim(head_text);
        step.subquery = fallback.empty() ? path.question : fallback;
    }

    auto chunk_hits = retriever_.semantic_retrieve(step.subquery, cfg_.retrieval);
    auto triplet_hits = retriever_.graph_retrieve(step.key_entities, step.subquery, cfg_.retrieval);
    Kag graph = build_kag(step.subquery, step.key_entities, chunk_hits, triplet_hits,
                          retriever_.corpus(), retriever_.kg(), cfg_.ppr);
    auto pi = ppr(graph, cfg_.ppr);
    auto context = select_context(graph, pi, cfg_.ppr, retriever_.corpus(), retriever_.kg());
    for (const auto& item : context) step.context.push_back(item.rendered);
    step.has_reference = true;

    std::string block = render_reference_block(step.context);
    if (!path.transcript.empty() && path.transcript.back() != '\n') path.transcript += "\n";
    path.transcript += trim(head_text) + "\n" + block + "\n";

    GenerationRequest summary_req = req;
    summary_req.prompt = step_prompt(path);
    std::string summary_text = gen.generate(summary_req);
    auto parsed_summary = parse_step(summary_text);
    for (auto& v : parsed_summary.violations) path.violations.push_back(std::move(v));
    if (parsed_summary.summary) {
        step.summary = *parsed_summary.summary;
    } else if (!parsed_summary.final_answer) {
        path.violations.push_back("step missing summary line");
        step.summary = trim(summary_text);
    }
    path.transcript += trim(summary_text) + "\n";

    step.retrieved_tokens = 0;
    for (const auto& [b, e] : reference_spans(block)) {
        step.retrieved_tokens += tokenizer_.count(std::string_view(block).substr(b, e - b));
    }
    step.thinking_tokens = tokenizer_.count(trim(head_text));
    std::string summary_trimmed = trim(summary_text);
    if (parsed_summary.final_answer) {
        // The summary segment ran straight into the final answer; only the
        // summary part belongs to this step's thinking tokens.
        size_t cut = summary_trimmed.find(kFinalAnswerPrefix);
        step.thinking_tokens += tokenizer_.count(summary_trimmed.substr(0, cut));
    } else {
        step.thinking_tokens += tokenizer_.count(summary_trimmed);
    }

    path.steps.push_back(std::move(step));

    if (parsed_summary.final_answer) {
        path.final_answer = parsed_summary.final_answer;
        path.terminated_by = TerminatedBy::answer;
        return false;
    }
    return true;
}

ReasoningPath AgentRunner::run(const std::string& question, const std::string& path_id,
                               int variant) const {
    ReasoningPath path;
    path.id = path_id;
    path.question = question;
    path.terminated_by = TerminatedBy::step_cap;

    auto session = backend_.open(question, variant);
    try {
        while (static_cast<int>(path.steps.size()) < cfg_.max_steps) {
            if (!run_step(path, *session)) return path;
        }
        // Step cap reached: force one answer-only generation.
        GenerationRequest req;
        req.prompt = forced_answer_prompt(path);
        req.stop = cfg_.generation.stop;
        req.temperature = cfg_.generation.temperature;
        req.max_new_tokens = cfg_.generation.max_new_tokens;
        std::string text = session->generate(req);
        auto parsed = parse_step(text);
        for (auto& v : parsed.violations) path.violations.push_back(std::move(v));
        if (parsed.final_answer) {
            if (!path.transcript.empty() && path.transcript.back() != '\n') path.transcript += "\n";
            path.transcript += trim(text);
            path.final_answer = parsed.final_answer;
            path.terminated_by = TerminatedBy::answer;
        } else {
            path.terminated_by = TerminatedBy::step_cap;
        }
    } catch (const std::exception& e) {
        path.terminated_by = TerminatedBy::error;
        path.final_answer.reset();
        path.violations.push_back(std::string("generation error: ") + e.what());
    }
    return path;
}

std::vector<ReasoningPath> AgentRunner::sample(const std::string& question, int samples,
                                               double temperature,
                                               const std::string& id_prefix) const {
    AgentConfig cfg = cfg_;
    cfg.generation.temperature = temperature;
    AgentRunner sampler(retriever_, backend_, cfg, tokenizer_);
    std::vector<ReasoningPath> out;
    out.reserve(static_cast<size_t>(samples));
    for (int r = 0; r < samples; ++r) {
        out.push_back(sampler.run(question, id_prefix + "-" + std::to_string(r), r));
    }
    return out;
}

}  // namespace kagpipe
