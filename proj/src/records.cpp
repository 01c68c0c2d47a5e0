#include "kagpipe/records.hpp"

#include <fstream>

namespace kagpipe {

using nlohmann::json;

void to_json(json& j, const ReasoningStep& s) {
    j = json{{"index", s.index},
             {"key_entities", s.key_entities},
             {"subquery", s.subquery},
             {"context", s.context},
             {"summary", s.summary},
             {"has_reference", s.has_reference},
             {"thinking_tokens", s.thinking_tokens},
             {"retrieved_tokens", s.retrieved_tokens}};
}

void from_json(const json& j, ReasoningStep& s) {
    j.at("index").get_to(s.index);
    j.at("key_entities").get_to(s.key_entities);
    j.at("subquery").get_to(s.subquery);
    j.at("context").get_to(s.context);
    j.at("summary").get_to(s.summary);
    s.has_reference = j.value("has_reference", true);
    s.thinking_tokens = j.value("thinking_tokens", 0);
    s.retrieved_tokens = j.value("retrieved_tokens", 0);
}

void to_json(json& j, const ReasoningPath& p) {
    j = json{{"id", p.id},
             {"question", p.question},
             {"steps", p.steps},
             {"terminated_by", to_string(p.terminated_by)},
             {"transcript", p.transcript},
             {"violations", p.violations}};
    if (p.final_answer) {
        j["final_answer"] = *p.final_answer;
    } else {
        j["final_answer"] = nullptr;
    }
}

void from_json(const json& j, ReasoningPath& p) {
    j.at("id").get_to(p.id);
    j.at("question").get_to(p.question);
    j.at("steps").get_to(p.steps);
    p.terminated_by = terminated_from_string(j.at("terminated_by").get<std::string>());
    j.at("transcript").get_to(p.transcript);
    j.at("violations").get_to(p.violations);
    if (j.contains("final_answer") && !j["final_answer"].is_null()) {
        p.final_answer = j["final_answer"].get<std::string>();
    } else {
        p.final_answer.reset();
    }
}

void to_json(json& j, const RewardBreakdown& r) {
    j = json{{"r_outcome", r.r_outcome},
             {"r_format", r.r_format},
             {"r_consistency", r.r_consistency},
             {"r_q", r.r_q},
             {"r_c", r.r_c},
             {"r_s", r.r_s},
             {"r_process", r.r_process},
             {"total", r.total},
             {"memory_q", r.memory_q},
             {"memory_c", r.memory_c},
             {"memory_s", r.memory_s}};
}

void from_json(const json& j, RewardBreakdown& r) {
    j.at("r_outcome").get_to(r.r_outcome);
    j.at("r_format").get_to(r.r_format);
    j.at("r_consistency").get_to(r.r_consistency);
    j.at("r_q").get_to(r.r_q);
    j.at("r_c").get_to(r.r_c);
    j.at("r_s").get_to(r.r_s);
    j.at("r_process").get_to(r.r_process);
    j.at("total").get_to(r.total);
    j.at("memory_q").get_to(r.memory_q);
    j.at("memory_c").get_to(r.memory_c);
    j.at("memory_s").get_to(r.memory_s);
}

void to_json(json& j, const TokenAccount& a) {
    j = json{{"thinking_tokens", a.thinking_tokens},
             {"retrieved_tokens", a.retrieved_tokens},
             {"total_tokens", a.total_tokens},
             {"retrieval_calls", a.retrieval_calls},
             {"content_per_retrieval", a.content_per_retrieval}};
}

void from_json(const json& j, TokenAccount& a) {
    j.at("thinking_tokens").get_to(a.thinking_tokens);
    j.at("retrieved_tokens").get_to(a.retrieved_tokens);
    j.at("total_tokens").get_to(a.total_tokens);
    j.at("retrieval_calls").get_to(a.retrieval_calls);
    j.at("content_per_retrieval").get_to(a.content_per_retrieval);
}

void to_json(json& j, const QaRecord& q) {
    j = json{{"id", q.id},
             {"question", q.question},
             {"hop", to_string(q.hop)},
             {"answers", q.answers},
             {"golden", q.golden}};
}

void from_json(const json& j, QaRecord& q) {
    q.id = j.value("id", "");
    j.at("question").get_to(q.question);
    q.hop = hop_from_string(j.value("hop", "multi"));
    q.answers = j.value("answers", std::vector<std::string>{});
    q.golden = j.value("golden", std::vector<std::string>{});
}

void to_json(json& j, const SampleRecord& s) {
    j = json{{"question_id", s.question_id},
             {"question", s.question},
             {"hop", to_string(s.hop)},
             {"path", s.path},
             {"rewards", s.rewards}};
}

void from_json(const json& j, SampleRecord& s) {
    j.at("question_id").get_to(s.question_id);
    j.at("question").get_to(s.question);
    s.hop = hop_from_string(j.at("hop").get<std::string>());
    j.at("path").get_to(s.path);
    j.at("rewards").get_to(s.rewards);
}

namespace {

template <typename T>
std::vector<T> read_jsonl(const std::string& path, const char* what) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error(std::string("cannot open ") + what + " file: " + path);
    std::vector<T> out;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        json rec = json::parse(line, nullptr, false);
        if (rec.is_discarded()) {
            throw std::runtime_error(std::string("malformed ") + what + " record at line " +
                                     std::to_string(line_no));
        }
        out.push_back(rec.get<T>());
    }
    return out;
}

}  // namespace

std::vector<QaRecord> read_qa_file(const std::string& path) {
    return read_jsonl<QaRecord>(path, "qa");
}

void write_paths_file(const std::string& path, const std::vector<ReasoningPath>& paths,
                      const Tokenizer& tok) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write paths file: " + path);
    for (const auto& p : paths) {
        json rec = p;
        rec["account"] = account_tokens(p, tok);
        out << rec.dump() << '\n';
    }
}

std::vector<ReasoningPath> read_paths_file(const std::string& path) {
    return read_jsonl<ReasoningPath>(path, "paths");
}

void write_samples_file(const std::string& path, const std::vector<SampleRecord>& samples) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write samples file: " + path);
    for (const auto& s : samples) {
        out << json(s).dump() << '\n';
    }
}

std::vector<SampleRecord> read_samples_file(const std::string& path) {
    return read_jsonl<SampleRecord>(path, "samples");
}

}  // namespace kagpipe
