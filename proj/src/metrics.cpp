#include "kagpipe/metrics.hpp"

#include <algorithm>
#include <map>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "kagpipe/records.hpp"
#include "kagpipe/rewards.hpp"

namespace kagpipe {

int exact_match(const std::string& answer, const std::vector<std::string>& ground_truths) {
    if (ground_truths.empty()) throw std::invalid_argument("exact_match: no ground truths");
    std::string a = normalize_answer(answer);
    for (const auto& gt : ground_truths) {
        if (a == normalize_answer(gt)) return 1;
    }
    return 0;
}

double f1_metric(const std::string& answer, const std::vector<std::string>& ground_truths) {
    if (ground_truths.empty()) throw std::invalid_argument("f1_metric: no ground truths");
    double best = 0.0;
    for (const auto& gt : ground_truths) {
        best = std::max(best, outcome_reward(answer, gt));
    }
    return best;
}

TokenAccount account_tokens(const std::string& transcript, const Tokenizer& tok) {
    auto spans = reference_spans(transcript);  // throws on malformed blocks

    TokenAccount account;
    account.retrieval_calls = static_cast<int>(spans.size());
    const size_t open_len = std::string(kReferenceOpen).size();
    const size_t close_len = std::string(kReferenceClose).size();

    size_t cursor = 0;
    for (const auto& [b, e] : spans) {
        account.thinking_tokens += tok.count(
            std::string_view(transcript).substr(cursor, b - open_len - cursor));
        account.retrieved_tokens += tok.count(std::string_view(transcript).substr(b, e - b));
        cursor = e + close_len;
    }
    account.thinking_tokens += tok.count(std::string_view(transcript).substr(cursor));

    account.total_tokens = account.thinking_tokens + account.retrieved_tokens;
    account.content_per_retrieval =
        account.retrieval_calls == 0
            ? 0.0
            : static_cast<double>(account.retrieved_tokens) / account.retrieval_calls;
    return account;
}

TokenAccount account_tokens(const ReasoningPath& path, const Tokenizer& tok) {
    return account_tokens(path.transcript, tok);
}

BatchReport report(const std::vector<ReasoningPath>& paths, const std::vector<QaRecord>& qa,
                   const Tokenizer& tok) {
    BatchReport rep;
    rep.paths = paths.size();
    if (paths.empty()) return rep;

    std::unordered_map<std::string, const QaRecord*> by_question;
    for (const auto& rec : qa) by_question.emplace(rec.question, &rec);

    std::map<int, size_t> hist;
    double em_sum = 0.0;
    double f1_sum = 0.0;
    double steps_sum = 0.0;
    double think_sum = 0.0;
    double retr_sum = 0.0;
    double total_sum = 0.0;
    double cpr_sum = 0.0;
    for (const auto& path : paths) {
        steps_sum += static_cast<double>(path.step_count());
        ++hist[static_cast<int>(path.step_count())];

        TokenAccount account = account_tokens(path, tok);
        think_sum += static_cast<double>(account.thinking_tokens);
        retr_sum += static_cast<double>(account.retrieved_tokens);
        total_sum += static_cast<double>(account.total_tokens);
        cpr_sum += account.content_per_retrieval;

        auto it = by_question.find(path.question);
        if (it != by_question.end() && !it->second->answers.empty()) {
            ++rep.scored;
            em_sum += exact_match(path.final_answer.value_or(""), it->second->answers);
            f1_sum += f1_metric(path.final_answer.value_or(""), it->second->answers);
        }
    }

    auto n = static_cast<double>(paths.size());
    rep.em = rep.scored ? em_sum / static_cast<double>(rep.scored) : 0.0;
    rep.f1 = rep.scored ? f1_sum / static_cast<double>(rep.scored) : 0.0;
    rep.avg_steps = steps_sum / n;
    rep.avg_thinking_tokens = think_sum / n;
    rep.avg_retrieved_tokens = retr_sum / n;
    rep.avg_total_tokens = total_sum / n;
    rep.avg_content_per_retrieval = cpr_sum / n;
    for (const auto& [k, count] : hist) {
        rep.step_histogram.emplace_back(k, static_cast<double>(count) / n);
    }
    return rep;
}

std::string BatchReport::to_text() const {
    std::ostringstream out;
    out << "paths:                  " << paths << "\n";
    out << "scored:                 " << scored << "\n";
    out << "exact match:            " << em << "\n";
    out << "f1:                     " << f1 << "\n";
    out << "avg steps:              " << avg_steps << "\n";
    out << "step histogram:";
    if (step_histogram.empty()) out << "         (empty)";
    out << "\n";
    for (const auto& [k, frac] : step_histogram) {
        out << "  " << k << " steps: " << frac << "\n";
    }
    out << "avg thinking tokens:    " << avg_thinking_tokens << "\n";
    out << "avg retrieved tokens:   " << avg_retrieved_tokens << "\n";
    out << "avg total tokens:       " << avg_total_tokens << "\n";
    out << "avg content/retrieval:  " << avg_content_per_retrieval << "\n";
    return out.str();
}

}  // namespace kagpipe
