#include "kagpipe/rewards.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>

namespace kagpipe {

std::string to_string(HopKind h) {
    return h == HopKind::single_hop ? "single" : "multi";
}

HopKind hop_from_string(const std::string& s) {
    if (s == "single") return HopKind::single_hop;
    if (s == "multi") return HopKind::multi_hop;
    throw std::invalid_argument("unknown hop kind: " + s);
}

double outcome_reward(const std::string& answer, const std::string& ground_truth) {
    auto a = qa_tokens(answer);
    auto gt = qa_tokens(ground_truth);
    if (a.empty() || gt.empty()) return 0.0;

    std::map<std::string, int> counts;
    for (const auto& t : a) ++counts[t];
    int overlap = 0;
    for (const auto& t : gt) {
        auto it = counts.find(t);
        if (it != counts.end() && it->second > 0) {
            --it->second;
            ++overlap;
        }
    }
    return 2.0 * static_cast<double>(overlap) /
           static_cast<double>(a.size() + gt.size());
}

double format_reward(const ReasoningPath& path) {
    if (!path.violations.empty()) return 0.0;
    if (path.terminated_by != TerminatedBy::answer || !path.final_answer) return 0.0;
    for (const auto& step : path.steps) {
        if (!step.has_reference) return 0.0;
    }
    // The transcript itself must carry properly matched blocks, one per step,
    // and an exact final-answer line.
    try {
        auto spans = reference_spans(path.transcript);
        if (spans.size() != path.steps.size()) return 0.0;
    } catch (const std::invalid_argument&) {
        return 0.0;
    }
    if (path.transcript.find(kFinalAnswerPrefix) == std::string::npos) return 0.0;
    return 1.0;
}

double consistency_reward(const ReasoningPath& path) {
    if (path.steps.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& step : path.steps) {
        std::string subquery = normalize_entity(step.subquery);
        bool covered = true;
        for (const auto& entity : step.key_entities) {
            if (subquery.find(normalize_entity(entity)) == std::string::npos) {
                covered = false;
                break;
            }
        }
        if (covered) sum += 1.0;
    }
    return sum / static_cast<double>(path.steps.size());
}

MemoryVectors memory_vectors(const ReasoningPath& path, const GoldenEvidence& golden,
                             TextScorer& scorer) {
    MemoryVectors mem;
    size_t l = golden.size();
    mem.q.assign(l, 0.0);
    mem.c.assign(l, 0.0);
    mem.s.assign(l, 0.0);
    if (l == 0 || path.steps.empty()) return mem;

    for (size_t t = 0; t < l; ++t) {
        const auto& evidence = golden.items[t];
        for (const auto& step : path.steps) {
            std::vector<std::string> candidates;
            candidates.push_back(step.subquery);
            auto q_scores = scorer.score(evidence, candidates);
            mem.q[t] = std::max(mem.q[t], sigmoid(q_scores.at(0)));

            if (!step.context.empty()) {
                auto c_scores = scorer.score(evidence, step.context);
                for (double s : c_scores) mem.c[t] = std::max(mem.c[t], sigmoid(s));
            }

            candidates[0] = step.summary;
            auto s_scores = scorer.score(evidence, candidates);
            mem.s[t] = std::max(mem.s[t], sigmoid(s_scores.at(0)));
        }
    }
    return mem;
}

namespace {

double capped_mean(const std::vector<double>& memory, size_t k) {
    if (k == 0) return 0.0;
    double sum = 0.0;
    for (double m : memory) sum += m;
    // Eq. divides the summed memory by k; with more evidence than steps that
    // can exceed 1, so cap to keep every component a true [0, 1] score.
    return std::min(1.0, sum / static_cast<double>(k));
}

}  // namespace

RewardBreakdown score_path(const ReasoningPath& path, const GoldenEvidence& golden,
                           const std::string& ground_truth, TextScorer& scorer, HopKind hop) {
    RewardBreakdown r;
    r.r_outcome = outcome_reward(path.final_answer.value_or(""), ground_truth);
    r.r_format = format_reward(path);
    size_t k = path.steps.size();

    if (hop == HopKind::single_hop) {
        r.r_outcome /= static_cast<double>(std::max<size_t>(k, 1));
        r.r_process = 0.0;
    } else {
        r.r_consistency = consistency_reward(path);
        auto mem = memory_vectors(path, golden, scorer);
        r.memory_q = mem.q;
        r.memory_c = mem.c;
        r.memory_s = mem.s;
        r.r_q = capped_mean(mem.q, k);
        r.r_c = capped_mean(mem.c, k);
        r.r_s = capped_mean(mem.s, k);
        // Term-by-term, so four perfect components give exactly 1.0.
        r.r_process = 0.1 * r.r_consistency + 0.3 * r.r_q + 0.3 * r.r_c + 0.3 * r.r_s;
    }
    r.total = r.r_format + r.r_outcome + r.r_process;
    return r;
}

}  // namespace kagpipe
