#pragma once

#include <string>
#include <vector>

#include "kagpipe/agent.hpp"
#include "kagpipe/retrieval.hpp"

namespace kagpipe {

struct GoldenEvidence {
    std::vector<std::string> items;  // g_1 .. g_l
    size_t size() const { return items.size(); }
};

enum class HopKind { single_hop, multi_hop };

std::string to_string(HopKind h);
HopKind hop_from_string(const std::string& s);

struct RewardBreakdown {
    double r_outcome = 0.0;
    double r_format = 0.0;
    double r_consistency = 0.0;
    double r_q = 0.0;
    double r_c = 0.0;
    double r_s = 0.0;
    double r_process = 0.0;
    double total = 0.0;  // r_format + r_outcome + r_process, the pair-ranking key
    std::vector<double> memory_q;
    std::vector<double> memory_c;
    std::vector<double> memory_s;
};

/// Bag-of-words F1 between answer and ground truth over QA-normalized tokens
/// (multiset intersection). 0 when either side normalizes to nothing.
double outcome_reward(const std::string& answer, const std::string& ground_truth);

/// 1 iff every step parsed clean, every step carries a reference block, and
/// the path ended on an exact `Final answer: ` line; else 0.
double format_reward(const ReasoningPath& path);

/// Mean over steps of the cover-exact-match bit: 1 when every key entity of
/// the step occurs (case-insensitive, whitespace-normalized substring) in
/// its subquery. 0 for an empty path.
double consistency_reward(const ReasoningPath& path);

struct MemoryVectors {
    std::vector<double> q;
    std::vector<double> c;
    std::vector<double> s;
};

/// Per evidence item, the maximum sigmoid-normalized similarity reached by
/// any subquery / context item / summary in the path. The scorer is called
/// as (evidence, candidate); symmetry is not assumed. Empty maxima are 0.
MemoryVectors memory_vectors(const ReasoningPath& path, const GoldenEvidence& golden,
                             TextScorer& scorer);

/// Full scoring pass. Multi-hop applies the process reward
///   0.1 * consistency + 0.3 * r_q + 0.3 * r_c + 0.3 * r_s
/// with each knowledge-matching term capped at 1 so every component stays in
/// [0, 1]. Single-hop zeroes the process reward and divides the outcome
/// reward by the step count (floored at 1).
RewardBreakdown score_path(const ReasoningPath& path, const GoldenEvidence& golden,
                           const std::string& ground_truth, TextScorer& scorer, HopKind hop);

}  // namespace kagpipe
