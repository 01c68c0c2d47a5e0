#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "kagpipe/agent.hpp"
#include "kagpipe/metrics.hpp"
#include "kagpipe/rewards.hpp"

namespace kagpipe {

/// One dataset question: id, text, hop kind, accepted answers, golden
/// evidence. Serves both the run/score inputs and the eval QA file.
struct QaRecord {
    std::string id;
    std::string question;
    HopKind hop = HopKind::multi_hop;
    std::vector<std::string> answers;
    std::vector<std::string> golden;
};

/// A scored sample: the path plus its reward breakdown.
struct SampleRecord {
    std::string question_id;
    std::string question;
    HopKind hop = HopKind::multi_hop;
    ReasoningPath path;
    RewardBreakdown rewards;
};

void to_json(nlohmann::json& j, const ReasoningStep& s);
void from_json(const nlohmann::json& j, ReasoningStep& s);
void to_json(nlohmann::json& j, const ReasoningPath& p);
void from_json(const nlohmann::json& j, ReasoningPath& p);
void to_json(nlohmann::json& j, const RewardBreakdown& r);
void from_json(const nlohmann::json& j, RewardBreakdown& r);
void to_json(nlohmann::json& j, const TokenAccount& a);
void from_json(const nlohmann::json& j, TokenAccount& a);
void to_json(nlohmann::json& j, const QaRecord& q);
void from_json(const nlohmann::json& j, QaRecord& q);
void to_json(nlohmann::json& j, const SampleRecord& s);
void from_json(const nlohmann::json& j, SampleRecord& s);

std::vector<QaRecord> read_qa_file(const std::string& path);

/// Path record file: one JSON object per line with the question, transcript,
/// structured steps, answer, and token accounting.
void write_paths_file(const std::string& path, const std::vector<ReasoningPath>& paths,
                      const Tokenizer& tok = whitespace_tokenizer());
std::vector<ReasoningPath> read_paths_file(const std::string& path);

void write_samples_file(const std::string& path, const std::vector<SampleRecord>& samples);
std::vector<SampleRecord> read_samples_file(const std::string& path);

}  // namespace kagpipe
