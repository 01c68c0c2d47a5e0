#include "kagpipe/pairs.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <random>

namespace kagpipe {

using nlohmann::json;

std::string to_string(RejectionKind k) {
    switch (k) {
        case RejectionKind::format: return "format";
        case RejectionKind::easy: return "easy";
        case RejectionKind::hard: return "hard";
    }
    return "format";
}

RejectionKind rejection_from_string(const std::string& s) {
    if (s == "format") return RejectionKind::format;
    if (s == "easy") return RejectionKind::easy;
    if (s == "hard") return RejectionKind::hard;
    throw std::invalid_argument("unknown rejection kind: " + s);
}

std::vector<MaskSpan> compute_mask_spans(const std::string& transcript) {
    try {
        std::vector<MaskSpan> spans;
        for (const auto& [b, e] : reference_spans(transcript)) spans.push_back({b, e});
        return spans;
    } catch (const std::invalid_argument& e) {
        throw MalformedTranscriptError(e.what());
    }
}

bool is_chosen(const SampleRecord& sample) {
    const auto& r = sample.rewards;
    if (r.r_format != 1.0) return false;
    if (sample.hop == HopKind::single_hop) {
        // r_outcome is the scaled value here, so = 1 forces a one-step path.
        return r.r_outcome == 1.0;
    }
    return (r.r_outcome == 1.0 && r.r_process >= 0.7) ||
           (r.r_outcome >= 0.8 && r.r_process >= 0.8);
}

std::vector<const SampleRecord*> select_chosen(const std::vector<SampleRecord>& samples) {
    std::vector<const SampleRecord*> out;
    for (const auto& s : samples) {
        if (is_chosen(s)) out.push_back(&s);
    }
    std::sort(out.begin(), out.end(), [](const SampleRecord* a, const SampleRecord* b) {
        if (a->rewards.total != b->rewards.total) return a->rewards.total > b->rewards.total;
        return a->path.id < b->path.id;
    });
    return out;
}

std::vector<const SampleRecord*> ranked_candidates(const std::vector<SampleRecord>& samples) {
    std::vector<const SampleRecord*> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back(&s);
    std::sort(out.begin(), out.end(), [](const SampleRecord* a, const SampleRecord* b) {
        if (a->rewards.total != b->rewards.total) return a->rewards.total < b->rewards.total;
        return a->path.id < b->path.id;
    });
    return out;
}

std::optional<std::pair<const SampleRecord*, RejectionKind>> match_rejected(
    const SampleRecord& chosen, const std::vector<const SampleRecord*>& ranked, size_t& cursor) {
    const auto& plus = chosen.rewards;
    for (; cursor < ranked.size(); ++cursor) {
        const SampleRecord* cand = ranked[cursor];
        const auto& minus = cand->rewards;
        std::optional<RejectionKind> kind;
        if (minus.r_format == 0.0) {
            kind = RejectionKind::format;
        } else if (minus.r_outcome <= 0.3) {
            kind = RejectionKind::easy;
        } else if (chosen.hop == HopKind::multi_hop && minus.r_outcome <= plus.r_outcome - 0.3 &&
                   minus.r_process <= plus.r_process) {
            kind = RejectionKind::hard;
        }
        if (kind) {
            ++cursor;  // never reuse a rejected sample
            return std::make_pair(cand, *kind);
        }
    }
    return std::nullopt;
}

namespace {

std::vector<MaskSpan> masks_or_empty(const std::string& transcript) {
    try {
        return compute_mask_spans(transcript);
    } catch (const MalformedTranscriptError&) {
        return {};  // malformed rejected transcripts carry no mask spans
    }
}

RewardTriple triple_of(const RewardBreakdown& r) {
    return {r.r_format, r.r_outcome, r.r_process};
}

}  // namespace

std::vector<PreferencePair> build_pairs(const std::vector<SampleRecord>& samples,
                                        const std::string& instruction) {
    // Group by question id, keeping first-seen order for determinism.
    std::vector<std::string> order;
    std::map<std::string, std::vector<SampleRecord>> groups;
    for (const auto& s : samples) {
        auto [it, inserted] = groups.try_emplace(s.question_id);
        if (inserted) order.push_back(s.question_id);
        it->second.push_back(s);
    }

    std::vector<PreferencePair> pairs;
    for (const auto& qid : order) {
        const auto& group = groups[qid];
        auto chosen_set = select_chosen(group);
        if (chosen_set.empty()) continue;
        auto ranked = ranked_candidates(group);
        size_t cursor = 0;
        for (const SampleRecord* chosen : chosen_set) {
            auto match = match_rejected(*chosen, ranked, cursor);
            if (!match) break;  // cursor exhausted
            const auto& [rejected, kind] = *match;

            PreferencePair pair;
            pair.instruction = instruction;
            pair.question = chosen->question;
            pair.question_id = qid;
            pair.chosen_id = chosen->path.id;
            pair.rejected_id = rejected->path.id;
            pair.chosen = chosen->path.transcript;
            pair.rejected = rejected->path.transcript;
            pair.chosen_masks = masks_or_empty(pair.chosen);
            pair.rejected_masks = masks_or_empty(pair.rejected);
            pair.rejection_kind = kind;
            pair.chosen_rewards = triple_of(chosen->rewards);
            pair.rejected_rewards = triple_of(rejected->rewards);
            pairs.push_back(std::move(pair));
        }
    }
    return pairs;
}

namespace {

json mask_to_json(const std::vector<MaskSpan>& spans) {
    json arr = json::array();
    for (const auto& s : spans) arr.push_back(json::array({s.begin, s.end}));
    return arr;
}

std::vector<MaskSpan> mask_from_json(const json& arr) {
    std::vector<MaskSpan> out;
    for (const auto& s : arr) out.push_back({s.at(0).get<size_t>(), s.at(1).get<size_t>()});
    return out;
}

json triple_to_json(const RewardTriple& t) {
    return json{{"format", t.format}, {"outcome", t.outcome}, {"process", t.process}};
}

RewardTriple triple_from_json(const json& j) {
    return {j.at("format").get<double>(), j.at("outcome").get<double>(),
            j.at("process").get<double>()};
}

}  // namespace

void write_pairs_file(const std::string& path, const std::vector<PreferencePair>& pairs) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write pairs file: " + path);
    for (const auto& p : pairs) {
        json rec{{"instruction", p.instruction},
                 {"question", p.question},
                 {"question_id", p.question_id},
                 {"chosen_id", p.chosen_id},
                 {"rejected_id", p.rejected_id},
                 {"chosen", p.chosen},
                 {"rejected", p.rejected},
                 {"chosen_mask_spans", mask_to_json(p.chosen_masks)},
                 {"rejected_mask_spans", mask_to_json(p.rejected_masks)},
                 {"rejection_kind", to_string(p.rejection_kind)},
                 {"chosen_rewards", triple_to_json(p.chosen_rewards)},
                 {"rejected_rewards", triple_to_json(p.rejected_rewards)}};
        out << rec.dump() << '\n';
    }
}

std::vector<PreferencePair> read_pairs_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open pairs file: " + path);
    std::vector<PreferencePair> out;
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        json rec = json::parse(line);
        PreferencePair p;
        p.instruction = rec.at("instruction").get<std::string>();
        p.question = rec.at("question").get<std::string>();
        p.question_id = rec.at("question_id").get<std::string>();
        p.chosen_id = rec.at("chosen_id").get<std::string>();
        p.rejected_id = rec.at("rejected_id").get<std::string>();
        p.chosen = rec.at("chosen").get<std::string>();
        p.rejected = rec.at("rejected").get<std::string>();
        p.chosen_masks = mask_from_json(rec.at("chosen_mask_spans"));
        p.rejected_masks = mask_from_json(rec.at("rejected_mask_spans"));
        p.rejection_kind = rejection_from_string(rec.at("rejection_kind").get<std::string>());
        p.chosen_rewards = triple_from_json(rec.at("chosen_rewards"));
        p.rejected_rewards = triple_from_json(rec.at("rejected_rewards"));
        out.push_back(std::move(p));
    }
    return out;
}

// ---------------------------------------------------------------------------
// SFT assembly.

namespace {

// Summary templates: supporting triplets first, sub-answer second.
std::string summary_from_template(size_t idx, const std::string& triplets,
                                  const std::string& answer) {
    switch (idx % 3) {
        case 0: return "The fact " + triplets + " logically implies the answer: " + answer + ".";
        case 1: return "Supporting triplets: " + triplets + ". Therefore the answer is " + answer + ".";
        default: return "Key facts: " + triplets + ". This gives the answer: " + answer + ".";
    }
}

}  // namespace

SftOutput build_sft_record(const SftDecomposition& decomp, uint64_t seed) {
    if (decomp.hops.empty()) {
        throw std::invalid_argument("sft decomposition has no hops");
    }
    for (const auto& hop : decomp.hops) {
        if (hop.paragraphs.empty() || hop.triplets.empty()) {
            throw std::invalid_argument(
                "every sft hop needs at least one paragraph and one triplet");
        }
    }

    // One generator drives the whole record: per hop, one draw per triplet
    // insertion position, then one draw for the summary template.
    std::mt19937_64 rng(seed);

    ReasoningPath path;
    path.question = decomp.question;
    for (size_t h = 0; h < decomp.hops.size(); ++h) {
        const auto& hop = decomp.hops[h];
        ReasoningStep step;
        step.index = static_cast<int>(h) + 1;

        std::vector<std::string> seen;
        for (const auto& t : hop.triplets) {
            for (const auto& entity : {t.head, t.tail}) {
                std::string norm = normalize_entity(entity);
                if (std::find(seen.begin(), seen.end(), norm) == seen.end()) {
                    seen.push_back(norm);
                    step.key_entities.push_back(trim(entity));
                }
            }
        }
        step.subquery = hop.subquery;

        std::vector<std::string> items;
        for (const auto& p : hop.paragraphs) {
            items.push_back("Title: \"" + p.title + "\" Text: " + p.text);
        }
        for (const auto& t : hop.triplets) {
            size_t pos = rng() % (items.size() + 1);
            items.insert(items.begin() + static_cast<std::ptrdiff_t>(pos), t.render_context());
        }
        step.context = std::move(items);
        step.has_reference = true;

        std::string rendered_triplets;
        for (size_t i = 0; i < hop.triplets.size(); ++i) {
            if (i > 0) rendered_triplets += "; ";
            rendered_triplets += hop.triplets[i].render_plain();
        }
        step.summary = summary_from_template(rng() % 3, rendered_triplets, hop.answer);

        path.steps.push_back(std::move(step));
    }
    path.final_answer = decomp.answer;
    path.terminated_by = TerminatedBy::answer;

    SftOutput out;
    out.transcript = render_transcript(path);
    out.mask_spans = compute_mask_spans(out.transcript);
    return out;
}

std::vector<SftDecomposition> read_decomposition_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open decomposition file: " + path);
    std::vector<SftDecomposition> out;
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        json rec = json::parse(line);
        SftDecomposition d;
        d.question = rec.at("question").get<std::string>();
        d.answer = rec.at("answer").get<std::string>();
        for (const auto& hop_json : rec.at("hops")) {
            SftHop hop;
            hop.subquery = hop_json.at("subquery").get<std::string>();
            hop.answer = hop_json.at("answer").get<std::string>();
            for (const auto& p : hop_json.at("paragraphs")) {
                hop.paragraphs.push_back(
                    {p.at("title").get<std::string>(), p.at("text").get<std::string>()});
            }
            for (const auto& t : hop_json.at("triplets")) {
                hop.triplets.push_back(Triplet{t.at(0).get<std::string>(),
                                               t.at(1).get<std::string>(),
                                               t.at(2).get<std::string>(), std::nullopt});
            }
            d.hops.push_back(std::move(hop));
        }
        out.push_back(std::move(d));
    }
    return out;
}

void write_sft_file(const std::string& path, const std::vector<SftDecomposition>& decomps,
                    uint64_t seed) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write sft file: " + path);
    for (size_t i = 0; i < decomps.size(); ++i) {
        auto built = build_sft_record(decomps[i], seed + i);
        json rec{{"question", decomps[i].question},
                 {"answer", decomps[i].answer},
                 {"transcript", built.transcript},
                 {"mask_spans", mask_to_json(built.mask_spans)}};
        out << rec.dump() << '\n';
    }
}

}  // namespace kagpipe
