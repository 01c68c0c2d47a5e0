#include "kagpipe/extract.hpp"

#include <algorithm>
#include <cctype>

#include "kagpipe/endpoint.hpp"

namespace kagpipe {

namespace {

std::vector<std::string> split_sentences(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : text) {
        cur.push_back(c);
        if (c == '.' || c == '!' || c == '?') {
            std::string s = trim(cur);
            if (!s.empty()) out.push_back(std::move(s));
            cur.clear();
        }
    }
    std::string rest = trim(cur);
    if (!rest.empty()) out.push_back(std::move(rest));
    return out;
}

std::string strip_terminal_punct(std::string s) {
    while (!s.empty() && (s.back() == '.' || s.back() == '!' || s.back() == '?' ||
                          s.back() == ',' || s.back() == ';')) {
        s.pop_back();
    }
    return trim(s);
}

// Trailing auxiliaries bleed into the subject when the verb phrase matches
// mid-predicate ("X was born in Y" -> subject "X was"); drop them.
std::string strip_trailing_auxiliary(std::string s) {
    static const std::vector<std::string> aux = {"was", "is", "were", "are", "has", "had"};
    for (const auto& a : aux) {
        if (s.size() > a.size() + 1) {
            size_t pos = s.size() - a.size();
            std::string norm = normalize_entity(s.substr(pos));
            if (s[pos - 1] == ' ' && norm == a) {
                return trim(s.substr(0, pos - 1));
            }
        }
    }
    return s;
}

// First verb phrase (longest first) found in the sentence at a token
// boundary; returns (position, phrase) or npos.
std::pair<size_t, const std::string*> find_verb_phrase(const std::string& sentence) {
    std::string lowered;
    lowered.reserve(sentence.size());
    for (char c : sentence) lowered.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));

    size_t best_pos = std::string::npos;
    const std::string* best = nullptr;
    for (const auto& phrase : RuleBasedExtractor::verb_phrases()) {
        size_t pos = lowered.find(phrase);
        while (pos != std::string::npos) {
            bool left_ok = pos == 0 || lowered[pos - 1] == ' ';
            size_t end = pos + phrase.size();
            bool right_ok = end == lowered.size() || lowered[end] == ' ';
            if (left_ok && right_ok) break;
            pos = lowered.find(phrase, pos + 1);
        }
        if (pos == std::string::npos) continue;
        if (best_pos == std::string::npos || pos < best_pos ||
            (pos == best_pos && phrase.size() > best->size())) {
            best_pos = pos;
            best = &phrase;
        }
    }
    return {best_pos, best};
}

bool is_pronoun_subject(const std::string& subject) {
    static const std::vector<std::string> pronouns = {"he", "she", "it",   "they",
                                                      "we", "i",   "this", "that"};
    std::string norm = normalize_entity(subject);
    return std::find(pronouns.begin(), pronouns.end(), norm) != pronouns.end();
}

void apply_verb_rule(const std::string& sentence, std::vector<Triplet>& out) {
    auto [pos, phrase] = find_verb_phrase(sentence);
    if (pos == std::string::npos || pos == 0) return;
    std::string subject = strip_trailing_auxiliary(trim(sentence.substr(0, pos)));
    std::string object = strip_terminal_punct(trim(sentence.substr(pos + phrase->size())));
    if (subject.empty() || object.empty() || is_pronoun_subject(subject)) return;
    out.push_back(Triplet{subject, *phrase, object, std::nullopt});
}

}  // namespace

const std::vector<std::string>& RuleBasedExtractor::verb_phrases() {
    // Longest phrases first so "was the father of" wins over "father of".
    static const std::vector<std::string> phrases = {
        "was the father of", "was the son of", "is the capital of", "was married to",
        "is located in",     "was born in",    "worked at",         "lived in",
        "died in",           "born in",        "founded",           "wrote",
        "directed",
    };
    return phrases;
}

ExtractionOutcome RuleBasedExtractor::extract(const Chunk& chunk) {
    ExtractionOutcome outcome;
    for (const auto& sentence : split_sentences(chunk.text)) {
        // Appositive rule: "Subject (predicate ...) rest". The parenthetical
        // is matched against the verb list with the leading subject, then
        // removed before the main-clause pass.
        std::string remainder = sentence;
        size_t open = sentence.find('(');
        size_t close = open == std::string::npos ? std::string::npos : sentence.find(')', open);
        if (open != std::string::npos && close != std::string::npos && open > 0) {
            std::string subject = trim(sentence.substr(0, open));
            std::string inner = trim(sentence.substr(open + 1, close - open - 1));
            if (!subject.empty() && !inner.empty()) {
                apply_verb_rule(subject + " " + inner, outcome.triplets);
            }
            remainder = trim(sentence.substr(0, open)) + " " + trim(sentence.substr(close + 1));
        }
        apply_verb_rule(remainder, outcome.triplets);
    }
    return outcome;
}

ExtractionOutcome EndpointExtractor::extract(const Chunk& chunk) {
    GenerationRequest req;
    req.prompt =
        "Extract knowledge triplets from the passage below. Respond with one "
        "triplet per line in the form: head | relation | tail\n\nTitle: " +
        chunk.title + "\nPassage: " + chunk.text + "\n";
    std::string text;
    try {
        text = client_.generate(req);
    } catch (const std::exception& e) {
        throw ExtractionError(chunk.id, e.what());
    }

    ExtractionOutcome outcome;
    for (const auto& line : split_lines(text)) {
        std::string s = trim(line);
        if (s.empty()) continue;
        size_t p1 = s.find('|');
        size_t p2 = p1 == std::string::npos ? std::string::npos : s.find('|', p1 + 1);
        if (p2 == std::string::npos || s.find('|', p2 + 1) != std::string::npos) {
            ++outcome.warnings;
            continue;
        }
        Triplet t;
        t.head = trim(s.substr(0, p1));
        t.relation = trim(s.substr(p1 + 1, p2 - p1 - 1));
        t.tail = trim(s.substr(p2 + 1));
        if (t.head.empty() || t.relation.empty() || t.tail.empty()) {
            ++outcome.warnings;
            continue;
        }
        outcome.triplets.push_back(std::move(t));
    }
    return outcome;
}

std::vector<Triplet> extract_triplets(const Chunk& chunk, ExtractionClient& extractor,
                                      KnowledgeGraphIndex& kg, int* warnings) {
    ExtractionOutcome outcome;
    try {
        outcome = extractor.extract(chunk);
    } catch (const ExtractionError&) {
        throw;
    } catch (const std::exception& e) {
        throw ExtractionError(chunk.id, e.what());
    }
    if (warnings) *warnings += outcome.warnings;

    std::vector<Triplet> added;
    for (auto& t : outcome.triplets) {
        t.source_chunk_id = chunk.id;
        if (kg.add_triplet(t)) added.push_back(std::move(t));
    }
    return added;
}

}  // namespace kagpipe
