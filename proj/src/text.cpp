#include "kagpipe/text.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <unordered_set>

namespace kagpipe {

namespace {

bool is_space(char c) {
    return std::isspace(static_cast<unsigned char>(c)) != 0;
}

bool is_punct(char c) {
    return std::ispunct(static_cast<unsigned char>(c)) != 0;
}

char lower(char c) {
    return static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
}

template <typename Fn>
void for_each_whitespace_token(std::string_view text, Fn&& fn) {
    size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && is_space(text[i])) ++i;
        size_t start = i;
        while (i < text.size() && !is_space(text[i])) ++i;
        if (i > start) fn(text.substr(start, i - start));
    }
}

}  // namespace

std::vector<std::string> lex_tokens(std::string_view text) {
    std::vector<std::string> out;
    for_each_whitespace_token(text, [&](std::string_view raw) {
        size_t b = 0;
        size_t e = raw.size();
        while (b < e && is_punct(raw[b])) ++b;
        while (e > b && is_punct(raw[e - 1])) --e;
        if (b == e) return;
        std::string tok;
        tok.reserve(e - b);
        for (size_t i = b; i < e; ++i) tok.push_back(lower(raw[i]));
        out.push_back(std::move(tok));
    });
    return out;
}

std::vector<std::string> qa_tokens(std::string_view text) {
    static const std::unordered_set<std::string> articles = {"a", "an", "the"};
    std::string scrubbed;
    scrubbed.reserve(text.size());
    for (char c : text) {
        if (is_punct(c)) {
            scrubbed.push_back(' ');
        } else {
            scrubbed.push_back(lower(c));
        }
    }
    std::vector<std::string> out;
    for_each_whitespace_token(scrubbed, [&](std::string_view tok) {
        std::string t(tok);
        if (!articles.contains(t)) out.push_back(std::move(t));
    });
    return out;
}

std::string normalize_answer(std::string_view text) {
    std::string out;
    for (const auto& tok : qa_tokens(text)) {
        if (!out.empty()) out.push_back(' ');
        out += tok;
    }
    return out;
}

std::string normalize_entity(std::string_view name) {
    std::string out;
    for_each_whitespace_token(name, [&](std::string_view tok) {
        if (!out.empty()) out.push_back(' ');
        for (char c : tok) out.push_back(lower(c));
    });
    return out;
}

std::string trim(std::string_view s) {
    size_t b = 0;
    size_t e = s.size();
    while (b < e && is_space(s[b])) ++b;
    while (e > b && is_space(s[e - 1])) --e;
    return std::string(s.substr(b, e - b));
}

std::vector<std::string> split_lines(std::string_view text) {
    std::vector<std::string> lines;
    size_t start = 0;
    for (size_t i = 0; i <= text.size(); ++i) {
        if (i == text.size() || text[i] == '\n') {
            std::string_view line = text.substr(start, i - start);
            if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
            lines.emplace_back(line);
            start = i + 1;
        }
    }
    return lines;
}

double sigmoid(double x) {
    return 1.0 / (1.0 + std::exp(-x));
}

double jaccard_logit(std::string_view a, std::string_view b) {
    auto ta = lex_tokens(a);
    auto tb = lex_tokens(b);
    std::unordered_set<std::string> sa(ta.begin(), ta.end());
    std::unordered_set<std::string> sb(tb.begin(), tb.end());
    size_t inter = 0;
    for (const auto& t : sa) {
        if (sb.contains(t)) ++inter;
    }
    size_t uni = sa.size() + sb.size() - inter;
    double j = uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
    constexpr double kClamp = 10.0;
    if (j <= 0.0) return -kClamp;
    if (j >= 1.0) return kClamp;
    double logit = std::log(j / (1.0 - j));
    return std::clamp(logit, -kClamp, kClamp);
}

int WhitespaceTokenizer::count(std::string_view text) const {
    int n = 0;
    for_each_whitespace_token(text, [&](std::string_view) { ++n; });
    return n;
}

const Tokenizer& whitespace_tokenizer() {
    static const WhitespaceTokenizer tok;
    return tok;
}

}  // namespace kagpipe
