#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <regex>
#include <set>
#include <string>
#include <vector>

#include "ccref/common.hpp"

namespace ccref {

// One national scheme's identifier grammar. Patterns are data, loaded from a
// versioned pattern file; they tolerate the whitespace and soft hyphens that
// PDF line wrapping injects into certificate ids.
struct IdScheme {
    std::string scheme_tag;
    std::vector<std::string> pattern_sources;
    std::string canonicalizer = "standard";
    std::vector<std::regex> compiled;

    void compile() {
        compiled.clear();
        for (const std::string& src : pattern_sources) {
            try {
                compiled.emplace_back(src, std::regex::ECMAScript | std::regex::icase |
                                               std::regex::optimize);
            } catch (const std::regex_error& e) {
                throw InputError("scheme " + scheme_tag + ": bad pattern '" + src +
                                 "': " + e.what());
            }
        }
    }
};

struct Span {
    size_t begin = 0;
    size_t end = 0;  // half-open
};

struct IdMatch {
    std::string raw;
    std::string canonical;
    Span span;
    std::string scheme_tag;
};

enum class SourceDoc { Report, Target };

inline std::string to_string(SourceDoc d) { return d == SourceDoc::Report ? "report" : "target"; }

// The matched sentence plus its context window, the classifier's evidence unit.
struct ReferenceSegment {
    std::string text;
    size_t sentence_index = 0;
    IdMatch match;
    SourceDoc source_doc = SourceDoc::Report;
};

// Uppercase, soft hyphens dropped, separator runs collapsed to a single "-".
// "/" (and "_", its OCR twin) survives as the in-id separator some schemes
// use. Version and year suffixes are kept: distinct versions are distinct
// certificates.
inline std::string canonicalize_id(const std::string& raw) {
    std::string out;
    out.reserve(raw.size());
    bool pending_sep = false;
    for (size_t i = 0; i < raw.size(); ++i) {
        unsigned char c = static_cast<unsigned char>(raw[i]);
        if (c == 0xC2 && i + 1 < raw.size() &&
            static_cast<unsigned char>(raw[i + 1]) == 0xAD) {  // soft hyphen
            pending_sep = true;
            ++i;
            continue;
        }
        if (c == '-' || c == 0xAD || std::isspace(c)) {
            pending_sep = true;
            continue;
        }
        if (c == '/' || c == '_') {
            if (!out.empty() && out.back() != '/' && out.back() != '-') out.push_back('/');
            pending_sep = false;
            continue;
        }
        if (pending_sep && !out.empty() && out.back() != '/' && out.back() != '-')
            out.push_back('-');
        pending_sep = false;
        out.push_back(static_cast<char>(std::toupper(c)));
    }
    return out;
}

inline std::string canonicalize_id(const std::string& raw, const IdScheme& scheme) {
    if (scheme.canonicalizer != "standard")
        throw InputError("unknown canonicalizer '" + scheme.canonicalizer + "'");
    return canonicalize_id(raw);
}

namespace detail {

inline bool is_word_byte(unsigned char c) { return std::isalnum(c) != 0; }

struct Candidate {
    Span span;
    size_t scheme_idx;
    size_t pattern_idx;
};

}  // namespace detail

// All non-overlapping identifier matches, left to right, longest match wins.
// Matches embedded in a longer alphanumeric token are rejected. Matches whose
// canonical form equals self_id are dropped (no self-loops).
inline std::vector<IdMatch> extract_ids(const std::string& text,
                                        const std::vector<IdScheme>& schemes,
                                        const std::string& self_id) {
    std::vector<detail::Candidate> candidates;
    for (size_t si = 0; si < schemes.size(); ++si) {
        const IdScheme& scheme = schemes[si];
        for (size_t pi = 0; pi < scheme.compiled.size(); ++pi) {
            auto begin = std::sregex_iterator(text.begin(), text.end(), scheme.compiled[pi]);
            for (auto it = begin; it != std::sregex_iterator(); ++it) {
                size_t b = static_cast<size_t>(it->position());
                size_t e = b + static_cast<size_t>(it->length());
                if (b == e) continue;
                if (b > 0 && detail::is_word_byte(static_cast<unsigned char>(text[b - 1])))
                    continue;
                // also a tail of a longer token: "<alnum>-" immediately before
                if (b > 1 && text[b - 1] == '-' &&
                    detail::is_word_byte(static_cast<unsigned char>(text[b - 2])))
                    continue;
                if (e < text.size() && detail::is_word_byte(static_cast<unsigned char>(text[e])))
                    continue;
                candidates.push_back({{b, e}, si, pi});
            }
        }
    }
    std::sort(candidates.begin(), candidates.end(),
              [](const detail::Candidate& a, const detail::Candidate& b) {
                  if (a.span.begin != b.span.begin) return a.span.begin < b.span.begin;
                  size_t la = a.span.end - a.span.begin, lb = b.span.end - b.span.begin;
                  if (la != lb) return la > lb;
                  if (a.scheme_idx != b.scheme_idx) return a.scheme_idx < b.scheme_idx;
                  return a.pattern_idx < b.pattern_idx;
              });
    std::vector<IdMatch> out;
    size_t covered_until = 0;
    for (const detail::Candidate& c : candidates) {
        if (c.span.begin < covered_until) continue;
        std::string raw = text.substr(c.span.begin, c.span.end - c.span.begin);
        std::string canonical = canonicalize_id(raw, schemes[c.scheme_idx]);
        covered_until = c.span.end;
        if (canonical.empty() || canonical == self_id) continue;
        out.push_back({std::move(raw), std::move(canonical), c.span,
                       schemes[c.scheme_idx].scheme_tag});
    }
    return out;
}

struct Sentence {
    size_t begin = 0;
    size_t end = 0;  // half-open; spans partition [0, text.size())
    std::string text;
};

// Rule-based splitter. Terminators: '.', '!', '?' followed by whitespace or
// end of text, and blank lines. A '.' does not terminate when the preceding
// token is a configured abbreviation or when it falls inside a protected
// span (certificate ids carry internal periods in some schemes).
inline std::vector<Sentence> split_sentences(const std::string& text,
                                             const std::set<std::string>& abbreviations = {},
                                             const std::vector<Span>& protected_spans = {}) {
    std::vector<Sentence> out;
    if (text.empty()) return out;

    auto in_protected = [&](size_t pos) {
        for (const Span& s : protected_spans)
            if (pos >= s.begin && pos < s.end) return true;
        return false;
    };
    auto preceding_token = [&](size_t dot) {
        size_t b = dot;
        while (b > 0) {
            unsigned char c = static_cast<unsigned char>(text[b - 1]);
            if (std::isalnum(c) || c == '.')
                --b;
            else
                break;
        }
        return to_lower(std::string_view(text).substr(b, dot - b));
    };

    size_t start = 0;
    size_t i = 0;
    auto close_sentence = [&](size_t end) {
        out.push_back({start, end, text.substr(start, end - start)});
        start = end;
    };
    while (i < text.size()) {
        char c = text[i];
        if (c == '\n') {
            size_t j = i + 1;
            while (j < text.size() && (text[j] == ' ' || text[j] == '\t' || text[j] == '\r')) ++j;
            if (j < text.size() && text[j] == '\n') {
                close_sentence(j + 1);
                i = j + 1;
                continue;
            }
            ++i;
            continue;
        }
        if ((c == '.' || c == '!' || c == '?') && !in_protected(i)) {
            bool at_end = i + 1 == text.size();
            bool ws_next = !at_end && std::isspace(static_cast<unsigned char>(text[i + 1]));
            if ((at_end || ws_next) &&
                !(c == '.' && abbreviations.count(preceding_token(i)) > 0)) {
                close_sentence(i + 1);
                i += 1;
                continue;
            }
        }
        ++i;
    }
    if (start < text.size()) {
        // a whitespace-only tail extends the last sentence instead of
        // becoming its own
        if (!out.empty() && trim(std::string_view(text).substr(start)).empty()) {
            out.back().end = text.size();
            out.back().text = text.substr(out.back().begin, text.size() - out.back().begin);
        } else {
            close_sentence(text.size());
        }
    }
    return out;
}

// Per-document extraction: every recognized id with its evidence segments
// (the matched sentence, `before` preceding and `after` succeeding ones,
// clipped at document edges). One segment per occurrence, never merged.
inline std::map<std::string, std::vector<ReferenceSegment>> extract_document_references(
    const std::string& text, const std::vector<IdScheme>& schemes, const std::string& self_id,
    const std::set<std::string>& abbreviations = {}, size_t before = 2, size_t after = 1) {
    std::map<std::string, std::vector<ReferenceSegment>> out;
    if (text.empty()) return out;
    std::vector<IdMatch> matches = extract_ids(text, schemes, self_id);
    if (matches.empty()) return out;
    std::vector<Span> spans;
    spans.reserve(matches.size());
    for (const IdMatch& m : matches) spans.push_back(m.span);
    std::vector<Sentence> sentences = split_sentences(text, abbreviations, spans);

    std::vector<size_t> begins;
    begins.reserve(sentences.size());
    for (const Sentence& s : sentences) begins.push_back(s.begin);

    for (const IdMatch& m : matches) {
        auto it = std::upper_bound(begins.begin(), begins.end(), m.span.begin);
        size_t idx = static_cast<size_t>(it - begins.begin()) - 1;
        size_t w0 = idx >= before ? idx - before : 0;
        size_t w1 = std::min(idx + after, sentences.size() - 1);
        std::string seg =
            trim(std::string_view(text).substr(sentences[w0].begin,
                                               sentences[w1].end - sentences[w0].begin));
        out[m.canonical].push_back({std::move(seg), idx, m, SourceDoc::Report});
    }
    return out;
}

// Segments for one target id; [] when the id does not occur.
inline std::vector<ReferenceSegment> extract_segments(
    const std::string& text, const std::string& target, const std::vector<IdScheme>& schemes,
    const std::set<std::string>& abbreviations = {}, size_t before = 2, size_t after = 1) {
    auto all = extract_document_references(text, schemes, "", abbreviations, before, after);
    auto it = all.find(target);
    return it == all.end() ? std::vector<ReferenceSegment>{} : it->second;
}

// Pattern file: "# ccref-patterns v<N>" header, then one tab-separated
// record per pattern: scheme_tag, pattern source, canonicalizer id.
// Records with the same scheme_tag merge, preserving order.
inline std::vector<IdScheme> load_schemes(const std::string& content) {
    std::vector<IdScheme> schemes;
    std::map<std::string, size_t> index;
    long line_no = 0;
    bool saw_header = false;
    for (const std::string& raw : split(content, '\n')) {
        ++line_no;
        std::string line = trim(raw);
        if (line.empty()) continue;
        if (line[0] == '#') {
            if (line.find("ccref-patterns") != std::string::npos) saw_header = true;
            continue;
        }
        std::vector<std::string> fields = split(line, '\t');
        if (fields.size() != 3)
            throw InputError("pattern file line " + std::to_string(line_no) +
                             ": expected <scheme_tag>\\t<pattern>\\t<canonicalizer>");
        std::string tag = trim(fields[0]);
        std::string pattern = fields[1];
        std::string canonicalizer = trim(fields[2]);
        if (tag.empty() || pattern.empty())
            throw InputError("pattern file line " + std::to_string(line_no) +
                             ": empty scheme tag or pattern");
        auto [it, inserted] = index.try_emplace(tag, schemes.size());
        if (inserted) schemes.push_back({tag, {}, canonicalizer, {}});
        schemes[it->second].pattern_sources.push_back(pattern);
    }
    if (!saw_header) throw InputError("pattern file: missing '# ccref-patterns' version header");
    for (IdScheme& s : schemes) s.compile();
    return schemes;
}

inline std::vector<IdScheme> load_schemes_file(const std::filesystem::path& path) {
    return load_schemes(read_file(path));
}

// Abbreviation list: one lowercase token per line, '#' comments.
inline std::set<std::string> load_abbreviations(const std::string& content) {
    std::set<std::string> out;
    for (const std::string& raw : split(content, '\n')) {
        std::string line = trim(raw);
        if (line.empty() || line[0] == '#') continue;
        out.insert(to_lower(line));
    }
    return out;
}

inline std::set<std::string> load_abbreviations_file(const std::filesystem::path& path) {
    return load_abbreviations(read_file(path));
}

}  // namespace ccref
