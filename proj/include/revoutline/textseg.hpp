#pragma once

// Paragraph, sentence and token segmentation. Every function here is pure.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <istream>
#include <memory>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <unicode/brkiter.h>
#include <unicode/locid.h>
#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>
#include <unicode/utf8.h>

#include "revoutline/errors.hpp"

namespace revoutline {

// Half-open byte range.
struct ByteSpan {
    std::size_t begin = 0;
    std::size_t end = 0;

    std::size_t size() const noexcept { return end - begin; }
    friend bool operator==(const ByteSpan&, const ByteSpan&) = default;
};

struct Sentence {
    std::size_t index = 0;
    std::string text;
    ByteSpan span; // into the owning paragraph's text
    std::vector<std::string> tokens;

    friend bool operator==(const Sentence&, const Sentence&) = default;
};

struct Paragraph {
    std::size_t index = 0;
    std::string text;
    std::vector<Sentence> sentences;
    std::uint64_t content_hash = 0;

    bool empty() const noexcept { return sentences.empty(); }

    std::size_t token_count() const noexcept {
        std::size_t count = 0;
        for (const auto& s : sentences) count += s.tokens.size();
        return count;
    }

    friend bool operator==(const Paragraph&, const Paragraph&) = default;
};

namespace detail {

inline bool is_space(char c) noexcept {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

inline bool is_blank(std::string_view s) noexcept {
    for (char c : s)
        if (!is_space(c)) return false;
    return true;
}

inline std::string_view trim(std::string_view s) noexcept {
    while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
    return s;
}

// One entry per line; everything from '#' to end of line is a comment.
inline std::vector<std::string> read_word_list(std::istream& in) {
    std::vector<std::string> words;
    std::string line;
    while (std::getline(in, line)) {
        std::string_view view = line;
        if (auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
        view = trim(view);
        if (!view.empty()) words.emplace_back(view);
    }
    return words;
}

inline std::vector<std::string> read_word_list_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw LoadError("cannot open " + path.string());
    return read_word_list(in);
}

inline icu::UnicodeString to_unicode(std::string_view s) {
    return icu::UnicodeString::fromUTF8(icu::StringPiece(s.data(), static_cast<int32_t>(s.size())));
}

inline bool is_ascii(std::string_view s) noexcept {
    for (unsigned char c : s)
        if (c >= 0x80) return false;
    return true;
}

// Code point starting at byte offset `pos`; U_SENTINEL on malformed input.
inline UChar32 code_point_at(std::string_view s, std::size_t pos) noexcept {
    auto* bytes = reinterpret_cast<const uint8_t*>(s.data());
    int32_t i = static_cast<int32_t>(pos);
    UChar32 c = 0;
    U8_NEXT(bytes, i, static_cast<int32_t>(s.size()), c);
    return c;
}

inline constexpr std::string_view closing_marks[] = {"\"", "'", ")", "]", "}", "”", "’", "»"};
inline constexpr std::string_view opening_marks[] = {"\"", "'", "(", "[", "{", "“", "‘", "«"};

template <std::size_t N>
std::size_t match_mark(std::string_view s, std::size_t pos, const std::string_view (&marks)[N]) noexcept {
    for (auto m : marks)
        if (s.substr(pos, m.size()) == m) return m.size();
    return 0;
}

inline icu::BreakIterator& word_breaker() {
    thread_local std::unique_ptr<icu::BreakIterator> breaker = [] {
        UErrorCode status = U_ZERO_ERROR;
        std::unique_ptr<icu::BreakIterator> it(
            icu::BreakIterator::createWordInstance(icu::Locale::getRoot(), status));
        if (U_FAILURE(status) || !it) throw Error("ICU word break iterator unavailable");
        return it;
    }();
    return *breaker;
}

} // namespace detail

// Fixed set of abbreviations ("e.g.", "Fig.", ...) whose period never ends a sentence.
class AbbreviationList {
public:
    AbbreviationList() = default;

    AbbreviationList(std::initializer_list<std::string_view> words) {
        for (auto w : words) words_.emplace(w);
    }

    explicit AbbreviationList(const std::vector<std::string>& words) : words_(words.begin(), words.end()) {}

    static AbbreviationList parse(std::istream& in) { return AbbreviationList(detail::read_word_list(in)); }

    static AbbreviationList from_file(const std::filesystem::path& path) {
        return AbbreviationList(detail::read_word_list_file(path));
    }

    // Same content as data/abbreviations.txt.
    static const AbbreviationList& builtin() {
        static const AbbreviationList list{
            "e.g.", "E.g.", "i.e.", "I.e.", "cf.",   "Cf.",   "vs.",  "etc.", "al.",  "approx.",
            "ca.",  "Dr.",  "Mr.",  "Mrs.", "Ms.",   "Prof.", "Sr.",  "Jr.",  "St.",  "Fig.",
            "fig.", "Figs.", "Eq.", "Eqs.", "No.",   "Nos.",  "Vol.", "vol.", "pp.",  "p.",
            "Sec.", "Ch.",  "Tab.", "Ref.", "Refs.", "Inc.",  "Ltd.", "Co.",  "Corp.", "Jan.",
            "Feb.", "Aug.", "Sept.", "Oct.", "Nov.", "Dec."};
        return list;
    }

    bool contains(std::string_view word) const { return words_.find(word) != words_.end(); }
    std::size_t size() const noexcept { return words_.size(); }
    const std::set<std::string, std::less<>>& entries() const noexcept { return words_; }

private:
    std::set<std::string, std::less<>> words_;
};

// Unicode-aware lowercase (root locale).
inline std::string to_lower(std::string_view text) {
    if (detail::is_ascii(text)) {
        std::string out(text);
        for (char& c : out)
            if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
        return out;
    }
    auto u = detail::to_unicode(text);
    u.toLower(icu::Locale::getRoot());
    std::string out;
    u.toUTF8String(out);
    return out;
}

inline std::string nfc_normalize(std::string_view text) {
    if (detail::is_ascii(text)) return std::string(text);
    UErrorCode status = U_ZERO_ERROR;
    const icu::Normalizer2* nfc = icu::Normalizer2::getNFCInstance(status);
    if (U_FAILURE(status)) throw Error("ICU NFC normalizer unavailable");
    auto normalized = nfc->normalize(detail::to_unicode(text), status);
    if (U_FAILURE(status)) throw Error("NFC normalization failed");
    std::string out;
    normalized.toUTF8String(out);
    return out;
}

// 64-bit FNV-1a. Stable across runs and platforms; the cache snapshot depends on it.
inline std::uint64_t fnv1a64(std::string_view bytes) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// FNV-1a 64 of the NFC form of `text`.
inline std::uint64_t content_hash(std::string_view text) { return fnv1a64(nfc_normalize(text)); }

// Lowercased word tokens using ICU word boundaries. Segments without any letter
// or digit (punctuation, symbols, whitespace) are dropped.
inline std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    if (text.empty()) return tokens;

    const auto u = detail::to_unicode(text);
    auto& breaker = detail::word_breaker();
    breaker.setText(u);

    int32_t start = breaker.first();
    for (int32_t end = breaker.next(); end != icu::BreakIterator::DONE; start = end, end = breaker.next()) {
        bool has_word_char = false;
        for (int32_t i = start; i < end;) {
            UChar32 c = u.char32At(i);
            if (u_isalnum(c)) {
                has_word_char = true;
                break;
            }
            i += U16_LENGTH(c);
        }
        if (!has_word_char) continue;
        icu::UnicodeString piece(u, start, end - start);
        piece.toLower(icu::Locale::getRoot());
        std::string token;
        piece.toUTF8String(token);
        tokens.push_back(std::move(token));
    }
    return tokens;
}

namespace detail {

inline bool is_terminal(char c) noexcept { return c == '.' || c == '!' || c == '?'; }

inline std::size_t skip_space(std::string_view s, std::size_t pos) noexcept {
    while (pos < s.size() && is_space(s[pos])) ++pos;
    return pos;
}

// Uppercase letter or digit, possibly behind opening quotes or brackets.
inline bool starts_sentence(std::string_view s, std::size_t pos) noexcept {
    while (std::size_t n = match_mark(s, pos, opening_marks)) pos += n;
    if (pos >= s.size()) return false;
    UChar32 c = code_point_at(s, pos);
    return c >= 0 && (u_isupper(c) || u_istitle(c) || u_isdigit(c));
}

// The whitespace-delimited word ending at `end` (exclusive), opening marks stripped.
inline std::string_view word_before(std::string_view s, std::size_t begin, std::size_t end) noexcept {
    std::size_t w = end;
    while (w > begin && !is_space(s[w - 1])) --w;
    std::string_view word = s.substr(w, end - w);
    while (true) {
        std::size_t n = match_mark(word, 0, opening_marks);
        if (n == 0) break;
        word.remove_prefix(n);
    }
    return word;
}

} // namespace detail

// Rule-based sentence splitter. A boundary follows a run of '.', '!' or '?'
// (plus any closing quotes/brackets) when whitespace and then an uppercase
// letter or digit come next, possibly behind an opening quote or bracket.
// A lone period after a listed abbreviation never ends a sentence.
inline std::vector<Sentence> split_sentences(std::string_view text,
                                             const AbbreviationList& abbreviations = AbbreviationList::builtin()) {
    using namespace detail;
    std::vector<Sentence> sentences;
    auto emit = [&](std::size_t begin, std::size_t end) {
        Sentence s;
        s.index = sentences.size();
        s.span = {begin, end};
        s.text = std::string(text.substr(begin, end - begin));
        s.tokens = tokenize(s.text);
        sentences.push_back(std::move(s));
    };

    const std::size_t n = text.size();
    std::size_t start = skip_space(text, 0);
    std::size_t i = start;
    while (i < n) {
        if (!is_terminal(text[i])) {
            ++i;
            continue;
        }
        std::size_t end = i + 1;
        while (end < n && is_terminal(text[end])) ++end;
        const bool single_period = text[i] == '.' && end == i + 1;
        while (end < n) {
            std::size_t mark = match_mark(text, end, closing_marks);
            if (mark == 0) break;
            end += mark;
        }
        if (end >= n || !is_space(text[end])) {
            i = end;
            continue;
        }
        std::size_t next = skip_space(text, end);
        if (next >= n || !starts_sentence(text, next)) {
            i = next;
            continue;
        }
        if (single_period && abbreviations.contains(word_before(text, start, i + 1))) {
            i = next;
            continue;
        }
        emit(start, end);
        start = next;
        i = next;
    }

    std::size_t last = n;
    while (last > start && is_space(text[last - 1])) --last;
    if (last > start) emit(start, last);
    return sentences;
}

inline Paragraph make_paragraph(std::string_view text, std::size_t index = 0,
                                const AbbreviationList& abbreviations = AbbreviationList::builtin()) {
    Paragraph p;
    p.index = index;
    p.text = std::string(text);
    p.sentences = split_sentences(text, abbreviations);
    p.content_hash = content_hash(text);
    return p;
}

// Paragraphs plus the exact bytes around them: separators[i] precedes
// paragraphs[i] and separators.back() trails the last one.
struct SplitDocument {
    std::vector<Paragraph> paragraphs;
    std::vector<std::string> separators;

    std::string join() const {
        std::string out;
        for (std::size_t i = 0; i < paragraphs.size(); ++i) {
            out += separators[i];
            out += paragraphs[i].text;
        }
        if (!separators.empty()) out += separators.back();
        return out;
    }
};

// A paragraph is a maximal run of non-blank lines. Blank lines (empty or
// whitespace-only) separate paragraphs and belong to none.
inline SplitDocument split_document(std::string_view text,
                                    const AbbreviationList& abbreviations = AbbreviationList::builtin()) {
    SplitDocument doc;
    std::size_t gap_begin = 0;
    std::size_t run_begin = std::string_view::npos;
    std::size_t run_end = 0;

    auto close_run = [&] {
        if (run_begin == std::string_view::npos) return;
        doc.separators.emplace_back(text.substr(gap_begin, run_begin - gap_begin));
        doc.paragraphs.push_back(
            make_paragraph(text.substr(run_begin, run_end - run_begin), doc.paragraphs.size(), abbreviations));
        gap_begin = run_end;
        run_begin = std::string_view::npos;
    };

    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string_view::npos) eol = text.size();
        if (detail::is_blank(text.substr(pos, eol - pos))) {
            close_run();
        } else {
            if (run_begin == std::string_view::npos) run_begin = pos;
            run_end = eol;
        }
        if (eol == text.size()) break;
        pos = eol + 1;
    }
    close_run();
    doc.separators.emplace_back(text.substr(gap_begin));
    return doc;
}

inline std::vector<Paragraph> split_paragraphs(std::string_view text,
                                               const AbbreviationList& abbreviations = AbbreviationList::builtin()) {
    return split_document(text, abbreviations).paragraphs;
}

} // namespace revoutline
