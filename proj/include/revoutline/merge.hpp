#pragma once

// Merge suggestion for two paragraphs: rank each paragraph's sentences on its
// own, pool the scores, keep the five best, and emit them A-first in document
// order together with the spans that were kept and cut.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "revoutline/embed.hpp"
#include "revoutline/errors.hpp"
#include "revoutline/rank.hpp"
#include "revoutline/textseg.hpp"

namespace revoutline {

inline constexpr std::size_t merge_sentence_limit = 5;

enum class ParagraphId { a, b };

inline std::string_view to_string(ParagraphId id) { return id == ParagraphId::a ? "A" : "B"; }

struct SentenceRef {
    ParagraphId paragraph = ParagraphId::a;
    std::size_t sentence = 0;
    ByteSpan source;               // within the source paragraph
    std::optional<ByteSpan> merged; // within merged_text; retained sentences only

    friend bool operator==(const SentenceRef&, const SentenceRef&) = default;
};

struct MergeSuggestion {
    std::string merged_text;
    std::vector<SentenceRef> retained; // A ascending, then B ascending
    std::vector<SentenceRef> cut;      // same ordering
    std::uint64_t a_hash = 0;          // content hashes the suggestion was built for
    std::uint64_t b_hash = 0;
};

struct PooledScore {
    ParagraphId paragraph;
    std::size_t sentence;
    double score;
};

// Pools both score lists and returns the `limit` best entries (ties: A before B, lower index first).
inline std::vector<PooledScore> pooled_top(std::span<const double> a_scores, std::span<const double> b_scores,
                                           std::size_t limit = merge_sentence_limit) {
    std::vector<PooledScore> pool;
    pool.reserve(a_scores.size() + b_scores.size());
    for (std::size_t i = 0; i < a_scores.size(); ++i) pool.push_back({ParagraphId::a, i, a_scores[i]});
    for (std::size_t i = 0; i < b_scores.size(); ++i) pool.push_back({ParagraphId::b, i, b_scores[i]});
    std::stable_sort(pool.begin(), pool.end(), [](const PooledScore& x, const PooledScore& y) {
        return score_key(x.score) > score_key(y.score);
    });
    pool.resize(std::min(limit, pool.size()));
    return pool;
}

inline MergeSuggestion suggest_merge(const EmbeddingStore& store, const Paragraph& a, const Paragraph& b,
                                     const PageRankOptions& options = {}) {
    if (a.empty() || b.empty()) throw ContractViolation("merge: both paragraphs need at least one sentence");

    const auto a_scores = rank_sentences(store, a.sentences, options);
    const auto b_scores = rank_sentences(store, b.sentences, options);
    const auto top = pooled_top(a_scores, b_scores);

    std::vector<bool> keep_a(a.sentences.size(), false), keep_b(b.sentences.size(), false);
    for (const auto& entry : top) (entry.paragraph == ParagraphId::a ? keep_a : keep_b)[entry.sentence] = true;

    MergeSuggestion suggestion;
    suggestion.a_hash = a.content_hash;
    suggestion.b_hash = b.content_hash;
    auto walk = [&](const Paragraph& p, ParagraphId id, const std::vector<bool>& keep) {
        for (const auto& s : p.sentences) {
            SentenceRef ref{id, s.index, s.span, std::nullopt};
            if (!keep[s.index]) {
                suggestion.cut.push_back(ref);
                continue;
            }
            if (!suggestion.merged_text.empty()) suggestion.merged_text += ' ';
            const std::size_t begin = suggestion.merged_text.size();
            suggestion.merged_text += s.text;
            ref.merged = ByteSpan{begin, suggestion.merged_text.size()};
            suggestion.retained.push_back(ref);
        }
    };
    walk(a, ParagraphId::a, keep_a);
    walk(b, ParagraphId::b, keep_b);
    return suggestion;
}

} // namespace revoutline
