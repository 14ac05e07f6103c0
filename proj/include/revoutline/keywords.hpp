#pragma once

// Keyword extraction by embedding similarity: score every non-stopword
// unigram and consecutive non-stopword bigram against the paragraph mean
// vector, then keep the best few without redundant unigrams.

#include <algorithm>
#include <cstddef>
#include <filesystem>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "revoutline/embed.hpp"
#include "revoutline/rank.hpp"
#include "revoutline/textseg.hpp"

namespace revoutline {

inline constexpr std::size_t max_keywords = 5;

class StopwordSet {
public:
    StopwordSet() = default;

    StopwordSet(std::initializer_list<std::string_view> words) {
        for (auto w : words) words_.insert(to_lower(w));
    }

    explicit StopwordSet(const std::vector<std::string>& words) {
        for (const auto& w : words) words_.insert(to_lower(w));
    }

    static StopwordSet parse(std::istream& in) { return StopwordSet(detail::read_word_list(in)); }
    static StopwordSet from_file(const std::filesystem::path& path) {
        return StopwordSet(detail::read_word_list_file(path));
    }

    // Same content as data/stopwords.txt.
    static const StopwordSet& builtin() {
        static const StopwordSet set{
            "a", "about", "above", "after", "again", "against", "all", "am", "an", "and", "any", "are", "as",
            "at", "be", "because", "been", "before", "being", "below", "between", "both", "but", "by", "can",
            "could", "did", "do", "does", "doing", "down", "during", "each", "few", "for", "from", "further",
            "had", "has", "have", "having", "he", "her", "here", "hers", "herself", "him", "himself", "his",
            "how", "i", "if", "in", "into", "is", "it", "its", "itself", "just", "me", "more", "most", "my",
            "myself", "no", "nor", "not", "now", "of", "off", "on", "once", "only", "or", "other", "our",
            "ours", "ourselves", "out", "over", "own", "same", "she", "should", "so", "some", "such", "than",
            "that", "the", "their", "theirs", "them", "themselves", "then", "there", "these", "they", "this",
            "those", "through", "to", "too", "under", "until", "up", "very", "was", "we", "were", "what",
            "when", "where", "which", "while", "who", "whom", "why", "will", "with", "would", "you", "your",
            "yours", "yourself", "yourselves"};
        return set;
    }

    bool contains(const std::string& word) const { return words_.contains(word); }
    std::size_t size() const noexcept { return words_.size(); }
    const std::unordered_set<std::string>& entries() const noexcept { return words_; }

private:
    std::unordered_set<std::string> words_;
};

struct KeywordSet {
    std::vector<std::string> keywords;
    std::vector<double> scores; // parallel to keywords, non-increasing

    bool empty() const noexcept { return keywords.empty(); }
};

struct KeywordCandidate {
    std::vector<std::string> tokens; // one (unigram) or two (bigram)
    std::size_t first_position = 0;  // token offset in the paragraph

    std::string text() const { return tokens.size() == 1 ? tokens[0] : tokens[0] + " " + tokens[1]; }
};

// Candidates in order of first occurrence; at equal position the unigram precedes the bigram.
// Every token of a candidate must be in vocabulary.
inline std::vector<KeywordCandidate> keyword_candidates(const EmbeddingStore& store, const Paragraph& paragraph,
                                                        const StopwordSet& stopwords) {
    std::vector<KeywordCandidate> out;
    std::unordered_set<std::string> seen;
    auto eligible = [&](const std::string& t) { return !stopwords.contains(t) && store.contains(t); };

    std::size_t position = 0;
    for (const auto& sentence : paragraph.sentences) {
        const auto& tokens = sentence.tokens;
        for (std::size_t i = 0; i < tokens.size(); ++i, ++position) {
            if (!eligible(tokens[i])) continue;
            if (seen.insert(tokens[i]).second) out.push_back({{tokens[i]}, position});
            if (i + 1 < tokens.size() && eligible(tokens[i + 1])) {
                KeywordCandidate bigram{{tokens[i], tokens[i + 1]}, position};
                if (seen.insert(bigram.text()).second) out.push_back(std::move(bigram));
            }
        }
    }
    return out;
}

inline KeywordSet extract_keywords(const EmbeddingStore& store, const Paragraph& paragraph,
                                   const StopwordSet& stopwords = StopwordSet::builtin(),
                                   std::size_t limit = max_keywords) {
    KeywordSet result;
    std::vector<std::string> all_tokens;
    for (const auto& s : paragraph.sentences) all_tokens.insert(all_tokens.end(), s.tokens.begin(), s.tokens.end());
    const auto document = sentence_embedding(store, all_tokens);
    if (!document) return result;

    struct Scored {
        const KeywordCandidate* candidate;
        double score;
    };
    const auto candidates = keyword_candidates(store, paragraph, stopwords);
    std::vector<Scored> scored;
    scored.reserve(candidates.size());
    for (const auto& c : candidates) {
        auto embedding = sentence_embedding(store, c.tokens);
        if (embedding) scored.push_back({&c, cosine(*embedding, *document)});
    }
    std::stable_sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) {
        return score_key(a.score) > score_key(b.score);
    });

    std::vector<const Scored*> picked;
    auto covered_by_bigram = [&](const std::string& unigram) {
        return std::any_of(picked.begin(), picked.end(), [&](const Scored* p) {
            const auto& t = p->candidate->tokens;
            return t.size() == 2 && (t[0] == unigram || t[1] == unigram);
        });
    };
    for (const auto& s : scored) {
        if (picked.size() >= limit) break;
        const auto& tokens = s.candidate->tokens;
        if (tokens.size() == 1) {
            if (!covered_by_bigram(tokens[0])) picked.push_back(&s);
            continue;
        }
        std::erase_if(picked, [&](const Scored* p) {
            const auto& t = p->candidate->tokens;
            return t.size() == 1 && (t[0] == tokens[0] || t[0] == tokens[1]);
        });
        picked.push_back(&s);
    }

    for (const auto* p : picked) {
        result.keywords.push_back(p->candidate->text());
        result.scores.push_back(p->score);
    }
    return result;
}

} // namespace revoutline
