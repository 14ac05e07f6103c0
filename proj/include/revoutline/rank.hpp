#pragma once

// TextRank over sentence embeddings: cosine similarity graph, damped PageRank
// by power iteration, then top-k selection in document order.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "revoutline/embed.hpp"
#include "revoutline/errors.hpp"
#include "revoutline/textseg.hpp"

namespace revoutline {

struct PageRankOptions {
    double damping = 0.85;
    double tolerance = 1e-6; // L1 change between iterations
    std::size_t max_iterations = 100;
};

// Dense square matrix of non-negative edge weights, row-major.
class WeightMatrix {
public:
    explicit WeightMatrix(std::size_t n) : n_(n), data_(n * n, 0.0) {}

    std::size_t size() const noexcept { return n_; }
    double& operator()(std::size_t i, std::size_t j) { return data_[i * n_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * n_ + j]; }

    void scale(double c) {
        for (double& w : data_) w *= c;
    }

private:
    std::size_t n_;
    std::vector<double> data_;
};

struct PageRankRun {
    std::vector<double> scores;
    std::size_t iterations = 0;
    bool converged = false;
};

// Power iteration on the row-normalized weights with uniform teleport.
// All-zero rows (dangling nodes) spread their mass uniformly.
inline PageRankRun pagerank(const WeightMatrix& weights, const PageRankOptions& options = {}) {
    const std::size_t n = weights.size();
    if (n == 0) throw ContractViolation("pagerank: empty graph");

    std::vector<double> row_sum(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) row_sum[i] += weights(i, j);

    const double d = options.damping;
    const double inv_n = 1.0 / static_cast<double>(n);
    PageRankRun run;
    std::vector<double> x(n, inv_n), next(n);

    for (run.iterations = 1; run.iterations <= options.max_iterations; ++run.iterations) {
        double dangling = 0.0;
        std::fill(next.begin(), next.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            if (row_sum[i] <= 0.0) {
                dangling += x[i];
                continue;
            }
            const double share = d * x[i] / row_sum[i];
            for (std::size_t j = 0; j < n; ++j) next[j] += share * weights(i, j);
        }
        const double base = (1.0 - d) * inv_n + d * dangling * inv_n;
        double delta = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            next[j] += base;
            delta += std::abs(next[j] - x[j]);
        }
        x.swap(next);
        if (delta < options.tolerance) {
            run.converged = true;
            break;
        }
    }
    run.iterations = std::min(run.iterations, options.max_iterations);

    const double total = std::accumulate(x.begin(), x.end(), 0.0);
    for (double& v : x) v /= total;
    run.scores = std::move(x);
    return run;
}

// w(i,j) = max(0, cosine) for i != j; rows of absent embeddings stay zero.
inline WeightMatrix similarity_graph(std::span<const std::optional<Vector>> embeddings) {
    const std::size_t n = embeddings.size();
    WeightMatrix w(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!embeddings[i]) continue;
        for (std::size_t j = i + 1; j < n; ++j) {
            if (!embeddings[j]) continue;
            const double c = std::max(0.0, cosine(*embeddings[i], *embeddings[j]));
            w(i, j) = c;
            w(j, i) = c;
        }
    }
    return w;
}

inline std::vector<double> rank_embeddings(std::span<const std::optional<Vector>> embeddings,
                                           const PageRankOptions& options = {}) {
    if (embeddings.empty()) throw ContractViolation("rank: no sentences");
    return pagerank(similarity_graph(embeddings), options).scores;
}

inline std::vector<std::optional<Vector>> sentence_embeddings(const EmbeddingStore& store,
                                                              std::span<const Sentence> sentences) {
    std::vector<std::optional<Vector>> out;
    out.reserve(sentences.size());
    for (const auto& s : sentences) out.push_back(sentence_embedding(store, s.tokens));
    return out;
}

inline std::vector<double> rank_sentences(const EmbeddingStore& store, std::span<const Sentence> sentences,
                                          const PageRankOptions& options = {}) {
    if (sentences.empty()) throw ContractViolation("rank: no sentences");
    const auto embeddings = sentence_embeddings(store, sentences);
    return rank_embeddings(embeddings, options);
}

// Sort key for scores. Values that agree to 12 decimal places tie: symmetric
// sentences must not be ordered by floating-point noise.
inline double score_key(double score) noexcept { return std::round(score * 1e12); }

// Indices ordered by descending score, earlier index first on ties.
inline std::vector<std::size_t> rank_order(std::span<const double> scores) {
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return score_key(scores[a]) > score_key(scores[b]); });
    return order;
}

// The min(k, n) best indices, returned ascending.
inline std::vector<std::size_t> extract_top_k(std::span<const double> scores, std::size_t k) {
    if (k == 0) throw ContractViolation("extract_top_k: k must be at least 1");
    auto order = rank_order(scores);
    order.resize(std::min(k, order.size()));
    std::sort(order.begin(), order.end());
    return order;
}

struct RankResult {
    std::vector<double> scores;
    std::vector<std::size_t> selected; // ascending
    std::size_t k_requested = 1;
    std::size_t k_effective = 0;
};

inline RankResult summarize_extractive(const EmbeddingStore& store, const Paragraph& paragraph, std::size_t k,
                                       const PageRankOptions& options = {}) {
    if (k == 0) throw ContractViolation("extractive summary: k must be at least 1");
    RankResult result;
    result.k_requested = k;
    if (paragraph.empty()) return result;
    result.scores = rank_sentences(store, paragraph.sentences, options);
    result.selected = extract_top_k(result.scores, k);
    result.k_effective = result.selected.size();
    return result;
}

inline const Sentence& central_sentence(const EmbeddingStore& store, const Paragraph& paragraph,
                                        const PageRankOptions& options = {}) {
    if (paragraph.empty()) throw ContractViolation("central sentence: paragraph has no sentences");
    const auto scores = rank_sentences(store, paragraph.sentences, options);
    return paragraph.sentences[extract_top_k(scores, 1).front()];
}

// Selected sentences in the given order, separated by single spaces.
inline std::string join_sentences(const Paragraph& paragraph, std::span<const std::size_t> indices) {
    std::string out;
    for (std::size_t i : indices) {
        if (!out.empty()) out += ' ';
        out += paragraph.sentences.at(i).text;
    }
    return out;
}

} // namespace revoutline
