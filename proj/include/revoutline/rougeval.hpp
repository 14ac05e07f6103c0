#pragma once

// ROUGE-1/2/L (precision, recall, F) over lowercase word tokens, without
// stemming, plus the agreement rate between system and human central-sentence choices.

#include <algorithm>
#include <cstddef>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "revoutline/errors.hpp"
#include "revoutline/textseg.hpp"

namespace revoutline {

enum class RougeVariant { r1, r2, rl };

inline std::string to_string(RougeVariant v) {
    switch (v) {
    case RougeVariant::r1: return "rouge-1";
    case RougeVariant::r2: return "rouge-2";
    case RougeVariant::rl: return "rouge-l";
    }
    return "rouge";
}

struct RougeScore {
    RougeVariant variant = RougeVariant::r1;
    double precision = 0.0;
    double recall = 0.0;
    double f = 0.0;
};

inline double f_measure(double precision, double recall) {
    return precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
}

inline RougeScore make_score(RougeVariant variant, std::size_t overlap, std::size_t candidate_total,
                             std::size_t reference_total) {
    RougeScore s;
    s.variant = variant;
    s.precision = candidate_total ? static_cast<double>(overlap) / static_cast<double>(candidate_total) : 0.0;
    s.recall = reference_total ? static_cast<double>(overlap) / static_cast<double>(reference_total) : 0.0;
    s.f = f_measure(s.precision, s.recall);
    return s;
}

namespace detail {

inline std::map<std::vector<std::string>, std::size_t> ngram_counts(std::span<const std::string> tokens, std::size_t n) {
    std::map<std::vector<std::string>, std::size_t> counts;
    for (std::size_t i = 0; i + n <= tokens.size(); ++i) ++counts[std::vector<std::string>(tokens.begin() + i, tokens.begin() + i + n)];
    return counts;
}

} // namespace detail

// Clipped n-gram overlap. n must be 1 or 2.
inline RougeScore rouge_n(std::span<const std::string> candidate, std::span<const std::string> reference, int n) {
    if (n != 1 && n != 2) throw ContractViolation("rouge_n: n must be 1 or 2");
    const auto cand = detail::ngram_counts(candidate, static_cast<std::size_t>(n));
    const auto ref = detail::ngram_counts(reference, static_cast<std::size_t>(n));
    std::size_t overlap = 0, cand_total = 0, ref_total = 0;
    for (const auto& [gram, count] : cand) {
        cand_total += count;
        if (auto it = ref.find(gram); it != ref.end()) overlap += std::min(count, it->second);
    }
    for (const auto& [gram, count] : ref) ref_total += count;
    return make_score(n == 1 ? RougeVariant::r1 : RougeVariant::r2, overlap, cand_total, ref_total);
}

inline std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b) {
    std::vector<std::size_t> row(b.size() + 1, 0);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        std::size_t diagonal = 0;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            const std::size_t above = row[j];
            row[j] = a[i - 1] == b[j - 1] ? diagonal + 1 : std::max(row[j], row[j - 1]);
            diagonal = above;
        }
    }
    return row[b.size()];
}

// Summary-level LCS over the whole token sequences.
inline RougeScore rouge_l(std::span<const std::string> candidate, std::span<const std::string> reference) {
    return make_score(RougeVariant::rl, lcs_length(candidate, reference), candidate.size(), reference.size());
}

struct RougePair {
    std::string candidate;
    std::string reference;
};

struct PairScores {
    RougeScore r1, r2, rl;
};

inline PairScores score_pair(const RougePair& pair) {
    const auto cand = tokenize(pair.candidate);
    const auto ref = tokenize(pair.reference);
    return {rouge_n(cand, ref, 1), rouge_n(cand, ref, 2), rouge_l(cand, ref)};
}

struct CorpusReport {
    std::size_t pairs = 0;
    RougeScore r1{RougeVariant::r1}, r2{RougeVariant::r2}, rl{RougeVariant::rl};

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        j["pairs"] = pairs;
        for (const auto* s : {&r1, &r2, &rl}) {
            nlohmann::ordered_json cell;
            cell["recall"] = s->recall;
            cell["precision"] = s->precision;
            cell["f"] = s->f;
            j[to_string(s->variant)] = std::move(cell);
        }
        return j;
    }

    // Aligned 9-cell table, one row per variant and measure.
    std::string to_text() const {
        std::ostringstream out;
        char line[64];
        std::snprintf(line, sizeof line, "%-12s %10s\n", "Average", "Score");
        out << line;
        const std::pair<const char*, const RougeScore*> rows[] = {{"Rouge-1", &r1}, {"Rouge-2", &r2}, {"Rouge-l", &rl}};
        for (const auto& [name, s] : rows) {
            for (const auto& [suffix, value] : {std::pair{"R", s->recall}, {"P", s->precision}, {"F", s->f}}) {
                std::snprintf(line, sizeof line, "%-12s %10.4f\n", (std::string(name) + " " + suffix).c_str(), value);
                out << line;
            }
        }
        std::snprintf(line, sizeof line, "%-12s %10zu\n", "Pairs", pairs);
        out << line;
        return out.str();
    }
};

// Arithmetic mean of each of the nine cells over all pairs.
inline CorpusReport evaluate_corpus(std::span<const RougePair> pairs) {
    if (pairs.empty()) throw ContractViolation("evaluate_corpus: corpus is empty");
    CorpusReport report;
    report.pairs = pairs.size();
    auto add = [](RougeScore& total, const RougeScore& s) {
        total.precision += s.precision;
        total.recall += s.recall;
        total.f += s.f;
    };
    for (const auto& pair : pairs) {
        const auto s = score_pair(pair);
        add(report.r1, s.r1);
        add(report.r2, s.r2);
        add(report.rl, s.rl);
    }
    const double n = static_cast<double>(pairs.size());
    for (auto* s : {&report.r1, &report.r2, &report.rl}) {
        s->precision /= n;
        s->recall /= n;
        s->f /= n;
    }
    return report;
}

// One {"candidate": str, "reference": str} object per line; blank lines skipped.
inline std::vector<RougePair> read_pairs_jsonl(std::istream& in) {
    std::vector<RougePair> pairs;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::is_blank(line)) continue;
        auto j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) throw FormatError(line_no, "not a JSON object");
        auto c = j.find("candidate");
        auto r = j.find("reference");
        if (c == j.end() || !c->is_string() || r == j.end() || !r->is_string())
            throw FormatError(line_no, "expected string fields 'candidate' and 'reference'");
        pairs.push_back({c->get<std::string>(), r->get<std::string>()});
    }
    return pairs;
}

inline std::vector<RougePair> read_pairs_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw LoadError("cannot open " + path.string());
    return read_pairs_jsonl(in);
}

// Fraction of positions where the system picked the same sentence as the human.
inline double central_agreement(std::span<const std::size_t> system, std::span<const std::size_t> human) {
    if (system.size() != human.size()) throw ContractViolation("central_agreement: lists differ in length");
    if (system.empty()) return 0.0;
    std::size_t same = 0;
    for (std::size_t i = 0; i < system.size(); ++i)
        if (system[i] == human[i]) ++same;
    return static_cast<double>(same) / static_cast<double>(system.size());
}

} // namespace revoutline
