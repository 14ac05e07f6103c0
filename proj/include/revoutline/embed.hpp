#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <istream>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <zlib.h>

#include "revoutline/errors.hpp"
#include "revoutline/textseg.hpp"

namespace revoutline {

using Vector = std::vector<double>;

// Token -> dense vector map in the GloVe text layout. Keys are lowercased on
// insert; the first vector seen for a key wins. Immutable once loaded.
class EmbeddingStore {
public:
    explicit EmbeddingStore(std::size_t dimension) : dimension_(dimension) {
        if (dimension == 0) throw ContractViolation("embedding dimension must be positive");
    }

    std::size_t dimension() const noexcept { return dimension_; }
    std::size_t vocab_size() const noexcept { return index_.size(); }

    // Returns false when the (lowercased) token is already present.
    bool insert(std::string_view token, std::span<const double> values) {
        if (values.size() != dimension_)
            throw ContractViolation("expected " + std::to_string(dimension_) + " components, got " +
                                    std::to_string(values.size()));
        for (double v : values)
            if (!std::isfinite(v)) throw ContractViolation("non-finite embedding component");
        auto key = to_lower(token);
        if (index_.contains(key)) return false;
        index_.emplace(std::move(key), data_.size());
        data_.insert(data_.end(), values.begin(), values.end());
        return true;
    }

    bool insert(std::string_view token, std::initializer_list<double> values) {
        return insert(token, std::span<const double>(values.begin(), values.size()));
    }

    std::optional<std::span<const float>> find(std::string_view token) const {
        auto it = index_.find(std::string(token));
        if (it == index_.end()) {
            auto lowered = to_lower(token);
            if (lowered == token) return std::nullopt;
            it = index_.find(lowered);
            if (it == index_.end()) return std::nullopt;
        }
        return std::span<const float>(data_.data() + it->second, dimension_);
    }

    bool contains(std::string_view token) const { return find(token).has_value(); }

private:
    std::size_t dimension_;
    std::unordered_map<std::string, std::size_t> index_;
    std::vector<float> data_;
};

namespace detail {

inline std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t pos = 0;
    while (pos < line.size()) {
        while (pos < line.size() && line[pos] == ' ') ++pos;
        if (pos >= line.size()) break;
        std::size_t end = line.find(' ', pos);
        if (end == std::string_view::npos) end = line.size();
        fields.push_back(line.substr(pos, end - pos));
        pos = end;
    }
    return fields;
}

class GloveParser {
public:
    void feed(std::string_view line) {
        ++line_no_;
        while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.remove_suffix(1);
        if (detail::is_blank(line)) return;

        auto fields = split_fields(line);
        if (!store_) {
            if (fields.size() < 2) throw FormatError(line_no_, "expected a token followed by at least one value");
            store_.emplace(fields.size() - 1);
            values_.resize(fields.size() - 1);
        }
        if (fields.size() - 1 != store_->dimension())
            throw FormatError(line_no_, "expected " + std::to_string(store_->dimension()) + " components, got " +
                                            std::to_string(fields.size() - 1));
        for (std::size_t i = 1; i < fields.size(); ++i) {
            auto f = fields[i];
            double v = 0.0;
            auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
            if (ec != std::errc() || ptr != f.data() + f.size())
                throw FormatError(line_no_, "invalid number '" + std::string(f) + "'");
            if (!std::isfinite(v)) throw FormatError(line_no_, "non-finite value '" + std::string(f) + "'");
            values_[i - 1] = v;
        }
        store_->insert(fields[0], values_);
    }

    EmbeddingStore finish() {
        if (!store_) throw FormatError(0, "embedding file contains no vectors");
        return std::move(*store_);
    }

private:
    std::size_t line_no_ = 0;
    std::optional<EmbeddingStore> store_;
    std::vector<double> values_;
};

} // namespace detail

// Parses GloVe text (`token v1 ... vD` per line, no header). D comes from the first line.
inline EmbeddingStore parse_glove(std::istream& in) {
    detail::GloveParser parser;
    std::string line;
    while (std::getline(in, line)) parser.feed(line);
    return parser.finish();
}

// Loads a GloVe file; paths ending in ".gz" are decompressed transparently.
inline EmbeddingStore load_glove(const std::filesystem::path& path) {
    if (path.extension() == ".gz") {
        gzFile file = gzopen(path.c_str(), "rb");
        if (!file) throw LoadError("cannot open " + path.string());
        detail::GloveParser parser;
        std::string line;
        char buffer[1 << 16];
        try {
            while (true) {
                int n = gzread(file, buffer, sizeof buffer);
                if (n < 0) throw LoadError("read failed: " + path.string());
                if (n == 0) break;
                std::string_view chunk(buffer, static_cast<std::size_t>(n));
                std::size_t pos = 0;
                for (std::size_t nl; (nl = chunk.find('\n', pos)) != std::string_view::npos; pos = nl + 1) {
                    line.append(chunk.substr(pos, nl - pos));
                    parser.feed(line);
                    line.clear();
                }
                line.append(chunk.substr(pos));
            }
            if (!line.empty()) parser.feed(line);
        } catch (...) {
            gzclose(file);
            throw;
        }
        gzclose(file);
        return parser.finish();
    }

    std::ifstream in(path, std::ios::binary);
    if (!in) throw LoadError("cannot open " + path.string());
    return parse_glove(in);
}

// Mean of the in-vocabulary token vectors; nullopt when none is in vocabulary.
inline std::optional<Vector> sentence_embedding(const EmbeddingStore& store, std::span<const std::string> tokens) {
    Vector sum(store.dimension(), 0.0);
    std::size_t hits = 0;
    for (const auto& token : tokens) {
        auto v = store.find(token);
        if (!v) continue;
        for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += (*v)[i];
        ++hits;
    }
    if (hits == 0) return std::nullopt;
    for (double& x : sum) x /= static_cast<double>(hits);
    return sum;
}

// Cosine similarity; 0 when either vector has zero norm.
inline double cosine(std::span<const double> u, std::span<const double> v) {
    if (u.size() != v.size())
        throw ContractViolation("cosine: dimension mismatch (" + std::to_string(u.size()) + " vs " +
                                std::to_string(v.size()) + ")");
    double dot = 0.0, nu = 0.0, nv = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        dot += u[i] * v[i];
        nu += u[i] * u[i];
        nv += v[i] * v[i];
    }
    if (nu == 0.0 || nv == 0.0) return 0.0;
    double c = dot / (std::sqrt(nu) * std::sqrt(nv));
    return std::clamp(c, -1.0, 1.0);
}

} // namespace revoutline
