#pragma once

// Abstractive summaries come from an external text-generation service. When
// no service is configured, or it fails, a local extractive fallback that
// honours the same length budget takes over.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "revoutline/embed.hpp"
#include "revoutline/errors.hpp"
#include "revoutline/rank.hpp"
#include "revoutline/textseg.hpp"

namespace revoutline {

struct GenerationParams {
    int num_beams = 4;
    int no_repeat_ngram_size = 2;
    bool early_stopping = true;
    double max_length_ratio = 0.70;
    std::size_t min_max_length = 5;

    // floor(ratio * source tokens), never below min_max_length.
    std::size_t max_length(std::size_t source_tokens) const {
        const auto scaled =
            static_cast<std::size_t>(std::floor(max_length_ratio * static_cast<double>(source_tokens) + 1e-9));
        return std::max(scaled, min_max_length);
    }

    // Cache-key fragment covering every field that changes the output.
    std::string descriptor() const {
        return "beams=" + std::to_string(num_beams) + ";nrng=" + std::to_string(no_repeat_ngram_size) +
               ";es=" + (early_stopping ? "1" : "0") + ";ratio=" + std::to_string(max_length_ratio) +
               ";min=" + std::to_string(min_max_length);
    }
};

enum class AbstractiveSource { external, fallback };

inline std::string_view to_string(AbstractiveSource source) {
    return source == AbstractiveSource::external ? "external" : "fallback";
}

struct AbstractiveResult {
    std::string summary;
    AbstractiveSource source = AbstractiveSource::fallback;
    std::int64_t latency_ms = 0;
    std::string degradation; // why an available endpoint was not used; empty otherwise
};

inline nlohmann::ordered_json build_inference_request(const Paragraph& paragraph, const GenerationParams& params) {
    nlohmann::ordered_json request;
    request["text"] = paragraph.text;
    request["num_beams"] = params.num_beams;
    request["no_repeat_ngram_size"] = params.no_repeat_ngram_size;
    request["early_stopping"] = params.early_stopping;
    request["max_length"] = params.max_length(paragraph.token_count());
    return request;
}

struct InferenceReply {
    std::optional<std::string> summary;
    std::string error;
};

class InferenceClient {
public:
    virtual ~InferenceClient() = default;
    virtual InferenceReply summarize(const nlohmann::ordered_json& request) = 0;
};

// POSTs the request to `<endpoint>/summarize` and expects {"summary": "..."} back.
class HttpInferenceClient final : public InferenceClient {
public:
    explicit HttpInferenceClient(std::string endpoint,
                                 std::chrono::milliseconds timeout = std::chrono::milliseconds(5000))
        : timeout_(timeout) {
        while (!endpoint.empty() && endpoint.back() == '/') endpoint.pop_back();
        const auto scheme = endpoint.find("://");
        const auto path = endpoint.find('/', scheme == std::string::npos ? 0 : scheme + 3);
        if (path == std::string::npos) {
            host_ = endpoint;
        } else {
            host_ = endpoint.substr(0, path);
            prefix_ = endpoint.substr(path);
        }
    }

    const std::string& host() const noexcept { return host_; }
    std::chrono::milliseconds timeout() const noexcept { return timeout_; }

    InferenceReply summarize(const nlohmann::ordered_json& request) override {
        httplib::Client client(host_);
        const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout_);
        const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout_ - secs);
        client.set_connection_timeout(secs.count(), usecs.count());
        client.set_read_timeout(secs.count(), usecs.count());
        client.set_write_timeout(secs.count(), usecs.count());

        auto response = client.Post(prefix_ + "/summarize", request.dump(), "application/json");
        if (!response) return {std::nullopt, "request failed: " + httplib::to_string(response.error())};
        if (response->status != 200) return {std::nullopt, "endpoint returned HTTP " + std::to_string(response->status)};

        auto body = nlohmann::json::parse(response->body, nullptr, false);
        if (body.is_discarded() || !body.is_object()) return {std::nullopt, "malformed payload: not a JSON object"};
        auto it = body.find("summary");
        if (it == body.end() || !it->is_string())
            return {std::nullopt, "malformed payload: missing string field 'summary'"};
        return {it->get<std::string>(), {}};
    }

private:
    std::string host_;
    std::string prefix_;
    std::chrono::milliseconds timeout_;
};

// Highest-ranked sentences, added greedily in rank order until the next one
// would overflow max_length tokens. The top sentence is always kept.
inline std::string fallback_summary(const EmbeddingStore& store, const Paragraph& paragraph,
                                    const GenerationParams& params, const PageRankOptions& options = {}) {
    if (paragraph.empty()) throw ContractViolation("abstractive summary: paragraph has no sentences");
    const auto budget = params.max_length(paragraph.token_count());
    const auto scores = rank_sentences(store, paragraph.sentences, options);
    const auto order = rank_order(scores);

    std::vector<std::size_t> chosen{order.front()};
    std::size_t used = paragraph.sentences[order.front()].tokens.size();
    for (std::size_t r = 1; r < order.size(); ++r) {
        const std::size_t cost = paragraph.sentences[order[r]].tokens.size();
        if (used + cost > budget) break;
        used += cost;
        chosen.push_back(order[r]);
    }
    std::sort(chosen.begin(), chosen.end());
    return join_sentences(paragraph, chosen);
}

inline AbstractiveResult summarize_abstractive(const EmbeddingStore& store, const Paragraph& paragraph,
                                               const GenerationParams& params, InferenceClient* client = nullptr,
                                               const PageRankOptions& options = {}) {
    if (paragraph.empty()) throw ContractViolation("abstractive summary: paragraph has no sentences");
    const auto started = std::chrono::steady_clock::now();
    AbstractiveResult result;

    if (client) {
        auto reply = client->summarize(build_inference_request(paragraph, params));
        if (reply.summary) {
            result.summary = std::move(*reply.summary);
            result.source = AbstractiveSource::external;
        } else {
            result.degradation = reply.error.empty() ? "endpoint failed" : std::move(reply.error);
        }
    }
    if (result.source == AbstractiveSource::fallback) result.summary = fallback_summary(store, paragraph, params, options);

    result.latency_ms =
        std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - started).count();
    return result;
}

} // namespace revoutline
