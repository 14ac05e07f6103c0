#pragma once

// Runtime configuration and the assembled engine used by both the server and the CLI.

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "revoutline/abstractive.hpp"
#include "revoutline/docstate.hpp"
#include "revoutline/embed.hpp"
#include "revoutline/errors.hpp"
#include "revoutline/keywords.hpp"
#include "revoutline/merge.hpp"
#include "revoutline/textseg.hpp"

namespace revoutline {

struct EngineConfig {
    std::string host = "127.0.0.1";
    int port = 8787;
    std::string embeddings_path;
    std::string abstractive_endpoint; // empty: local fallback only
    std::size_t cache_capacity = SummaryCache::default_capacity;
    int timeout_ms = 5000;
    std::size_t workers = 0; // 0: one per processor
    std::string stopwords_path;
    std::string abbreviations_path;
    std::string cache_snapshot; // loaded at start, written on shutdown when set
    std::string cors_origin = "*";

    // "host:port", ":port" or "host".
    void set_bind(std::string_view bind) {
        const auto colon = bind.rfind(':');
        if (colon == std::string_view::npos) {
            if (bind.empty()) throw ContractViolation("empty bind address");
            host = std::string(bind);
            return;
        }
        if (colon > 0) host = std::string(bind.substr(0, colon));
        const auto port_text = std::string(bind.substr(colon + 1));
        std::size_t used = 0;
        int value = -1;
        try {
            value = std::stoi(port_text, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != port_text.size() || value < 0 || value > 65535)
            throw ContractViolation("invalid port in bind address '" + std::string(bind) + "'");
        port = value;
    }

    std::string bind() const { return host + ":" + std::to_string(port); }

    // Every key is optional; unknown keys are rejected so typos surface.
    static EngineConfig from_json(const nlohmann::json& j) {
        if (!j.is_object()) throw FormatError(0, "config must be a JSON object");
        static const std::vector<std::string> known{"bind",          "host",          "port",
                                                    "embeddings_path", "abstractive_endpoint", "cache_capacity",
                                                    "timeout_ms",    "workers",       "stopwords_path",
                                                    "abbreviations_path", "cache_snapshot", "cors_origin"};
        for (const auto& [key, value] : j.items())
            if (std::find(known.begin(), known.end(), key) == known.end())
                throw FormatError(0, "unknown config key '" + key + "'");
        EngineConfig c;
        try {
            if (j.contains("bind")) c.set_bind(j["bind"].get<std::string>());
            c.host = j.value("host", c.host);
            c.port = j.value("port", c.port);
            c.embeddings_path = j.value("embeddings_path", c.embeddings_path);
            c.abstractive_endpoint = j.value("abstractive_endpoint", c.abstractive_endpoint);
            c.cache_capacity = j.value("cache_capacity", c.cache_capacity);
            c.timeout_ms = j.value("timeout_ms", c.timeout_ms);
            c.workers = j.value("workers", c.workers);
            c.stopwords_path = j.value("stopwords_path", c.stopwords_path);
            c.abbreviations_path = j.value("abbreviations_path", c.abbreviations_path);
            c.cache_snapshot = j.value("cache_snapshot", c.cache_snapshot);
            c.cors_origin = j.value("cors_origin", c.cors_origin);
        } catch (const nlohmann::json::exception& e) {
            throw FormatError(0, std::string("config: ") + e.what());
        }
        if (c.cache_capacity == 0) throw FormatError(0, "config: cache_capacity must be positive");
        if (c.timeout_ms <= 0) throw FormatError(0, "config: timeout_ms must be positive");
        return c;
    }

    static EngineConfig from_file(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) throw LoadError("cannot open config " + path.string());
        auto j = nlohmann::json::parse(in, nullptr, false);
        if (j.is_discarded()) throw FormatError(0, "config " + path.string() + " is not valid JSON");
        return from_json(j);
    }

    // EMBEDDINGS_PATH, ABSTRACTIVE_ENDPOINT, CACHE_CAPACITY, ABSTRACTIVE_TIMEOUT_MS.
    void apply_environment(const std::function<const char*(const char*)>& getenv_fn = [](const char* n) {
        return std::getenv(n);
    }) {
        if (const char* v = getenv_fn("EMBEDDINGS_PATH"); v && *v) embeddings_path = v;
        if (const char* v = getenv_fn("ABSTRACTIVE_ENDPOINT"); v && *v) abstractive_endpoint = v;
        if (const char* v = getenv_fn("CACHE_CAPACITY"); v && *v) {
            cache_capacity = std::stoul(v);
            if (cache_capacity == 0) throw ContractViolation("CACHE_CAPACITY must be positive");
        }
        if (const char* v = getenv_fn("ABSTRACTIVE_TIMEOUT_MS"); v && *v) {
            timeout_ms = std::stoi(v);
            if (timeout_ms <= 0) throw ContractViolation("ABSTRACTIVE_TIMEOUT_MS must be positive");
        }
    }
};

// Summarizer + cache + annotation engine with their shared resources.
class Engine {
public:
    Engine(std::shared_ptr<const EmbeddingStore> store, StopwordSet stopwords = StopwordSet::builtin(),
           AbbreviationList abbreviations = AbbreviationList::builtin(), GenerationParams params = {},
           std::shared_ptr<InferenceClient> client = nullptr,
           std::size_t cache_capacity = SummaryCache::default_capacity, std::size_t workers = 0)
        : abbreviations_(std::move(abbreviations)),
          summarizer_(std::move(store), std::move(stopwords), params, std::move(client)),
          cache_(cache_capacity),
          annotator_(summarizer_, &cache_, workers) {}

    static std::unique_ptr<Engine> from_config(const EngineConfig& config) {
        if (config.embeddings_path.empty())
            throw ContractViolation("no embeddings configured (set EMBEDDINGS_PATH or pass --embeddings)");
        auto store = std::make_shared<const EmbeddingStore>(load_glove(config.embeddings_path));
        auto stopwords = config.stopwords_path.empty() ? StopwordSet::builtin()
                                                       : StopwordSet::from_file(config.stopwords_path);
        auto abbreviations = config.abbreviations_path.empty()
                                 ? AbbreviationList::builtin()
                                 : AbbreviationList::from_file(config.abbreviations_path);
        std::shared_ptr<InferenceClient> client;
        if (!config.abstractive_endpoint.empty())
            client = std::make_shared<HttpInferenceClient>(config.abstractive_endpoint,
                                                           std::chrono::milliseconds(config.timeout_ms));
        auto engine = std::make_unique<Engine>(std::move(store), std::move(stopwords), std::move(abbreviations),
                                               GenerationParams{}, std::move(client), config.cache_capacity,
                                               config.workers);
        if (!config.cache_snapshot.empty() && std::filesystem::exists(config.cache_snapshot))
            engine->cache().load(config.cache_snapshot);
        return engine;
    }

    const AbbreviationList& abbreviations() const noexcept { return abbreviations_; }
    NlpSummarizer& summarizer() noexcept { return summarizer_; }
    SummaryCache& cache() noexcept { return cache_; }
    AnnotationEngine& annotator() noexcept { return annotator_; }

    std::vector<Paragraph> paragraphs(const std::vector<std::string>& texts) const {
        std::vector<Paragraph> out;
        out.reserve(texts.size());
        for (std::size_t i = 0; i < texts.size(); ++i) out.push_back(make_paragraph(texts[i], i, abbreviations_));
        return out;
    }

    std::vector<Card> cards(const std::vector<std::string>& texts, const SummaryLevel& level) {
        const auto ps = paragraphs(texts);
        return annotator_.annotate_all(ps, level);
    }

    MergeSuggestion merge(std::string_view a, std::string_view b) const {
        return suggest_merge(summarizer_.store(), make_paragraph(a, 0, abbreviations_),
                             make_paragraph(b, 1, abbreviations_), summarizer_.options());
    }

private:
    AbbreviationList abbreviations_;
    NlpSummarizer summarizer_;
    SummaryCache cache_;
    AnnotationEngine annotator_;
};

} // namespace revoutline
