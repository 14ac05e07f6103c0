#pragma once

// Document sessions and the content-hash keyed summary cache. A paragraph's
// card is computed once per (text, technique); edits, reorders and deletes
// only pay for paragraphs whose text is new.

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "revoutline/abstractive.hpp"
#include "revoutline/embed.hpp"
#include "revoutline/errors.hpp"
#include "revoutline/keywords.hpp"
#include "revoutline/merge.hpp"
#include "revoutline/rank.hpp"
#include "revoutline/textseg.hpp"

namespace revoutline {

enum class LevelKind { original, central, extractive, abstractive, keywords };

struct SummaryLevel {
    LevelKind kind = LevelKind::central;
    std::size_t k = 1; // sentences kept by the extractive level; 1 for central

    static SummaryLevel original() { return {LevelKind::original, 1}; }
    static SummaryLevel central() { return {LevelKind::central, 1}; }
    static SummaryLevel extractive(std::size_t k) {
        if (k == 0) throw ContractViolation("extractive level: k must be at least 1");
        return {LevelKind::extractive, k};
    }
    static SummaryLevel abstractive() { return {LevelKind::abstractive, 1}; }
    static SummaryLevel keywords() { return {LevelKind::keywords, 1}; }

    std::string name() const {
        switch (kind) {
        case LevelKind::original: return "original";
        case LevelKind::central: return "central";
        case LevelKind::extractive: return "extractive";
        case LevelKind::abstractive: return "summary";
        case LevelKind::keywords: return "keywords";
        }
        return "unknown";
    }

    // Accepts the level names used by the CLI and the HTTP API.
    static std::optional<SummaryLevel> parse(std::string_view name, std::size_t k = 1) {
        if (name == "original") return original();
        if (name == "central") return central();
        if (name == "summary" || name == "abstractive") return abstractive();
        if (name == "keywords") return keywords();
        if (name == "extractive") {
            if (k == 0) return std::nullopt;
            return extractive(k);
        }
        return std::nullopt;
    }

    friend bool operator==(const SummaryLevel&, const SummaryLevel&) = default;
};

// Card content for one paragraph at one level.
struct Card {
    LevelKind level = LevelKind::original;
    std::string text;
    std::vector<std::size_t> sentence_indices;     // central / extractive
    std::vector<std::string> keywords;             // keywords
    std::vector<double> keyword_scores;            // keywords
    std::optional<AbstractiveSource> source;       // abstractive
    std::string degradation;                       // abstractive; non-empty results are never cached

    friend bool operator==(const Card&, const Card&) = default;
};

inline std::string join_keywords(const std::vector<std::string>& keywords) {
    std::string out;
    for (const auto& k : keywords) {
        if (!out.empty()) out += ", ";
        out += k;
    }
    return out;
}

// Computes cards. technique() names everything that influences the output so
// it can key the cache.
class Summarizer {
public:
    virtual ~Summarizer() = default;
    virtual Card summarize(const Paragraph& paragraph, const SummaryLevel& level) = 0;
    virtual std::string technique(const SummaryLevel& level) const = 0;
};

class NlpSummarizer final : public Summarizer {
public:
    NlpSummarizer(std::shared_ptr<const EmbeddingStore> store, StopwordSet stopwords = StopwordSet::builtin(),
                  GenerationParams params = {}, std::shared_ptr<InferenceClient> client = nullptr,
                  PageRankOptions options = {})
        : store_(std::move(store)),
          stopwords_(std::move(stopwords)),
          params_(params),
          client_(std::move(client)),
          options_(options) {
        if (!store_) throw ContractViolation("summarizer needs an embedding store");
    }

    const EmbeddingStore& store() const noexcept { return *store_; }
    const StopwordSet& stopwords() const noexcept { return stopwords_; }
    const GenerationParams& params() const noexcept { return params_; }
    const PageRankOptions& options() const noexcept { return options_; }

    Card summarize(const Paragraph& paragraph, const SummaryLevel& level) override {
        Card card;
        card.level = level.kind;
        switch (level.kind) {
        case LevelKind::original:
            card.text = paragraph.text;
            break;
        case LevelKind::central:
        case LevelKind::extractive: {
            auto result = summarize_extractive(*store_, paragraph, level.kind == LevelKind::central ? 1 : level.k, options_);
            card.sentence_indices = result.selected;
            card.text = join_sentences(paragraph, result.selected);
            break;
        }
        case LevelKind::abstractive: {
            auto result = summarize_abstractive(*store_, paragraph, params_, client_.get(), options_);
            card.text = std::move(result.summary);
            card.source = result.source;
            card.degradation = std::move(result.degradation);
            break;
        }
        case LevelKind::keywords: {
            auto result = extract_keywords(*store_, paragraph, stopwords_);
            card.text = join_keywords(result.keywords);
            card.keywords = std::move(result.keywords);
            card.keyword_scores = std::move(result.scores);
            break;
        }
        }
        return card;
    }

    std::string technique(const SummaryLevel& level) const override {
        switch (level.kind) {
        case LevelKind::original: return "original";
        case LevelKind::central: return "central";
        case LevelKind::extractive: return "extractive:k=" + std::to_string(level.k);
        case LevelKind::abstractive:
            return "abstractive:" + params_.descriptor() + (client_ ? ";external" : ";local");
        case LevelKind::keywords: return "keywords:n=" + std::to_string(max_keywords);
        }
        return "unknown";
    }

private:
    std::shared_ptr<const EmbeddingStore> store_;
    StopwordSet stopwords_;
    GenerationParams params_;
    std::shared_ptr<InferenceClient> client_;
    PageRankOptions options_;
};

// ---------------------------------------------------------------------------
// Cache
// ---------------------------------------------------------------------------

struct CacheKey {
    std::uint64_t content_hash = 0;
    std::string technique;

    friend bool operator==(const CacheKey&, const CacheKey&) = default;
};

struct CacheKeyHash {
    std::size_t operator()(const CacheKey& key) const noexcept {
        return static_cast<std::size_t>(key.content_hash ^ (std::hash<std::string>{}(key.technique) * 0x9e3779b97f4a7c15ULL));
    }
};

inline std::string level_kind_name(LevelKind kind) { return SummaryLevel{kind, 1}.name(); }

inline LevelKind level_kind_from_name(std::string_view name) {
    auto level = SummaryLevel::parse(name, 1);
    if (!level) throw FormatError(0, "unknown level '" + std::string(name) + "'");
    return level->kind;
}

inline nlohmann::ordered_json card_to_json(const Card& card) {
    nlohmann::ordered_json j;
    j["level"] = level_kind_name(card.level);
    j["text"] = card.text;
    j["sentence_indices"] = card.sentence_indices;
    j["keywords"] = card.keywords;
    j["keyword_scores"] = card.keyword_scores;
    if (card.source) j["source"] = to_string(*card.source);
    return j;
}

inline Card card_from_json(const nlohmann::json& j) {
    Card card;
    card.level = level_kind_from_name(j.at("level").get<std::string>());
    card.text = j.at("text").get<std::string>();
    card.sentence_indices = j.at("sentence_indices").get<std::vector<std::size_t>>();
    card.keywords = j.at("keywords").get<std::vector<std::string>>();
    card.keyword_scores = j.at("keyword_scores").get<std::vector<double>>();
    if (auto it = j.find("source"); it != j.end())
        card.source = it->get<std::string>() == "external" ? AbstractiveSource::external : AbstractiveSource::fallback;
    return card;
}

// LRU cache of cards. Lookups share a read lock; recency is an atomic tick so
// readers never need the write lock.
class SummaryCache {
public:
    static constexpr std::size_t default_capacity = 10000;

    explicit SummaryCache(std::size_t capacity = default_capacity) : capacity_(capacity) {
        if (capacity == 0) throw ContractViolation("cache capacity must be positive");
    }

    std::optional<Card> find(const CacheKey& key) const {
        std::shared_lock lock(mutex_);
        auto it = entries_.find(key);
        if (it == entries_.end()) {
            misses_.fetch_add(1, std::memory_order_relaxed);
            return std::nullopt;
        }
        hits_.fetch_add(1, std::memory_order_relaxed);
        it->second.last_used.store(clock_.fetch_add(1, std::memory_order_relaxed) + 1, std::memory_order_relaxed);
        return it->second.card;
    }

    bool contains(const CacheKey& key) const {
        std::shared_lock lock(mutex_);
        return entries_.contains(key);
    }

    void insert(const CacheKey& key, Card card) {
        std::unique_lock lock(mutex_);
        const auto tick = clock_.fetch_add(1, std::memory_order_relaxed) + 1;
        if (auto it = entries_.find(key); it != entries_.end()) {
            it->second.card = std::move(card);
            it->second.last_used.store(tick, std::memory_order_relaxed);
            return;
        }
        if (entries_.size() >= capacity_) evict_oldest();
        auto [it, inserted] = entries_.try_emplace(key);
        it->second.card = std::move(card);
        it->second.last_used.store(tick, std::memory_order_relaxed);
    }

    std::size_t size() const {
        std::shared_lock lock(mutex_);
        return entries_.size();
    }

    std::size_t capacity() const noexcept { return capacity_; }
    std::uint64_t hits() const noexcept { return hits_.load(); }
    std::uint64_t misses() const noexcept { return misses_.load(); }

    void clear() {
        std::unique_lock lock(mutex_);
        entries_.clear();
    }

    // Snapshot layout (JSON):
    // {"format":"revoutline-cache","version":1,
    //  "entries":[{"hash":"<16 hex digits>","technique":"...","card":{...}}, ...]}
    // Entries are written least recently used first so a reload keeps LRU order.
    nlohmann::ordered_json snapshot() const {
        std::shared_lock lock(mutex_);
        std::vector<std::pair<std::uint64_t, const std::pair<const CacheKey, Entry>*>> ordered;
        ordered.reserve(entries_.size());
        for (const auto& kv : entries_) ordered.emplace_back(kv.second.last_used.load(), &kv);
        std::sort(ordered.begin(), ordered.end(), [](const auto& x, const auto& y) { return x.first < y.first; });

        nlohmann::ordered_json out;
        out["format"] = "revoutline-cache";
        out["version"] = 1;
        out["entries"] = nlohmann::ordered_json::array();
        for (const auto& [tick, kv] : ordered) {
            char hex[17];
            std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(kv->first.content_hash));
            nlohmann::ordered_json e;
            e["hash"] = hex;
            e["technique"] = kv->first.technique;
            e["card"] = card_to_json(kv->second.card);
            out["entries"].push_back(std::move(e));
        }
        return out;
    }

    void restore(const nlohmann::json& snapshot) {
        if (snapshot.value("format", "") != "revoutline-cache" || snapshot.value("version", 0) != 1)
            throw FormatError(0, "not a revoutline cache snapshot (version 1)");
        for (const auto& e : snapshot.at("entries")) {
            const auto hex = e.at("hash").get<std::string>();
            CacheKey key{std::stoull(hex, nullptr, 16), e.at("technique").get<std::string>()};
            insert(key, card_from_json(e.at("card")));
        }
    }

    void save(const std::filesystem::path& path) const {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw LoadError("cannot write " + path.string());
        out << snapshot().dump();
    }

    void load(const std::filesystem::path& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw LoadError("cannot open " + path.string());
        auto j = nlohmann::json::parse(in, nullptr, false);
        if (j.is_discarded()) throw FormatError(0, "cache snapshot is not valid JSON");
        try {
            restore(j);
        } catch (const nlohmann::json::exception& e) {
            throw FormatError(0, std::string("cache snapshot: ") + e.what());
        }
    }

private:
    struct Entry {
        Card card;
        mutable std::atomic<std::uint64_t> last_used{0};
    };

    void evict_oldest() {
        auto victim = entries_.begin();
        for (auto it = entries_.begin(); it != entries_.end(); ++it)
            if (it->second.last_used.load(std::memory_order_relaxed) < victim->second.last_used.load(std::memory_order_relaxed))
                victim = it;
        if (victim != entries_.end()) entries_.erase(victim);
    }

    std::size_t capacity_;
    mutable std::shared_mutex mutex_;
    std::unordered_map<CacheKey, Entry, CacheKeyHash> entries_;
    mutable std::atomic<std::uint64_t> clock_{0};
    mutable std::atomic<std::uint64_t> hits_{0};
    mutable std::atomic<std::uint64_t> misses_{0};
};

// ---------------------------------------------------------------------------
// Annotation
// ---------------------------------------------------------------------------

// Runs a Summarizer behind an optional cache. Without a cache every call recomputes.
class AnnotationEngine {
public:
    AnnotationEngine(Summarizer& summarizer, SummaryCache* cache = nullptr, std::size_t workers = 0)
        : summarizer_(summarizer), cache_(cache), workers_(workers ? workers : default_workers()) {}

    static std::size_t default_workers() { return std::max(1u, std::thread::hardware_concurrency()); }

    Summarizer& summarizer() noexcept { return summarizer_; }
    SummaryCache* cache() noexcept { return cache_; }
    std::size_t workers() const noexcept { return workers_; }

    // Number of summarizer invocations so far.
    std::size_t computations() const noexcept { return computations_.load(); }

    Card annotate(const Paragraph& paragraph, const SummaryLevel& level,
                  std::atomic<std::int64_t>* in_flight = nullptr) {
        return std::move(annotate_all(std::span<const Paragraph>(&paragraph, 1), level, in_flight).front());
    }

    // One card per paragraph. Misses are deduplicated by content hash and
    // computed on up to workers() threads; `in_flight`, when given, counts the
    // computations that are scheduled but not finished.
    std::vector<Card> annotate_all(std::span<const Paragraph> paragraphs, const SummaryLevel& level,
                                   std::atomic<std::int64_t>* in_flight = nullptr) {
        std::vector<Card> cards(paragraphs.size());
        struct Miss {
            CacheKey key;
            std::vector<std::size_t> slots;
            Card card;
        };
        std::vector<Miss> misses;
        std::unordered_map<CacheKey, std::size_t, CacheKeyHash> miss_index;
        const std::string technique =
            level.kind == LevelKind::original ? std::string() : summarizer_.technique(level);

        for (std::size_t i = 0; i < paragraphs.size(); ++i) {
            const auto& p = paragraphs[i];
            cards[i].level = level.kind;
            if (level.kind == LevelKind::original) {
                cards[i].text = p.text;
                continue;
            }
            if (p.empty()) {
                if (level.kind == LevelKind::abstractive) cards[i].source = AbstractiveSource::fallback;
                continue;
            }
            CacheKey key{p.content_hash, technique};
            if (auto it = miss_index.find(key); it != miss_index.end()) {
                misses[it->second].slots.push_back(i);
                continue;
            }
            if (cache_) {
                if (auto hit = cache_->find(key)) {
                    cards[i] = std::move(*hit);
                    continue;
                }
            }
            miss_index.emplace(key, misses.size());
            misses.push_back({std::move(key), {i}, {}});
        }

        if (in_flight) in_flight->fetch_add(static_cast<std::int64_t>(misses.size()));
        std::atomic<std::size_t> next{0};
        std::exception_ptr failure;
        std::mutex failure_mutex;
        auto work = [&] {
            for (std::size_t m; (m = next.fetch_add(1)) < misses.size();) {
                try {
                    misses[m].card = summarizer_.summarize(paragraphs[misses[m].slots.front()], level);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                }
                computations_.fetch_add(1);
                if (in_flight) in_flight->fetch_sub(1);
            }
        };
        const std::size_t threads = std::min(workers_, misses.size());
        if (threads <= 1) {
            work();
        } else {
            std::vector<std::jthread> pool;
            for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(work);
        }
        if (failure) std::rethrow_exception(failure);

        for (auto& miss : misses) {
            if (cache_ && miss.card.degradation.empty()) cache_->insert(miss.key, miss.card);
            for (std::size_t slot : miss.slots) cards[slot] = miss.card;
        }
        return cards;
    }

private:
    Summarizer& summarizer_;
    SummaryCache* cache_;
    std::size_t workers_;
    std::atomic<std::size_t> computations_{0};
};

// ---------------------------------------------------------------------------
// Sessions
// ---------------------------------------------------------------------------

struct EditDiff {
    std::vector<std::size_t> changed; // new-text indices whose content is new (edited or added)
    std::vector<std::size_t> removed; // old indices whose content no longer appears

    bool empty() const noexcept { return changed.empty() && removed.empty(); }
};

// Compares documents by content hash, matching equal hashes one-to-one.
inline EditDiff diff_paragraphs(std::span<const Paragraph> before, std::span<const Paragraph> after) {
    std::unordered_map<std::uint64_t, std::vector<std::size_t>> pending;
    for (std::size_t i = before.size(); i-- > 0;) pending[before[i].content_hash].push_back(i);

    EditDiff diff;
    std::vector<bool> matched(before.size(), false);
    for (std::size_t i = 0; i < after.size(); ++i) {
        auto it = pending.find(after[i].content_hash);
        if (it == pending.end() || it->second.empty()) {
            diff.changed.push_back(i);
            continue;
        }
        matched[it->second.back()] = true;
        it->second.pop_back();
    }
    for (std::size_t i = 0; i < before.size(); ++i)
        if (!matched[i]) diff.removed.push_back(i);
    return diff;
}

// One live document. Cards and text paragraphs always share one order;
// card_order() reports the card ids, which are assigned 0..n-1 on each full
// text update and then travel with their paragraph.
class DocumentSession {
public:
    explicit DocumentSession(std::string id, const AbbreviationList& abbreviations = AbbreviationList::builtin())
        : id_(std::move(id)), abbreviations_(&abbreviations) {}

    const std::string& id() const noexcept { return id_; }
    std::uint64_t revision() const noexcept { return revision_; }
    const std::vector<Paragraph>& paragraphs() const noexcept { return paragraphs_; }
    const std::vector<std::size_t>& card_order() const noexcept { return card_ids_; }
    std::size_t size() const noexcept { return paragraphs_.size(); }

    // Paragraphs joined by one blank line.
    std::string text() const {
        std::string out;
        for (const auto& p : paragraphs_) {
            if (!out.empty()) out += "\n\n";
            out += p.text;
        }
        return out;
    }

    EditDiff apply_edit(std::string_view new_text) {
        auto next = split_paragraphs(new_text, *abbreviations_);
        auto diff = diff_paragraphs(paragraphs_, next);
        paragraphs_ = std::move(next);
        card_ids_.resize(paragraphs_.size());
        for (std::size_t i = 0; i < card_ids_.size(); ++i) card_ids_[i] = i;
        ++revision_;
        return diff;
    }

    const std::vector<std::size_t>& reorder_cards(std::size_t from, std::size_t to) {
        check_index(from, "reorder");
        check_index(to, "reorder");
        move_element(paragraphs_, from, to);
        move_element(card_ids_, from, to);
        renumber();
        ++revision_;
        return card_ids_;
    }

    void delete_card(std::size_t index) {
        check_index(index, "delete");
        paragraphs_.erase(paragraphs_.begin() + static_cast<std::ptrdiff_t>(index));
        card_ids_.erase(card_ids_.begin() + static_cast<std::ptrdiff_t>(index));
        renumber();
        ++revision_;
    }

    // Replaces paragraphs a and b with the suggestion's merged text at a's position.
    void accept_merge(std::size_t a, std::size_t b, const MergeSuggestion& suggestion) {
        check_index(a, "merge");
        check_index(b, "merge");
        if (a == b) throw ContractViolation("merge: a and b must differ");
        if (paragraphs_[a].content_hash != suggestion.a_hash || paragraphs_[b].content_hash != suggestion.b_hash)
            throw Conflict("merge suggestion is stale: paragraph text changed since it was computed");
        paragraphs_[a] = make_paragraph(suggestion.merged_text, a, *abbreviations_);
        paragraphs_.erase(paragraphs_.begin() + static_cast<std::ptrdiff_t>(b));
        card_ids_.erase(card_ids_.begin() + static_cast<std::ptrdiff_t>(b));
        renumber();
        ++revision_;
    }

private:
    void check_index(std::size_t i, const char* op) const {
        if (i >= paragraphs_.size())
            throw ContractViolation(std::string(op) + ": index " + std::to_string(i) + " out of range (" +
                                    std::to_string(paragraphs_.size()) + " cards)");
    }

    template <typename T>
    static void move_element(std::vector<T>& v, std::size_t from, std::size_t to) {
        if (from < to)
            std::rotate(v.begin() + from, v.begin() + from + 1, v.begin() + to + 1);
        else if (to < from)
            std::rotate(v.begin() + to, v.begin() + from, v.begin() + from + 1);
    }

    void renumber() {
        for (std::size_t i = 0; i < paragraphs_.size(); ++i) paragraphs_[i].index = i;
    }

    std::string id_;
    const AbbreviationList* abbreviations_;
    std::uint64_t revision_ = 0;
    std::vector<Paragraph> paragraphs_;
    std::vector<std::size_t> card_ids_;
};

inline std::vector<Card> annotate_document(AnnotationEngine& engine, const DocumentSession& session,
                                           const SummaryLevel& level, std::atomic<std::int64_t>* in_flight = nullptr) {
    return engine.annotate_all(session.paragraphs(), level, in_flight);
}

// A session plus the state the server keeps next to it. Mutations take `mutex`.
struct SessionSlot {
    explicit SessionSlot(std::string id, const AbbreviationList& abbreviations) : session(std::move(id), abbreviations) {}

    std::mutex mutex;
    DocumentSession session;
    SummaryLevel active_level = SummaryLevel::central();
    std::atomic<std::int64_t> pending{0};
    std::atomic<std::uint64_t> revision{0};
};

class SessionRegistry {
public:
    explicit SessionRegistry(const AbbreviationList& abbreviations = AbbreviationList::builtin())
        : abbreviations_(&abbreviations), rng_(std::random_device{}()) {}

    std::shared_ptr<SessionSlot> create() {
        std::lock_guard lock(mutex_);
        std::string id;
        do {
            char buf[17];
            std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(rng_()));
            id = buf;
        } while (sessions_.contains(id));
        auto slot = std::make_shared<SessionSlot>(id, *abbreviations_);
        sessions_.emplace(id, slot);
        return slot;
    }

    std::shared_ptr<SessionSlot> find(const std::string& id) const {
        std::lock_guard lock(mutex_);
        auto it = sessions_.find(id);
        if (it == sessions_.end()) throw NotFound("unknown session '" + id + "'");
        return it->second;
    }

    bool erase(const std::string& id) {
        std::lock_guard lock(mutex_);
        return sessions_.erase(id) > 0;
    }

    std::size_t size() const {
        std::lock_guard lock(mutex_);
        return sessions_.size();
    }

private:
    const AbbreviationList* abbreviations_;
    mutable std::mutex mutex_;
    std::mt19937_64 rng_;
    std::unordered_map<std::string, std::shared_ptr<SessionSlot>> sessions_;
};

} // namespace revoutline
