#pragma once

#include <atomic>
#include <cctype>
#include <chrono>
#include <cstddef>
#include <memory>
#include <mutex>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <arpa/inet.h>
#include <httplib.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include "revoutline/docstate.hpp"
#include "revoutline/embed.hpp"
#include "revoutline/textseg.hpp"

namespace fixtures {

using namespace revoutline;

// Rounds through float so test-side vectors equal what the store keeps.
inline std::vector<double> as_stored(std::vector<double> v) {
    for (double& x : v) x = static_cast<double>(static_cast<float>(x));
    return v;
}

// A paragraph whose i-th sentence is the single token "s<i>" carrying embeddings[i].
// An empty embedding leaves the token out of the store (no embedding).
struct SyntheticParagraph {
    std::shared_ptr<EmbeddingStore> store;
    Paragraph paragraph;
    std::vector<std::vector<double>> embeddings; // float-rounded
};

inline Paragraph paragraph_from_tokens(const std::vector<std::vector<std::string>>& sentence_tokens) {
    Paragraph p;
    for (std::size_t i = 0; i < sentence_tokens.size(); ++i) {
        std::string text;
        for (const auto& t : sentence_tokens[i]) text += (text.empty() ? "" : " ") + t;
        text += ".";
        text[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(text[0])));
        if (!p.text.empty()) p.text += ' ';
        Sentence s;
        s.index = i;
        s.span = {p.text.size(), p.text.size() + text.size()};
        s.text = text;
        s.tokens = sentence_tokens[i];
        p.text += text;
        p.sentences.push_back(std::move(s));
    }
    p.content_hash = content_hash(p.text);
    return p;
}

inline SyntheticParagraph synthetic_paragraph(const std::vector<std::vector<double>>& embeddings,
                                              std::shared_ptr<EmbeddingStore> store = nullptr,
                                              const std::string& prefix = "s") {
    SyntheticParagraph out;
    const std::size_t dim = embeddings.front().empty() ? 2 : embeddings.front().size();
    out.store = store ? std::move(store) : std::make_shared<EmbeddingStore>(dim);
    std::vector<std::vector<std::string>> tokens;
    for (std::size_t i = 0; i < embeddings.size(); ++i) {
        const std::string token = prefix + std::to_string(i);
        tokens.push_back({token});
        auto v = as_stored(embeddings[i]);
        if (!v.empty()) out.store->insert(token, v);
        out.embeddings.push_back(std::move(v));
    }
    out.paragraph = paragraph_from_tokens(tokens);
    return out;
}

// Wraps a summarizer and counts how often it is asked to compute.
class CountingSummarizer final : public Summarizer {
public:
    explicit CountingSummarizer(Summarizer& inner) : inner_(inner) {}

    Card summarize(const Paragraph& paragraph, const SummaryLevel& level) override {
        calls_.fetch_add(1);
        return inner_.summarize(paragraph, level);
    }
    std::string technique(const SummaryLevel& level) const override { return inner_.technique(level); }

    std::size_t calls() const { return calls_.load(); }

private:
    Summarizer& inner_;
    std::atomic<std::size_t> calls_{0};
};

// Deterministic stand-in that needs no embeddings: the card is the first sentence, tagged.
class EchoSummarizer final : public Summarizer {
public:
    Card summarize(const Paragraph& paragraph, const SummaryLevel& level) override {
        calls_.fetch_add(1);
        Card card;
        card.level = level.kind;
        card.text = level.name() + ":" + paragraph.sentences.front().text;
        card.sentence_indices = {0};
        return card;
    }
    std::string technique(const SummaryLevel& level) const override {
        return "echo:" + level.name() + ":" + std::to_string(level.k);
    }
    std::size_t calls() const { return calls_.load(); }

private:
    std::atomic<std::size_t> calls_{0};
};

struct MockBehavior {
    std::string body = R"({"summary":"X"})";
    int status = 200;
    std::chrono::milliseconds delay{0};
};

// Reference stand-in for the external summarization service.
class MockEndpoint {
public:
    using Behavior = MockBehavior;

    explicit MockEndpoint(Behavior behavior = Behavior()) : behavior_(std::move(behavior)) {
        server_.Post("/summarize", [this](const httplib::Request& req, httplib::Response& res) {
            Behavior b;
            {
                std::lock_guard lock(mutex_);
                requests_.push_back(req.body);
                b = behavior_;
            }
            if (b.delay.count() > 0) std::this_thread::sleep_for(b.delay);
            res.status = b.status;
            res.set_content(b.body, "application/json");
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }

    ~MockEndpoint() {
        server_.stop();
        thread_.join();
    }

    std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }
    int port() const { return port_; }

    std::vector<std::string> requests() const {
        std::lock_guard lock(mutex_);
        return requests_;
    }

    void set_behavior(Behavior behavior) {
        std::lock_guard lock(mutex_);
        behavior_ = std::move(behavior);
    }

private:
    mutable std::mutex mutex_;
    Behavior behavior_;
    std::vector<std::string> requests_;
    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
};

// A loopback port that nothing listens on. A plain socket is bound and closed:
// httplib's probe would keep a SO_REUSEPORT listener open and steal connections.
inline int unused_port() {
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = 0;
    socklen_t len = sizeof addr;
    int port = 0;
    if (fd >= 0 && ::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) == 0 &&
        ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len) == 0)
        port = ntohs(addr.sin_port);
    if (fd >= 0) ::close(fd);
    return port;
}

// Pseudo-words built from syllables so ICU tokenization sees ordinary letters.
inline std::string pseudo_word(std::size_t id) {
    static const char* syllables[] = {"ka", "lo", "mi", "ne", "ru", "sa", "te", "vo", "zi", "pa", "do", "fe"};
    std::string word;
    std::size_t x = id + 1;
    while (x > 0) {
        word += syllables[x % 12];
        x /= 12;
    }
    return word;
}

inline std::shared_ptr<EmbeddingStore> random_store(std::size_t vocab, std::size_t dim, std::uint64_t seed) {
    auto store = std::make_shared<EmbeddingStore>(dim);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> v(dim);
    for (std::size_t i = 0; i < vocab; ++i) {
        for (double& x : v) x = normal(rng);
        store->insert(pseudo_word(i), v);
    }
    return store;
}

// Sentences of `words_per_sentence` pseudo-words drawn from [0, vocab).
inline std::string random_paragraph(std::mt19937_64& rng, std::size_t words, std::size_t vocab,
                                    std::size_t words_per_sentence = 20) {
    std::uniform_int_distribution<std::size_t> pick(0, vocab - 1);
    std::string text;
    for (std::size_t w = 0; w < words; ++w) {
        std::string word = pseudo_word(pick(rng));
        const bool starts = w % words_per_sentence == 0;
        if (starts) word[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(word[0])));
        if (w > 0) text += ' ';
        text += word;
        if ((w + 1) % words_per_sentence == 0 || w + 1 == words) text += '.';
    }
    return text;
}

} // namespace fixtures
