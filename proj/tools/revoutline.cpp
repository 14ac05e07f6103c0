// revoutline: reverse outlines, the annotation server, ROUGE evaluation and a file watcher.

#include <chrono>
#include <csignal>
#include <cstdio>
#include <iostream>
#include <memory>
#include <optional>
#include <pthread.h>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "revoutline/api.hpp"
#include "revoutline/engine.hpp"
#include "revoutline/rougeval.hpp"
#include "revoutline/server.hpp"
#include "revoutline/watch.hpp"

namespace {

using namespace revoutline;

constexpr int exit_failure = 1;
constexpr int exit_usage = 2;

struct UsageError : Error {
    using Error::Error;
};

struct CommonOptions {
    std::string embeddings;
    std::string config;
};

EngineConfig resolve_config(const CommonOptions& opts) {
    EngineConfig config = opts.config.empty() ? EngineConfig{} : EngineConfig::from_file(opts.config);
    config.apply_environment();
    if (!opts.embeddings.empty()) config.embeddings_path = opts.embeddings;
    return config;
}

// The original level needs no vectors, so it runs without an embeddings file.
std::unique_ptr<Engine> make_engine(const EngineConfig& config, const SummaryLevel& level) {
    if (level.kind == LevelKind::original && config.embeddings_path.empty())
        return std::make_unique<Engine>(std::make_shared<const EmbeddingStore>(1));
    if (config.embeddings_path.empty())
        throw UsageError("no embeddings configured: set EMBEDDINGS_PATH or pass --embeddings");
    return Engine::from_config(config);
}

SummaryLevel parse_level(const std::string& name, std::size_t k) {
    auto level = SummaryLevel::parse(name, k);
    if (!level) throw UsageError("unknown level '" + name + "'");
    return *level;
}

int run_outline(const CommonOptions& common, const std::string& file, const std::string& level_name, std::size_t k,
                const std::string& format) {
    const auto text = read_text_file(file);
    const auto level = parse_level(level_name, k);
    auto engine = make_engine(resolve_config(common), level);
    const auto paragraphs = split_paragraphs(text, engine->abbreviations());
    const auto cards = engine->cards(api::paragraph_texts(paragraphs), level);

    if (format == "json") {
        std::cout << api::card_envelope(cards).dump();
    } else {
        for (std::size_t i = 0; i < cards.size(); ++i) std::cout << api::text_line(i, cards[i]) << '\n';
    }
    std::cout.flush();
    return 0;
}

int run_serve(const CommonOptions& common, const std::string& bind) {
    auto config = resolve_config(common);
    if (!bind.empty()) config.set_bind(bind);
    if (config.embeddings_path.empty())
        throw UsageError("no embeddings configured: set EMBEDDINGS_PATH, pass --embeddings or use a config file");
    auto engine = Engine::from_config(config);

    // Block termination signals here so a dedicated thread can wait for them.
    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);

    OutlineServer server(*engine, config.cors_origin);
    std::jthread waiter([&server, signals] {
        int received = 0;
        sigwait(&signals, &received);
        server.stop();
    });

    std::cerr << "revoutline: listening on " << config.bind() << std::endl;
    const bool ok = server.listen(config.host, config.port);
    if (!ok) {
        std::cerr << "revoutline: cannot listen on " << config.bind() << std::endl;
        pthread_kill(waiter.native_handle(), SIGTERM);
        return exit_failure;
    }
    if (!config.cache_snapshot.empty()) engine->cache().save(config.cache_snapshot);
    return 0;
}

int run_eval(const std::string& pairs_path, const std::string& format) {
    const auto pairs = read_pairs_jsonl(pairs_path);
    if (pairs.empty()) throw UsageError("corpus " + pairs_path + " contains no pairs");
    const auto report = evaluate_corpus(pairs);
    if (format == "json")
        std::cout << report.to_json().dump(2) << '\n';
    else
        std::cout << report.to_text();
    return 0;
}

int run_watch(const CommonOptions& common, const std::string& file, const std::string& level_name, std::size_t k,
              int poll_ms, int max_polls) {
    const auto level = parse_level(level_name, k);
    auto engine = make_engine(resolve_config(common), level);
    OutlineWatcher watcher(file, level, engine->annotator(), engine->abbreviations());
    for (int polls = 0; max_polls <= 0 || polls < max_polls; ++polls) {
        if (polls > 0) std::this_thread::sleep_for(std::chrono::milliseconds(poll_ms));
        auto update = watcher.poll();
        if (!update.reloaded) continue;
        for (const auto& [index, card] : update.cards) std::cout << api::text_line(index, card) << '\n';
        std::cout << "# computations: " << update.computations << std::endl;
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Paragraph-wise reverse outlines and summaries"};
    app.require_subcommand(1);
    app.fallthrough(); // --embeddings may follow the subcommand

    CommonOptions common;
    app.add_option("--embeddings", common.embeddings, "GloVe text file (.gz accepted); overrides EMBEDDINGS_PATH");

    const std::vector<std::string> levels{"original", "central", "extractive", "summary", "keywords"};

    std::string outline_file, outline_level, outline_format = "text";
    std::size_t outline_k = 1;
    auto* outline = app.add_subcommand("outline", "Print one card per paragraph");
    outline->add_option("file", outline_file, "UTF-8 text, paragraphs separated by blank lines")->required();
    outline->add_option("--level", outline_level, "Summary level")->required()->check(CLI::IsMember(levels));
    outline->add_option("--k", outline_k, "Sentences kept by the extractive level")->check(CLI::PositiveNumber);
    outline->add_option("--format", outline_format, "Output format")->check(CLI::IsMember({"json", "text"}));

    std::string serve_bind;
    auto* serve = app.add_subcommand("serve", "Run the HTTP API (default 127.0.0.1:8787)");
    serve->add_option("--bind", serve_bind, "host:port");
    serve->add_option("--config", common.config, "JSON config file");

    std::string eval_pairs, eval_format = "text";
    auto* eval = app.add_subcommand("eval", "Average ROUGE-1/2/L over candidate/reference pairs");
    eval->add_option("--pairs", eval_pairs, "JSON-lines corpus of {\"candidate\", \"reference\"}")->required();
    eval->add_option("--format", eval_format, "Report format")->check(CLI::IsMember({"json", "text"}));

    std::string watch_file, watch_level;
    std::size_t watch_k = 1;
    int poll_ms = 500, max_polls = 0;
    auto* watch = app.add_subcommand("watch", "Re-outline a file whenever it changes");
    watch->add_option("file", watch_file)->required();
    watch->add_option("--level", watch_level, "Summary level")->required()->check(CLI::IsMember(levels));
    watch->add_option("--k", watch_k, "Sentences kept by the extractive level")->check(CLI::PositiveNumber);
    watch->add_option("--poll-ms", poll_ms, "Polling interval in milliseconds")->check(CLI::PositiveNumber);
    watch->add_option("--max-polls", max_polls, "Stop after this many polls (0: run forever)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        // Help and version keep CLI11's 0; every other parse failure is a usage error.
        const int code = app.exit(e);
        return code == 0 ? 0 : exit_usage;
    }

    try {
        if (*outline) return run_outline(common, outline_file, outline_level, outline_k, outline_format);
        if (*serve) return run_serve(common, serve_bind);
        if (*eval) return run_eval(eval_pairs, eval_format);
        if (*watch) return run_watch(common, watch_file, watch_level, watch_k, poll_ms, max_polls);
    } catch (const UsageError& e) {
        std::cerr << "revoutline: " << e.what() << '\n';
        return exit_usage;
    } catch (const ContractViolation& e) {
        std::cerr << "revoutline: " << e.what() << '\n';
        return exit_usage;
    } catch (const std::exception& e) {
        std::cerr << "revoutline: " << e.what() << '\n';
        return exit_failure;
    }
    return exit_usage;
}
