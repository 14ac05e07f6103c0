#include <catch_amalgamated.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "revoutline/docstate.hpp"
#include "support/fixtures.hpp"

using namespace revoutline;
using Indices = std::vector<std::size_t>;
using Strings = std::vector<std::string>;

namespace {

std::string join(const Strings& paragraphs) {
    std::string out;
    for (const auto& p : paragraphs) out += (out.empty() ? "" : "\n\n") + p;
    return out;
}

Strings paragraph_texts(const DocumentSession& s) {
    Strings out;
    for (const auto& p : s.paragraphs()) out.push_back(p.text);
    return out;
}

Strings numbered(std::size_t n, const std::string& stem = "Paragraph") {
    Strings out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(stem + " " + std::to_string(i) + " opens here. It then closes.");
    return out;
}

struct TempFile {
    std::filesystem::path path = std::filesystem::temp_directory_path() /
                                 ("revoutline-cache-" + std::to_string(std::random_device{}()) + ".json");
    ~TempFile() { std::filesystem::remove(path); }
};

} // namespace

TEST_CASE("SummaryLevel: names and parsing", "[docstate]") {
    CHECK(SummaryLevel::parse("original") == SummaryLevel::original());
    CHECK(SummaryLevel::parse("central") == SummaryLevel::central());
    CHECK(SummaryLevel::parse("summary") == SummaryLevel::abstractive());
    CHECK(SummaryLevel::parse("abstractive") == SummaryLevel::abstractive());
    CHECK(SummaryLevel::parse("keywords") == SummaryLevel::keywords());
    CHECK(SummaryLevel::parse("extractive", 3) == SummaryLevel::extractive(3));
    CHECK_FALSE(SummaryLevel::parse("extractive", 0));
    CHECK_FALSE(SummaryLevel::parse("zoom"));
    CHECK(SummaryLevel::abstractive().name() == "summary");
    CHECK_THROWS_AS(SummaryLevel::extractive(0), ContractViolation);
}

TEST_CASE("annotate_document: documented examples", "[docstate]") {
    fixtures::EchoSummarizer echo;
    SummaryCache cache;
    AnnotationEngine engine(echo, &cache, 1);
    DocumentSession session("s");
    session.apply_edit(join(numbered(3)));

    SECTION("no edits, second pass is free") {
        annotate_document(engine, session, SummaryLevel::central());
        CHECK(engine.computations() == 3);
        annotate_document(engine, session, SummaryLevel::central());
        CHECK(engine.computations() == 3);
        CHECK(cache.hits() == 3);
    }
    SECTION("editing one paragraph costs one computation") {
        annotate_document(engine, session, SummaryLevel::central());
        auto texts = numbered(3);
        texts[1] = "Something else entirely.";
        session.apply_edit(join(texts));
        annotate_document(engine, session, SummaryLevel::central());
        CHECK(engine.computations() == 4);
    }
    SECTION("original level is the identity and costs nothing") {
        const auto cards = annotate_document(engine, session, SummaryLevel::original());
        REQUIRE(cards.size() == 3);
        for (std::size_t i = 0; i < 3; ++i) CHECK(cards[i].text == session.paragraphs()[i].text);
        CHECK(echo.calls() == 0);
    }
    SECTION("levels are cached independently") {
        annotate_document(engine, session, SummaryLevel::central());
        annotate_document(engine, session, SummaryLevel::keywords());
        annotate_document(engine, session, SummaryLevel::extractive(2));
        annotate_document(engine, session, SummaryLevel::extractive(3));
        CHECK(engine.computations() == 12);
        annotate_document(engine, session, SummaryLevel::extractive(2));
        CHECK(engine.computations() == 12);
    }
}

TEST_CASE("annotate_all: duplicates and empty paragraphs", "[docstate]") {
    fixtures::EchoSummarizer echo;
    AnnotationEngine engine(echo, nullptr, 1);
    std::vector<Paragraph> ps{make_paragraph("Same. Text."), make_paragraph("Same. Text."), make_paragraph(" "),
                              make_paragraph("Other.")};
    const auto cards = engine.annotate_all(ps, SummaryLevel::central());
    CHECK(echo.calls() == 2);
    CHECK(cards[0] == cards[1]);
    CHECK(cards[2].text.empty());
    CHECK(cards[2].sentence_indices.empty());
    CHECK(cards[3].text == "central:Other.");
}

TEST_CASE("annotate_all: parallel workers give the serial result and track in-flight work", "[docstate]") {
    const auto store = fixtures::random_store(80, 8, 2);
    NlpSummarizer nlp(store);
    std::mt19937_64 rng(3);
    std::vector<Paragraph> ps;
    for (std::size_t i = 0; i < 40; ++i) ps.push_back(make_paragraph(fixtures::random_paragraph(rng, 30, 80, 6), i));

    AnnotationEngine serial(nlp, nullptr, 1);
    AnnotationEngine parallel(nlp, nullptr, 4);
    std::atomic<std::int64_t> in_flight{0};
    for (auto level : {SummaryLevel::central(), SummaryLevel::extractive(2), SummaryLevel::keywords(),
                       SummaryLevel::abstractive()}) {
        CHECK(parallel.annotate_all(ps, level, &in_flight) == serial.annotate_all(ps, level));
        CHECK(in_flight.load() == 0);
    }
}

TEST_CASE("apply_edit: diffs", "[docstate]") {
    DocumentSession session("s");
    const auto texts = numbered(4);
    auto first = session.apply_edit(join(texts));
    CHECK(first.changed == Indices{0, 1, 2, 3});
    CHECK(first.removed.empty());

    SECTION("identical text") {
        CHECK(session.apply_edit(join(texts)).empty());
    }
    SECTION("split one paragraph with a blank line") {
        auto edited = texts;
        edited[2] = "Paragraph 2 opens here.\n\nIt then closes.";
        const auto diff = session.apply_edit(join(edited));
        CHECK(session.size() == 5);
        CHECK(diff.changed == Indices{2, 3});
        CHECK(diff.removed == Indices{2});
    }
    SECTION("delete a paragraph") {
        auto edited = texts;
        edited.erase(edited.begin() + 1);
        const auto diff = session.apply_edit(join(edited));
        CHECK(diff.changed.empty());
        CHECK(diff.removed == Indices{1});
    }
    SECTION("duplicate paragraphs are matched one to one") {
        auto edited = texts;
        edited.push_back(texts[0]);
        const auto diff = session.apply_edit(join(edited));
        CHECK(diff.changed == Indices{4});
        CHECK(diff.removed.empty());
    }
    SECTION("revision increases on every edit") {
        const auto before = session.revision();
        session.apply_edit(join(texts));
        CHECK(session.revision() == before + 1);
    }
}

TEST_CASE("reorder_cards: examples and bijection", "[docstate]") {
    DocumentSession session("s");
    session.apply_edit("A.\n\nB.\n\nC.");
    const auto rev = session.revision();
    CHECK(session.reorder_cards(1, 1) == Indices{0, 1, 2});
    CHECK(session.revision() == rev + 1);
    CHECK(session.reorder_cards(0, 2) == Indices{1, 2, 0});
    CHECK(paragraph_texts(session) == Strings{"B.", "C.", "A."});
    CHECK(session.text() == "B.\n\nC.\n\nA.");
    CHECK_THROWS_AS(session.reorder_cards(0, 3), ContractViolation);
    CHECK_THROWS_AS(session.reorder_cards(5, 0), ContractViolation);

    std::mt19937_64 rng(12);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 1 + static_cast<std::size_t>(trial % 12);
        Strings texts;
        for (std::size_t i = 0; i < n; ++i) texts.push_back("P" + std::to_string(i) + ".");
        DocumentSession s("p");
        s.apply_edit(join(texts));
        Strings model = texts;
        std::uniform_int_distribution<std::size_t> pick(0, n - 1);
        for (int step = 0; step < 30; ++step) {
            const auto from = pick(rng), to = pick(rng);
            auto moved = model[from];
            model.erase(model.begin() + static_cast<std::ptrdiff_t>(from));
            model.insert(model.begin() + static_cast<std::ptrdiff_t>(to), moved);
            const auto& order = s.reorder_cards(from, to);
            Indices sorted = order;
            std::sort(sorted.begin(), sorted.end());
            Indices identity(n);
            std::iota(identity.begin(), identity.end(), std::size_t{0});
            REQUIRE(sorted == identity);
            REQUIRE(paragraph_texts(s) == model);
            for (std::size_t i = 0; i < n; ++i) {
                REQUIRE(s.paragraphs()[i].index == i);
                REQUIRE(texts[order[i]] == model[i]);
            }
        }
    }
}

TEST_CASE("reorder costs no recomputation", "[docstate]") {
    fixtures::EchoSummarizer echo;
    SummaryCache cache;
    AnnotationEngine engine(echo, &cache, 1);
    DocumentSession session("s");
    session.apply_edit(join(numbered(6)));
    annotate_document(engine, session, SummaryLevel::central());
    session.reorder_cards(0, 5);
    session.reorder_cards(3, 1);
    const auto cards = annotate_document(engine, session, SummaryLevel::central());
    CHECK(engine.computations() == 6);
    for (std::size_t i = 0; i < 6; ++i) CHECK(cards[i].text == "central:" + session.paragraphs()[i].sentences[0].text);
}

TEST_CASE("delete_card: examples", "[docstate]") {
    fixtures::EchoSummarizer echo;
    SummaryCache cache;
    AnnotationEngine engine(echo, &cache, 1);
    DocumentSession session("s");
    session.apply_edit("Zero.\n\nOne.\n\nTwo.");
    annotate_document(engine, session, SummaryLevel::central());

    session.delete_card(1);
    CHECK(paragraph_texts(session) == Strings{"Zero.", "Two."});
    CHECK(session.card_order() == Indices{0, 2});
    CHECK_THROWS_AS(session.delete_card(2), ContractViolation);

    // Re-adding the deleted text is a cache hit.
    const auto before = engine.computations();
    session.apply_edit("Zero.\n\nOne.\n\nTwo.");
    annotate_document(engine, session, SummaryLevel::central());
    CHECK(engine.computations() == before);

    DocumentSession single("t");
    single.apply_edit("Only.");
    single.delete_card(0);
    CHECK(single.size() == 0);
    CHECK(single.text().empty());
}

TEST_CASE("accept_merge: examples", "[docstate]") {
    const auto store = fixtures::random_store(40, 6, 7);
    NlpSummarizer nlp(store);
    fixtures::CountingSummarizer counting(nlp);
    SummaryCache cache;
    AnnotationEngine engine(counting, &cache, 1);
    DocumentSession session("s");
    std::mt19937_64 rng(1);
    Strings texts;
    for (int i = 0; i < 4; ++i) texts.push_back(fixtures::random_paragraph(rng, 20, 40, 5));
    session.apply_edit(join(texts));
    annotate_document(engine, session, SummaryLevel::central());
    REQUIRE(counting.calls() == 4);

    SECTION("unedited paragraphs merge") {
        const auto suggestion = suggest_merge(*store, session.paragraphs()[1], session.paragraphs()[3]);
        session.accept_merge(1, 3, suggestion);
        CHECK(session.size() == 3);
        CHECK(session.paragraphs()[1].text == suggestion.merged_text);
        CHECK(session.card_order() == Indices{0, 1, 2});
        annotate_document(engine, session, SummaryLevel::central());
        CHECK(counting.calls() == 5);
    }
    SECTION("b before a keeps a's position") {
        const auto suggestion = suggest_merge(*store, session.paragraphs()[2], session.paragraphs()[0]);
        session.accept_merge(2, 0, suggestion);
        CHECK(paragraph_texts(session) == Strings{texts[1], suggestion.merged_text, texts[3]});
    }
    SECTION("stale suggestion") {
        const auto suggestion = suggest_merge(*store, session.paragraphs()[0], session.paragraphs()[1]);
        auto edited = texts;
        edited[0] += " Extra words.";
        session.apply_edit(join(edited));
        CHECK_THROWS_AS(session.accept_merge(0, 1, suggestion), Conflict);
        CHECK(session.size() == 4);
    }
    SECTION("invalid indices") {
        const auto suggestion = suggest_merge(*store, session.paragraphs()[0], session.paragraphs()[1]);
        CHECK_THROWS_AS(session.accept_merge(0, 0, suggestion), ContractViolation);
        CHECK_THROWS_AS(session.accept_merge(0, 9, suggestion), ContractViolation);
    }
}

TEST_CASE("SummaryCache: LRU eviction and capacity", "[docstate]") {
    SummaryCache cache(3);
    auto card = [](const std::string& t) {
        Card c;
        c.level = LevelKind::central;
        c.text = t;
        return c;
    };
    cache.insert({1, "t"}, card("one"));
    cache.insert({2, "t"}, card("two"));
    cache.insert({3, "t"}, card("three"));
    REQUIRE(cache.find({1, "t"}));  // 1 is now the most recent
    cache.insert({4, "t"}, card("four"));
    CHECK(cache.size() == 3);
    CHECK_FALSE(cache.contains({2, "t"}));
    CHECK(cache.contains({1, "t"}));
    CHECK(cache.find({4, "t"})->text == "four");
    CHECK_FALSE(cache.find({1, "other"}));
    CHECK(cache.hits() == 2);
    CHECK(cache.misses() == 1);

    std::mt19937_64 rng(4);
    std::uniform_int_distribution<std::uint64_t> key(0, 40);
    for (int i = 0; i < 2000; ++i) {
        cache.insert({key(rng), "t"}, card("x"));
        REQUIRE(cache.size() <= 3);
    }
    CHECK_THROWS_AS(SummaryCache(0), ContractViolation);
}

TEST_CASE("SummaryCache: snapshot round trip", "[docstate]") {
    const auto store = fixtures::random_store(40, 6, 8);
    NlpSummarizer nlp(store);
    SummaryCache cache;
    AnnotationEngine engine(nlp, &cache, 1);
    std::mt19937_64 rng(2);
    std::vector<Paragraph> ps;
    for (int i = 0; i < 5; ++i) ps.push_back(make_paragraph(fixtures::random_paragraph(rng, 25, 40, 5)));
    std::vector<std::vector<Card>> expected;
    const std::vector<SummaryLevel> levels{SummaryLevel::central(), SummaryLevel::keywords(),
                                           SummaryLevel::abstractive(), SummaryLevel::extractive(2)};
    for (const auto& level : levels) expected.push_back(engine.annotate_all(ps, level));

    TempFile file;
    cache.save(file.path);
    SummaryCache restored;
    restored.load(file.path);
    CHECK(restored.size() == cache.size());

    fixtures::CountingSummarizer counting(nlp);
    AnnotationEngine reloaded(counting, &restored, 1);
    for (std::size_t l = 0; l < levels.size(); ++l) {
        const auto cards = reloaded.annotate_all(ps, levels[l]);
        REQUIRE(cards.size() == expected[l].size());
        for (std::size_t i = 0; i < cards.size(); ++i) {
            CHECK(cards[i].text == expected[l][i].text);
            CHECK(cards[i].sentence_indices == expected[l][i].sentence_indices);
            CHECK(cards[i].keywords == expected[l][i].keywords);
            CHECK(cards[i].source == expected[l][i].source);
        }
    }
    CHECK(counting.calls() == 0);

    const auto snap = cache.snapshot();
    CHECK(snap["format"] == "revoutline-cache");
    CHECK(snap["version"] == 1);
    CHECK(snap["entries"][0]["hash"].get<std::string>().size() == 16);

    std::ofstream(file.path) << "{not json";
    CHECK_THROWS_AS(restored.load(file.path), FormatError);
    std::ofstream(file.path) << R"({"format":"other","version":1,"entries":[]})";
    CHECK_THROWS_AS(restored.load(file.path), FormatError);
    CHECK_THROWS_AS(restored.load("/nonexistent/cache.json"), LoadError);
}

TEST_CASE("degraded abstractive cards are recomputed rather than cached", "[docstate]") {
    const auto store = fixtures::random_store(30, 4, 9);
    auto client = std::make_shared<HttpInferenceClient>(
        "http://127.0.0.1:" + std::to_string(fixtures::unused_port()), std::chrono::milliseconds(300));
    NlpSummarizer nlp(store, StopwordSet::builtin(), GenerationParams{}, client);
    SummaryCache cache;
    AnnotationEngine engine(nlp, &cache, 1);
    const std::vector<Paragraph> ps{make_paragraph("Kalo mine. Ruka sate.")};
    const auto first = engine.annotate_all(ps, SummaryLevel::abstractive());
    CHECK(first[0].source == AbstractiveSource::fallback);
    CHECK_FALSE(first[0].degradation.empty());
    CHECK(cache.size() == 0);
    engine.annotate_all(ps, SummaryLevel::abstractive());
    CHECK(engine.computations() == 2);
}

TEST_CASE("cache transparency: differential run against a cache-free engine", "[docstate]") {
    const auto store = fixtures::random_store(60, 8, 10);
    NlpSummarizer nlp(store);
    SummaryCache cache(64);
    AnnotationEngine cached(nlp, &cache, 2);
    AnnotationEngine fresh(nlp, nullptr, 1);

    std::mt19937_64 rng(99);
    DocumentSession session("d");
    Strings texts;
    for (int i = 0; i < 8; ++i) texts.push_back(fixtures::random_paragraph(rng, 24, 60, 6));
    session.apply_edit(join(texts));

    const std::vector<SummaryLevel> levels{SummaryLevel::central(), SummaryLevel::extractive(2),
                                           SummaryLevel::abstractive(), SummaryLevel::keywords(),
                                           SummaryLevel::original()};
    std::uniform_int_distribution<int> op(0, 4);
    for (int step = 0; step < 120; ++step) {
        auto current = paragraph_texts(session);
        const auto n = current.size();
        switch (n == 0 ? 0 : op(rng)) {
        case 0: current.push_back(fixtures::random_paragraph(rng, 20, 60, 5)); session.apply_edit(join(current)); break;
        case 1: current[rng() % n] = fixtures::random_paragraph(rng, 18, 60, 6); session.apply_edit(join(current)); break;
        case 2: session.reorder_cards(rng() % n, rng() % n); break;
        case 3: session.delete_card(rng() % n); break;
        case 4:
            if (n >= 2) {
                const std::size_t a = rng() % n, b = (a + 1 + rng() % (n - 1)) % n;
                session.accept_merge(a, b, suggest_merge(*store, session.paragraphs()[a], session.paragraphs()[b]));
            }
            break;
        }
        const auto& level = levels[static_cast<std::size_t>(step) % levels.size()];
        INFO("step " << step);
        REQUIRE(annotate_document(cached, session, level) == annotate_document(fresh, session, level));
    }
    CHECK(cache.hits() > 0);
}

TEST_CASE("session replay is deterministic", "[docstate]") {
    struct Op {
        int kind;
        std::size_t x, y;
        std::string text;
    };
    std::mt19937_64 rng(5);
    std::vector<Op> log;
    for (int i = 0; i < 200; ++i) {
        const int kind = static_cast<int>(rng() % 3);
        log.push_back({kind, rng() % 10, rng() % 10, join(numbered(1 + rng() % 9, "Item" + std::to_string(rng() % 4)))});
    }
    auto replay = [&] {
        DocumentSession s("r");
        for (const auto& op : log) {
            if (op.kind == 0) s.apply_edit(op.text);
            else if (op.kind == 1 && s.size() > 0) s.reorder_cards(op.x % s.size(), op.y % s.size());
            else if (op.kind == 2 && s.size() > 0) s.delete_card(op.x % s.size());
        }
        return s;
    };
    const auto a = replay();
    const auto b = replay();
    CHECK(a.paragraphs() == b.paragraphs());
    CHECK(a.card_order() == b.card_order());
    CHECK(a.revision() == b.revision());
    CHECK(a.text() == b.text());
}

TEST_CASE("SessionRegistry: create, find, erase", "[docstate]") {
    SessionRegistry registry;
    std::set<std::string> ids;
    for (int i = 0; i < 50; ++i) {
        auto slot = registry.create();
        CHECK(slot->session.id().size() == 16);
        CHECK(slot->session.size() == 0);
        ids.insert(slot->session.id());
    }
    CHECK(ids.size() == 50);
    CHECK(registry.size() == 50);
    const auto id = *ids.begin();
    CHECK(registry.find(id)->session.id() == id);
    CHECK(registry.erase(id));
    CHECK_FALSE(registry.erase(id));
    CHECK_THROWS_AS(registry.find(id), NotFound);
}
