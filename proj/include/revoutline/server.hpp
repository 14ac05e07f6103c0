#pragma once

// HTTP/JSON API. Technique endpoints take {"paragraphs": [...]} and answer with
// an object keyed "0".."n-1"; session endpoints hold a live document.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "revoutline/api.hpp"
#include "revoutline/docstate.hpp"
#include "revoutline/engine.hpp"
#include "revoutline/errors.hpp"

namespace revoutline {

// Error raised while validating a request; mapped to HTTP 400 with `code`.
class BadRequest : public Error {
public:
    BadRequest(std::string code, const std::string& message) : Error(message), code_(std::move(code)) {}
    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

class OutlineServer {
public:
    using Json = api::Json;

    explicit OutlineServer(Engine& engine, std::string cors_origin = "*")
        : engine_(engine), sessions_(engine.abbreviations()), background_(engine.annotator().workers()) {
        server_.set_default_headers({{"Access-Control-Allow-Origin", cors_origin},
                                     {"Access-Control-Allow-Methods", "GET, POST, PUT, DELETE, OPTIONS"},
                                     {"Access-Control-Allow-Headers", "Content-Type"}});
        routes();
    }

    ~OutlineServer() {
        stop();
        background_.shutdown();
    }

    OutlineServer(const OutlineServer&) = delete;
    OutlineServer& operator=(const OutlineServer&) = delete;

    bool listen(const std::string& host, int port) { return server_.listen(host, port); }
    int bind_to_any_port(const std::string& host) { return server_.bind_to_any_port(host); }
    bool listen_after_bind() { return server_.listen_after_bind(); }
    void wait_until_ready() const { server_.wait_until_ready(); }
    void stop() {
        if (server_.is_running()) server_.stop();
    }

    SessionRegistry& sessions() noexcept { return sessions_; }

private:
    using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

    static void send(httplib::Response& res, int status, const Json& body) {
        res.status = status;
        res.set_content(body.dump(), "application/json");
    }

    static void send_error(httplib::Response& res, int status, std::string_view code, std::string_view message) {
        send(res, status, api::error_body(code, message));
    }

    static Handler guarded(Handler inner) {
        return [inner = std::move(inner)](const httplib::Request& req, httplib::Response& res) {
            try {
                inner(req, res);
            } catch (const BadRequest& e) {
                send_error(res, 400, e.code(), e.what());
            } catch (const NotFound& e) {
                send_error(res, 404, "session_not_found", e.what());
            } catch (const Conflict& e) {
                send_error(res, 409, "stale_merge", e.what());
            } catch (const ContractViolation& e) {
                send_error(res, 400, "invalid_request", e.what());
            } catch (const std::exception& e) {
                send_error(res, 500, "internal", e.what());
            }
        };
    }

    static nlohmann::json parse_body(const httplib::Request& req) {
        auto body = nlohmann::json::parse(req.body, nullptr, false);
        if (body.is_discarded()) throw BadRequest("invalid_json", "request body is not valid JSON");
        if (!body.is_object()) throw BadRequest("invalid_json", "request body must be a JSON object");
        return body;
    }

    static std::vector<std::string> paragraphs_field(const nlohmann::json& body) {
        auto it = body.find("paragraphs");
        if (it == body.end() || !it->is_array())
            throw BadRequest("invalid_paragraphs", "'paragraphs' must be an array of strings");
        std::vector<std::string> out;
        for (const auto& p : *it) {
            if (!p.is_string()) throw BadRequest("invalid_paragraphs", "'paragraphs' must be an array of strings");
            out.push_back(p.get<std::string>());
        }
        return out;
    }

    static std::size_t index_field(const nlohmann::json& body, const char* name) {
        auto it = body.find(name);
        if (it == body.end() || !it->is_number_integer() || it->get<std::int64_t>() < 0)
            throw BadRequest("invalid_index", std::string("'") + name + "' must be a non-negative integer");
        return it->get<std::size_t>();
    }

    static std::string string_field(const nlohmann::json& body, const char* name) {
        auto it = body.find(name);
        if (it == body.end() || !it->is_string())
            throw BadRequest("invalid_request", std::string("'") + name + "' must be a string");
        return it->get<std::string>();
    }

    static SummaryLevel level_param(const std::string& name, const std::string& k_text) {
        std::size_t k = 1;
        if (!k_text.empty()) {
            try {
                std::size_t used = 0;
                long long v = std::stoll(k_text, &used);
                if (used != k_text.size() || v < 1) throw std::invalid_argument("k");
                k = static_cast<std::size_t>(v);
            } catch (const std::exception&) {
                throw BadRequest("invalid_k", "'k' must be an integer >= 1");
            }
        }
        auto level = SummaryLevel::parse(name, k);
        if (!level)
            throw BadRequest("invalid_level",
                             "'level' must be one of original, central, extractive, summary, keywords");
        return *level;
    }

    void technique(const char* path, std::function<SummaryLevel(const nlohmann::json&)> level_of) {
        server_.Post(path, guarded([this, level_of](const httplib::Request& req, httplib::Response& res) {
            const auto body = parse_body(req);
            const auto level = level_of(body);
            const auto texts = paragraphs_field(body);
            send(res, 200, api::card_envelope(engine_.cards(texts, level)));
        }));
    }

    // Runs an annotation pass for the slot's active level off the request thread.
    void schedule_warmup(const std::shared_ptr<SessionSlot>& slot, std::vector<Paragraph> paragraphs,
                         SummaryLevel level) {
        if (level.kind == LevelKind::original || paragraphs.empty()) return;
        slot->pending.fetch_add(1);
        auto task = [this, slot, paragraphs = std::move(paragraphs), level] {
            try {
                engine_.annotator().annotate_all(paragraphs, level, &slot->pending);
            } catch (...) {
            }
            slot->pending.fetch_sub(1);
        };
        if (!background_.enqueue(task)) slot->pending.fetch_sub(1);
    }

    static Json session_state(const DocumentSession& session) {
        Json j;
        j["revision"] = session.revision();
        j["paragraphs"] = session.size();
        j["order"] = session.card_order();
        j["text"] = session.text();
        return j;
    }

    void routes() {
        server_.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

        server_.Get("/api/health", [](const httplib::Request&, httplib::Response& res) {
            send(res, 200, Json{{"status", "ok"}});
        });

        technique("/api/extractive", [](const nlohmann::json& body) {
            auto k = body.find("k");
            if (k == body.end() || !k->is_number_integer() || k->get<std::int64_t>() < 1)
                throw BadRequest("invalid_k", "'k' must be an integer >= 1");
            return SummaryLevel::extractive(k->get<std::size_t>());
        });
        technique("/api/central", [](const nlohmann::json&) { return SummaryLevel::central(); });
        technique("/api/abstractive", [](const nlohmann::json&) { return SummaryLevel::abstractive(); });
        technique("/api/keywords", [](const nlohmann::json&) { return SummaryLevel::keywords(); });

        server_.Post("/api/merge", guarded([this](const httplib::Request& req, httplib::Response& res) {
            const auto body = parse_body(req);
            const auto a = string_field(body, "a");
            const auto b = string_field(body, "b");
            if (detail::is_blank(a) || detail::is_blank(b))
                throw BadRequest("empty_paragraph", "'a' and 'b' must both contain text");
            send(res, 200, api::merge_body(engine_.merge(a, b)));
        }));

        server_.Post("/api/session", guarded([this](const httplib::Request&, httplib::Response& res) {
            auto slot = sessions_.create();
            Json j;
            j["session_id"] = slot->session.id();
            j["revision"] = slot->session.revision();
            j["paragraphs"] = slot->session.size();
            send(res, 201, j);
        }));

        server_.Put("/api/session/:id/text", guarded([this](const httplib::Request& req, httplib::Response& res) {
            auto slot = sessions_.find(req.path_params.at("id"));
            const auto body = parse_body(req);
            const auto text = string_field(body, "text");
            std::optional<SummaryLevel> level;
            if (body.contains("level")) {
                if (!body["level"].is_string()) throw BadRequest("invalid_level", "'level' must be a string");
                std::string k;
                if (body.contains("k")) {
                    if (!body["k"].is_number_integer()) throw BadRequest("invalid_k", "'k' must be an integer >= 1");
                    k = std::to_string(body["k"].get<std::int64_t>());
                }
                level = level_param(body["level"].get<std::string>(), k);
            }

            Json j;
            std::vector<Paragraph> snapshot;
            SummaryLevel active;
            {
                std::lock_guard lock(slot->mutex);
                if (level) slot->active_level = *level;
                auto diff = slot->session.apply_edit(text);
                slot->revision.store(slot->session.revision());
                j["revision"] = slot->session.revision();
                j["paragraphs"] = slot->session.size();
                j["changed"] = diff.changed;
                j["removed"] = diff.removed;
                snapshot = slot->session.paragraphs();
                active = slot->active_level;
            }
            schedule_warmup(slot, std::move(snapshot), active);
            send(res, 200, j);
        }));

        server_.Post("/api/session/:id/reorder", guarded([this](const httplib::Request& req, httplib::Response& res) {
            auto slot = sessions_.find(req.path_params.at("id"));
            const auto body = parse_body(req);
            const auto from = index_field(body, "from");
            const auto to = index_field(body, "to");
            std::lock_guard lock(slot->mutex);
            slot->session.reorder_cards(from, to);
            slot->revision.store(slot->session.revision());
            send(res, 200, session_state(slot->session));
        }));

        server_.Delete("/api/session/:id/card/:index",
                       guarded([this](const httplib::Request& req, httplib::Response& res) {
                           auto slot = sessions_.find(req.path_params.at("id"));
                           const auto& text = req.path_params.at("index");
                           std::size_t index = 0;
                           try {
                               std::size_t used = 0;
                               long long v = std::stoll(text, &used);
                               if (used != text.size() || v < 0) throw std::invalid_argument("index");
                               index = static_cast<std::size_t>(v);
                           } catch (const std::exception&) {
                               throw BadRequest("invalid_index", "card index must be a non-negative integer");
                           }
                           std::lock_guard lock(slot->mutex);
                           slot->session.delete_card(index);
                           slot->revision.store(slot->session.revision());
                           send(res, 200, session_state(slot->session));
                       }));

        server_.Post("/api/session/:id/merge/accept",
                     guarded([this](const httplib::Request& req, httplib::Response& res) {
                         auto slot = sessions_.find(req.path_params.at("id"));
                         const auto body = parse_body(req);
                         const auto a = index_field(body, "a_index");
                         const auto b = index_field(body, "b_index");
                         std::vector<Paragraph> snapshot;
                         SummaryLevel active;
                         Json j;
                         {
                             std::lock_guard lock(slot->mutex);
                             const auto& ps = slot->session.paragraphs();
                             if (a >= ps.size() || b >= ps.size() || a == b)
                                 throw BadRequest("invalid_index", "a_index and b_index must be distinct valid cards");
                             MergeSuggestion suggestion;
                             if (body.contains("a") || body.contains("b") || body.contains("merged")) {
                                 // Client-held suggestion: the texts it was computed for must still match.
                                 suggestion.a_hash = content_hash(string_field(body, "a"));
                                 suggestion.b_hash = content_hash(string_field(body, "b"));
                                 suggestion.merged_text = body.contains("merged")
                                                              ? string_field(body, "merged")
                                                              : engine_.merge(string_field(body, "a"),
                                                                              string_field(body, "b"))
                                                                    .merged_text;
                             } else {
                                 suggestion = suggest_merge(engine_.summarizer().store(), ps[a], ps[b],
                                                            engine_.summarizer().options());
                             }
                             slot->session.accept_merge(a, b, suggestion);
                             slot->revision.store(slot->session.revision());
                             j = session_state(slot->session);
                             snapshot = slot->session.paragraphs();
                             active = slot->active_level;
                         }
                         schedule_warmup(slot, std::move(snapshot), active);
                         send(res, 200, j);
                     }));

        server_.Get("/api/session/:id/cards", guarded([this](const httplib::Request& req, httplib::Response& res) {
            auto slot = sessions_.find(req.path_params.at("id"));
            const auto level = level_param(req.has_param("level") ? req.get_param_value("level") : "central",
                                           req.has_param("k") ? req.get_param_value("k") : "");
            std::vector<Paragraph> snapshot;
            std::uint64_t revision = 0;
            std::vector<std::size_t> order;
            {
                std::lock_guard lock(slot->mutex);
                slot->active_level = level;
                snapshot = slot->session.paragraphs();
                revision = slot->session.revision();
                order = slot->session.card_order();
            }
            const auto cards = engine_.annotator().annotate_all(snapshot, level, &slot->pending);
            Json j;
            j["revision"] = revision;
            j["level"] = level.name();
            j["order"] = order;
            j["cards"] = api::card_envelope(cards);
            send(res, 200, j);
        }));

        server_.Get("/api/session/:id/status", guarded([this](const httplib::Request& req, httplib::Response& res) {
            auto slot = sessions_.find(req.path_params.at("id"));
            Json j;
            j["pending"] = std::max<std::int64_t>(0, slot->pending.load());
            j["revision"] = slot->revision.load();
            send(res, 200, j);
        }));

        server_.Delete("/api/session/:id", guarded([this](const httplib::Request& req, httplib::Response& res) {
            if (!sessions_.erase(req.path_params.at("id"))) throw NotFound("unknown session");
            res.status = 204;
        }));
    }

    Engine& engine_;
    SessionRegistry sessions_;
    httplib::ThreadPool background_;
    httplib::Server server_;
};

} // namespace revoutline
