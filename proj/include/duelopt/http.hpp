#pragma once

#include <memory>
#include <regex>
#include <string>

#include "httplib.h"
#include "json.hpp"

#include "duelopt/judges.hpp"
#include "duelopt/serve.hpp"

namespace duelopt {

/// Transport over cpp-httplib. TransportError on connection failures; HTTP
/// error statuses are returned for chat_complete to classify.
inline Transport httplib_transport()
{
    return [](const HttpRequest& req) {
        static const std::regex url_re(R"(^(https?://[^/]+)(/.*)?$)");
        std::smatch m;
        if (!std::regex_match(req.url, m, url_re)) {
            throw TransportError("bad url " + req.url);
        }
        httplib::Client client(m[1].str());
        const auto seconds = static_cast<time_t>(std::max(1.0, req.timeout_s));
        client.set_connection_timeout(seconds, 0);
        client.set_read_timeout(seconds, 0);
        client.set_write_timeout(seconds, 0);
        httplib::Headers headers;
        for (const auto& [k, v] : req.headers) {
            if (k != "Content-Type") {
                headers.emplace(k, v);
            }
        }
        const std::string path = m[2].matched ? m[2].str() : "/";
        auto res = client.Post(path, headers, req.body, "application/json");
        if (!res) {
            throw TransportError("request to " + req.url + " failed: " + httplib::to_string(res.error()));
        }
        return HttpResponse{res->status, res->body};
    };
}

namespace http_detail {

inline void send_error(httplib::Response& res, int status, const std::string& error, const std::string& detail)
{
    res.status = status;
    res.set_content(nlohmann::json{{"error", error}, {"detail", detail}}.dump(), "application/json");
}

inline void send_json(httplib::Response& res, const nlohmann::json& body)
{
    res.status = 200;
    res.set_content(body.dump(), "application/json");
}

// Maps exceptions to {error, detail} responses.
template <class F>
void guarded(httplib::Response& res, F&& f)
{
    try {
        f();
    } catch (const NotFoundError& e) {
        send_error(res, 404, "not_found", e.what());
    } catch (const ConflictError& e) {
        send_error(res, 409, "conflict", e.what());
    } catch (const nlohmann::json::exception& e) {
        send_error(res, 400, "bad_request", e.what());
    } catch (const std::invalid_argument& e) {
        send_error(res, 400, "bad_request", e.what());
    } catch (const std::logic_error& e) {
        send_error(res, 409, "conflict", e.what());
    } catch (const std::exception& e) {
        send_error(res, 500, "internal", e.what());
    }
}

} // namespace http_detail

/// Registers the session API on `server`.
inline void mount_api(httplib::Server& server, Session& session, const ServeSpec& spec)
{
    using namespace http_detail;
    const std::string origin = spec.cors_origin;
    const std::string token = spec.token;

    server.set_pre_routing_handler([origin, token](const httplib::Request& req, httplib::Response& res) {
        if (!origin.empty()) {
            res.set_header("Access-Control-Allow-Origin", origin);
            res.set_header("Access-Control-Allow-Headers", "Authorization, Content-Type");
            res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
        }
        if (req.method == "OPTIONS") {
            res.status = 204;
            return httplib::Server::HandlerResponse::Handled;
        }
        if (!token.empty() && req.get_header_value("Authorization") != "Bearer " + token) {
            send_error(res, 401, "unauthorized", "missing or wrong bearer token");
            return httplib::Server::HandlerResponse::Handled;
        }
        return httplib::Server::HandlerResponse::Unhandled;
    });

    server.Get("/api/session", [&session](const httplib::Request&, httplib::Response& res) {
        guarded(res, [&] { send_json(res, session.session_json()); });
    });
    server.Get("/api/duel/next", [&session](const httplib::Request&, httplib::Response& res) {
        guarded(res, [&] { send_json(res, session.next_duel()); });
    });
    server.Post(R"(/api/duel/(\d+)/judgment)", [&session](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            const std::uint64_t duel_id = std::stoull(req.matches[1].str());
            const auto body = nlohmann::json::parse(req.body);
            if (!body.is_object() || !body.contains("input_idx") || !body["input_idx"].is_number_unsigned() ||
                !body.contains("choice") || !body["choice"].is_string()) {
                throw std::invalid_argument("body must be {\"input_idx\": n, \"choice\": \"A\"|\"B\"|\"tie\"}");
            }
            const auto choice = human_choice_from_string(body["choice"].get<std::string>());
            session.submit(duel_id, body["input_idx"].get<std::size_t>(), choice);
            res.status = 204;
        });
    });
    server.Get("/api/leaderboard", [&session](const httplib::Request&, httplib::Response& res) {
        guarded(res, [&] { send_json(res, session.leaderboard()); });
    });
    server.Get("/api/stopping", [&session](const httplib::Request&, httplib::Response& res) {
        guarded(res, [&] { send_json(res, session.stopping()); });
    });
    server.Post("/api/control", [&session](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            const auto body = nlohmann::json::parse(req.body);
            if (!body.is_object() || !body.contains("action") || !body["action"].is_string()) {
                throw std::invalid_argument("body must be {\"action\": \"pause\"|\"resume\"|\"mutate_now\"}");
            }
            session.control(body["action"].get<std::string>());
            res.status = 202;
        });
    });
}

} // namespace duelopt
