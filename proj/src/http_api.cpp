// Copyright 2026 The Atlas Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <thread>

#include <httplib.h>

#include "atlas/service.hpp"

namespace atlas {

using nlohmann::json;

int http_status(ErrorCode code) {
    switch (code) {
        case ErrorCode::NotFound:
        case ErrorCode::UnknownNode:
            return 404;
        case ErrorCode::UploadPending:
            return 409;
        case ErrorCode::ArchiveTooLarge:
            return 413;
        case ErrorCode::ZeroFilesMatched:
        case ErrorCode::RootNotFound:
        case ErrorCode::UnknownPath:
        case ErrorCode::EmptyQuestion:
            return 422;
        case ErrorCode::GenerationInProgress:
            return 503;
        case ErrorCode::ParseFailure:
        case ErrorCode::AuthFailed:
        case ErrorCode::ProviderRejected:
        case ErrorCode::RetriesExhausted:
        case ErrorCode::ScriptExhausted:
        case ErrorCode::InvalidHandle:
        case ErrorCode::OverCap:
            return 502;
        case ErrorCode::Configuration:
        case ErrorCode::Io:
            return 500;
        default:
            return 400;
    }
}

namespace {

void send_json(httplib::Response& res, int status, const std::string& body) {
    res.status = status;
    res.set_content(body, "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view code, const std::string& message,
                const json& detail) {
    send_json(res, status, json{{"code", code}, {"message", message}, {"detail", detail}}.dump());
}

MapKind path_kind(const std::string& slug) {
    auto kind = parse_map_kind(slug);
    if (!kind || !is_global(*kind)) {
        throw Error(ErrorCode::NotFound, "unknown map kind '" + slug + "'; use business or function-call", {slug});
    }
    return *kind;
}

json body_json(const httplib::Request& req) {
    if (req.body.empty()) return json::object();
    auto j = json::parse(req.body, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw Error(ErrorCode::MalformedJson, "request body must be a JSON object");
    return j;
}

// Runs a handler and turns exceptions into the uniform error body.
template <typename F>
httplib::Server::Handler guarded(F&& f) {
    return [f = std::forward<F>(f)](const httplib::Request& req, httplib::Response& res) {
        try {
            f(req, res);
        } catch (const Error& e) {
            auto status = http_status(e.code());
            if (e.code() == ErrorCode::GenerationInProgress) res.set_header("Retry-After", "5");
            send_error(res, status, to_string(e.code()), e.what(), e.details());
        } catch (const json::exception& e) {
            send_error(res, 400, "malformed_json", e.what(), json::array());
        } catch (const std::exception& e) {
            send_error(res, 500, "internal", e.what(), json::array());
        }
    };
}

}  // namespace

struct HttpApi::Impl {
    MapService& service;
    httplib::Server server;
    std::thread thread;
    bool bound = false;

    explicit Impl(MapService& s) : service(s) { routes(); }

    void routes() {
        server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                                    {"Access-Control-Allow-Headers", "Content-Type"},
                                    {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
        server.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

        server.Post("/sessions", guarded([this](const httplib::Request& req, httplib::Response& res) {
            auto j = body_json(req);
            CreateSessionRequest create;
            if (j.contains("files")) {
                if (!j["files"].is_object()) throw Error(ErrorCode::MalformedJson, "files must map paths to contents");
                create.files = j["files"].get<FileContents>();
            }
            if (j.contains("path")) create.server_path = j["path"].get<std::string>();
            create.label = j.value("label", std::string{});
            send_json(res, 201, service.create_session(create).dump());
        }));

        server.Get(R"(/sessions/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
            auto summary = service.session_summary(req.matches[1]);
            json log = json::array();
            for (const auto& e : service.chat_log(req.matches[1])) log.push_back(e.to_json());
            summary["chatLog"] = log;
            send_json(res, 200, summary.dump());
        }));

        server.Post(R"(/sessions/([^/]+)/upload)", guarded([this](const httplib::Request& req, httplib::Response& res) {
            send_json(res, 200, service.retry_upload(req.matches[1]).dump());
        }));

        server.Get(R"(/sessions/([^/]+)/maps/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
            send_json(res, 200, service.get_global(req.matches[1], path_kind(req.matches[2])));
        }));

        server.Post(R"(/sessions/([^/]+)/maps/([^/]+)/regenerate)",
                    guarded([this](const httplib::Request& req, httplib::Response& res) {
                        send_json(res, 200, service.regenerate(req.matches[1], path_kind(req.matches[2])));
                    }));

        server.Get(R"(/sessions/([^/]+)/maps/([^/]+)/nodes/(.+)/local)",
                   guarded([this](const httplib::Request& req, httplib::Response& res) {
                       send_json(res, 200,
                                 service.get_local(req.matches[1], path_kind(req.matches[2]), req.matches[3]));
                   }));

        server.Post(R"(/sessions/([^/]+)/chat)", guarded([this](const httplib::Request& req, httplib::Response& res) {
            auto j = body_json(req);
            if (!j.contains("question") || !j["question"].is_string()) {
                throw Error(ErrorCode::EmptyQuestion, "question is required");
            }
            std::optional<std::string> node;
            if (j.contains("selectedNodeId") && j["selectedNodeId"].is_string()) node = j["selectedNodeId"];
            std::optional<MapKind> kind;
            if (j.contains("kind") && j["kind"].is_string()) kind = path_kind(j["kind"]);
            auto entry = service.chat(req.matches[1], j["question"], node, kind);
            send_json(res, 200, entry.to_json().dump());
        }));

        server.Get(R"(/sessions/([^/]+)/chat)", guarded([this](const httplib::Request& req, httplib::Response& res) {
            json log = json::array();
            for (const auto& e : service.chat_log(req.matches[1])) log.push_back(e.to_json());
            send_json(res, 200, log.dump());
        }));

        server.Get(R"(/sessions/([^/]+)/trace/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
            send_json(res, 200, service.trace(req.matches[1], path_kind(req.matches[2])));
        }));
    }
};

HttpApi::HttpApi(MapService& service) : impl_(std::make_unique<Impl>(service)) {}

HttpApi::~HttpApi() { stop(); }

int HttpApi::bind(const std::string& host, int port) {
    int bound_port = port == 0 ? impl_->server.bind_to_any_port(host) : (impl_->server.bind_to_port(host, port) ? port : -1);
    if (bound_port < 0) throw Error(ErrorCode::Io, "cannot bind " + host + ":" + std::to_string(port));
    impl_->bound = true;
    return bound_port;
}

void HttpApi::serve() {
    if (!impl_->bound) throw Error(ErrorCode::InvalidArgument, "bind before serving");
    impl_->server.listen_after_bind();
}

void HttpApi::start() {
    if (!impl_->bound) throw Error(ErrorCode::InvalidArgument, "bind before serving");
    impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
}

void HttpApi::stop() {
    impl_->server.stop();
    if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace atlas
