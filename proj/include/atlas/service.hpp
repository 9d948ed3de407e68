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

#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "atlas/graph.hpp"
#include "atlas/ingest.hpp"
#include "atlas/llm.hpp"
#include "atlas/prompt.hpp"
#include "atlas/refine.hpp"

namespace atlas {

// Builds the provider for one upload. `ordinal` counts providers created by
// this service instance, starting at 0.
using ProviderFactory = std::function<std::shared_ptr<Provider>(std::size_t ordinal)>;

struct ServiceConfig {
    std::filesystem::path data_dir;
    ProviderConfig provider;
    std::optional<ScriptBook> script;
    // Overrides make_provider(provider, script, ordinal) when set.
    ProviderFactory provider_factory;
    Sleeper sleep = real_sleeper();
    RefineOptions refine;
    std::size_t context_cap = kContextCap;
    // Lines taken from the top of each key file for local-map excerpts.
    std::size_t excerpt_lines = 60;
    std::size_t max_archive_bytes = 32u << 20;
    // Extensions accepted from uploads and server paths; empty means all.
    std::set<std::string> include_extensions = default_source_extensions();
    std::vector<std::string> exclude_globs = {".git/**", "node_modules/**", "__pycache__/**"};
    // How long a request waits for another generation on the same session.
    std::chrono::milliseconds lock_wait{std::chrono::seconds(30)};
    std::optional<PromptLibrary> prompts;  // builtin() when unset
};

struct CreateSessionRequest {
    // Uploaded archive: relative path to file content.
    std::optional<FileContents> files;
    // Directory on the server's filesystem.
    std::optional<std::filesystem::path> server_path;
    std::string label;
};

enum class SessionStatus { Uploaded, UploadFailed };

std::string_view to_string(SessionStatus status) noexcept;

struct LocalResult {
    std::string node_id;
    MapGraph graph{MapKind::Local};
    std::string explanation;
};

struct ChatEntry {
    std::string question;
    std::optional<std::string> selected_node_id;
    std::optional<MapKind> kind;
    // Payload of the node the prompt was assembled from, as sent.
    nlohmann::json node_payload;
    std::string prompt_ref;
    std::string answer;
    std::string timestamp;

    nlohmann::json to_json() const;
    static ChatEntry from_json(const nlohmann::json& j);
};

// Sessions live under data_dir/<sessionId>/:
//   session.json        status, context handle, upload error
//   snapshot.json
//   sources/...         copies of the snapshot files
//   maps/<kind>/payload.json            cached getGlobal response
//   maps/<kind>/v<N>/trace-<id>.json    one per generation, kept
//   maps/<kind>/local/<node>.json       cached local results
//   chat.jsonl
// Responses are stored as the exact bytes served, so reads after a restart
// are byte-identical and need no provider.
class MapService {
public:
    explicit MapService(ServiceConfig config);
    ~MapService();
    MapService(const MapService&) = delete;
    MapService& operator=(const MapService&) = delete;

    // Returns the session summary. A failed upload still creates the session,
    // with status UploadFailed; retry_upload() tries again.
    nlohmann::json create_session(const CreateSessionRequest& request);
    nlohmann::json retry_upload(const std::string& session_id);
    nlohmann::json session_summary(const std::string& session_id);

    // JSON text of {sessionId, kind, version, graphDot, overviewJson, trace}.
    std::string get_global(const std::string& session_id, MapKind kind);
    std::string regenerate(const std::string& session_id, MapKind kind);
    // JSON text of {sessionId, kind, nodeId, graphDot, explanation, warnings}.
    std::string get_local(const std::string& session_id, MapKind kind, const std::string& node_id);
    ChatEntry chat(const std::string& session_id, const std::string& question,
                   const std::optional<std::string>& selected_node_id, std::optional<MapKind> kind = std::nullopt);
    std::vector<ChatEntry> chat_log(const std::string& session_id);
    // Latest trace of `kind`, as stored.
    std::string trace(const std::string& session_id, MapKind kind);

    LocalResult parse_local_payload(const std::string& payload) const;

    // Provider calls made by this instance, retries included.
    std::size_t gateway_calls() const;
    const ServiceConfig& config() const { return config_; }

private:
    struct Session;

    std::shared_ptr<Session> open(const std::string& session_id);
    std::unique_lock<std::timed_mutex> lock(Session& s);
    void upload(Session& s);
    Gateway& gateway(Session& s);
    std::shared_ptr<Gateway> fresh_gateway();
    void require_uploaded(const Session& s) const;
    std::string generate(Session& s, MapKind kind);
    std::optional<MapGraph> stored_graph(const Session& s, MapKind kind) const;
    nlohmann::json summary(const Session& s) const;
    void persist(const Session& s) const;

    ServiceConfig config_;
    PromptLibrary prompts_;
    mutable std::mutex mu_;
    std::map<std::string, std::shared_ptr<Session>> sessions_;
    std::vector<std::shared_ptr<Gateway>> gateways_;
    std::size_t providers_made_ = 0;
};

// HTTP JSON front end for MapService. Errors are {code, message, detail}.
class HttpApi {
public:
    explicit HttpApi(MapService& service);
    ~HttpApi();

    // Binds to host:port (port 0 picks a free one) and returns the port.
    int bind(const std::string& host, int port);
    // Serves until stop(); bind() first.
    void serve();
    void start();  // serve() on a background thread
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// HTTP status for an error code.
int http_status(ErrorCode code);

}  // namespace atlas
