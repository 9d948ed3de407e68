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

#include <atomic>
#include <chrono>
#include <cstddef>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "atlas/ingest.hpp"
#include "atlas/prompt.hpp"

namespace atlas {

enum class ProviderKind { Live, Scripted };

std::string_view to_string(ProviderKind kind) noexcept;

struct ProviderConfig {
    ProviderKind kind = ProviderKind::Scripted;
    std::string model = "gpt-4o-mini";
    // Name of the environment variable holding the API key. The key itself
    // is never stored, logged or serialized.
    std::string credential_env = "OPENAI_API_KEY";
    std::string base_url = "https://api.openai.com";
    std::chrono::seconds request_timeout{120};
    int max_retries = 3;
    std::chrono::milliseconds retry_backoff{1000};
    // Scripted only: JSON script file.
    std::filesystem::path script_path;

    void validate() const;
    nlohmann::json to_json() const;
    static ProviderConfig from_json(const nlohmann::json& j);
};

// Reads a JSON file, or a flat TOML file of `key = value` lines. Keys:
// provider, model, credential_env, base_url, timeout_seconds, max_retries,
// retry_backoff_ms, script.
ProviderConfig load_provider_config(const std::filesystem::path& file);

struct ContextHandle {
    std::string handle_id;
    std::vector<std::string> uploaded_paths;
    std::string created_at;  // ISO-8601 UTC

    nlohmann::json to_json() const;
    static ContextHandle from_json(const nlohmann::json& j);
};

struct Completion {
    std::string raw_text;
    std::string prompt_ref;
    std::chrono::milliseconds latency{0};
    int attempt = 1;
};

// What a provider reports when a call fails. The gateway decides from the
// kind whether to retry.
enum class FailureKind { Transient, RateLimited, Auth, Rejected, ScriptExhausted, Configuration, InvalidHandle };

std::string_view to_string(FailureKind kind) noexcept;
std::optional<FailureKind> parse_failure_kind(std::string_view text);

class ProviderFailure : public std::runtime_error {
public:
    ProviderFailure(FailureKind kind, const std::string& message) : std::runtime_error(message), kind_(kind) {}
    FailureKind kind() const noexcept { return kind_; }

private:
    FailureKind kind_;
};

class Provider {
public:
    virtual ~Provider() = default;
    virtual ProviderKind kind() const = 0;
    virtual ContextHandle upload(const ContextSet& context, const FileContents& contents) = 0;
    virtual std::string complete(const ContextHandle& handle, const AssembledPrompt& prompt) = 0;
};

// One canned reply, or an injected failure.
struct ScriptEntry {
    std::string text;
    std::optional<FailureKind> failure;

    static ScriptEntry reply(std::string text) { return {std::move(text), std::nullopt}; }
    static ScriptEntry fail(FailureKind kind) { return {{}, kind}; }
};

// Deterministic stand-in for a model: replays its script one entry per
// complete() call and fails with ScriptExhausted past the end. Calls on one
// instance are serialized.
class ScriptedProvider : public Provider {
public:
    explicit ScriptedProvider(std::vector<ScriptEntry> script = {});

    ProviderKind kind() const override { return ProviderKind::Scripted; }
    ContextHandle upload(const ContextSet& context, const FileContents& contents) override;
    std::string complete(const ContextHandle& handle, const AssembledPrompt& prompt) override;

    void push(ScriptEntry entry);
    void fail_uploads(std::optional<FailureKind> kind);

    std::size_t complete_calls() const;
    std::size_t upload_calls() const;
    std::size_t remaining() const;
    // Prompts seen so far, in call order.
    std::vector<AssembledPrompt> prompts() const;
    // Contents passed to the most recent successful upload.
    FileContents last_upload() const;

private:
    mutable std::mutex mu_;
    std::deque<ScriptEntry> script_;
    std::optional<FailureKind> upload_failure_;
    std::size_t complete_calls_ = 0;
    std::size_t upload_calls_ = 0;
    std::size_t handles_issued_ = 0;
    std::vector<AssembledPrompt> prompts_;
    FileContents last_upload_;
};

// Script file contents. Accepted forms:
//   ["reply", ...]                               one script for every session
//   {"responses": ["reply", {"error": "rate_limit"}, ...]}
//   {"sessions": [[...], [...]], "uploadFailure": "auth"}
// Session i replays sessions[i % n].
struct ScriptBook {
    std::vector<std::vector<ScriptEntry>> sessions;
    std::optional<FailureKind> upload_failure;

    std::vector<ScriptEntry> for_session(std::size_t index) const;
    static ScriptBook from_json(const nlohmann::json& j);
    static ScriptBook load(const std::filesystem::path& file);
};

struct HttpRequest {
    std::string method;  // GET or POST
    std::string path;
    std::map<std::string, std::string> headers;
    std::string body;
    std::string content_type;
    // multipart/form-data parts: name, content, filename (empty for plain fields)
    struct Part {
        std::string name;
        std::string content;
        std::string filename;
        std::string content_type;
    };
    std::vector<Part> parts;
};

struct HttpResponse {
    int status = 0;
    std::string body;
};

// Throws TransportError when no HTTP response was obtained.
class Transport {
public:
    virtual ~Transport() = default;
    virtual HttpResponse send(const HttpRequest& request) = 0;
};

class TransportError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::shared_ptr<Transport> make_http_transport(const std::string& base_url, std::chrono::seconds timeout);

using Sleeper = std::function<void(std::chrono::milliseconds)>;
using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

Sleeper real_sleeper();
EnvLookup process_env();

// OpenAI-compatible provider: uploads files into a vector store and answers
// with the Responses API using file_search over that store.
class LiveProvider : public Provider {
public:
    LiveProvider(ProviderConfig config, std::shared_ptr<Transport> transport, EnvLookup env = process_env(),
                 Sleeper sleep = real_sleeper());

    ProviderKind kind() const override { return ProviderKind::Live; }
    ContextHandle upload(const ContextSet& context, const FileContents& contents) override;
    std::string complete(const ContextHandle& handle, const AssembledPrompt& prompt) override;

private:
    std::string api_key() const;
    nlohmann::json call(HttpRequest request);

    ProviderConfig config_;
    std::shared_ptr<Transport> transport_;
    EnvLookup env_;
    Sleeper sleep_;
};

// Builds the provider the config names. Scripted providers replay
// script.for_session(session_index).
std::shared_ptr<Provider> make_provider(const ProviderConfig& config, const ScriptBook* script = nullptr,
                                        std::size_t session_index = 0);

// Cap enforcement, retries with exponential backoff and error translation
// in front of a Provider.
class Gateway {
public:
    Gateway(ProviderConfig config, std::shared_ptr<Provider> provider, Sleeper sleep = real_sleeper());

    ContextHandle upload_context(const ContextSet& context, const FileContents& contents);
    Completion complete(const ContextHandle& handle, const AssembledPrompt& prompt);

    const ProviderConfig& config() const { return config_; }
    Provider& provider() { return *provider_; }
    // Provider calls made through this gateway, retries included.
    std::size_t provider_calls() const { return calls_.load(); }

private:
    template <typename F>
    auto with_retries(const char* what, F&& call) -> std::pair<decltype(call()), int>;

    ProviderConfig config_;
    std::shared_ptr<Provider> provider_;
    Sleeper sleep_;
    std::atomic<std::size_t> calls_{0};
};

}  // namespace atlas
