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

#include "atlas/llm.hpp"

#include <cctype>
#include <cstdlib>
#include <sstream>
#include <thread>

#include "atlas/error.hpp"
#include "atlas/util.hpp"

namespace atlas {

using nlohmann::json;

namespace {

std::string trim(std::string_view s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

// Flat TOML: `key = value` lines, '#' comments, optional [section] headers
// (ignored), quoted strings or bare scalars.
json parse_flat_toml(const std::string& text) {
    json out = json::object();
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        bool in_quotes = false;
        for (std::size_t i = 0; i < line.size(); ++i) {
            if (line[i] == '"') in_quotes = !in_quotes;
            if (line[i] == '#' && !in_quotes) {
                line.resize(i);
                break;
            }
        }
        auto t = trim(line);
        if (t.empty() || t.front() == '[') continue;
        auto eq = t.find('=');
        if (eq == std::string::npos) {
            throw Error(ErrorCode::Configuration, "config line " + std::to_string(lineno) + ": expected key = value");
        }
        auto key = trim(std::string_view(t).substr(0, eq));
        auto value = trim(std::string_view(t).substr(eq + 1));
        if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
            out[key] = value.substr(1, value.size() - 2);
        } else if (value == "true" || value == "false") {
            out[key] = value == "true";
        } else {
            try {
                std::size_t used = 0;
                long long n = std::stoll(value, &used);
                if (used != value.size()) throw std::invalid_argument(value);
                out[key] = n;
            } catch (const std::exception&) {
                out[key] = value;
            }
        }
    }
    return out;
}

ScriptEntry entry_from_json(const json& j) {
    if (j.is_string()) return ScriptEntry::reply(j.get<std::string>());
    if (j.is_object() && j.contains("error")) {
        auto kind = parse_failure_kind(j["error"].get<std::string>());
        if (!kind) throw Error(ErrorCode::Configuration, "unknown scripted error '" + j["error"].dump() + "'");
        return ScriptEntry::fail(*kind);
    }
    if (j.is_object() && j.contains("text")) return ScriptEntry::reply(j["text"].get<std::string>());
    throw Error(ErrorCode::Configuration, "script entries must be strings or {\"error\": kind} objects");
}

std::vector<ScriptEntry> entries_from_json(const json& arr) {
    if (!arr.is_array()) throw Error(ErrorCode::Configuration, "script responses must be an array");
    std::vector<ScriptEntry> out;
    for (const auto& e : arr) out.push_back(entry_from_json(e));
    return out;
}

}  // namespace

std::string_view to_string(ProviderKind kind) noexcept {
    return kind == ProviderKind::Live ? "live" : "scripted";
}

std::string_view to_string(FailureKind kind) noexcept {
    switch (kind) {
        case FailureKind::Transient: return "transient";
        case FailureKind::RateLimited: return "rate_limit";
        case FailureKind::Auth: return "auth";
        case FailureKind::Rejected: return "rejected";
        case FailureKind::ScriptExhausted: return "script_exhausted";
        case FailureKind::Configuration: return "configuration";
        case FailureKind::InvalidHandle: return "invalid_handle";
    }
    return "transient";
}

std::optional<FailureKind> parse_failure_kind(std::string_view text) {
    for (auto k : {FailureKind::Transient, FailureKind::RateLimited, FailureKind::Auth, FailureKind::Rejected,
                   FailureKind::ScriptExhausted, FailureKind::Configuration, FailureKind::InvalidHandle}) {
        if (to_string(k) == text) return k;
    }
    return std::nullopt;
}

void ProviderConfig::validate() const {
    if (kind == ProviderKind::Live && credential_env.empty()) {
        throw Error(ErrorCode::Configuration, "live provider requires credential_env (the API key variable name)");
    }
    if (kind == ProviderKind::Live && model.empty()) throw Error(ErrorCode::Configuration, "live provider requires a model");
    if (max_retries < 0) throw Error(ErrorCode::Configuration, "max_retries must be non-negative");
    if (request_timeout.count() <= 0) throw Error(ErrorCode::Configuration, "timeout_seconds must be positive");
    if (retry_backoff.count() < 0) throw Error(ErrorCode::Configuration, "retry_backoff_ms must be non-negative");
}

json ProviderConfig::to_json() const {
    json j = {{"provider", to_string(kind)},
              {"model", model},
              {"credential_env", credential_env},
              {"base_url", base_url},
              {"timeout_seconds", request_timeout.count()},
              {"max_retries", max_retries},
              {"retry_backoff_ms", retry_backoff.count()}};
    if (!script_path.empty()) j["script"] = script_path.string();
    return j;
}

ProviderConfig ProviderConfig::from_json(const json& j) {
    ProviderConfig c;
    try {
        if (j.contains("provider")) {
            auto p = j["provider"].get<std::string>();
            if (p == "live") c.kind = ProviderKind::Live;
            else if (p == "scripted") c.kind = ProviderKind::Scripted;
            else throw Error(ErrorCode::Configuration, "provider must be 'live' or 'scripted', got '" + p + "'");
        }
        if (j.contains("model")) c.model = j["model"].get<std::string>();
        if (j.contains("credential_env")) c.credential_env = j["credential_env"].get<std::string>();
        if (j.contains("base_url")) c.base_url = j["base_url"].get<std::string>();
        if (j.contains("timeout_seconds")) c.request_timeout = std::chrono::seconds(j["timeout_seconds"].get<long long>());
        if (j.contains("max_retries")) c.max_retries = j["max_retries"].get<int>();
        if (j.contains("retry_backoff_ms")) c.retry_backoff = std::chrono::milliseconds(j["retry_backoff_ms"].get<long long>());
        if (j.contains("script")) c.script_path = j["script"].get<std::string>();
    } catch (const json::exception& e) {
        throw Error(ErrorCode::Configuration, std::string("invalid provider config: ") + e.what());
    }
    c.validate();
    return c;
}

ProviderConfig load_provider_config(const std::filesystem::path& file) {
    auto text = read_file(file);
    json j;
    if (file.extension() == ".json") {
        try {
            j = json::parse(text);
        } catch (const json::parse_error& e) {
            throw Error(ErrorCode::Configuration, std::string("config is not valid JSON: ") + e.what());
        }
    } else {
        j = parse_flat_toml(text);
    }
    auto config = ProviderConfig::from_json(j);
    if (!config.script_path.empty() && config.script_path.is_relative()) {
        config.script_path = file.parent_path() / config.script_path;
    }
    return config;
}

json ContextHandle::to_json() const {
    return {{"handleId", handle_id}, {"uploadedPaths", uploaded_paths}, {"createdAt", created_at}};
}

ContextHandle ContextHandle::from_json(const json& j) {
    return {j.at("handleId").get<std::string>(), j.at("uploadedPaths").get<std::vector<std::string>>(),
            j.value("createdAt", std::string{})};
}

ScriptedProvider::ScriptedProvider(std::vector<ScriptEntry> script) : script_(script.begin(), script.end()) {}

ContextHandle ScriptedProvider::upload(const ContextSet& context, const FileContents& contents) {
    std::lock_guard lock(mu_);
    ++upload_calls_;
    if (upload_failure_) throw ProviderFailure(*upload_failure_, "scripted upload failure");
    last_upload_ = contents;
    return {"scripted-" + std::to_string(++handles_issued_), context.selected_paths, utc_timestamp()};
}

std::string ScriptedProvider::complete(const ContextHandle& handle, const AssembledPrompt& prompt) {
    std::lock_guard lock(mu_);
    ++complete_calls_;
    if (!handle.handle_id.starts_with("scripted-")) {
        throw ProviderFailure(FailureKind::InvalidHandle, "handle '" + handle.handle_id + "' was not issued by a scripted provider");
    }
    prompts_.push_back(prompt);
    if (script_.empty()) {
        throw ProviderFailure(FailureKind::ScriptExhausted,
                              "script exhausted after " + std::to_string(complete_calls_ - 1) + " replies");
    }
    auto entry = std::move(script_.front());
    script_.pop_front();
    if (entry.failure) throw ProviderFailure(*entry.failure, "scripted " + std::string(to_string(*entry.failure)));
    return entry.text;
}

void ScriptedProvider::push(ScriptEntry entry) {
    std::lock_guard lock(mu_);
    script_.push_back(std::move(entry));
}

void ScriptedProvider::fail_uploads(std::optional<FailureKind> kind) {
    std::lock_guard lock(mu_);
    upload_failure_ = kind;
}

std::size_t ScriptedProvider::complete_calls() const {
    std::lock_guard lock(mu_);
    return complete_calls_;
}

std::size_t ScriptedProvider::upload_calls() const {
    std::lock_guard lock(mu_);
    return upload_calls_;
}

std::size_t ScriptedProvider::remaining() const {
    std::lock_guard lock(mu_);
    return script_.size();
}

std::vector<AssembledPrompt> ScriptedProvider::prompts() const {
    std::lock_guard lock(mu_);
    return prompts_;
}

FileContents ScriptedProvider::last_upload() const {
    std::lock_guard lock(mu_);
    return last_upload_;
}

std::vector<ScriptEntry> ScriptBook::for_session(std::size_t index) const {
    if (sessions.empty()) return {};
    return sessions[index % sessions.size()];
}

ScriptBook ScriptBook::from_json(const json& j) {
    ScriptBook book;
    if (j.is_array()) {
        book.sessions.push_back(entries_from_json(j));
    } else if (j.is_object() && j.contains("sessions")) {
        for (const auto& s : j["sessions"]) book.sessions.push_back(entries_from_json(s));
    } else if (j.is_object() && j.contains("responses")) {
        book.sessions.push_back(entries_from_json(j["responses"]));
    } else {
        throw Error(ErrorCode::Configuration, "script must be an array or an object with 'sessions' or 'responses'");
    }
    if (j.is_object() && j.contains("uploadFailure")) {
        book.upload_failure = parse_failure_kind(j["uploadFailure"].get<std::string>());
        if (!book.upload_failure) throw Error(ErrorCode::Configuration, "unknown uploadFailure kind");
    }
    return book;
}

ScriptBook ScriptBook::load(const std::filesystem::path& file) {
    try {
        return from_json(json::parse(read_file(file)));
    } catch (const json::exception& e) {
        throw Error(ErrorCode::Configuration, "invalid script file " + file.string() + ": " + e.what());
    }
}

Sleeper real_sleeper() {
    return [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

EnvLookup process_env() {
    return [](const std::string& name) -> std::optional<std::string> {
        const char* v = std::getenv(name.c_str());
        if (!v) return std::nullopt;
        return std::string(v);
    };
}

std::shared_ptr<Provider> make_provider(const ProviderConfig& config, const ScriptBook* script,
                                        std::size_t session_index) {
    config.validate();
    if (config.kind == ProviderKind::Live) {
        return std::make_shared<LiveProvider>(config, make_http_transport(config.base_url, config.request_timeout));
    }
    auto provider = std::make_shared<ScriptedProvider>(script ? script->for_session(session_index)
                                                              : std::vector<ScriptEntry>{});
    if (script) provider->fail_uploads(script->upload_failure);
    return provider;
}

Gateway::Gateway(ProviderConfig config, std::shared_ptr<Provider> provider, Sleeper sleep)
    : config_(std::move(config)), provider_(std::move(provider)), sleep_(std::move(sleep)) {
    config_.validate();
    if (!provider_) throw Error(ErrorCode::Configuration, "gateway needs a provider");
}

template <typename F>
auto Gateway::with_retries(const char* what, F&& call) -> std::pair<decltype(call()), int> {
    std::string last;
    for (int attempt = 1;; ++attempt) {
        try {
            ++calls_;
            return {call(), attempt};
        } catch (const ProviderFailure& f) {
            auto at = "attempt=" + std::to_string(attempt);
            switch (f.kind()) {
                case FailureKind::Auth:
                    throw Error(ErrorCode::AuthFailed, std::string(what) + " failed authentication: " + f.what(), {at});
                case FailureKind::Rejected:
                    throw Error(ErrorCode::ProviderRejected, std::string(what) + " rejected by provider: " + f.what(), {at});
                case FailureKind::ScriptExhausted:
                    throw Error(ErrorCode::ScriptExhausted, f.what(), {at});
                case FailureKind::Configuration:
                    throw Error(ErrorCode::Configuration, f.what(), {at});
                case FailureKind::InvalidHandle:
                    throw Error(ErrorCode::InvalidHandle, f.what(), {at});
                case FailureKind::Transient:
                case FailureKind::RateLimited:
                    last = f.what();
                    break;
            }
            if (attempt > config_.max_retries) {
                throw Error(ErrorCode::RetriesExhausted,
                            std::string(what) + " failed after " + std::to_string(attempt) + " attempts: " + last,
                            {at, last});
            }
            sleep_(config_.retry_backoff * (1LL << (attempt - 1)));
        }
    }
}

ContextHandle Gateway::upload_context(const ContextSet& context, const FileContents& contents) {
    if (context.selected_paths.size() > kContextCap) {
        throw Error(ErrorCode::OverCap,
                    "context holds " + std::to_string(context.selected_paths.size()) + " files; the cap is " +
                        std::to_string(kContextCap),
                    {std::to_string(context.selected_paths.size())});
    }
    for (const auto& p : context.selected_paths) {
        if (!contents.contains(p)) throw Error(ErrorCode::InvalidArgument, "no content supplied for " + p, {p});
    }
    return with_retries("upload", [&] { return provider_->upload(context, contents); }).first;
}

Completion Gateway::complete(const ContextHandle& handle, const AssembledPrompt& prompt) {
    auto start = std::chrono::steady_clock::now();
    auto [text, attempt] = with_retries("completion", [&] { return provider_->complete(handle, prompt); });
    if (text.empty()) throw Error(ErrorCode::ProviderRejected, "provider returned an empty completion");
    auto latency = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start);
    return {std::move(text), prompt.prompt_ref(), latency, attempt};
}

}  // namespace atlas
