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

#include <httplib.h>

#include "atlas/error.hpp"
#include "atlas/llm.hpp"
#include "atlas/util.hpp"

namespace atlas {

using nlohmann::json;

namespace {

constexpr int kVectorStorePolls = 60;

class HttplibTransport : public Transport {
public:
    HttplibTransport(const std::string& base_url, std::chrono::seconds timeout) : client_(base_url) {
        client_.set_connection_timeout(std::chrono::seconds(10));
        client_.set_read_timeout(timeout);
        client_.set_write_timeout(timeout);
    }

    HttpResponse send(const HttpRequest& request) override {
        httplib::Headers headers(request.headers.begin(), request.headers.end());
        httplib::Result res;
        if (request.method == "GET") {
            res = client_.Get(request.path, headers);
        } else if (!request.parts.empty()) {
            httplib::MultipartFormDataItems items;
            for (const auto& p : request.parts) items.push_back({p.name, p.content, p.filename, p.content_type});
            res = client_.Post(request.path, headers, items);
        } else {
            res = client_.Post(request.path, headers, request.body, request.content_type);
        }
        if (!res) throw TransportError("HTTP " + request.method + " " + request.path + ": " + httplib::to_string(res.error()));
        return {res->status, res->body};
    }

private:
    httplib::Client client_;
};

std::string upload_name(const std::string& path) {
    std::string out;
    for (char c : path) out += c == '/' ? '_' : c;
    // The files endpoint accepts a fixed set of extensions; .txt is always one.
    return out + ".txt";
}

std::string error_message(const std::string& body) {
    auto j = json::parse(body, nullptr, false);
    if (j.is_object() && j.contains("error") && j["error"].is_object() && j["error"].contains("message")) {
        return j["error"]["message"].get<std::string>();
    }
    return body.substr(0, 200);
}

}  // namespace

std::shared_ptr<Transport> make_http_transport(const std::string& base_url, std::chrono::seconds timeout) {
    return std::make_shared<HttplibTransport>(base_url, timeout);
}

LiveProvider::LiveProvider(ProviderConfig config, std::shared_ptr<Transport> transport, EnvLookup env, Sleeper sleep)
    : config_(std::move(config)), transport_(std::move(transport)), env_(std::move(env)), sleep_(std::move(sleep)) {}

std::string LiveProvider::api_key() const {
    auto key = env_(config_.credential_env);
    if (!key || key->empty()) {
        throw ProviderFailure(FailureKind::Configuration,
                              "environment variable " + config_.credential_env + " is not set");
    }
    return *key;
}

json LiveProvider::call(HttpRequest request) {
    request.headers["Authorization"] = "Bearer " + api_key();
    HttpResponse res;
    try {
        res = transport_->send(request);
    } catch (const TransportError& e) {
        throw ProviderFailure(FailureKind::Transient, e.what());
    }
    auto what = request.method + " " + request.path + " -> " + std::to_string(res.status);
    if (res.status == 401 || res.status == 403) throw ProviderFailure(FailureKind::Auth, what);
    if (res.status == 429) throw ProviderFailure(FailureKind::RateLimited, what + ": " + error_message(res.body));
    if (res.status == 408 || res.status >= 500) throw ProviderFailure(FailureKind::Transient, what);
    if (res.status < 200 || res.status >= 300) {
        throw ProviderFailure(FailureKind::Rejected, what + ": " + error_message(res.body));
    }
    auto j = json::parse(res.body, nullptr, false);
    if (j.is_discarded()) throw ProviderFailure(FailureKind::Transient, what + ": response body is not JSON");
    return j;
}

ContextHandle LiveProvider::upload(const ContextSet& context, const FileContents& contents) {
    std::vector<std::string> file_ids;
    for (const auto& path : context.selected_paths) {
        HttpRequest req;
        req.method = "POST";
        req.path = "/v1/files";
        req.parts.push_back({"purpose", "assistants", "", ""});
        req.parts.push_back({"file", "File path: " + path + "\n\n" + contents.at(path), upload_name(path), "text/plain"});
        auto j = call(std::move(req));
        if (!j.contains("id")) throw ProviderFailure(FailureKind::Rejected, "file upload returned no id");
        file_ids.push_back(j["id"].get<std::string>());
    }

    HttpRequest create;
    create.method = "POST";
    create.path = "/v1/vector_stores";
    create.content_type = "application/json";
    create.body = json{{"name", "atlas-" + context.snapshot_id}, {"file_ids", file_ids}}.dump();
    auto store = call(std::move(create));
    if (!store.contains("id")) throw ProviderFailure(FailureKind::Rejected, "vector store creation returned no id");
    auto store_id = store["id"].get<std::string>();

    for (int i = 0;; ++i) {
        auto status = store.value("status", std::string{});
        auto in_progress = store.contains("file_counts") ? store["file_counts"].value("in_progress", 0) : 0;
        if (status == "completed" && in_progress == 0) break;
        if (status == "expired") throw ProviderFailure(FailureKind::Rejected, "vector store " + store_id + " expired");
        if (i >= kVectorStorePolls) {
            throw ProviderFailure(FailureKind::Transient, "vector store " + store_id + " did not finish indexing");
        }
        sleep_(std::chrono::seconds(1));
        HttpRequest poll;
        poll.method = "GET";
        poll.path = "/v1/vector_stores/" + store_id;
        store = call(std::move(poll));
    }
    return {store_id, context.selected_paths, utc_timestamp()};
}

std::string LiveProvider::complete(const ContextHandle& handle, const AssembledPrompt& prompt) {
    if (handle.handle_id.empty() || handle.handle_id.starts_with("scripted-")) {
        throw ProviderFailure(FailureKind::InvalidHandle, "handle '" + handle.handle_id + "' is not a vector store");
    }
    HttpRequest req;
    req.method = "POST";
    req.path = "/v1/responses";
    req.content_type = "application/json";
    req.body = json{{"model", config_.model},
                    {"input", prompt.rendered_text},
                    {"tools", json::array({{{"type", "file_search"}, {"vector_store_ids", {handle.handle_id}}}})}}
                   .dump();
    auto j = call(std::move(req));
    std::string text;
    if (j.contains("output") && j["output"].is_array()) {
        for (const auto& item : j["output"]) {
            if (!item.contains("content") || !item["content"].is_array()) continue;
            for (const auto& c : item["content"]) {
                if (c.value("type", std::string{}) == "output_text") text += c.value("text", std::string{});
            }
        }
    }
    if (text.empty() && j.contains("output_text") && j["output_text"].is_string()) text = j["output_text"];
    return text;
}

}  // namespace atlas
