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

#include "atlas/service.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <random>
#include <sstream>

#include "atlas/util.hpp"

namespace atlas {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(SessionStatus status) noexcept {
    return status == SessionStatus::Uploaded ? "uploaded" : "uploadFailed";
}

json ChatEntry::to_json() const {
    return {{"question", question},
            {"selectedNodeId", selected_node_id ? json(*selected_node_id) : json(nullptr)},
            {"kind", kind ? json(map_kind_slug(*kind)) : json(nullptr)},
            {"nodePayload", node_payload},
            {"promptRef", prompt_ref},
            {"answer", answer},
            {"timestamp", timestamp}};
}

ChatEntry ChatEntry::from_json(const json& j) {
    ChatEntry e;
    e.question = j.at("question").get<std::string>();
    if (j.contains("selectedNodeId") && j["selectedNodeId"].is_string()) e.selected_node_id = j["selectedNodeId"];
    if (j.contains("kind") && j["kind"].is_string()) e.kind = parse_map_kind(j["kind"].get<std::string>());
    e.node_payload = j.value("nodePayload", json(nullptr));
    e.prompt_ref = j.value("promptRef", std::string{});
    e.answer = j.value("answer", std::string{});
    e.timestamp = j.value("timestamp", std::string{});
    return e;
}

struct MapService::Session {
    std::string id;
    fs::path dir;
    std::string label;
    std::string created_at;
    std::optional<CodebaseSnapshot> snapshot;

    // Serializes generation (global, regenerate, local).
    std::timed_mutex generation_mu;
    std::mutex chat_mu;

    // Guards the fields below.
    mutable std::mutex state_mu;
    SessionStatus status = SessionStatus::UploadFailed;
    std::optional<ContextHandle> handle;
    std::string upload_error;
    std::shared_ptr<Gateway> gateway;

    fs::path sources() const { return dir / "sources"; }
    fs::path map_dir(MapKind kind) const { return dir / "maps" / std::string(map_kind_slug(kind)); }
    fs::path payload_file(MapKind kind) const { return map_dir(kind) / "payload.json"; }
};

namespace {

constexpr int kRetryAfterSeconds = 5;

std::string new_session_id() {
    static thread_local std::mt19937_64 rng{std::random_device{}()};
    char buf[24];
    std::snprintf(buf, sizeof buf, "s-%012llx", static_cast<unsigned long long>(rng() & 0xffffffffffffULL));
    return buf;
}

bool valid_session_id(const std::string& id) {
    return !id.empty() && id.size() <= 64 &&
           std::all_of(id.begin(), id.end(), [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_'; });
}

// File name for a node id: alphanumerics kept, everything else %XX.
std::string encode_node_file(const std::string& node_id) {
    static constexpr char hex[] = "0123456789ABCDEF";
    std::string out;
    for (unsigned char c : node_id) {
        if (std::isalnum(c) || c == '-' || c == '_') out += static_cast<char>(c);
        else {
            out += '%';
            out += hex[c >> 4];
            out += hex[c & 15];
        }
    }
    return out + ".json";
}

int latest_version(const fs::path& map_dir) {
    int best = 0;
    std::error_code ec;
    if (!fs::is_directory(map_dir, ec)) return 0;
    for (const auto& entry : fs::directory_iterator(map_dir)) {
        auto name = entry.path().filename().string();
        if (!entry.is_directory() || name.size() < 2 || name[0] != 'v') continue;
        try {
            best = std::max(best, std::stoi(name.substr(1)));
        } catch (const std::exception&) {
        }
    }
    return best;
}

std::string trim(std::string_view s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::string first_lines(const std::string& text, std::size_t n) {
    std::size_t pos = 0;
    for (std::size_t i = 0; i < n && pos != std::string::npos; ++i) {
        pos = text.find('\n', pos);
        if (pos != std::string::npos) ++pos;
    }
    return pos == std::string::npos ? text : text.substr(0, pos);
}

// Explanation text of a local-map completion: what follows an
// "Explanation:" marker, else everything outside the DOT block.
std::string local_explanation(const std::string& completion, const std::string& dot) {
    auto lower = completion;
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    auto at = lower.find("explanation:");
    std::string text;
    if (at != std::string::npos) {
        text = completion.substr(at + 12);
        if (auto fence = text.find("```"); fence != std::string::npos) text.resize(fence);
    } else {
        text = completion;
        if (auto d = text.find(dot); d != std::string::npos) text.erase(d, dot.size());
        std::string cleaned;
        std::istringstream in(text);
        for (std::string line; std::getline(in, line);) {
            if (trim(line).starts_with("```")) continue;
            cleaned += line + "\n";
        }
        text = cleaned;
    }
    return trim(text);
}

void remove_quietly(const fs::path& p) {
    std::error_code ec;
    fs::remove_all(p, ec);
}

}  // namespace

MapService::MapService(ServiceConfig config)
    : config_(std::move(config)), prompts_(config_.prompts ? *config_.prompts : PromptLibrary::builtin()) {
    if (config_.data_dir.empty()) throw Error(ErrorCode::Configuration, "service needs a data directory");
    config_.provider.validate();
    fs::create_directories(config_.data_dir);
}

MapService::~MapService() = default;

std::shared_ptr<Gateway> MapService::fresh_gateway() {
    std::lock_guard lock(mu_);
    auto ordinal = providers_made_++;
    auto provider = config_.provider_factory
                        ? config_.provider_factory(ordinal)
                        : make_provider(config_.provider, config_.script ? &*config_.script : nullptr, ordinal);
    auto gw = std::make_shared<Gateway>(config_.provider, std::move(provider), config_.sleep);
    gateways_.push_back(gw);
    return gw;
}

std::size_t MapService::gateway_calls() const {
    std::lock_guard lock(mu_);
    std::size_t n = 0;
    for (const auto& g : gateways_) n += g->provider_calls();
    return n;
}

Gateway& MapService::gateway(Session& s) {
    std::lock_guard lock(s.state_mu);
    if (!s.gateway) s.gateway = fresh_gateway();
    return *s.gateway;
}

void MapService::persist(const Session& s) const {
    json j;
    {
        std::lock_guard lock(s.state_mu);
        j = {{"sessionId", s.id},
             {"label", s.label},
             {"createdAt", s.created_at},
             {"status", to_string(s.status)},
             {"contextHandle", s.handle ? s.handle->to_json() : json(nullptr)},
             {"uploadError", s.upload_error}};
    }
    write_file(s.dir / "session.json", j.dump(2) + "\n");
}

std::shared_ptr<MapService::Session> MapService::open(const std::string& session_id) {
    if (!valid_session_id(session_id)) throw Error(ErrorCode::NotFound, "unknown session '" + session_id + "'", {session_id});
    std::lock_guard lock(mu_);
    if (auto it = sessions_.find(session_id); it != sessions_.end()) return it->second;
    auto dir = config_.data_dir / session_id;
    std::error_code ec;
    if (!fs::exists(dir / "session.json", ec)) {
        throw Error(ErrorCode::NotFound, "unknown session '" + session_id + "'", {session_id});
    }
    auto j = json::parse(read_file(dir / "session.json"), nullptr, false);
    if (j.is_discarded()) throw Error(ErrorCode::MalformedJson, "session file of " + session_id + " is corrupt");
    auto s = std::make_shared<Session>();
    s->id = session_id;
    s->dir = dir;
    s->label = j.value("label", std::string{});
    s->created_at = j.value("createdAt", std::string{});
    s->status = j.value("status", std::string{}) == "uploaded" ? SessionStatus::Uploaded : SessionStatus::UploadFailed;
    if (j.contains("contextHandle") && j["contextHandle"].is_object()) s->handle = ContextHandle::from_json(j["contextHandle"]);
    s->upload_error = j.value("uploadError", std::string{});
    s->snapshot = load_snapshot(dir / "snapshot.json");
    sessions_[session_id] = s;
    return s;
}

std::unique_lock<std::timed_mutex> MapService::lock(Session& s) {
    std::unique_lock<std::timed_mutex> l(s.generation_mu, std::defer_lock);
    if (!l.try_lock_for(config_.lock_wait)) {
        throw Error(ErrorCode::GenerationInProgress, "a generation is already running for session " + s.id,
                    {"retryAfter=" + std::to_string(kRetryAfterSeconds)});
    }
    return l;
}

void MapService::upload(Session& s) {
    auto gw = fresh_gateway();
    try {
        auto context = select_context(*s.snapshot, config_.context_cap);
        auto contents = read_contents(s.sources(), context.selected_paths);
        auto handle = gw->upload_context(context, contents);
        std::lock_guard lock(s.state_mu);
        s.gateway = gw;
        s.handle = handle;
        s.status = SessionStatus::Uploaded;
        s.upload_error.clear();
    } catch (const Error& e) {
        std::lock_guard lock(s.state_mu);
        s.status = SessionStatus::UploadFailed;
        s.upload_error = std::string(to_string(e.code())) + ": " + e.what();
    }
    persist(s);
}

void MapService::require_uploaded(const Session& s) const {
    std::lock_guard lock(s.state_mu);
    if (s.status != SessionStatus::Uploaded || !s.handle) {
        throw Error(ErrorCode::UploadPending,
                    "session " + s.id + " has no uploaded context; retry the upload first (" + s.upload_error + ")",
                    {s.upload_error});
    }
}

json MapService::create_session(const CreateSessionRequest& request) {
    if (request.files.has_value() == request.server_path.has_value()) {
        throw Error(ErrorCode::InvalidArgument, "provide exactly one of an uploaded archive or a server path");
    }
    auto s = std::make_shared<Session>();
    do {
        s->id = new_session_id();
        s->dir = config_.data_dir / s->id;
    } while (fs::exists(s->dir));
    s->created_at = utc_timestamp();

    try {
        ScanOptions scan_options;
        scan_options.include_extensions = config_.include_extensions;
        scan_options.exclude_globs = config_.exclude_globs;
        if (request.files) {
            std::size_t total = 0;
            for (const auto& [path, content] : *request.files) total += content.size();
            if (total > config_.max_archive_bytes) {
                throw Error(ErrorCode::ArchiveTooLarge,
                            "archive holds " + std::to_string(total) + " bytes; the limit is " +
                                std::to_string(config_.max_archive_bytes),
                            {std::to_string(total)});
            }
            for (const auto& [path, content] : *request.files) {
                auto norm = normalize_path(path);
                auto unified = path;
                std::replace(unified.begin(), unified.end(), '\\', '/');
                bool climbs = ("/" + unified + "/").find("/../") != std::string::npos;
                if (norm.empty() || climbs || unified.starts_with('/')) {
                    throw Error(ErrorCode::InvalidArgument, "archive path '" + path + "' escapes the archive root", {path});
                }
                write_file(s->sources() / norm, content);
            }
            s->label = request.label.empty() ? "upload" : request.label;
            fs::create_directories(s->sources());
            scan_options.root = s->sources();
            scan_options.root_label = s->label;
            s->snapshot = scan(scan_options);
        } else {
            scan_options.root = *request.server_path;
            scan_options.root_label = request.label;
            auto snapshot = scan(scan_options);
            for (const auto& f : snapshot.files()) {
                write_file(s->sources() / f.path, read_file(*request.server_path / f.path));
            }
            s->label = snapshot.root_label();
            s->snapshot = std::move(snapshot);
        }
    } catch (...) {
        remove_quietly(s->dir);
        throw;
    }

    save_snapshot(*s->snapshot, s->dir / "snapshot.json");
    upload(*s);
    {
        std::lock_guard lock(mu_);
        sessions_[s->id] = s;
    }
    return summary(*s);
}

json MapService::retry_upload(const std::string& session_id) {
    auto s = open(session_id);
    auto guard = lock(*s);
    bool uploaded;
    {
        std::lock_guard l(s->state_mu);
        uploaded = s->status == SessionStatus::Uploaded;
    }
    if (!uploaded) upload(*s);
    return summary(*s);
}

json MapService::session_summary(const std::string& session_id) { return summary(*open(session_id)); }

json MapService::summary(const Session& s) const {
    json maps = json::object();
    for (auto kind : {MapKind::BusinessComponent, MapKind::FunctionCall}) {
        std::error_code ec;
        maps[std::string(map_kind_slug(kind))] = {{"generated", fs::exists(s.payload_file(kind), ec)},
                                                  {"versions", latest_version(s.map_dir(kind))}};
    }
    json histogram = json::object();
    for (const auto& [lang, n] : s.snapshot->language_histogram()) histogram[lang] = n;
    std::lock_guard lock(s.state_mu);
    return {{"sessionId", s.id},
            {"label", s.label},
            {"createdAt", s.created_at},
            {"status", to_string(s.status)},
            {"uploadError", s.upload_error.empty() ? json(nullptr) : json(s.upload_error)},
            {"snapshotId", s.snapshot->snapshot_id()},
            {"fileCount", s.snapshot->files().size()},
            {"totalLoc", s.snapshot->total_loc()},
            {"languages", histogram},
            {"contextHandle", s.handle ? s.handle->to_json() : json(nullptr)},
            {"maps", maps}};
}

std::string MapService::generate(Session& s, MapKind kind) {
    auto version = latest_version(s.map_dir(kind)) + 1;
    auto version_dir = s.map_dir(kind) / ("v" + std::to_string(version));
    ContextHandle handle;
    {
        std::lock_guard lock(s.state_mu);
        handle = *s.handle;
    }
    Refiner refiner(gateway(s), prompts_, *s.snapshot, handle);
    RefinementTrace trace;
    try {
        trace = refiner.run(s.id, kind, config_.refine);
    } catch (const RefinementError& e) {
        save_trace(e.partial_trace(), version_dir);
        throw;
    }
    save_trace(trace, version_dir);

    const auto* last = trace.last_success();
    if (trace.stopped_because == StopReason::ParseFailure) {
        const auto& failed = trace.iterations.back();
        throw Error(ErrorCode::ParseFailure,
                    "iteration " + std::to_string(failed.index) + " returned no usable map: " + failed.parse_error,
                    {failed.raw_completion});
    }

    auto graph_dot = serialize_dot(*last->graph);
    json iterations = json::array();
    for (const auto& it : trace.iterations) {
        iterations.push_back({{"index", it.index},
                              {"tp", it.report->true_positives},
                              {"fp", it.report->false_positives},
                              {"fn", it.report->false_negatives},
                              {"accuracy", it.report->accuracy()},
                              {"coverageDelta", it.coverage_delta}});
    }
    json payload = {{"sessionId", s.id},
                    {"kind", map_kind_slug(kind)},
                    {"version", version},
                    {"graphDot", graph_dot},
                    {"overviewJson", last->overview ? last->overview->to_json() : json(nullptr)},
                    {"warnings", last->warnings},
                    {"trace",
                     {{"stoppedBecause", to_string(*trace.stopped_because)},
                      {"iterations", iterations},
                      {"file", (fs::path("v" + std::to_string(version)) / trace_file_name(s.id)).string()}}}};
    auto text = payload.dump();
    write_file(version_dir / "graph.dot", graph_dot);
    if (last->overview) write_file(version_dir / "overview.json", last->overview->to_json().dump(2) + "\n");
    write_file(s.payload_file(kind), text);
    return text;
}

std::string MapService::get_global(const std::string& session_id, MapKind kind) {
    if (!is_global(kind)) throw Error(ErrorCode::InvalidArgument, "local maps are requested per node");
    auto s = open(session_id);
    std::error_code ec;
    if (fs::exists(s->payload_file(kind), ec)) return read_file(s->payload_file(kind));
    auto guard = lock(*s);
    if (fs::exists(s->payload_file(kind), ec)) return read_file(s->payload_file(kind));
    require_uploaded(*s);
    return generate(*s, kind);
}

std::string MapService::regenerate(const std::string& session_id, MapKind kind) {
    if (!is_global(kind)) throw Error(ErrorCode::InvalidArgument, "local maps are requested per node");
    auto s = open(session_id);
    auto guard = lock(*s);
    require_uploaded(*s);
    upload(*s);
    require_uploaded(*s);
    std::error_code ec;
    fs::remove(s->payload_file(kind), ec);
    remove_quietly(s->map_dir(kind) / "local");
    return generate(*s, kind);
}

std::optional<MapGraph> MapService::stored_graph(const Session& s, MapKind kind) const {
    std::error_code ec;
    if (!fs::exists(s.payload_file(kind), ec)) return std::nullopt;
    auto j = json::parse(read_file(s.payload_file(kind)));
    return parse_dot(j.at("graphDot").get<std::string>(), kind);
}

LocalResult MapService::parse_local_payload(const std::string& payload) const {
    auto j = json::parse(payload);
    LocalResult r;
    r.node_id = j.at("nodeId").get<std::string>();
    r.graph = parse_dot(j.at("graphDot").get<std::string>(), MapKind::Local);
    r.explanation = j.value("explanation", std::string{});
    return r;
}

std::string MapService::get_local(const std::string& session_id, MapKind kind, const std::string& node_id) {
    if (!is_global(kind)) throw Error(ErrorCode::InvalidArgument, "nodes are addressed through a global map kind");
    auto s = open(session_id);
    auto cache = s->map_dir(kind) / "local" / encode_node_file(node_id);
    std::error_code ec;
    if (fs::exists(cache, ec)) return read_file(cache);

    auto graph = stored_graph(*s, kind);
    if (!graph) {
        throw Error(ErrorCode::NotFound, "no " + std::string(map_kind_slug(kind)) + " map has been generated yet",
                    {std::string(map_kind_slug(kind))});
    }
    const auto* node = graph->find(node_id);
    if (!node) throw Error(ErrorCode::UnknownNode, "node '" + node_id + "' is not in the map", {node_id});

    auto guard = lock(*s);
    if (fs::exists(cache, ec)) return read_file(cache);
    require_uploaded(*s);

    std::vector<CodeExcerpt> excerpts;
    std::vector<std::string> warnings;
    for (const auto& raw : node->key_files()) {
        auto path = normalize_path(raw);
        const SourceFile* file = s->snapshot->find(path);
        if (!file) {
            // Models sometimes drop leading directories; accept a unique suffix match.
            const SourceFile* match = nullptr;
            int hits = 0;
            for (const auto& f : s->snapshot->files()) {
                if (f.path.ends_with("/" + path)) {
                    match = &f;
                    ++hits;
                }
            }
            if (hits == 1) file = match;
        }
        if (!file) {
            warnings.push_back("key file not in snapshot: " + raw);
            continue;
        }
        excerpts.push_back({file->path, first_lines(read_file(s->sources() / file->path), config_.excerpt_lines)});
    }

    auto prompt = prompts_.assemble_local(*node, excerpts);
    ContextHandle handle;
    {
        std::lock_guard lock(s->state_mu);
        handle = *s->handle;
    }
    auto& gw = gateway(*s);
    auto completion = gw.complete(handle, prompt);
    std::optional<MapGraph> local;
    std::string dot, error;
    for (int round = 0; round < 2 && !local; ++round) {
        if (round == 1) completion = gw.complete(handle, prompts_.with_format_reminder(prompt));
        auto extracted = extract_dot(completion.raw_text);
        if (!extracted) {
            error = "no DOT graph found in completion";
            continue;
        }
        try {
            local = parse_dot(*extracted, MapKind::Local);
            dot = *extracted;
        } catch (const Error& e) {
            error = e.what();
        }
    }
    if (!local) {
        throw Error(ErrorCode::ParseFailure, "local map for '" + node_id + "' could not be parsed: " + error,
                    {completion.raw_text});
    }

    json payload = {{"sessionId", s->id},
                    {"kind", map_kind_slug(kind)},
                    {"nodeId", node_id},
                    {"graphDot", serialize_dot(*local)},
                    {"explanation", local_explanation(completion.raw_text, dot)},
                    {"warnings", warnings}};
    auto text = payload.dump();
    write_file(cache, text);
    return text;
}

ChatEntry MapService::chat(const std::string& session_id, const std::string& question,
                           const std::optional<std::string>& selected_node_id, std::optional<MapKind> kind) {
    if (trim(question).empty()) throw Error(ErrorCode::EmptyQuestion, "question is empty");
    if (kind && !is_global(*kind)) throw Error(ErrorCode::InvalidArgument, "nodes are addressed through a global map kind");
    auto s = open(session_id);
    require_uploaded(*s);

    ChatEntry entry;
    entry.question = question;
    entry.selected_node_id = selected_node_id;
    entry.node_payload = nullptr;
    std::optional<MapNode> node;
    if (selected_node_id) {
        std::vector<MapKind> kinds = kind ? std::vector<MapKind>{*kind}
                                          : std::vector<MapKind>{MapKind::BusinessComponent, MapKind::FunctionCall};
        for (auto k : kinds) {
            if (auto g = stored_graph(*s, k)) {
                if (const auto* n = g->find(*selected_node_id)) {
                    node = *n;
                    entry.kind = k;
                    break;
                }
            }
        }
        if (!node) throw Error(ErrorCode::UnknownNode, "node '" + *selected_node_id + "' is not in any map", {*selected_node_id});
        entry.node_payload = node->payload_json();
        entry.node_payload["id"] = node->id;
        entry.node_payload["label"] = node->label;
    }

    auto prompt = prompts_.assemble_query(question, node ? &*node : nullptr);
    ContextHandle handle;
    {
        std::lock_guard lock(s->state_mu);
        handle = *s->handle;
    }
    std::lock_guard chat_lock(s->chat_mu);
    auto completion = gateway(*s).complete(handle, prompt);
    entry.prompt_ref = completion.prompt_ref;
    entry.answer = trim(completion.raw_text);
    entry.timestamp = utc_timestamp();

    auto log = s->dir / "chat.jsonl";
    std::string existing;
    std::error_code ec;
    if (fs::exists(log, ec)) existing = read_file(log);
    write_file(log, existing + entry.to_json().dump() + "\n");
    return entry;
}

std::vector<ChatEntry> MapService::chat_log(const std::string& session_id) {
    auto s = open(session_id);
    std::vector<ChatEntry> out;
    auto log = s->dir / "chat.jsonl";
    std::error_code ec;
    if (!fs::exists(log, ec)) return out;
    std::lock_guard chat_lock(s->chat_mu);
    std::istringstream in(read_file(log));
    for (std::string line; std::getline(in, line);) {
        if (!line.empty()) out.push_back(ChatEntry::from_json(json::parse(line)));
    }
    return out;
}

std::string MapService::trace(const std::string& session_id, MapKind kind) {
    if (!is_global(kind)) throw Error(ErrorCode::InvalidArgument, "traces exist for global maps only");
    auto s = open(session_id);
    auto v = latest_version(s->map_dir(kind));
    if (v == 0) {
        throw Error(ErrorCode::NotFound, "no " + std::string(map_kind_slug(kind)) + " trace exists yet",
                    {std::string(map_kind_slug(kind))});
    }
    return read_file(s->map_dir(kind) / ("v" + std::to_string(v)) / trace_file_name(s->id));
}

}  // namespace atlas
