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


#include <deque>
#include <thread>

#include <httplib.h>

#include "atlas/llm.hpp"
#include "support/checks.hpp"
#include "support/support.hpp"

using namespace atlas;
using atlas::testing::RecordingSleeper;
using nlohmann::json;

namespace {

ProviderConfig scripted_config(int retries = 3) {
    ProviderConfig c;
    c.max_retries = retries;
    c.retry_backoff = std::chrono::milliseconds(100);
    return c;
}

ProviderConfig live_config(int retries = 3) {
    auto c = scripted_config(retries);
    c.kind = ProviderKind::Live;
    c.credential_env = "ATLAS_TEST_KEY";
    return c;
}

EnvLookup env_with(std::optional<std::string> key) {
    return [key](const std::string& name) -> std::optional<std::string> {
        return name == "ATLAS_TEST_KEY" ? key : std::nullopt;
    };
}

ContextSet context_of(std::size_t n, FileContents& contents) {
    ContextSet ctx{"snap", {}, SelectionStrategy::all()};
    for (std::size_t i = 0; i < n; ++i) {
        auto p = "f" + std::to_string(i) + ".py";
        ctx.selected_paths.push_back(p);
        contents[p] = "x = " + std::to_string(i) + "\n";
    }
    return ctx;
}

AssembledPrompt prompt() { return PromptLibrary::builtin().assemble_global(MapKind::BusinessComponent); }

// Transport that replays canned responses and records requests.
class FakeTransport : public Transport {
public:
    std::deque<HttpResponse> responses;
    std::vector<HttpRequest> requests;

    HttpResponse send(const HttpRequest& request) override {
        requests.push_back(request);
        if (responses.empty()) throw TransportError("no canned response");
        auto r = responses.front();
        responses.pop_front();
        return r;
    }
};

std::string responses_body(const std::string& text) {
    return json{{"output", json::array({{{"type", "message"},
                                         {"content", json::array({{{"type", "output_text"}, {"text", text}}})}}})}}
        .dump();
}

ContextHandle store_handle() { return {"vs_1", {"a.py"}, "2026-01-01T00:00:00Z"}; }

}  // namespace

TEST_CASE("scripted upload records contents and issues a handle") {
    atlas::testing::Project44 project;
    auto provider = std::make_shared<ScriptedProvider>();
    Gateway gw(scripted_config(), provider);
    auto ctx = select_context(project.snapshot);
    auto handle = gw.upload_context(ctx, project.contents);
    CHECK(handle.uploaded_paths.size() == 44);
    CHECK(handle.handle_id.starts_with("scripted-"));
    CHECK(provider->last_upload().size() == 44);
    CHECK(ContextHandle::from_json(handle.to_json()).uploaded_paths == handle.uploaded_paths);
}

TEST_CASE("the context cap is checked before any provider call") {
    FileContents contents;
    auto provider = std::make_shared<ScriptedProvider>();
    Gateway gw(scripted_config(), provider);
    auto over = context_of(101, contents);
    CHECK_ERROR_CODE(gw.upload_context(over, contents), ErrorCode::OverCap);
    CHECK(provider->upload_calls() == 0);
    CHECK(gw.provider_calls() == 0);
    auto at_cap = context_of(100, contents);
    CHECK(gw.upload_context(at_cap, contents).uploaded_paths.size() == 100);

    auto transport = std::make_shared<FakeTransport>();
    Gateway live(live_config(), std::make_shared<LiveProvider>(live_config(), transport, env_with("k")));
    CHECK_ERROR_CODE(live.upload_context(over, contents), ErrorCode::OverCap);
    CHECK(transport->requests.empty());
}

TEST_CASE("missing file content is rejected") {
    FileContents contents;
    auto ctx = context_of(3, contents);
    contents.erase("f1.py");
    Gateway gw(scripted_config(), std::make_shared<ScriptedProvider>());
    CHECK_ERROR_CODE(gw.upload_context(ctx, contents), ErrorCode::InvalidArgument);
}

TEST_CASE("scripted replies are consumed in order then exhausted") {
    auto provider = std::make_shared<ScriptedProvider>(atlas::testing::replies({"r1", "r2"}));
    Gateway gw(scripted_config(), provider);
    FileContents contents;
    auto handle = gw.upload_context(context_of(1, contents), contents);
    CHECK(gw.complete(handle, prompt()).raw_text == "r1");
    auto second = gw.complete(handle, prompt());
    CHECK(second.raw_text == "r2");
    CHECK(second.attempt == 1);
    CHECK(second.prompt_ref == "GlobalBusiness@1");
    CHECK_ERROR_CODE(gw.complete(handle, prompt()), ErrorCode::ScriptExhausted);
    CHECK(provider->prompts().size() == 3);
}

TEST_CASE("scripted provider rejects foreign handles") {
    Gateway gw(scripted_config(), std::make_shared<ScriptedProvider>(atlas::testing::replies({"r1"})));
    CHECK_ERROR_CODE(gw.complete(store_handle(), prompt()), ErrorCode::InvalidHandle);
}

TEST_CASE("transient failures retry with doubling backoff") {
    RecordingSleeper sleeper;
    auto provider = std::make_shared<ScriptedProvider>(std::vector<ScriptEntry>{
        ScriptEntry::fail(FailureKind::Transient), ScriptEntry::fail(FailureKind::RateLimited),
        ScriptEntry::fail(FailureKind::Transient), ScriptEntry::reply("ok")});
    Gateway gw(scripted_config(3), provider, sleeper.fn());
    FileContents contents;
    auto handle = gw.upload_context(context_of(1, contents), contents);
    auto c = gw.complete(handle, prompt());
    CHECK(c.attempt == 4);
    using ms = std::chrono::milliseconds;
    CHECK(*sleeper.delays == std::vector<ms>{ms(100), ms(200), ms(400)});
}

TEST_CASE("retries are bounded") {
    RecordingSleeper sleeper;
    std::vector<ScriptEntry> script(5, ScriptEntry::fail(FailureKind::RateLimited));
    auto provider = std::make_shared<ScriptedProvider>(script);
    Gateway gw(scripted_config(2), provider, sleeper.fn());
    FileContents contents;
    auto handle = gw.upload_context(context_of(1, contents), contents);
    try {
        gw.complete(handle, prompt());
        FAIL("expected RetriesExhausted");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::RetriesExhausted);
        CHECK(e.details().at(0) == "attempt=3");
    }
    CHECK(provider->complete_calls() == 3);
    CHECK(sleeper.delays->size() == 2);
}

TEST_CASE("authentication failures never retry") {
    RecordingSleeper sleeper;
    auto provider = std::make_shared<ScriptedProvider>(
        std::vector<ScriptEntry>{ScriptEntry::fail(FailureKind::Auth), ScriptEntry::reply("late")});
    Gateway gw(scripted_config(), provider, sleeper.fn());
    FileContents contents;
    auto handle = gw.upload_context(context_of(1, contents), contents);
    try {
        gw.complete(handle, prompt());
        FAIL("expected AuthFailed");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::AuthFailed);
        CHECK(e.details().at(0) == "attempt=1");
    }
    CHECK(provider->complete_calls() == 1);
    CHECK(sleeper.delays->empty());
}

TEST_CASE("an empty completion is a rejection") {
    Gateway gw(scripted_config(), std::make_shared<ScriptedProvider>(atlas::testing::replies({""})));
    FileContents contents;
    auto handle = gw.upload_context(context_of(1, contents), contents);
    CHECK_ERROR_CODE(gw.complete(handle, prompt()), ErrorCode::ProviderRejected);
}

TEST_CASE("live: 429 then success completes on attempt 2") {
    RecordingSleeper sleeper;
    auto transport = std::make_shared<FakeTransport>();
    transport->responses = {{429, R"({"error":{"message":"slow down"}})"}, {200, responses_body("hello")}};
    auto cfg = live_config();
    Gateway gw(cfg, std::make_shared<LiveProvider>(cfg, transport, env_with("sk-secret")), sleeper.fn());
    auto c = gw.complete(store_handle(), prompt());
    CHECK(c.raw_text == "hello");
    CHECK(c.attempt == 2);
    REQUIRE(transport->requests.size() == 2);
    const auto& req = transport->requests[1];
    CHECK(req.path == "/v1/responses");
    CHECK(req.headers.at("Authorization") == "Bearer sk-secret");
    auto body = json::parse(req.body);
    CHECK(body["tools"][0]["vector_store_ids"][0] == "vs_1");
    CHECK(body["model"] == cfg.model);
}

TEST_CASE("live: 401 fails at once") {
    RecordingSleeper sleeper;
    auto transport = std::make_shared<FakeTransport>();
    transport->responses = {{401, "{}"}, {200, responses_body("never")}};
    auto cfg = live_config();
    Gateway gw(cfg, std::make_shared<LiveProvider>(cfg, transport, env_with("k")), sleeper.fn());
    try {
        gw.complete(store_handle(), prompt());
        FAIL("expected AuthFailed");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::AuthFailed);
        CHECK(e.details().at(0) == "attempt=1");
    }
    CHECK(transport->requests.size() == 1);
}

TEST_CASE("live: status mapping") {
    struct Case {
        int status;
        ErrorCode code;
    };
    for (auto [status, code] : {Case{400, ErrorCode::ProviderRejected}, Case{404, ErrorCode::ProviderRejected},
                                Case{403, ErrorCode::AuthFailed}, Case{500, ErrorCode::RetriesExhausted},
                                Case{503, ErrorCode::RetriesExhausted}, Case{408, ErrorCode::RetriesExhausted}}) {
        CAPTURE(status);
        auto transport = std::make_shared<FakeTransport>();
        transport->responses = {{status, "{}"}, {status, "{}"}};
        auto cfg = live_config(1);
        Gateway gw(cfg, std::make_shared<LiveProvider>(cfg, transport, env_with("k")), RecordingSleeper{}.fn());
        CHECK_ERROR_CODE(gw.complete(store_handle(), prompt()), code);
    }
}

TEST_CASE("live: unset credential names the variable, never a value") {
    auto transport = std::make_shared<FakeTransport>();
    auto cfg = live_config();
    Gateway gw(cfg, std::make_shared<LiveProvider>(cfg, transport, env_with(std::nullopt)));
    try {
        gw.complete(store_handle(), prompt());
        FAIL("expected Configuration");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::Configuration);
        CHECK(std::string(e.what()).find("ATLAS_TEST_KEY") != std::string::npos);
    }
    CHECK(transport->requests.empty());
}

TEST_CASE("live: secrets stay out of errors and config dumps") {
    auto transport = std::make_shared<FakeTransport>();
    transport->responses = {{400, R"({"error":{"message":"bad request"}})"}};
    auto cfg = live_config(0);
    Gateway gw(cfg, std::make_shared<LiveProvider>(cfg, transport, env_with("sk-topsecret")));
    try {
        gw.complete(store_handle(), prompt());
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("sk-topsecret") == std::string::npos);
        for (const auto& d : e.details()) CHECK(d.find("sk-topsecret") == std::string::npos);
    }
    CHECK(cfg.to_json().dump().find("sk-topsecret") == std::string::npos);
}

TEST_CASE("live: rejects scripted handles without a network call") {
    auto transport = std::make_shared<FakeTransport>();
    auto cfg = live_config();
    Gateway gw(cfg, std::make_shared<LiveProvider>(cfg, transport, env_with("k")));
    CHECK_ERROR_CODE(gw.complete({"scripted-1", {}, ""}, prompt()), ErrorCode::InvalidHandle);
    CHECK(transport->requests.empty());
}

TEST_CASE("live: upload creates files, a store, and waits for indexing") {
    RecordingSleeper sleeper;
    auto transport = std::make_shared<FakeTransport>();
    transport->responses = {
        {200, R"({"id":"file-1"})"},
        {200, R"({"id":"file-2"})"},
        {200, R"({"id":"vs_9","status":"in_progress","file_counts":{"in_progress":2}})"},
        {200, R"({"id":"vs_9","status":"completed","file_counts":{"in_progress":0}})"},
    };
    auto cfg = live_config();
    LiveProvider provider(cfg, transport, env_with("k"), sleeper.fn());
    FileContents contents{{"src/a.py", "A"}, {"b.py", "B"}};
    ContextSet ctx{"snap", {"b.py", "src/a.py"}, SelectionStrategy::all()};
    auto handle = provider.upload(ctx, contents);
    CHECK(handle.handle_id == "vs_9");
    CHECK(handle.uploaded_paths == ctx.selected_paths);
    REQUIRE(transport->requests.size() == 4);
    const auto& second = transport->requests[1];
    CHECK(second.path == "/v1/files");
    REQUIRE(second.parts.size() == 2);
    CHECK(second.parts[1].filename == "src_a.py.txt");
    CHECK(second.parts[1].content.starts_with("File path: src/a.py"));
    auto store = json::parse(transport->requests[2].body);
    CHECK(store["file_ids"] == json::array({"file-1", "file-2"}));
    CHECK(transport->requests[3].method == "GET");
    CHECK(transport->requests[3].path == "/v1/vector_stores/vs_9");
    CHECK(sleeper.delays->size() == 1);
}

TEST_CASE("live: the HTTP transport talks to a real server") {
    httplib::Server server;
    std::atomic<int> responses_calls{0};
    server.Post("/v1/responses", [&](const httplib::Request& req, httplib::Response& res) {
        if (req.get_header_value("Authorization") != "Bearer k") {
            res.status = 401;
            return;
        }
        if (responses_calls++ == 0) {
            res.status = 429;
            res.set_content(R"({"error":{"message":"later"}})", "application/json");
            return;
        }
        res.set_content(R"({"output_text":"from server"})", "application/json");
    });
    int port = server.bind_to_any_port("127.0.0.1");
    std::thread t([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    auto cfg = live_config();
    cfg.base_url = "http://127.0.0.1:" + std::to_string(port);
    Gateway gw(cfg,
               std::make_shared<LiveProvider>(cfg, make_http_transport(cfg.base_url, std::chrono::seconds(5)),
                                              env_with("k")),
               RecordingSleeper{}.fn());
    auto c = gw.complete(store_handle(), prompt());
    CHECK(c.raw_text == "from server");
    CHECK(c.attempt == 2);
    server.stop();
    t.join();

    // Nothing listening: transport errors are transient, then exhausted.
    auto dead = live_config(1);
    dead.base_url = "http://127.0.0.1:" + std::to_string(port);
    Gateway gone(dead,
                 std::make_shared<LiveProvider>(dead, make_http_transport(dead.base_url, std::chrono::seconds(1)),
                                                env_with("k")),
                 RecordingSleeper{}.fn());
    CHECK_ERROR_CODE(gone.complete(store_handle(), prompt()), ErrorCode::RetriesExhausted);
}

TEST_CASE("provider config files") {
    atlas::testing::TempDir dir;
    atlas::testing::write_text(dir / "p.toml", "# provider\n[provider]\nprovider = \"live\"\nmodel = \"m1\"\n"
                                               "credential_env = \"MY_KEY\"\ntimeout_seconds = 30\nmax_retries = 5\n"
                                               "retry_backoff_ms = 250\n");
    auto toml = load_provider_config(dir / "p.toml");
    CHECK(toml.kind == ProviderKind::Live);
    CHECK(toml.model == "m1");
    CHECK(toml.credential_env == "MY_KEY");
    CHECK(toml.request_timeout == std::chrono::seconds(30));
    CHECK(toml.max_retries == 5);
    CHECK(toml.retry_backoff == std::chrono::milliseconds(250));

    atlas::testing::write_text(dir / "s.json", R"({"provider":"scripted","script":"replies.json"})");
    auto js = load_provider_config(dir / "s.json");
    CHECK(js.kind == ProviderKind::Scripted);
    CHECK(js.script_path == dir / "replies.json");
    CHECK(ProviderConfig::from_json(toml.to_json()).to_json() == toml.to_json());

    atlas::testing::write_text(dir / "bad.toml", "provider = \"live\"\ncredential_env = \"\"\n");
    CHECK_ERROR_CODE(load_provider_config(dir / "bad.toml"), ErrorCode::Configuration);
    atlas::testing::write_text(dir / "neg.json", R"({"max_retries":-1})");
    CHECK_ERROR_CODE(load_provider_config(dir / "neg.json"), ErrorCode::Configuration);
    atlas::testing::write_text(dir / "kind.json", R"({"provider":"magic"})");
    CHECK_ERROR_CODE(load_provider_config(dir / "kind.json"), ErrorCode::Configuration);
}

TEST_CASE("script book formats") {
    auto plain = ScriptBook::from_json(json::parse(R"(["a", {"text":"b"}, {"error":"rate_limit"}])"));
    REQUIRE(plain.sessions.size() == 1);
    REQUIRE(plain.sessions[0].size() == 3);
    CHECK(plain.sessions[0][1].text == "b");
    CHECK(plain.sessions[0][2].failure == FailureKind::RateLimited);

    auto book = ScriptBook::from_json(json::parse(R"({"sessions":[["x"],["y"]],"uploadFailure":"auth"})"));
    CHECK(book.sessions.size() == 2);
    CHECK(book.upload_failure == FailureKind::Auth);
    CHECK(book.for_session(1)[0].text == "y");

    CHECK_ERROR_CODE(ScriptBook::from_json(json::parse(R"([{"error":"gremlins"}])")), ErrorCode::Configuration);
    CHECK_ERROR_CODE(ScriptBook::from_json(json::parse("42")), ErrorCode::Configuration);
}

TEST_CASE("concurrent completes on one scripted session each get a distinct reply") {
    std::vector<std::string> texts;
    for (int i = 0; i < 64; ++i) texts.push_back("r" + std::to_string(i));
    auto provider = std::make_shared<ScriptedProvider>(atlas::testing::replies(texts));
    Gateway gw(scripted_config(), provider);
    FileContents contents;
    auto handle = gw.upload_context(context_of(1, contents), contents);
    std::mutex mu;
    std::set<std::string> seen;
    std::vector<std::thread> threads;
    for (int t = 0; t < 8; ++t) {
        threads.emplace_back([&] {
            for (int i = 0; i < 8; ++i) {
                auto c = gw.complete(handle, prompt());
                std::lock_guard lock(mu);
                seen.insert(c.raw_text);
            }
        });
    }
    for (auto& t : threads) t.join();
    CHECK(seen.size() == 64);
    CHECK(provider->remaining() == 0);
}
