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


#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <cstdlib>
#include <sstream>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "atlas/cli.hpp"
#include "atlas/refine.hpp"
#include "atlas/util.hpp"
#include "support/checks.hpp"
#include "support/support.hpp"

using namespace atlas;
using atlas::testing::Project44;
using atlas::testing::TempDir;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result atlas_cli(std::vector<std::string> args) {
    std::ostringstream out, err;
    int code = atlas::cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

std::vector<std::string> lines_of(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);) out.push_back(line);
    return out;
}

const std::vector<std::size_t> kCoverage = {20, 35, 44, 44, 44};

// A 44-file project, its snapshot on disk and a scripted reply file.
struct CliFixture {
    Project44 project;
    TempDir work;
    fs::path snapshot = work / "snapshot.json";
    fs::path script = work / "script.json";

    CliFixture() {
        save_snapshot(project.snapshot, snapshot);
        json replies = json::array();
        for (auto n : kCoverage) {
            replies.push_back(atlas::testing::completion(
                atlas::testing::business_dot(atlas::testing::first_n(project.paths, n))));
        }
        write_file(script, replies.dump());
    }
};

}  // namespace

TEST_CASE("ingest the two-file fixture") {
    TempDir out;
    auto snap = out / "snapshot.json";
    auto r = atlas_cli({"ingest", ATLAS_SOURCE_DIR "/tests/fixtures/tiny", "--ext", "py", "--out", snap.string()});
    CHECK(r.code == 0);
    auto loaded = load_snapshot(snap);
    CHECK(loaded.files().size() == 2);
    CHECK(loaded.contains("main.py"));
    CHECK(loaded.contains("pkg/greet.py"));
    CHECK(loaded.root_label() == "tiny");

    // Without --ext the default source extensions apply; .md stays out.
    auto again = atlas_cli({"ingest", ATLAS_SOURCE_DIR "/tests/fixtures/tiny", "--out", (out / "b.json").string()});
    CHECK(again.code == 0);
    CHECK(load_snapshot(out / "b.json").files().size() == 2);
    auto md = atlas_cli({"ingest", ATLAS_SOURCE_DIR "/tests/fixtures/tiny", "--ext", "md,txt", "--out", (out / "c.json").string()});
    CHECK(load_snapshot(out / "c.json").files().size() == 1);
}

TEST_CASE("ingest errors are runtime failures") {
    TempDir out;
    auto r = atlas_cli({"ingest", (out / "missing").string(), "--out", (out / "s.json").string()});
    CHECK(r.code == 2);
    CHECK(r.err.find("root_not_found") != std::string::npos);
    auto none = atlas_cli({"ingest", ATLAS_SOURCE_DIR "/tests/fixtures/tiny", "--ext", "java", "--out", (out / "s.json").string()});
    CHECK(none.code == 2);
}

TEST_CASE("generate writes the map, the overview and the trace") {
    CliFixture f;
    auto out = f.work / "out";
    auto r = atlas_cli({"generate", "--snapshot", f.snapshot.string(), "--kind", "business", "--max-iter", "5",
                        "--out-dir", out.string(), "--provider", "scripted", "--script", f.script.string()});
    CHECK_MESSAGE(r.code == 0, r.err);
    CHECK(r.out.find("stopped: Stabilized") != std::string::npos);
    auto trace = load_trace(out / "trace.json");
    CHECK(trace.iterations.size() == 4);
    auto graph = parse_dot(read_file(out / "graph.dot"), MapKind::BusinessComponent);
    CHECK(files_in_graph(graph).size() == 44);
    CHECK(parse_overview(read_file(out / "overview.json")).warnings.empty());
}

TEST_CASE("generate with a config file") {
    CliFixture f;
    write_file(f.work / "provider.toml", "provider = \"scripted\"\nscript = \"script.json\"\n");
    auto out = f.work / "out";
    auto r = atlas_cli({"generate", "--snapshot", f.snapshot.string(), "--config", (f.work / "provider.toml").string(),
                        "--no-early-stop", "--max-iter", "3", "--out-dir", out.string()});
    CHECK_MESSAGE(r.code == 0, r.err);
    CHECK(load_trace(out / "trace.json").iterations.size() == 3);
}

TEST_CASE("generate reports a parse failure as a runtime error") {
    CliFixture f;
    write_file(f.script, R"(["no graph", "still none"])");
    auto r = atlas_cli({"generate", "--snapshot", f.snapshot.string(), "--provider", "scripted", "--script",
                        f.script.string(), "--out-dir", (f.work / "out").string()});
    CHECK(r.code == 2);
    CHECK(fs::exists(f.work / "out" / "trace.json"));
    CHECK_FALSE(fs::exists(f.work / "out" / "graph.dot"));
}

TEST_CASE("evaluate emits runs x rounds rows and per-iteration means") {
    CliFixture f;
    auto csv = f.work / "eval.csv";
    auto means = f.work / "means.csv";
    auto r = atlas_cli({"evaluate", "--snapshot", f.snapshot.string(), "--runs", "10", "--rounds", "5", "--csv",
                        csv.string(), "--means", means.string(), "--provider", "scripted", "--script", f.script.string(),
                        "--trace-dir", (f.work / "traces").string()});
    CHECK_MESSAGE(r.code == 0, r.err);
    auto rows = lines_of(read_file(csv));
    REQUIRE(rows.size() == 51);
    CHECK(rows[0] == "project,run,iteration,tp,fp,fn,accuracy");
    std::map<int, int> per_iteration;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        std::istringstream in(rows[i]);
        std::string project, run, iteration, tp;
        std::getline(in, project, ',');
        std::getline(in, run, ',');
        std::getline(in, iteration, ',');
        std::getline(in, tp, ',');
        CHECK(project == "Python-44");
        ++per_iteration[std::stoi(iteration)];
        CHECK(std::stoul(tp) == kCoverage[std::stoul(iteration) - 1]);
    }
    for (int i = 1; i <= 5; ++i) CHECK(per_iteration[i] == 10);

    auto mean_rows = lines_of(read_file(means));
    REQUIRE(mean_rows.size() == 6);
    CHECK(mean_rows[0] == "iteration,mean_accuracy,runs");
    for (std::size_t i = 0; i < 5; ++i) {
        std::istringstream in(mean_rows[i + 1]);
        std::string iteration, mean, runs;
        std::getline(in, iteration, ',');
        std::getline(in, mean, ',');
        std::getline(in, runs, ',');
        CHECK(std::stoul(iteration) == i + 1);
        CHECK(std::abs(std::stod(mean) - static_cast<double>(kCoverage[i]) / 44.0) < 1e-12);
        CHECK(runs == "10");
    }
    std::size_t traces = 0;
    for ([[maybe_unused]] const auto& e : fs::directory_iterator(f.work / "traces")) ++traces;
    CHECK(traces == 10);
}

TEST_CASE("evaluate writes rows to stdout by default") {
    CliFixture f;
    auto r = atlas_cli({"evaluate", "--snapshot", f.snapshot.string(), "--runs", "2", "--rounds", "3", "--provider",
                        "scripted", "--script", f.script.string()});
    CHECK(r.code == 0);
    CHECK(lines_of(r.out).size() == 7);
    CHECK(r.err.find("mean accuracy by iteration over 2 of 2 runs") != std::string::npos);
}

TEST_CASE("export a trace as dot and json") {
    CliFixture f;
    auto out = f.work / "out";
    REQUIRE(atlas_cli({"generate", "--snapshot", f.snapshot.string(), "--out-dir", out.string(), "--provider",
                       "scripted", "--script", f.script.string()})
                .code == 0);
    auto trace = (out / "trace.json").string();
    auto dot = atlas_cli({"export", "--trace", trace});
    CHECK(dot.code == 0);
    CHECK(dot.out == read_file(out / "graph.dot"));

    auto first = atlas_cli({"export", "--trace", trace, "--iteration", "1", "--format", "dot"});
    CHECK(files_in_graph(parse_dot(first.out, MapKind::BusinessComponent)).size() == 20);

    auto js = atlas_cli({"export", "--trace", trace, "--format", "json", "--out", (f.work / "map.json").string()});
    CHECK(js.code == 0);
    auto j = json::parse(read_file(f.work / "map.json"));
    CHECK(j["report"]["tp"] == 44);
    CHECK(j["graph"]["kind"] == "BusinessComponent");
    CHECK(j["overview"]["modules"].size() == 2);

    CHECK(atlas_cli({"export", "--trace", trace, "--iteration", "9"}).code == 2);
}

TEST_CASE("svg export needs an external renderer") {
    CliFixture f;
    auto out = f.work / "out";
    REQUIRE(atlas_cli({"generate", "--snapshot", f.snapshot.string(), "--out-dir", out.string(), "--provider",
                       "scripted", "--script", f.script.string()})
                .code == 0);
    auto r = atlas_cli({"export", "--trace", (out / "trace.json").string(), "--format", "svg"});
    bool have_dot = std::system("command -v dot >/dev/null 2>&1") == 0;
    if (have_dot) {
        CHECK(r.code == 0);
        CHECK(r.out.find("<svg") != std::string::npos);
    } else {
        CHECK(r.code == 2);
        CHECK(r.err.find("dot") != std::string::npos);
    }
}

TEST_CASE("usage errors exit 1") {
    CliFixture f;
    CHECK(atlas_cli({}).code == 1);
    CHECK(atlas_cli({"frobnicate"}).code == 1);
    CHECK(atlas_cli({"ingest"}).code == 1);
    CHECK(atlas_cli({"ingest", ".", "--bogus"}).code == 1);
    CHECK(atlas_cli({"generate", "--snapshot", (f.work / "nope.json").string()}).code == 1);
    CHECK(atlas_cli({"generate", "--snapshot", f.snapshot.string(), "--max-iter", "0"}).code == 1);
    CHECK(atlas_cli({"export", "--trace", f.snapshot.string(), "--format", "png"}).code == 1);
    auto local = atlas_cli({"generate", "--snapshot", f.snapshot.string(), "--kind", "local"});
    CHECK(local.code == 1);
    CHECK(local.err.find("business or function-call") != std::string::npos);
    CHECK(atlas_cli({"--help"}).code == 0);
}

TEST_CASE("a live provider without its key names the variable") {
    CliFixture f;
    ::unsetenv("ATLAS_TEST_UNSET_KEY");
    auto r = atlas_cli({"generate", "--snapshot", f.snapshot.string(), "--provider", "live", "--credential-env",
                        "ATLAS_TEST_UNSET_KEY", "--out-dir", (f.work / "out").string()});
    CHECK(r.code == 2);
    CHECK(r.err.find("ATLAS_TEST_UNSET_KEY") != std::string::npos);
    CHECK_FALSE(fs::exists(f.work / "out"));
}

TEST_CASE("the atlas binary serves the HTTP API") {
    TempDir data;
    int pipefd[2];
    REQUIRE(::pipe(pipefd) == 0);
    pid_t pid = ::fork();
    REQUIRE(pid >= 0);
    if (pid == 0) {
        ::dup2(pipefd[1], STDOUT_FILENO);
        ::close(pipefd[0]);
        ::execl(ATLAS_CLI_PATH, ATLAS_CLI_PATH, "serve", "--port", "0", "--data-dir", data.path().c_str(), "--provider",
                "scripted", static_cast<char*>(nullptr));
        ::_exit(127);
    }
    ::close(pipefd[1]);
    std::string line;
    char c;
    while (::read(pipefd[0], &c, 1) == 1 && c != '\n') line += c;
    ::close(pipefd[0]);
    REQUIRE(line.starts_with("listening on http://127.0.0.1:"));
    int port = std::stoi(line.substr(line.rfind(':') + 1));

    httplib::Client cli("127.0.0.1", port);
    json files = {{"app.py", "print(1)\n"}};
    auto created = cli.Post("/sessions", json{{"files", files}}.dump(), "application/json");
    REQUIRE(created);
    CHECK(created->status == 201);
    auto missing = cli.Get("/sessions/s-000000000000");
    REQUIRE(missing);
    CHECK(missing->status == 404);

    ::kill(pid, SIGTERM);
    int status = 0;
    ::waitpid(pid, &status, 0);
}

TEST_CASE("the atlas binary exit codes") {
    auto code = [](const std::string& args) {
        int rc = std::system((std::string(ATLAS_CLI_PATH) + " " + args + " >/dev/null 2>&1").c_str());
        return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
    };
    CHECK(code("--help") == 0);
    CHECK(code("--no-such-flag") == 1);
    CHECK(code("ingest /nonexistent/dir") == 2);
}
