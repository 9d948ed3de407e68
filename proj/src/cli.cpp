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

#include "atlas/cli.hpp"

#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <unistd.h>

#include <CLI11.hpp>

#include "atlas/error.hpp"
#include "atlas/refine.hpp"
#include "atlas/service.hpp"
#include "atlas/util.hpp"

namespace atlas::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct ProviderFlags {
    std::string config_file;
    std::string provider;
    std::string script;
    std::string model;
    std::string credential_env;
    int max_retries = -1;
    long long retry_backoff_ms = -1;

    void attach(CLI::App& cmd) {
        cmd.add_option("--config", config_file, "Provider config file (JSON or flat TOML)")->check(CLI::ExistingFile);
        cmd.add_option("--provider", provider, "live or scripted")->check(CLI::IsMember({"live", "scripted"}));
        cmd.add_option("--script", script, "Scripted replies (JSON)")->check(CLI::ExistingFile);
        cmd.add_option("--model", model, "Model name for the live provider");
        cmd.add_option("--credential-env", credential_env, "Environment variable holding the API key");
        cmd.add_option("--max-retries", max_retries, "Retries per provider call")->check(CLI::NonNegativeNumber);
        cmd.add_option("--retry-backoff-ms", retry_backoff_ms, "Initial retry backoff")->check(CLI::NonNegativeNumber);
    }

    ProviderConfig resolve() const {
        ProviderConfig c = config_file.empty() ? ProviderConfig{} : load_provider_config(config_file);
        if (!provider.empty()) c.kind = provider == "live" ? ProviderKind::Live : ProviderKind::Scripted;
        if (!script.empty()) c.script_path = script;
        if (!model.empty()) c.model = model;
        if (!credential_env.empty()) c.credential_env = credential_env;
        if (max_retries >= 0) c.max_retries = max_retries;
        if (retry_backoff_ms >= 0) c.retry_backoff = std::chrono::milliseconds(retry_backoff_ms);
        c.validate();
        if (c.kind == ProviderKind::Live) {
            const char* key = std::getenv(c.credential_env.c_str());
            if (!key || !*key) {
                throw Error(ErrorCode::Configuration,
                            "live provider selected but environment variable " + c.credential_env + " is not set",
                            {c.credential_env});
            }
        }
        return c;
    }

    std::optional<ScriptBook> script_book(const ProviderConfig& c) const {
        if (c.kind != ProviderKind::Scripted || c.script_path.empty()) return std::nullopt;
        return ScriptBook::load(c.script_path);
    }
};

MapKind global_kind(const std::string& text) {
    auto kind = parse_map_kind(text);
    if (!kind) throw CLI::ValidationError("--kind", "unknown map kind '" + text + "'");
    if (!is_global(*kind)) {
        throw CLI::ValidationError("--kind", "local maps are generated per node through the service; use business or function-call");
    }
    return *kind;
}

// Snapshot plus the directory its files are read from.
struct LoadedSnapshot {
    CodebaseSnapshot snapshot;
    fs::path root;
};

LoadedSnapshot open_snapshot(const std::string& file, const std::string& root_override) {
    auto snapshot = load_snapshot(file);
    fs::path root = !root_override.empty() ? fs::path(root_override) : snapshot.root_path();
    if (root.empty()) {
        throw Error(ErrorCode::InvalidArgument, "snapshot records no source root; pass --root", {file});
    }
    if (root.is_relative() && root_override.empty()) root = fs::path(file).parent_path() / root;
    return {std::move(snapshot), root};
}

json graph_json(const MapGraph& g) {
    json nodes = json::array();
    for (const auto& n : g.nodes()) nodes.push_back({{"id", n.id}, {"label", n.label}, {"payload", n.payload_json()}});
    json edges = json::array();
    for (const auto& e : g.edges()) {
        edges.push_back({{"src", e.src}, {"dst", e.dst}, {"relation", to_string(e.relation)}, {"annotation", e.annotation}});
    }
    json modules = json::object();
    for (const auto& [name, members] : g.module_groups()) modules[name] = members;
    return {{"kind", to_string(g.kind())}, {"nodes", nodes}, {"edges", edges}, {"modules", modules}};
}

void emit(const std::string& text, const std::string& out_file, std::ostream& out) {
    if (out_file.empty() || out_file == "-") out << text;
    else write_file(out_file, text);
}

std::string render_svg(const std::string& dot) {
    if (std::system("command -v dot >/dev/null 2>&1") != 0) {
        throw Error(ErrorCode::Configuration, "svg export needs the Graphviz 'dot' program on PATH");
    }
    auto tmp = fs::temp_directory_path() / ("atlas-export-" + std::to_string(::getpid()));
    write_file(tmp.string() + ".dot", dot);
    auto cmd = "dot -Tsvg '" + tmp.string() + ".dot' -o '" + tmp.string() + ".svg'";
    int rc = std::system(cmd.c_str());
    std::error_code ec;
    fs::remove(tmp.string() + ".dot", ec);
    if (rc != 0) throw Error(ErrorCode::Io, "dot exited with status " + std::to_string(rc));
    auto svg = read_file(tmp.string() + ".svg");
    fs::remove(tmp.string() + ".svg", ec);
    return svg;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Codebase map generator: ingest sources, build global maps with iterative refinement, evaluate and serve them"};
    app.name("atlas");
    app.require_subcommand(1, 1);

    // ingest
    auto* ingest = app.add_subcommand("ingest", "Scan a source tree into a snapshot");
    std::string ingest_dir, ingest_out = "snapshot.json", ingest_label;
    std::vector<std::string> ingest_ext, ingest_exclude;
    ingest->add_option("dir", ingest_dir, "Source root")->required();
    ingest->add_option("--ext", ingest_ext, "File extensions to include, repeatable or comma-separated (default: py, java, sol and the js/ts family)")->delimiter(',');
    ingest->add_option("--exclude", ingest_exclude, "Glob patterns to skip, repeatable or comma-separated")->delimiter(',');
    ingest->add_option("--label", ingest_label, "Project label (default: directory name)");
    ingest->add_option("--out", ingest_out, "Snapshot file to write")->capture_default_str();

    // generate
    auto* generate = app.add_subcommand("generate", "Generate one global map with iterative refinement");
    std::string gen_snapshot, gen_kind = "business", gen_out = "out", gen_root;
    int gen_max_iter = 5, gen_window = 2;
    bool gen_no_early_stop = false;
    ProviderFlags gen_provider;
    generate->add_option("--snapshot", gen_snapshot, "Snapshot file")->required()->check(CLI::ExistingFile);
    generate->add_option("--kind", gen_kind, "business or function-call")->capture_default_str();
    generate->add_option("--max-iter", gen_max_iter, "Maximum refinement iterations")->capture_default_str()->check(CLI::PositiveNumber);
    generate->add_option("--window", gen_window, "Iterations of unchanged coverage that stop refinement")->capture_default_str()
        ->check(CLI::PositiveNumber);
    generate->add_flag("--no-early-stop", gen_no_early_stop, "Always run --max-iter iterations");
    generate->add_option("--out-dir", gen_out, "Directory for graph.dot, overview.json and trace.json")->capture_default_str();
    generate->add_option("--root", gen_root, "Source root (default: the snapshot's rootPath)");
    gen_provider.attach(*generate);

    // evaluate
    auto* evaluate_cmd = app.add_subcommand("evaluate", "Run independent refinement sessions and average accuracy per iteration");
    std::string ev_snapshot, ev_kind = "business", ev_csv, ev_means, ev_root, ev_trace_dir;
    int ev_runs = 10, ev_rounds = 5;
    std::size_t ev_workers = 4;
    ProviderFlags ev_provider;
    evaluate_cmd->add_option("--snapshot", ev_snapshot, "Snapshot file")->required()->check(CLI::ExistingFile);
    evaluate_cmd->add_option("--kind", ev_kind, "business or function-call")->capture_default_str();
    evaluate_cmd->add_option("--runs", ev_runs, "Independent sessions")->capture_default_str()->check(CLI::PositiveNumber);
    evaluate_cmd->add_option("--rounds", ev_rounds, "Refinement iterations per session")->capture_default_str()->check(CLI::PositiveNumber);
    evaluate_cmd->add_option("--workers", ev_workers, "Sessions run concurrently")->capture_default_str()->check(CLI::PositiveNumber);
    evaluate_cmd->add_option("--csv", ev_csv, "Per-iteration rows (default: stdout)");
    evaluate_cmd->add_option("--means", ev_means, "Per-iteration means CSV");
    evaluate_cmd->add_option("--trace-dir", ev_trace_dir, "Directory for one trace per run");
    evaluate_cmd->add_option("--root", ev_root, "Source root (default: the snapshot's rootPath)");
    ev_provider.attach(*evaluate_cmd);

    // export
    auto* export_cmd = app.add_subcommand("export", "Export the map recorded in a trace");
    std::string ex_trace, ex_format = "dot", ex_out;
    int ex_iteration = 0;
    export_cmd->add_option("--trace", ex_trace, "Trace file")->required()->check(CLI::ExistingFile);
    export_cmd->add_option("--format", ex_format, "dot, json or svg")->capture_default_str()->check(CLI::IsMember({"dot", "json", "svg"}));
    export_cmd->add_option("--iteration", ex_iteration, "Iteration to export (default: last successful)");
    export_cmd->add_option("--out", ex_out, "Output file (default: stdout)");

    // serve
    auto* serve = app.add_subcommand("serve", "Serve the HTTP API");
    std::string sv_host = "127.0.0.1", sv_data = "atlas-data";
    int sv_port = 8080;
    std::size_t sv_excerpt = 60;
    ProviderFlags sv_provider;
    serve->add_option("--port", sv_port, "Port (0 picks a free one)")->capture_default_str()->check(CLI::Range(0, 65535));
    serve->add_option("--host", sv_host, "Address to bind")->capture_default_str();
    serve->add_option("--data-dir", sv_data, "Session storage directory")->capture_default_str();
    serve->add_option("--excerpt-lines", sv_excerpt, "Lines per key-file excerpt in local prompts")->capture_default_str();
    sv_provider.attach(*serve);

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return kUsage;
    }

    try {
        if (*ingest) {
            ScanOptions options;
            options.root = ingest_dir;
            options.include_extensions = ingest_ext.empty() ? default_source_extensions()
                                                            : std::set<std::string>(ingest_ext.begin(), ingest_ext.end());
            options.exclude_globs = ingest_exclude;
            options.root_label = ingest_label;
            std::vector<std::string> warnings;
            auto snapshot = scan(options, &warnings);
            save_snapshot(snapshot, ingest_out);
            for (const auto& w : warnings) err << "warning: " << w << '\n';
            out << "snapshot " << snapshot.snapshot_id() << ": " << snapshot.files().size() << " files, "
                << snapshot.total_loc() << " lines -> " << ingest_out << '\n';
            return kSuccess;
        }

        if (*generate) {
            auto kind = global_kind(gen_kind);
            auto config = gen_provider.resolve();
            auto book = gen_provider.script_book(config);
            auto [snapshot, root] = open_snapshot(gen_snapshot, gen_root);
            auto context = select_context(snapshot);
            auto contents = read_contents(root, context.selected_paths);
            Gateway gateway(config, make_provider(config, book ? &*book : nullptr, 0));
            auto handle = gateway.upload_context(context, contents);
            auto prompts = PromptLibrary::builtin();
            Refiner refiner(gateway, prompts, snapshot, handle);
            auto trace = refiner.run(snapshot.snapshot_id(), kind, {gen_max_iter, gen_window, !gen_no_early_stop});

            fs::create_directories(gen_out);
            write_file(fs::path(gen_out) / "trace.json", trace.dump());
            for (const auto& it : trace.iterations) {
                if (it.failed()) {
                    out << "iteration " << it.index << ": parse failure: " << it.parse_error << '\n';
                    continue;
                }
                out << "iteration " << it.index << ": tp=" << it.report->true_positives
                    << " fp=" << it.report->false_positives << " fn=" << it.report->false_negatives
                    << " accuracy=" << format_double(it.report->accuracy()) << '\n';
            }
            out << "stopped: " << to_string(*trace.stopped_because) << '\n';
            const auto* last = trace.last_success();
            if (!last) {
                err << "error: parse_failure: no iteration produced a usable map\n";
                return kRuntime;
            }
            write_file(fs::path(gen_out) / "graph.dot", serialize_dot(*last->graph));
            if (last->overview) write_file(fs::path(gen_out) / "overview.json", last->overview->to_json().dump(2) + "\n");
            else err << "warning: no valid overview in the final iteration; overview.json not written\n";
            return kSuccess;
        }

        if (*evaluate_cmd) {
            auto kind = global_kind(ev_kind);
            auto config = ev_provider.resolve();
            auto book = ev_provider.script_book(config);
            auto [snapshot, root] = open_snapshot(ev_snapshot, ev_root);
            auto context = select_context(snapshot);
            auto contents = read_contents(root, context.selected_paths);
            auto prompts = PromptLibrary::builtin();
            auto factory = [&](std::size_t i) {
                return std::make_unique<Gateway>(config, make_provider(config, book ? &*book : nullptr, i));
            };
            EvaluationOptions options;
            options.kind = kind;
            options.runs = ev_runs;
            options.rounds = ev_rounds;
            options.workers = ev_workers;
            auto result = atlas::evaluate(snapshot, contents, prompts, factory, options);

            std::ostringstream rows, means;
            result.write_csv(rows);
            result.write_means_csv(means);
            emit(rows.str(), ev_csv, out);
            if (!ev_means.empty()) write_file(ev_means, means.str());
            if (!ev_trace_dir.empty()) {
                for (const auto& r : result.per_run) {
                    if (r.trace) save_trace(*r.trace, ev_trace_dir);
                }
            }
            auto& report = ev_csv.empty() ? err : out;
            report << "mean accuracy by iteration over " << result.completed_runs() << " of " << result.runs << " runs:\n";
            for (std::size_t i = 0; i < result.mean_accuracy_by_iteration.size(); ++i) {
                report << "  " << i + 1 << ": " << format_double(result.mean_accuracy_by_iteration[i]) << '\n';
            }
            for (const auto& r : result.per_run) {
                if (!r.completed()) err << "run " << r.run << " failed: " << r.error << '\n';
            }
            return result.completed_runs() == 0 ? kRuntime : kSuccess;
        }

        if (*export_cmd) {
            auto trace = load_trace(ex_trace);
            const RefinementIteration* it = nullptr;
            if (ex_iteration > 0) {
                for (const auto& i : trace.iterations) {
                    if (i.index == ex_iteration) it = &i;
                }
                if (!it) throw Error(ErrorCode::NotFound, "trace has no iteration " + std::to_string(ex_iteration));
            } else {
                it = trace.last_success();
            }
            if (!it || it->failed()) throw Error(ErrorCode::ParseFailure, "the selected iteration has no map");
            auto dot = serialize_dot(*it->graph);
            if (ex_format == "dot") emit(dot, ex_out, out);
            else if (ex_format == "json") {
                json j = {{"graph", graph_json(*it->graph)},
                          {"overview", it->overview ? it->overview->to_json() : json(nullptr)},
                          {"report", it->report ? it->report->to_json() : json(nullptr)}};
                emit(j.dump(2) + "\n", ex_out, out);
            } else {
                emit(render_svg(dot), ex_out, out);
            }
            return kSuccess;
        }

        if (*serve) {
            ServiceConfig config;
            config.data_dir = sv_data;
            config.provider = sv_provider.resolve();
            config.script = sv_provider.script_book(config.provider);
            config.excerpt_lines = sv_excerpt;
            MapService service(config);
            HttpApi api(service);
            int port = api.bind(sv_host, sv_port);
            out << "listening on http://" << sv_host << ":" << port << std::endl;
            api.serve();
            return kSuccess;
        }
    } catch (const CLI::ValidationError& e) {
        err << e.what() << '\n';
        return kUsage;
    } catch (const RefinementError& e) {
        err << "error: " << to_string(e.code()) << ": " << e.what() << " (after "
            << e.partial_trace().iterations.size() << " completed iterations)\n";
        return kRuntime;
    } catch (const Error& e) {
        err << "error: " << to_string(e.code()) << ": " << e.what() << '\n';
        return kRuntime;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kRuntime;
    }
    return kUsage;
}

}  // namespace atlas::cli
