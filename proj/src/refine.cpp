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

#include "atlas/refine.hpp"
#include "atlas/util.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <charconv>
#include <mutex>
#include <ostream>
#include <thread>

namespace atlas {

using nlohmann::json;

json AccuracyReport::to_json() const {
    return {{"tp", true_positives},
            {"fp", false_positives},
            {"fn", false_negatives},
            {"accuracy", accuracy()},
            {"basenameMatches", basename_matches}};
}

AccuracyReport AccuracyReport::from_json(const json& j) {
    AccuracyReport r;
    r.true_positives = j.at("tp").get<std::size_t>();
    r.false_positives = j.at("fp").get<std::size_t>();
    r.false_negatives = j.at("fn").get<std::size_t>();
    r.basename_matches = j.value("basenameMatches", std::size_t{0});
    return r;
}

AccuracyReport measure_accuracy(const std::set<std::string>& graph_files, const std::set<std::string>& snapshot_files) {
    if (snapshot_files.empty()) throw Error(ErrorCode::InvalidArgument, "accuracy is undefined for an empty snapshot");
    std::set<std::string> g, s;
    for (const auto& p : graph_files) {
        auto n = normalize_path(p);
        if (!n.empty()) g.insert(std::move(n));
    }
    for (const auto& p : snapshot_files) s.insert(normalize_path(p));

    AccuracyReport r;
    std::multiset<std::string> missed_names;
    for (const auto& p : s) {
        if (g.contains(p)) ++r.true_positives;
        else {
            ++r.false_negatives;
            missed_names.insert(std::string(path_basename(p)));
        }
    }
    for (const auto& p : g) {
        if (s.contains(p)) continue;
        ++r.false_positives;
        if (auto it = missed_names.find(std::string(path_basename(p))); it != missed_names.end()) {
            ++r.basename_matches;
            missed_names.erase(it);
        }
    }
    return r;
}

AccuracyReport measure_accuracy(const MapGraph& graph, const CodebaseSnapshot& snapshot) {
    return measure_accuracy(files_in_graph(graph), snapshot.path_set());
}

namespace {

// End of the balanced {...} starting at `open`, skipping quoted strings.
std::optional<std::size_t> balanced_end(std::string_view text, std::size_t open) {
    int depth = 0;
    bool in_string = false;
    for (std::size_t i = open; i < text.size(); ++i) {
        char c = text[i];
        if (in_string) {
            if (c == '\\') ++i;
            else if (c == '"') in_string = false;
            continue;
        }
        if (c == '"') in_string = true;
        else if (c == '{') ++depth;
        else if (c == '}' && --depth == 0) return i;
    }
    return std::nullopt;
}

std::optional<std::string> fenced(std::string_view text, std::initializer_list<std::string_view> tags) {
    std::size_t pos = 0;
    while ((pos = text.find("```", pos)) != std::string_view::npos) {
        auto line_end = text.find('\n', pos);
        if (line_end == std::string_view::npos) return std::nullopt;
        std::string tag;
        for (char c : text.substr(pos + 3, line_end - pos - 3)) {
            if (!std::isspace(static_cast<unsigned char>(c))) tag += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        }
        auto close = text.find("```", line_end + 1);
        if (close == std::string_view::npos) close = text.size();
        if (std::find(tags.begin(), tags.end(), tag) != tags.end()) {
            return std::string(text.substr(line_end + 1, close - line_end - 1));
        }
        if (close == text.size()) return std::nullopt;
        pos = close + 3;
    }
    return std::nullopt;
}

}  // namespace

std::optional<std::string> extract_dot(std::string_view completion) {
    if (auto f = fenced(completion, {"dot", "graphviz", "gv"})) return f;
    std::size_t pos = 0;
    while ((pos = completion.find("digraph", pos)) != std::string_view::npos) {
        auto start = pos;
        auto before = completion.substr(0, pos);
        auto strict_at = before.rfind("strict");
        if (strict_at != std::string_view::npos &&
            before.find_first_not_of(" \t\r\n", strict_at + 6) == std::string_view::npos) {
            start = strict_at;
        }
        auto open = completion.find('{', pos);
        if (open == std::string_view::npos) return std::nullopt;
        if (auto end = balanced_end(completion, open)) return std::string(completion.substr(start, *end - start + 1));
        pos += 7;
    }
    return std::nullopt;
}

std::optional<std::string> extract_json(std::string_view completion) {
    if (auto f = fenced(completion, {"json"})) return f;
    // Skip the DOT body so its braces are not mistaken for JSON.
    std::size_t dot_end = 0;
    if (auto at = completion.find("digraph"); at != std::string_view::npos) {
        if (auto open = completion.find('{', at); open != std::string_view::npos) {
            if (auto end = balanced_end(completion, open)) dot_end = *end + 1;
        }
    }
    for (std::size_t from : {dot_end, std::size_t{0}}) {
        for (auto open = completion.find('{', from); open != std::string_view::npos;
             open = completion.find('{', open + 1)) {
            auto end = balanced_end(completion, open);
            if (!end) break;
            auto candidate = completion.substr(open, *end - open + 1);
            if (json::accept(candidate)) return std::string(candidate);
        }
    }
    return std::nullopt;
}

std::string_view to_string(StopReason reason) noexcept {
    switch (reason) {
        case StopReason::MaxIterations: return "MaxIterations";
        case StopReason::Stabilized: return "Stabilized";
        case StopReason::ParseFailure: return "ParseFailure";
    }
    return "MaxIterations";
}

std::optional<StopReason> parse_stop_reason(std::string_view text) {
    for (auto r : {StopReason::MaxIterations, StopReason::Stabilized, StopReason::ParseFailure}) {
        if (to_string(r) == text) return r;
    }
    return std::nullopt;
}

const RefinementIteration* RefinementTrace::last_success() const {
    for (auto it = iterations.rbegin(); it != iterations.rend(); ++it) {
        if (!it->failed()) return &*it;
    }
    return nullptr;
}

json RefinementTrace::to_json() const {
    json iters = json::array();
    for (const auto& it : iterations) {
        json j = {{"index", it.index},
                  {"promptRef", it.prompt_ref},
                  {"attempts", it.attempts},
                  {"rawCompletion", it.raw_completion},
                  {"rejectedCompletion", it.rejected_completion ? json(*it.rejected_completion) : json(nullptr)},
                  {"graphDot", it.graph ? json(serialize_dot(*it.graph)) : json(nullptr)},
                  {"overview", it.overview ? it.overview->to_json() : json(nullptr)},
                  {"warnings", it.warnings},
                  {"parseError", it.parse_error},
                  {"report", it.report ? it.report->to_json() : json(nullptr)},
                  {"coverageDelta", it.coverage_delta}};
        iters.push_back(std::move(j));
    }
    return {{"sessionId", session_id},
            {"kind", to_string(kind)},
            {"snapshotId", snapshot_id},
            {"provider", provider},
            {"model", model},
            {"maxIterations", max_iterations},
            {"stabilizationWindow", stabilization_window},
            {"earlyStop", early_stop},
            {"iterations", iters},
            {"stoppedBecause", stopped_because ? json(to_string(*stopped_because)) : json(nullptr)}};
}

std::string RefinementTrace::dump() const { return to_json().dump(2) + "\n"; }

RefinementTrace RefinementTrace::from_json(const json& j) {
    RefinementTrace t;
    try {
        t.session_id = j.at("sessionId").get<std::string>();
        auto kind = parse_map_kind(j.at("kind").get<std::string>());
        if (!kind) throw Error(ErrorCode::SchemaViolation, "trace has an unknown map kind");
        t.kind = *kind;
        t.snapshot_id = j.value("snapshotId", std::string{});
        t.provider = j.value("provider", std::string{});
        t.model = j.value("model", std::string{});
        t.max_iterations = j.value("maxIterations", 0);
        t.stabilization_window = j.value("stabilizationWindow", 0);
        t.early_stop = j.value("earlyStop", true);
        for (const auto& ij : j.at("iterations")) {
            RefinementIteration it;
            it.index = ij.at("index").get<int>();
            it.prompt_ref = ij.value("promptRef", std::string{});
            it.attempts = ij.value("attempts", 1);
            it.raw_completion = ij.value("rawCompletion", std::string{});
            if (ij.contains("rejectedCompletion") && ij["rejectedCompletion"].is_string()) {
                it.rejected_completion = ij["rejectedCompletion"].get<std::string>();
            }
            if (ij.contains("graphDot") && ij["graphDot"].is_string()) {
                it.graph = parse_dot(ij["graphDot"].get<std::string>(), t.kind);
            }
            if (ij.contains("overview") && ij["overview"].is_object()) it.overview = parse_overview(ij["overview"]).overview;
            it.warnings = ij.value("warnings", std::vector<std::string>{});
            it.parse_error = ij.value("parseError", std::string{});
            if (ij.contains("report") && ij["report"].is_object()) it.report = AccuracyReport::from_json(ij["report"]);
            it.coverage_delta = ij.value("coverageDelta", std::int64_t{0});
            t.iterations.push_back(std::move(it));
        }
        if (j.contains("stoppedBecause") && j["stoppedBecause"].is_string()) {
            t.stopped_because = parse_stop_reason(j["stoppedBecause"].get<std::string>());
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::SchemaViolation, std::string("malformed trace: ") + e.what());
    }
    return t;
}

std::filesystem::path trace_file_name(const std::string& session_id) { return "trace-" + session_id + ".json"; }

std::filesystem::path save_trace(const RefinementTrace& trace, const std::filesystem::path& dir) {
    auto path = dir / trace_file_name(trace.session_id);
    write_file(path, trace.dump());
    return path;
}

RefinementTrace load_trace(const std::filesystem::path& file) {
    auto j = json::parse(read_file(file), nullptr, false);
    if (j.is_discarded()) throw Error(ErrorCode::MalformedJson, file.string() + " is not valid JSON");
    return RefinementTrace::from_json(j);
}

Refiner::Refiner(Gateway& gateway, const PromptLibrary& prompts, const CodebaseSnapshot& snapshot, ContextHandle handle)
    : gateway_(gateway), prompts_(prompts), snapshot_(snapshot), handle_(std::move(handle)) {}

namespace {

// Parses one completion into `it`. Returns false with it.parse_error set
// when no usable graph came back.
bool parse_completion(RefinementIteration& it, MapKind kind) {
    auto dot = extract_dot(it.raw_completion);
    if (!dot) {
        it.parse_error = "no DOT graph found in completion";
        return false;
    }
    try {
        it.graph = parse_dot(*dot, kind);
    } catch (const Error& e) {
        it.parse_error = e.what();
        return false;
    }
    if (auto js = extract_json(it.raw_completion)) {
        try {
            auto parsed = parse_overview(std::string_view(*js));
            it.overview = std::move(parsed.overview);
            it.warnings = std::move(parsed.warnings);
        } catch (const Error& e) {
            it.warnings.push_back(std::string("overview rejected: ") + e.what());
        }
    } else {
        it.warnings.emplace_back("no overview JSON found in completion");
    }
    it.parse_error.clear();
    return true;
}

}  // namespace

RefinementIteration Refiner::attempt(const AssembledPrompt& prompt, MapKind kind) {
    RefinementIteration it;
    auto first = gateway_.complete(handle_, prompt);
    it.prompt_ref = first.prompt_ref;
    it.attempts = first.attempt;
    it.raw_completion = std::move(first.raw_text);
    if (parse_completion(it, kind)) return it;

    auto second = gateway_.complete(handle_, prompts_.with_format_reminder(prompt));
    it.rejected_completion = std::move(it.raw_completion);
    it.raw_completion = std::move(second.raw_text);
    it.attempts += second.attempt;
    it.warnings.clear();
    parse_completion(it, kind);
    return it;
}

RefinementTrace Refiner::run(const std::string& session_id, MapKind kind, const RefineOptions& options) {
    if (!is_global(kind)) throw Error(ErrorCode::InvalidArgument, "refinement applies to global maps only");
    if (options.max_iterations < 1) throw Error(ErrorCode::InvalidArgument, "max_iterations must be positive");
    if (options.stabilization_window < 1) throw Error(ErrorCode::InvalidArgument, "stabilization_window must be positive");

    RefinementTrace trace;
    trace.session_id = session_id;
    trace.kind = kind;
    trace.snapshot_id = snapshot_.snapshot_id();
    trace.provider = std::string(to_string(gateway_.config().kind));
    trace.model = gateway_.config().kind == ProviderKind::Live ? gateway_.config().model : "";
    trace.max_iterations = options.max_iterations;
    trace.stabilization_window = options.stabilization_window;
    trace.early_stop = options.early_stop;

    auto all_files = snapshot_.path_set();
    for (int i = 1; i <= options.max_iterations; ++i) {
        AssembledPrompt prompt;
        if (i == 1) {
            prompt = prompts_.assemble_global(kind);
        } else {
            const auto& prior = trace.iterations.back();
            auto covered = files_in_graph(*prior.graph);
            std::vector<std::string> missing;
            std::set_difference(all_files.begin(), all_files.end(), covered.begin(), covered.end(),
                                std::back_inserter(missing));
            auto overview_json = prior.overview ? prior.overview->to_json().dump(2) : std::string("{}");
            prompt = prompts_.assemble_refinement(kind, serialize_dot(*prior.graph), overview_json, missing);
        }

        RefinementIteration it;
        try {
            it = attempt(prompt, kind);
        } catch (const RefinementError&) {
            throw;
        } catch (const Error& e) {
            throw RefinementError(e, trace);
        }
        it.index = i;
        if (it.failed()) {
            trace.iterations.push_back(std::move(it));
            trace.stopped_because = StopReason::ParseFailure;
            return trace;
        }
        it.report = measure_accuracy(*it.graph, snapshot_);
        auto prev_tp = trace.iterations.empty() ? 0 : trace.iterations.back().report->true_positives;
        it.coverage_delta = static_cast<std::int64_t>(it.report->true_positives) - static_cast<std::int64_t>(prev_tp);
        trace.iterations.push_back(std::move(it));

        auto window = static_cast<std::size_t>(options.stabilization_window);
        if (options.early_stop && trace.iterations.size() >= window) {
            auto tp = trace.iterations.back().report->true_positives;
            bool flat = std::all_of(trace.iterations.end() - static_cast<std::ptrdiff_t>(window), trace.iterations.end(),
                                    [&](const RefinementIteration& r) { return r.report->true_positives == tp; });
            if (flat) {
                trace.stopped_because = StopReason::Stabilized;
                return trace;
            }
        }
    }
    trace.stopped_because = StopReason::MaxIterations;
    return trace;
}

int EvaluationResult::completed_runs() const {
    return static_cast<int>(std::count_if(per_run.begin(), per_run.end(), [](const RunOutcome& r) { return r.completed(); }));
}

std::string format_double(double value) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
    if (ec != std::errc{}) return std::to_string(value);
    return std::string(buf, end);
}

namespace {

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

}  // namespace

void EvaluationResult::write_csv(std::ostream& out) const {
    out << "project,run,iteration,tp,fp,fn,accuracy\n";
    for (const auto& r : per_run) {
        if (!r.completed()) continue;
        for (const auto& it : r.trace->iterations) {
            out << csv_field(project_label) << ',' << r.run << ',' << it.index << ',' << it.report->true_positives << ','
                << it.report->false_positives << ',' << it.report->false_negatives << ','
                << format_double(it.report->accuracy()) << '\n';
        }
    }
}

void EvaluationResult::write_means_csv(std::ostream& out) const {
    out << "iteration,mean_accuracy,runs\n";
    for (std::size_t i = 0; i < mean_accuracy_by_iteration.size(); ++i) {
        out << i + 1 << ',' << format_double(mean_accuracy_by_iteration[i]) << ',' << completed_runs() << '\n';
    }
}

EvaluationResult evaluate(const CodebaseSnapshot& snapshot, const FileContents& contents, const PromptLibrary& prompts,
                          const GatewayFactory& gateways, const EvaluationOptions& options) {
    if (options.runs < 1 || options.rounds < 1) throw Error(ErrorCode::InvalidArgument, "runs and rounds must be positive");
    if (!is_global(options.kind)) throw Error(ErrorCode::InvalidArgument, "evaluation applies to global maps only");

    EvaluationResult result;
    result.project_label = snapshot.root_label();
    result.kind = options.kind;
    result.runs = options.runs;
    result.rounds = options.rounds;
    result.per_run.resize(static_cast<std::size_t>(options.runs));

    auto context = select_context(snapshot, options.context_cap);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < result.per_run.size(); i = next++) {
            auto& outcome = result.per_run[i];
            outcome.run = static_cast<int>(i + 1);
            try {
                auto gateway = gateways(i);
                auto handle = gateway->upload_context(context, contents);
                Refiner refiner(*gateway, prompts, snapshot, handle);
                auto trace = refiner.run("run-" + std::to_string(i + 1), options.kind,
                                         {options.rounds, options.rounds, false});
                if (trace.stopped_because == StopReason::ParseFailure) {
                    outcome.error = "parse failure at iteration " + std::to_string(trace.iterations.size()) + ": " +
                                    trace.iterations.back().parse_error;
                }
                outcome.trace = std::move(trace);
            } catch (const RefinementError& e) {
                outcome.error = std::string(to_string(e.code())) + ": " + e.what();
                outcome.trace = e.partial_trace();
            } catch (const Error& e) {
                outcome.error = std::string(to_string(e.code())) + ": " + e.what();
            } catch (const std::exception& e) {
                outcome.error = e.what();
            }
        }
    };
    auto n = std::clamp<std::size_t>(options.workers, 1, result.per_run.size());
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < n; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();

    if (result.completed_runs() > 0) {
        for (int k = 0; k < options.rounds; ++k) {
            double sum = 0;
            for (const auto& r : result.per_run) {
                if (r.completed()) sum += r.trace->iterations[static_cast<std::size_t>(k)].report->accuracy();
            }
            result.mean_accuracy_by_iteration.push_back(sum / result.completed_runs());
        }
    }
    return result;
}

}  // namespace atlas
