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

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "atlas/error.hpp"
#include "atlas/graph.hpp"
#include "atlas/ingest.hpp"
#include "atlas/llm.hpp"
#include "atlas/prompt.hpp"

namespace atlas {

// File-coverage accuracy of a map against the snapshot it describes.
// accuracy = tp / (tp + fp + fn); there are no negative files, so no TN.
struct AccuracyReport {
    std::size_t true_positives = 0;   // graph files present in the snapshot
    std::size_t false_positives = 0;  // graph files absent from the snapshot
    std::size_t false_negatives = 0;  // snapshot files absent from the graph
    // False positives whose basename matches a false negative. Diagnostic
    // only, never counted as hits.
    std::size_t basename_matches = 0;

    std::uint64_t numerator() const { return true_positives; }
    std::uint64_t denominator() const { return true_positives + false_positives + false_negatives; }
    double accuracy() const { return static_cast<double>(numerator()) / static_cast<double>(denominator()); }

    nlohmann::json to_json() const;
    static AccuracyReport from_json(const nlohmann::json& j);
    friend bool operator==(const AccuracyReport&, const AccuracyReport&) = default;
};

// Paths on both sides are normalized before comparison. Throws
// InvalidArgument when `snapshot_files` is empty.
AccuracyReport measure_accuracy(const std::set<std::string>& graph_files, const std::set<std::string>& snapshot_files);
AccuracyReport measure_accuracy(const MapGraph& graph, const CodebaseSnapshot& snapshot);

// Pulls the DOT graph out of a completion: a ```dot fence, else the first
// balanced `digraph ... { ... }`.
std::optional<std::string> extract_dot(std::string_view completion);
// Pulls the overview JSON out of a completion: a ```json fence, else the
// first balanced object that parses as JSON.
std::optional<std::string> extract_json(std::string_view completion);

enum class StopReason { MaxIterations, Stabilized, ParseFailure };

std::string_view to_string(StopReason reason) noexcept;
std::optional<StopReason> parse_stop_reason(std::string_view text);

struct RefinementIteration {
    int index = 0;  // 1-based
    std::string prompt_ref;
    std::string raw_completion;
    // Completion rejected before the format-reminder re-ask, if one happened.
    std::optional<std::string> rejected_completion;
    int attempts = 1;
    std::optional<MapGraph> graph;  // absent when parsing failed
    std::optional<GlobalOverview> overview;
    std::vector<std::string> warnings;
    std::string parse_error;
    std::optional<AccuracyReport> report;
    std::int64_t coverage_delta = 0;  // TP(i) - TP(i-1), TP(0) = 0

    bool failed() const { return !graph.has_value(); }
};

struct RefinementTrace {
    std::string session_id;
    MapKind kind = MapKind::BusinessComponent;
    std::string snapshot_id;
    std::string provider;
    std::string model;
    int max_iterations = 0;
    int stabilization_window = 0;
    bool early_stop = true;
    std::vector<RefinementIteration> iterations;
    // Unset while running and in partial traces.
    std::optional<StopReason> stopped_because;

    // Last iteration that produced a graph.
    const RefinementIteration* last_success() const;

    // Deterministic: graphs are stored as serialized DOT and no timings are
    // recorded, so identical runs give identical bytes.
    nlohmann::json to_json() const;
    std::string dump() const;
    static RefinementTrace from_json(const nlohmann::json& j);
};

std::filesystem::path trace_file_name(const std::string& session_id);
std::filesystem::path save_trace(const RefinementTrace& trace, const std::filesystem::path& dir);
RefinementTrace load_trace(const std::filesystem::path& file);

// A gateway error raised mid-refinement, with the iterations completed so far.
class RefinementError : public Error {
public:
    RefinementError(const Error& cause, RefinementTrace partial)
        : Error(cause.code(), cause.what(), cause.details()), partial_(std::move(partial)) {}
    const RefinementTrace& partial_trace() const { return partial_; }

private:
    RefinementTrace partial_;
};

struct RefineOptions {
    int max_iterations = 5;
    // Stop once this many consecutive iterations report the same TP.
    int stabilization_window = 2;
    bool early_stop = true;
};

class Refiner {
public:
    Refiner(Gateway& gateway, const PromptLibrary& prompts, const CodebaseSnapshot& snapshot, ContextHandle handle);
    Refiner(Gateway&, PromptLibrary&&, const CodebaseSnapshot&, ContextHandle) = delete;
    Refiner(Gateway&, const PromptLibrary&, CodebaseSnapshot&&, ContextHandle) = delete;

    RefinementTrace run(const std::string& session_id, MapKind kind, const RefineOptions& options = {});

private:
    // Sends `prompt`, re-asking once with the format reminder on a parse failure.
    RefinementIteration attempt(const AssembledPrompt& prompt, MapKind kind);

    Gateway& gateway_;
    const PromptLibrary& prompts_;
    const CodebaseSnapshot& snapshot_;
    ContextHandle handle_;
};

struct RunOutcome {
    int run = 0;  // 1-based
    std::optional<RefinementTrace> trace;
    std::string error;  // set when the run did not complete

    bool completed() const { return error.empty(); }
};

struct EvaluationResult {
    std::string project_label;
    MapKind kind = MapKind::BusinessComponent;
    int runs = 0;
    int rounds = 0;
    // One mean per iteration index, over completed runs. Empty when no run completed.
    std::vector<double> mean_accuracy_by_iteration;
    std::vector<RunOutcome> per_run;

    int completed_runs() const;
    int failed_runs() const { return runs - completed_runs(); }

    // Header plus one row per iteration of every completed run.
    void write_csv(std::ostream& out) const;
    void write_means_csv(std::ostream& out) const;
};

struct EvaluationOptions {
    MapKind kind = MapKind::BusinessComponent;
    int runs = 10;
    int rounds = 5;
    std::size_t workers = 4;
    std::size_t context_cap = kContextCap;
};

// Builds the gateway for run `index` (0-based); each run gets its own.
using GatewayFactory = std::function<std::unique_ptr<Gateway>(std::size_t index)>;

// Runs `runs` independent sessions: fresh upload, then `rounds` refinement
// iterations without early stopping. A run failing with a gateway error or a
// parse failure is reported and left out of the means.
EvaluationResult evaluate(const CodebaseSnapshot& snapshot, const FileContents& contents, const PromptLibrary& prompts,
                          const GatewayFactory& gateways, const EvaluationOptions& options = {});

// Shortest decimal form that reads back to the same double.
std::string format_double(double value);

}  // namespace atlas
