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

#include <cstddef>
#include <filesystem>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "atlas/graph.hpp"
#include "atlas/ingest.hpp"
#include "atlas/llm.hpp"

namespace atlas::testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    TempDir();
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

private:
    std::filesystem::path path_;
};

void write_text(const std::filesystem::path& file, const std::string& content);

// Writes `files` Python files totalling exactly `total_loc` lines under
// `root` and returns their relative paths, sorted.
std::vector<std::string> write_synthetic_project(const std::filesystem::path& root, std::size_t files,
                                                 std::size_t total_loc, unsigned seed = 44);

// The 44-file, 15,534-line Python project used by the refinement fixtures.
struct Project44 {
    TempDir dir;
    std::vector<std::string> paths;
    CodebaseSnapshot snapshot;
    FileContents contents;

    Project44();
};

// Scripted model output: a business DOT graph whose nodes carry `covered`
// (plus `hallucinated`) as keyFiles, four files per component.
std::string business_dot(const std::vector<std::string>& covered, const std::vector<std::string>& hallucinated = {});
std::string function_call_dot(const std::vector<std::string>& covered);
// A valid overview JSON naming the modules used by business_dot.
std::string overview_json(std::size_t modules = 2);
// Completion text in the shape a model returns: JSON block then DOT block.
std::string completion(const std::string& dot, const std::string& overview = overview_json());

std::vector<std::string> first_n(const std::vector<std::string>& items, std::size_t n);

// Random valid graph of `kind` with up to `max_nodes` nodes. Identifiers,
// labels and descriptions draw from an alphabet with quotes, backslashes,
// spaces, newlines and non-ASCII text; list items avoid ';'.
MapGraph random_graph(MapKind kind, std::mt19937_64& rng, std::size_t max_nodes = 12);

// Reference accuracy by brute force over plain vectors:
// |G∩S| / (|G∩S| + |G\S| + |S\G|) as an exact fraction (num, den).
struct Fraction {
    std::uint64_t num;
    std::uint64_t den;
};
Fraction oracle_accuracy(const std::vector<std::string>& graph_files, const std::vector<std::string>& snapshot_files);

// Reference stopping rule: number of iterations run and whether it stopped
// because the last `window` TP values were equal.
struct StopOutcome {
    std::size_t iterations;
    bool stabilized;
};
StopOutcome oracle_stop(const std::vector<std::size_t>& tp_per_iteration, std::size_t max_iterations, std::size_t window);

// Scripted provider entries from plain strings.
std::vector<ScriptEntry> replies(const std::vector<std::string>& texts);

// Sleeper that records requested delays instead of sleeping.
struct RecordingSleeper {
    std::shared_ptr<std::vector<std::chrono::milliseconds>> delays = std::make_shared<std::vector<std::chrono::milliseconds>>();
    Sleeper fn() const {
        auto d = delays;
        return [d](std::chrono::milliseconds ms) { d->push_back(ms); };
    }
};

}  // namespace atlas::testing
