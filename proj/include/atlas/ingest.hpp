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
#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace atlas {

// Upper bound on files uploaded as retrieval context for one session.
inline constexpr std::size_t kContextCap = 100;

// Files larger than this are skipped during scan.
inline constexpr std::uintmax_t kMaxFileBytes = 1024 * 1024;

// Normalizes a repository-relative path: backslashes become '/', empty and
// "." segments are dropped, ".." is resolved lexically (never escaping the
// root) and any leading '/' is stripped. Case is preserved.
std::string normalize_path(std::string_view raw);

// Final path component of a normalized path.
std::string_view path_basename(std::string_view path);

// Matches a path against a glob. '*' and '?' stay within one segment, "**"
// spans segments. A pattern without '/' is tried against every segment.
bool glob_match(std::string_view pattern, std::string_view path);

// Counts newline-terminated lines, plus a trailing unterminated line.
std::size_t count_lines(std::string_view content);

// Lowercase hex SHA-256 of the content.
std::string content_digest(std::string_view content);

enum class LanguageKind { Python, Java, Solidity, JavaScript, Other };

struct Language {
    LanguageKind kind = LanguageKind::Other;
    std::string label;  // only meaningful for Other

    // "Python", "Java", "Solidity", "JavaScript" or "Other:<label>".
    std::string name() const;
    static Language parse(std::string_view name);

    friend bool operator==(const Language&, const Language&) = default;
    friend auto operator<=>(const Language&, const Language&) = default;
};

// Extension (lowercase, no dot) to language. Unlisted extensions map to
// Other(extension).
class LanguageTable {
public:
    LanguageTable();  // py, java, sol, js/ts family
    explicit LanguageTable(std::map<std::string, Language> table) : table_(std::move(table)) {}

    Language classify(std::string_view path) const;
    void set(std::string extension, Language language);

private:
    std::map<std::string, Language> table_;
};

struct SourceFile {
    std::string path;
    Language language;
    std::size_t loc = 0;
    std::string content_digest;

    friend bool operator==(const SourceFile&, const SourceFile&) = default;
};

class CodebaseSnapshot {
public:
    // Sorts files by path and validates uniqueness, path form and |files| >= 1.
    CodebaseSnapshot(std::string snapshot_id, std::string root_label, std::vector<SourceFile> files);

    const std::string& snapshot_id() const { return snapshot_id_; }
    const std::string& root_label() const { return root_label_; }
    const std::vector<SourceFile>& files() const { return files_; }
    const std::map<std::string, std::size_t>& language_histogram() const { return histogram_; }

    // Directory the snapshot was scanned from, when known. Not part of equality.
    const std::filesystem::path& root_path() const { return root_path_; }
    void set_root_path(std::filesystem::path root) { root_path_ = std::move(root); }

    std::set<std::string> path_set() const;
    bool contains(std::string_view path) const;
    const SourceFile* find(std::string_view path) const;
    std::size_t total_loc() const;

    // Equality up to snapshot id.
    bool same_contents(const CodebaseSnapshot& other) const;

    nlohmann::json to_json() const;
    static CodebaseSnapshot from_json(const nlohmann::json& j);

private:
    std::string snapshot_id_;
    std::string root_label_;
    std::vector<SourceFile> files_;
    std::map<std::string, std::size_t> histogram_;
    std::filesystem::path root_path_;
};

CodebaseSnapshot load_snapshot(const std::filesystem::path& file);
void save_snapshot(const CodebaseSnapshot& snapshot, const std::filesystem::path& file);

// Python, Java, Solidity and the JavaScript/TypeScript family.
inline std::set<std::string> default_source_extensions() {
    return {"py", "java", "sol", "js", "jsx", "mjs", "cjs", "ts", "tsx"};
}

struct ScanOptions {
    std::filesystem::path root;
    std::set<std::string> include_extensions;  // with or without leading dot
    std::vector<std::string> exclude_globs;
    LanguageTable languages;
    std::string root_label;  // defaults to the root directory name
};

// Throws RootNotFound and ZeroFilesMatched. Skipped files (binary or over
// kMaxFileBytes) are appended to `warnings` when given.
CodebaseSnapshot scan(const ScanOptions& options, std::vector<std::string>* warnings = nullptr);

enum class SelectionKind { All, LargestFirst, Manifest };

struct SelectionStrategy {
    SelectionKind kind = SelectionKind::LargestFirst;
    std::vector<std::string> manifest;

    static SelectionStrategy all() { return {SelectionKind::All, {}}; }
    static SelectionStrategy largest_first() { return {SelectionKind::LargestFirst, {}}; }
    static SelectionStrategy from_manifest(std::vector<std::string> paths) {
        return {SelectionKind::Manifest, std::move(paths)};
    }
};

struct ContextSet {
    std::string snapshot_id;
    std::vector<std::string> selected_paths;
    SelectionStrategy strategy;
};

// Picks at most `cap` files. Under the cap every file is returned whatever
// the strategy; above it, All is treated as LargestFirst.
ContextSet select_context(const CodebaseSnapshot& snapshot, std::size_t cap = kContextCap,
                          const SelectionStrategy& strategy = SelectionStrategy::largest_first());

using FileContents = std::map<std::string, std::string>;

// Reads the selected files relative to `root`.
FileContents read_contents(const std::filesystem::path& root, const std::vector<std::string>& paths);

}  // namespace atlas
