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

#include "atlas/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <numeric>
#include <sstream>

#include <openssl/evp.h>

#include "atlas/error.hpp"
#include "atlas/util.hpp"

namespace atlas {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::vector<std::string_view> split_segments(std::string_view path) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (start <= path.size()) {
        auto end = path.find('/', start);
        if (end == std::string_view::npos) end = path.size();
        out.push_back(path.substr(start, end - start));
        start = end + 1;
    }
    return out;
}

// Single-segment match for '*' and '?'.
bool segment_match(std::string_view pat, std::string_view text) {
    std::size_t p = 0, t = 0, star = std::string_view::npos, mark = 0;
    while (t < text.size()) {
        if (p < pat.size() && (pat[p] == '?' || pat[p] == text[t])) {
            ++p;
            ++t;
        } else if (p < pat.size() && pat[p] == '*') {
            star = p++;
            mark = t;
        } else if (star != std::string_view::npos) {
            p = star + 1;
            t = ++mark;
        } else {
            return false;
        }
    }
    while (p < pat.size() && pat[p] == '*') ++p;
    return p == pat.size();
}

bool segments_match(const std::vector<std::string_view>& pat, std::size_t pi,
                    const std::vector<std::string_view>& segs, std::size_t si) {
    if (pi == pat.size()) return si == segs.size();
    if (pat[pi] == "**") {
        for (std::size_t k = si; k <= segs.size(); ++k) {
            if (segments_match(pat, pi + 1, segs, k)) return true;
        }
        return false;
    }
    if (si == segs.size()) return false;
    return segment_match(pat[pi], segs[si]) && segments_match(pat, pi + 1, segs, si + 1);
}

std::string extension_of(std::string_view path) {
    auto base = path_basename(path);
    auto dot = base.rfind('.');
    if (dot == std::string_view::npos || dot == 0) return {};
    return lower(base.substr(dot + 1));
}

bool looks_binary(std::string_view content) {
    auto probe = content.substr(0, std::min<std::size_t>(content.size(), 8192));
    return probe.find('\0') != std::string_view::npos;
}

void validate_path_form(const std::string& path) {
    if (path.empty() || normalize_path(path) != path) {
        throw Error(ErrorCode::InvalidArgument, "path is not normalized: '" + path + "'");
    }
}

}  // namespace

std::string normalize_path(std::string_view raw) {
    std::string unified(raw);
    std::replace(unified.begin(), unified.end(), '\\', '/');
    std::vector<std::string_view> kept;
    for (auto seg : split_segments(unified)) {
        if (seg.empty() || seg == ".") continue;
        if (seg == "..") {
            if (!kept.empty()) kept.pop_back();
            continue;
        }
        kept.push_back(seg);
    }
    std::string out;
    for (std::size_t i = 0; i < kept.size(); ++i) {
        if (i) out += '/';
        out += kept[i];
    }
    return out;
}

std::string_view path_basename(std::string_view path) {
    auto slash = path.rfind('/');
    return slash == std::string_view::npos ? path : path.substr(slash + 1);
}

bool glob_match(std::string_view pattern, std::string_view path) {
    auto segs = split_segments(path);
    if (pattern.find('/') == std::string_view::npos) {
        return std::any_of(segs.begin(), segs.end(),
                           [&](std::string_view s) { return segment_match(pattern, s); });
    }
    auto pat = split_segments(pattern);
    return segments_match(pat, 0, segs, 0);
}

std::size_t count_lines(std::string_view content) {
    auto newlines = static_cast<std::size_t>(std::count(content.begin(), content.end(), '\n'));
    if (!content.empty() && content.back() != '\n') ++newlines;
    return newlines;
}

std::string content_digest(std::string_view content) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(content.data(), content.size(), md, &len, EVP_sha256(), nullptr) != 1) {
        throw Error(ErrorCode::Io, "sha256 digest failed");
    }
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        out += kHex[md[i] >> 4];
        out += kHex[md[i] & 0xF];
    }
    return out;
}

std::string Language::name() const {
    switch (kind) {
        case LanguageKind::Python: return "Python";
        case LanguageKind::Java: return "Java";
        case LanguageKind::Solidity: return "Solidity";
        case LanguageKind::JavaScript: return "JavaScript";
        case LanguageKind::Other: return "Other:" + label;
    }
    return "Other:" + label;
}

Language Language::parse(std::string_view name) {
    if (name == "Python") return {LanguageKind::Python, {}};
    if (name == "Java") return {LanguageKind::Java, {}};
    if (name == "Solidity") return {LanguageKind::Solidity, {}};
    if (name == "JavaScript") return {LanguageKind::JavaScript, {}};
    if (name.starts_with("Other:")) return {LanguageKind::Other, std::string(name.substr(6))};
    throw Error(ErrorCode::SchemaViolation, "unknown language '" + std::string(name) + "'");
}

LanguageTable::LanguageTable() {
    table_ = {
        {"py", {LanguageKind::Python, {}}},         {"java", {LanguageKind::Java, {}}},
        {"sol", {LanguageKind::Solidity, {}}},      {"js", {LanguageKind::JavaScript, {}}},
        {"jsx", {LanguageKind::JavaScript, {}}},    {"mjs", {LanguageKind::JavaScript, {}}},
        {"cjs", {LanguageKind::JavaScript, {}}},    {"ts", {LanguageKind::JavaScript, {}}},
        {"tsx", {LanguageKind::JavaScript, {}}},
    };
}

Language LanguageTable::classify(std::string_view path) const {
    auto ext = extension_of(path);
    if (auto it = table_.find(ext); it != table_.end()) return it->second;
    return {LanguageKind::Other, ext};
}

void LanguageTable::set(std::string extension, Language language) {
    table_[lower(extension)] = std::move(language);
}

CodebaseSnapshot::CodebaseSnapshot(std::string snapshot_id, std::string root_label,
                                   std::vector<SourceFile> files)
    : snapshot_id_(std::move(snapshot_id)), root_label_(std::move(root_label)), files_(std::move(files)) {
    if (files_.empty()) throw Error(ErrorCode::ZeroFilesMatched, "snapshot must contain at least one file");
    std::sort(files_.begin(), files_.end(),
              [](const SourceFile& a, const SourceFile& b) { return a.path < b.path; });
    for (std::size_t i = 0; i < files_.size(); ++i) {
        validate_path_form(files_[i].path);
        if (i && files_[i].path == files_[i - 1].path) {
            throw Error(ErrorCode::InvalidArgument, "duplicate path in snapshot: " + files_[i].path);
        }
        ++histogram_[files_[i].language.name()];
    }
}

std::set<std::string> CodebaseSnapshot::path_set() const {
    std::set<std::string> out;
    for (const auto& f : files_) out.insert(f.path);
    return out;
}

const SourceFile* CodebaseSnapshot::find(std::string_view path) const {
    auto it = std::lower_bound(files_.begin(), files_.end(), path,
                               [](const SourceFile& f, std::string_view p) { return f.path < p; });
    return (it != files_.end() && it->path == path) ? &*it : nullptr;
}

bool CodebaseSnapshot::contains(std::string_view path) const { return find(path) != nullptr; }

std::size_t CodebaseSnapshot::total_loc() const {
    return std::accumulate(files_.begin(), files_.end(), std::size_t{0},
                           [](std::size_t acc, const SourceFile& f) { return acc + f.loc; });
}

bool CodebaseSnapshot::same_contents(const CodebaseSnapshot& other) const {
    return root_label_ == other.root_label_ && files_ == other.files_;
}

json CodebaseSnapshot::to_json() const {
    json files = json::array();
    for (const auto& f : files_) {
        files.push_back({{"path", f.path},
                         {"language", f.language.name()},
                         {"loc", f.loc},
                         {"contentDigest", f.content_digest}});
    }
    json j = {{"snapshotId", snapshot_id_}, {"rootLabel", root_label_}, {"files", files}};
    if (!root_path_.empty()) j["rootPath"] = root_path_.string();
    return j;
}

CodebaseSnapshot CodebaseSnapshot::from_json(const json& j) {
    try {
        std::vector<SourceFile> files;
        for (const auto& f : j.at("files")) {
            files.push_back({f.at("path").get<std::string>(), Language::parse(f.at("language").get<std::string>()),
                             f.at("loc").get<std::size_t>(), f.at("contentDigest").get<std::string>()});
        }
        CodebaseSnapshot snap(j.at("snapshotId").get<std::string>(), j.at("rootLabel").get<std::string>(),
                              std::move(files));
        if (j.contains("rootPath")) snap.set_root_path(j["rootPath"].get<std::string>());
        return snap;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::SchemaViolation, std::string("invalid snapshot JSON: ") + e.what());
    }
}

CodebaseSnapshot load_snapshot(const fs::path& file) {
    if (!fs::exists(file)) throw Error(ErrorCode::NotFound, "snapshot file not found: " + file.string());
    json j;
    try {
        j = json::parse(read_file(file));
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::MalformedJson, std::string("snapshot is not valid JSON: ") + e.what());
    }
    return CodebaseSnapshot::from_json(j);
}

void save_snapshot(const CodebaseSnapshot& snapshot, const fs::path& file) {
    if (file.has_parent_path()) fs::create_directories(file.parent_path());
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + file.string());
    out << snapshot.to_json().dump(2) << '\n';
}

CodebaseSnapshot scan(const ScanOptions& options, std::vector<std::string>* warnings) {
    std::error_code ec;
    if (!fs::is_directory(options.root, ec)) {
        throw Error(ErrorCode::RootNotFound, "root directory not found: " + options.root.string());
    }
    std::set<std::string> extensions;
    for (const auto& e : options.include_extensions) {
        extensions.insert(lower(e.starts_with('.') ? std::string_view(e).substr(1) : std::string_view(e)));
    }

    std::vector<SourceFile> files;
    std::string digest_input;
    auto it = fs::recursive_directory_iterator(options.root, fs::directory_options::skip_permission_denied);
    for (const auto& entry : it) {
        if (!entry.is_regular_file(ec)) continue;
        auto rel = normalize_path(fs::relative(entry.path(), options.root).generic_string());
        if (!extensions.contains(extension_of(rel))) continue;
        if (std::any_of(options.exclude_globs.begin(), options.exclude_globs.end(),
                        [&](const std::string& g) { return glob_match(g, rel); })) {
            continue;
        }
        if (entry.file_size(ec) > kMaxFileBytes) {
            if (warnings) warnings->push_back("skipped " + rel + ": larger than 1 MiB");
            continue;
        }
        auto content = read_file(entry.path());
        if (looks_binary(content)) {
            if (warnings) warnings->push_back("skipped " + rel + ": binary content");
            continue;
        }
        files.push_back({rel, options.languages.classify(rel), count_lines(content), content_digest(content)});
    }
    if (files.empty()) {
        throw Error(ErrorCode::ZeroFilesMatched, "no files matched under " + options.root.string());
    }
    std::sort(files.begin(), files.end(), [](const auto& a, const auto& b) { return a.path < b.path; });
    for (const auto& f : files) digest_input += f.path + '\0' + f.content_digest + '\n';

    auto label = options.root_label;
    if (label.empty()) {
        auto canonical = fs::weakly_canonical(options.root, ec);
        label = canonical.filename().string();
        if (label.empty()) label = options.root.filename().string();
    }
    CodebaseSnapshot snap("snap-" + content_digest(digest_input).substr(0, 16), label, std::move(files));
    snap.set_root_path(fs::absolute(options.root));
    return snap;
}

ContextSet select_context(const CodebaseSnapshot& snapshot, std::size_t cap, const SelectionStrategy& strategy) {
    if (cap == 0) throw Error(ErrorCode::InvalidArgument, "context cap must be at least 1");
    ContextSet out{snapshot.snapshot_id(), {}, strategy};

    if (strategy.kind == SelectionKind::Manifest) {
        std::set<std::string> seen;
        std::vector<std::string> manifest;
        for (const auto& raw : strategy.manifest) {
            auto p = normalize_path(raw);
            if (!snapshot.contains(p)) {
                throw Error(ErrorCode::UnknownPath, "manifest references unknown path: " + raw, {raw});
            }
            if (seen.insert(p).second) manifest.push_back(p);
        }
        if (manifest.size() > cap) {
            throw Error(ErrorCode::ManifestOverCap, "manifest lists " + std::to_string(manifest.size()) +
                                                        " files, cap is " + std::to_string(cap));
        }
        if (snapshot.files().size() > cap) {
            std::sort(manifest.begin(), manifest.end());
            out.selected_paths = std::move(manifest);
            return out;
        }
    }

    const auto& files = snapshot.files();
    if (files.size() <= cap) {
        for (const auto& f : files) out.selected_paths.push_back(f.path);
        return out;
    }
    std::vector<const SourceFile*> ranked;
    for (const auto& f : files) ranked.push_back(&f);
    // files are path-sorted, so a stable sort keeps path order among equal loc
    std::stable_sort(ranked.begin(), ranked.end(), [](auto* a, auto* b) { return a->loc > b->loc; });
    ranked.resize(cap);
    for (auto* f : ranked) out.selected_paths.push_back(f->path);
    std::sort(out.selected_paths.begin(), out.selected_paths.end());
    return out;
}

FileContents read_contents(const fs::path& root, const std::vector<std::string>& paths) {
    FileContents out;
    for (const auto& p : paths) out.emplace(p, read_file(root / p));
    return out;
}

}  // namespace atlas
