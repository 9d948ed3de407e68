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


#include "support.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <sstream>
#include <unistd.h>

namespace atlas::testing {

namespace fs = std::filesystem;

TempDir::TempDir() {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            ("atlas-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
}

TempDir::~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
}

void write_text(const fs::path& file, const std::string& content) {
    fs::create_directories(file.parent_path());
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    out << content;
}

std::vector<std::string> write_synthetic_project(const fs::path& root, std::size_t files, std::size_t total_loc,
                                                 unsigned seed) {
    static const char* dirs[] = {"app/core", "app/api", "app/db", "app/utils", "scripts"};
    std::mt19937 rng(seed);
    std::vector<std::size_t> weights(files);
    std::size_t sum = 0;
    for (auto& w : weights) sum += (w = 1 + rng() % 50);
    std::vector<std::size_t> loc(files);
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < files; ++i) {
        loc[i] = std::max<std::size_t>(1, total_loc * weights[i] / sum);
        assigned += loc[i];
    }
    // Spread the rounding remainder (or excess) one line at a time.
    for (std::size_t i = 0; assigned != total_loc; i = (i + 1) % files) {
        if (assigned < total_loc) {
            ++loc[i];
            ++assigned;
        } else if (loc[i] > 1) {
            --loc[i];
            --assigned;
        }
    }
    std::vector<std::string> paths;
    for (std::size_t i = 0; i < files; ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "module_%02zu.py", i);
        auto rel = std::string(dirs[i % std::size(dirs)]) + "/" + name;
        std::string body = "def entry_" + std::to_string(i) + "():\n";
        for (std::size_t l = 1; l < loc[i]; ++l) body += "    value_" + std::to_string(l) + " = " + std::to_string(l) + "\n";
        write_text(root / rel, body);
        paths.push_back(rel);
    }
    std::sort(paths.begin(), paths.end());
    return paths;
}

namespace {

CodebaseSnapshot scan_project(const fs::path& root) {
    ScanOptions options;
    options.root = root;
    options.include_extensions = {"py"};
    options.root_label = "Python-44";
    return scan(options);
}

}  // namespace

Project44::Project44()
    : paths(write_synthetic_project(dir.path(), 44, 15534)),
      snapshot(scan_project(dir.path())),
      contents(read_contents(dir.path(), paths)) {}

namespace {

std::string quote(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"' || c == '\\') out += '\\';
        out += c;
    }
    return out + "\"";
}

std::string join(const std::vector<std::string>& items, const std::string& sep) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) out += (i ? sep : "") + items[i];
    return out;
}

std::string global_dot(const std::vector<std::string>& files, bool classes) {
    std::ostringstream out;
    out << "digraph G {\n  rankdir=LR;\n";
    std::size_t nodes = std::max<std::size_t>(1, (files.size() + 3) / 4);
    std::vector<std::string> module1, module2;
    for (std::size_t k = 0; k < nodes; ++k) {
        std::vector<std::string> chunk(files.begin() + static_cast<std::ptrdiff_t>(std::min(files.size(), k * 4)),
                                       files.begin() + static_cast<std::ptrdiff_t>(std::min(files.size(), k * 4 + 4)));
        auto id = (classes ? "Class" : "Component") + std::to_string(k + 1);
        out << "  " << id << " [label=" << quote(id + ": (handles part " + std::to_string(k + 1) + ")")
            << ", keyFunctions=" << quote("run_" + std::to_string(k + 1)) << ", keyFiles=" << quote(join(chunk, ";"))
            << "];\n";
        (k % 2 ? module2 : module1).push_back(id);
    }
    for (std::size_t k = 1; k < nodes; ++k) {
        auto prefix = classes ? "Class" : "Component";
        out << "  " << prefix << k << " -> " << prefix << k + 1 << " [label="
            << quote(classes ? "calls process()" : "passes results to") << "];\n";
    }
    out << "  subgraph cluster_module1 { label=\"Module1\"; " << join(module1, "; ") << "; }\n";
    if (!module2.empty()) out << "  subgraph cluster_module2 { label=\"Module2\"; " << join(module2, "; ") << "; }\n";
    out << "}\n";
    return out.str();
}

}  // namespace

std::string business_dot(const std::vector<std::string>& covered, const std::vector<std::string>& hallucinated) {
    auto files = covered;
    files.insert(files.end(), hallucinated.begin(), hallucinated.end());
    return global_dot(files, false);
}

std::string function_call_dot(const std::vector<std::string>& covered) { return global_dot(covered, true); }

std::string overview_json(std::size_t modules) {
    nlohmann::json mods = nlohmann::json::array();
    nlohmann::json guide = nlohmann::json::array();
    for (std::size_t i = 1; i <= modules; ++i) {
        auto name = "Module" + std::to_string(i);
        mods.push_back({{"name", name}, {"description", "Part " + std::to_string(i) + " of the system"},
                        {"componentNames", {"Component" + std::to_string(i)}}});
        nlohmann::json step = {{"stepNumber", i}, {"text", "Read " + name}, {"moduleName", name}};
        if (i == 1) step["fileName"] = "app/core/module_00.py";
        guide.push_back(step);
    }
    return nlohmann::json{{"summary", "A synthetic service."},
                          {"entryPoint", "app/core/module_00.py"},
                          {"howToRun", "python -m app"},
                          {"modules", mods},
                          {"architectureGuide", guide}}
        .dump(2);
}

std::string completion(const std::string& dot, const std::string& overview) {
    return "Here is the analysis.\n\n```json\n" + overview + "\n```\n\n```dot\n" + dot + "```\n";
}

std::vector<std::string> first_n(const std::vector<std::string>& items, std::size_t n) {
    return {items.begin(), items.begin() + static_cast<std::ptrdiff_t>(std::min(n, items.size()))};
}

namespace {

const std::vector<std::string> kTextAlphabet = {"a", "b", "Z", "0", "7",  " ",  "_", "-", ".",  ":",  ";",
                                                "\"", "\\", "\n", "{", "}", "[", "]", "=", ",", "->", "/",
                                                "#", "é", "漢", "(", ")", "\\n", "\t"};
const std::string kItemAlphabet = "abcxyz0189_./-";

std::string random_text(std::mt19937_64& rng, std::size_t min_len, std::size_t max_len) {
    std::uniform_int_distribution<std::size_t> len(min_len, max_len);
    std::uniform_int_distribution<std::size_t> pick(0, kTextAlphabet.size() - 1);
    std::string out;
    for (auto n = len(rng); n > 0; --n) out += kTextAlphabet[pick(rng)];
    return out;
}

std::vector<std::string> random_items(std::mt19937_64& rng) {
    std::uniform_int_distribution<int> count(0, 3), len(1, 10);
    std::uniform_int_distribution<std::size_t> pick(0, kItemAlphabet.size() - 1);
    std::vector<std::string> out;
    for (int n = count(rng); n > 0; --n) {
        std::string item;
        for (int l = len(rng); l > 0; --l) item += kItemAlphabet[pick(rng)];
        out.push_back(item);
    }
    return out;
}

}  // namespace

MapGraph random_graph(MapKind kind, std::mt19937_64& rng, std::size_t max_nodes) {
    MapGraph g(kind);
    std::uniform_int_distribution<std::size_t> node_count(1, max_nodes);
    auto n = node_count(rng);
    std::vector<std::string> ids;
    while (ids.size() < n) {
        auto id = random_text(rng, 1, 8);
        if (std::find(ids.begin(), ids.end(), id) != ids.end()) continue;
        ids.push_back(id);
        NodePayload payload;
        switch (kind) {
            case MapKind::BusinessComponent:
                payload = ComponentPayload{random_text(rng, 0, 12), random_text(rng, 0, 30), random_items(rng),
                                           random_items(rng), random_items(rng)};
                break;
            case MapKind::FunctionCall:
                payload = ClassPayload{random_text(rng, 0, 12), random_text(rng, 0, 30), random_items(rng),
                                       random_items(rng), random_items(rng)};
                break;
            case MapKind::Local:
                payload = MemberPayload{random_text(rng, 0, 12), static_cast<MemberKind>(rng() % 4)};
                break;
        }
        g.add_node({id, random_text(rng, 0, 20), payload});
    }
    auto legal = legal_relations(kind);
    std::uniform_int_distribution<std::size_t> edge_count(0, 2 * n), pick_node(0, n - 1), pick_rel(0, legal.size() - 1);
    if (n > 1) {
        for (auto m = edge_count(rng); m > 0; --m) {
            auto a = pick_node(rng), b = pick_node(rng);
            if (a == b) continue;
            g.add_edge({ids[a], ids[b], legal[pick_rel(rng)], random_text(rng, 0, 16)});
        }
    }
    std::uniform_int_distribution<int> group_count(0, 3);
    for (int k = group_count(rng); k > 0; --k) {
        auto name = "M" + random_text(rng, 0, 10) + "x";
        g.ensure_group(name);
        for (const auto& id : ids) {
            if (rng() % 3 == 0) g.add_to_group(name, id);
        }
    }
    return g;
}

Fraction oracle_accuracy(const std::vector<std::string>& graph_files, const std::vector<std::string>& snapshot_files) {
    auto contains = [](const std::vector<std::string>& v, const std::string& x) {
        for (const auto& e : v) {
            if (e == x) return true;
        }
        return false;
    };
    std::vector<std::string> g, s;
    for (const auto& f : graph_files) {
        if (!contains(g, f)) g.push_back(f);
    }
    for (const auto& f : snapshot_files) {
        if (!contains(s, f)) s.push_back(f);
    }
    std::uint64_t tp = 0, fp = 0, fn = 0;
    for (const auto& f : g) (contains(s, f) ? tp : fp)++;
    for (const auto& f : s) {
        if (!contains(g, f)) ++fn;
    }
    return {tp, tp + fp + fn};
}

StopOutcome oracle_stop(const std::vector<std::size_t>& tp, std::size_t max_iterations, std::size_t window) {
    for (std::size_t i = 1; i <= max_iterations && i <= tp.size(); ++i) {
        if (i < window) continue;
        bool flat = true;
        for (std::size_t k = i - window; k < i; ++k) flat = flat && tp[k] == tp[i - 1];
        if (flat) return {i, true};
    }
    return {std::min(max_iterations, tp.size()), false};
}

std::vector<ScriptEntry> replies(const std::vector<std::string>& texts) {
    std::vector<ScriptEntry> out;
    for (const auto& t : texts) out.push_back(ScriptEntry::reply(t));
    return out;
}

}  // namespace atlas::testing
