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

#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

namespace atlas {

// The three map kinds. BusinessComponent and FunctionCall are the global
// maps; Local is the per-node drill-down.
enum class MapKind { BusinessComponent, FunctionCall, Local };

std::string_view to_string(MapKind kind) noexcept;
// Accepts the enum names plus the CLI/URL spellings "business",
// "function-call" and "local".
std::optional<MapKind> parse_map_kind(std::string_view text);
// "business", "function-call", "local".
std::string_view map_kind_slug(MapKind kind) noexcept;
inline bool is_global(MapKind kind) { return kind != MapKind::Local; }

enum class Relation {
    BusinessPurpose,
    Inheritance,
    CallRelation,
    Purpose,
    Implements,
    Defines,
    UsedBy,
    Contains,
};

std::string_view to_string(Relation relation) noexcept;
std::optional<Relation> parse_relation(std::string_view text);
std::span<const Relation> legal_relations(MapKind kind) noexcept;
bool is_legal(MapKind kind, Relation relation) noexcept;

// Keyword inference over an edge label, restricted to relations legal for
// `kind`. Falls back to BusinessPurpose/Purpose for the global kinds; Local
// has no fallback and yields nullopt.
std::optional<Relation> infer_relation(MapKind kind, std::string_view label);

struct ComponentPayload {
    std::string component_name;
    std::string component_description;
    std::vector<std::string> key_functions;
    std::vector<std::string> key_variables;
    std::vector<std::string> key_files;
    friend bool operator==(const ComponentPayload&, const ComponentPayload&) = default;
};

struct ClassPayload {
    std::string class_name;
    std::string class_description;
    std::vector<std::string> key_functions;
    std::vector<std::string> key_variables;
    std::vector<std::string> key_files;
    friend bool operator==(const ClassPayload&, const ClassPayload&) = default;
};

enum class MemberKind { Interface, Class, Method, Variable };
std::string_view to_string(MemberKind kind) noexcept;
std::optional<MemberKind> parse_member_kind(std::string_view text);

struct MemberPayload {
    std::string member_name;
    MemberKind member_kind = MemberKind::Method;
    friend bool operator==(const MemberPayload&, const MemberPayload&) = default;
};

using NodePayload = std::variant<ComponentPayload, ClassPayload, MemberPayload>;

MapKind payload_kind(const NodePayload& payload) noexcept;
NodePayload empty_payload(MapKind kind);

struct MapNode {
    std::string id;
    std::string label;
    NodePayload payload;

    // Empty for Local payloads.
    const std::vector<std::string>& key_files() const;
    const std::vector<std::string>& key_functions() const;
    nlohmann::json payload_json() const;

    friend bool operator==(const MapNode&, const MapNode&) = default;
};

struct MapEdge {
    std::string src;
    std::string dst;
    Relation relation = Relation::BusinessPurpose;
    std::string annotation;

    friend bool operator==(const MapEdge&, const MapEdge&) = default;
    friend auto operator<=>(const MapEdge& a, const MapEdge& b) {
        return std::tie(a.src, a.dst, a.relation, a.annotation) <=> std::tie(b.src, b.dst, b.relation, b.annotation);
    }
};

class MapGraph {
public:
    explicit MapGraph(MapKind kind) : kind_(kind) {}

    MapKind kind() const { return kind_; }
    const std::vector<MapNode>& nodes() const { return nodes_; }
    const std::vector<MapEdge>& edges() const { return edges_; }
    const std::map<std::string, std::set<std::string>>& module_groups() const { return groups_; }

    // Each mutator enforces the graph invariants and throws atlas::Error.
    void add_node(MapNode node);
    void add_edge(MapEdge edge);
    void add_to_group(const std::string& module, const std::string& node_id);
    void ensure_group(const std::string& module);

    const MapNode* find(std::string_view id) const;
    bool has_node(std::string_view id) const { return find(id) != nullptr; }

    // Order-insensitive equality over nodes, edges (as a multiset) and groups.
    bool structurally_equal(const MapGraph& other) const;

private:
    MapKind kind_;
    std::vector<MapNode> nodes_;
    std::vector<MapEdge> edges_;
    std::map<std::string, std::set<std::string>> groups_;
    std::map<std::string, std::size_t, std::less<>> index_;
};

struct DotParseOptions {
    // DOT creates nodes that only appear in edge statements. Strict mode
    // rejects such edges with UndeclaredNode instead.
    bool allow_implicit_nodes = true;
};

MapGraph parse_dot(std::string_view text, MapKind kind, const DotParseOptions& options = {});
std::string serialize_dot(const MapGraph& graph);

// Union of keyFiles across nodes, each passed through normalize_path.
std::set<std::string> files_in_graph(const MapGraph& graph);

struct ModuleSummary {
    std::string name;
    std::string description;
    std::vector<std::string> component_names;
    friend bool operator==(const ModuleSummary&, const ModuleSummary&) = default;
};

struct GuideStep {
    int step_number = 0;
    std::string text;
    std::string module_name;
    std::optional<std::string> file_name;
    friend bool operator==(const GuideStep&, const GuideStep&) = default;
};

struct GlobalOverview {
    std::string summary;
    std::string entry_point;
    std::string how_to_run;
    std::vector<ModuleSummary> modules;
    std::vector<GuideStep> architecture_guide;  // sorted by step number

    nlohmann::json to_json() const;
    friend bool operator==(const GlobalOverview&, const GlobalOverview&) = default;
};

struct ParsedOverview {
    GlobalOverview overview;
    std::vector<std::string> warnings;  // ignored unknown fields
};

// Validates required fields, guide contiguity and the file/module linkage.
ParsedOverview parse_overview(std::string_view json_text);
ParsedOverview parse_overview(const nlohmann::json& j);
inline ParsedOverview parse_overview(const std::string& json_text) { return parse_overview(std::string_view(json_text)); }
inline ParsedOverview parse_overview(const char* json_text) { return parse_overview(std::string_view(json_text)); }

}  // namespace atlas
