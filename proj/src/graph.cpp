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

#include "atlas/graph.hpp"

#include <algorithm>
#include <array>
#include <cctype>

#include "atlas/error.hpp"
#include "atlas/ingest.hpp"

namespace atlas {

namespace {

std::string lower_alnum(std::string_view s) {
    std::string out;
    for (unsigned char c : s) {
        if (std::isalnum(c)) out += static_cast<char>(std::tolower(c));
    }
    return out;
}

std::vector<std::string> words_of(std::string_view s) {
    std::vector<std::string> out;
    std::string cur;
    for (unsigned char c : s) {
        if (std::isalnum(c)) {
            cur += static_cast<char>(std::tolower(c));
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

constexpr std::array kBusinessRelations{Relation::BusinessPurpose};
constexpr std::array kFunctionCallRelations{Relation::Inheritance, Relation::CallRelation, Relation::Purpose};
constexpr std::array kLocalRelations{Relation::Inheritance, Relation::Implements, Relation::Defines,
                                     Relation::UsedBy, Relation::Contains};

struct KeywordRule {
    Relation relation;
    std::vector<std::vector<std::string>> phrases;
};

// Inference order: inherits, implements, defines, used by, contains, calls.
const std::vector<KeywordRule>& keyword_rules() {
    static const std::vector<KeywordRule> rules = {
        {Relation::Inheritance, {{"inherits"}, {"inherit"}, {"inherited"}, {"inheritance"}, {"extends"},
                                 {"subclass"}, {"subclasses"}}},
        {Relation::Implements, {{"implements"}, {"implement"}, {"implemented"}, {"realizes"}}},
        {Relation::Defines, {{"defines"}, {"define"}, {"defined"}, {"declares"}}},
        {Relation::UsedBy, {{"used", "by"}, {"usedby"}}},
        {Relation::Contains, {{"contains"}, {"contain"}, {"containing"}}},
        {Relation::CallRelation, {{"calls"}, {"call"}, {"called"}, {"invokes"}, {"invoke"}}},
    };
    return rules;
}

bool contains_phrase(const std::vector<std::string>& words, const std::vector<std::string>& phrase) {
    if (phrase.size() > words.size()) return false;
    for (std::size_t i = 0; i + phrase.size() <= words.size(); ++i) {
        if (std::equal(phrase.begin(), phrase.end(), words.begin() + static_cast<std::ptrdiff_t>(i))) return true;
    }
    return false;
}

const std::vector<std::string> kNoStrings;

}  // namespace

std::string_view to_string(MapKind kind) noexcept {
    switch (kind) {
        case MapKind::BusinessComponent: return "BusinessComponent";
        case MapKind::FunctionCall: return "FunctionCall";
        case MapKind::Local: return "Local";
    }
    return "Local";
}

std::string_view map_kind_slug(MapKind kind) noexcept {
    switch (kind) {
        case MapKind::BusinessComponent: return "business";
        case MapKind::FunctionCall: return "function-call";
        case MapKind::Local: return "local";
    }
    return "local";
}

std::optional<MapKind> parse_map_kind(std::string_view text) {
    auto key = lower_alnum(text);
    if (key == "business" || key == "businesscomponent") return MapKind::BusinessComponent;
    if (key == "functioncall" || key == "function") return MapKind::FunctionCall;
    if (key == "local") return MapKind::Local;
    return std::nullopt;
}

std::string_view to_string(Relation relation) noexcept {
    switch (relation) {
        case Relation::BusinessPurpose: return "BusinessPurpose";
        case Relation::Inheritance: return "Inheritance";
        case Relation::CallRelation: return "CallRelation";
        case Relation::Purpose: return "Purpose";
        case Relation::Implements: return "Implements";
        case Relation::Defines: return "Defines";
        case Relation::UsedBy: return "UsedBy";
        case Relation::Contains: return "Contains";
    }
    return "Purpose";
}

std::optional<Relation> parse_relation(std::string_view text) {
    auto key = lower_alnum(text);
    if (key == "businesspurpose" || key == "business") return Relation::BusinessPurpose;
    if (key == "inheritance" || key == "inherits") return Relation::Inheritance;
    if (key == "callrelation" || key == "call" || key == "calls") return Relation::CallRelation;
    if (key == "purpose") return Relation::Purpose;
    if (key == "implements" || key == "implementation") return Relation::Implements;
    if (key == "defines" || key == "definition") return Relation::Defines;
    if (key == "usedby") return Relation::UsedBy;
    if (key == "contains" || key == "containment") return Relation::Contains;
    return std::nullopt;
}

std::span<const Relation> legal_relations(MapKind kind) noexcept {
    switch (kind) {
        case MapKind::BusinessComponent: return kBusinessRelations;
        case MapKind::FunctionCall: return kFunctionCallRelations;
        case MapKind::Local: return kLocalRelations;
    }
    return {};
}

bool is_legal(MapKind kind, Relation relation) noexcept {
    auto legal = legal_relations(kind);
    return std::find(legal.begin(), legal.end(), relation) != legal.end();
}

std::optional<Relation> infer_relation(MapKind kind, std::string_view label) {
    auto words = words_of(label);
    for (const auto& rule : keyword_rules()) {
        if (!is_legal(kind, rule.relation)) continue;
        for (const auto& phrase : rule.phrases) {
            if (contains_phrase(words, phrase)) return rule.relation;
        }
    }
    switch (kind) {
        case MapKind::BusinessComponent: return Relation::BusinessPurpose;
        case MapKind::FunctionCall: return Relation::Purpose;
        case MapKind::Local: return std::nullopt;
    }
    return std::nullopt;
}

std::string_view to_string(MemberKind kind) noexcept {
    switch (kind) {
        case MemberKind::Interface: return "Interface";
        case MemberKind::Class: return "Class";
        case MemberKind::Method: return "Method";
        case MemberKind::Variable: return "Variable";
    }
    return "Method";
}

std::optional<MemberKind> parse_member_kind(std::string_view text) {
    auto key = lower_alnum(text);
    if (key == "interface" || key == "protocol" || key == "trait") return MemberKind::Interface;
    if (key == "class" || key == "contract" || key == "struct") return MemberKind::Class;
    if (key == "method" || key == "function" || key == "func" || key == "def") return MemberKind::Method;
    if (key == "variable" || key == "var" || key == "field" || key == "property" || key == "constant") {
        return MemberKind::Variable;
    }
    return std::nullopt;
}

MapKind payload_kind(const NodePayload& payload) noexcept {
    switch (payload.index()) {
        case 0: return MapKind::BusinessComponent;
        case 1: return MapKind::FunctionCall;
        default: return MapKind::Local;
    }
}

NodePayload empty_payload(MapKind kind) {
    switch (kind) {
        case MapKind::BusinessComponent: return ComponentPayload{};
        case MapKind::FunctionCall: return ClassPayload{};
        case MapKind::Local: return MemberPayload{};
    }
    return MemberPayload{};
}

const std::vector<std::string>& MapNode::key_files() const {
    if (auto* c = std::get_if<ComponentPayload>(&payload)) return c->key_files;
    if (auto* c = std::get_if<ClassPayload>(&payload)) return c->key_files;
    return kNoStrings;
}

const std::vector<std::string>& MapNode::key_functions() const {
    if (auto* c = std::get_if<ComponentPayload>(&payload)) return c->key_functions;
    if (auto* c = std::get_if<ClassPayload>(&payload)) return c->key_functions;
    return kNoStrings;
}

nlohmann::json MapNode::payload_json() const {
    nlohmann::json j = {{"nodeId", id}, {"label", label}};
    std::visit(
        [&](const auto& p) {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, ComponentPayload>) {
                j["componentName"] = p.component_name;
                j["componentDescription"] = p.component_description;
                j["keyFunctions"] = p.key_functions;
                j["keyVariables"] = p.key_variables;
                j["keyFiles"] = p.key_files;
            } else if constexpr (std::is_same_v<T, ClassPayload>) {
                j["className"] = p.class_name;
                j["classDescription"] = p.class_description;
                j["keyFunctions"] = p.key_functions;
                j["keyVariables"] = p.key_variables;
                j["keyFiles"] = p.key_files;
            } else {
                j["memberName"] = p.member_name;
                j["memberKind"] = to_string(p.member_kind);
            }
        },
        payload);
    return j;
}

void MapGraph::add_node(MapNode node) {
    if (node.id.empty()) throw Error(ErrorCode::InvalidArgument, "node id must not be empty");
    if (payload_kind(node.payload) != kind_) {
        throw Error(ErrorCode::SchemaViolation,
                    "node '" + node.id + "' payload does not match graph kind " + std::string(to_string(kind_)));
    }
    if (index_.contains(node.id)) {
        throw Error(ErrorCode::DuplicateNode, "duplicate node id '" + node.id + "'", {node.id});
    }
    index_.emplace(node.id, nodes_.size());
    nodes_.push_back(std::move(node));
}

void MapGraph::add_edge(MapEdge edge) {
    if (edge.src == edge.dst) {
        throw Error(ErrorCode::SelfLoop, "self-loop on node '" + edge.src + "'", {edge.src});
    }
    for (const auto* id : {&edge.src, &edge.dst}) {
        if (!has_node(*id)) throw Error(ErrorCode::UndeclaredNode, "edge references undeclared node '" + *id + "'", {*id});
    }
    if (!is_legal(kind_, edge.relation)) {
        throw Error(ErrorCode::IllegalRelation,
                    "relation " + std::string(to_string(edge.relation)) + " is not legal in a " +
                        std::string(to_string(kind_)) + " graph",
                    {std::string(to_string(edge.relation))});
    }
    edges_.push_back(std::move(edge));
}

void MapGraph::ensure_group(const std::string& module) {
    if (module.empty()) throw Error(ErrorCode::InvalidArgument, "module name must not be empty");
    groups_[module];
}

void MapGraph::add_to_group(const std::string& module, const std::string& node_id) {
    if (module.empty()) throw Error(ErrorCode::InvalidArgument, "module name must not be empty");
    if (!has_node(node_id)) {
        throw Error(ErrorCode::UndeclaredNode, "module '" + module + "' references unknown node '" + node_id + "'",
                    {node_id});
    }
    groups_[module].insert(node_id);
}

const MapNode* MapGraph::find(std::string_view id) const {
    auto it = index_.find(id);
    return it == index_.end() ? nullptr : &nodes_[it->second];
}

bool MapGraph::structurally_equal(const MapGraph& other) const {
    if (kind_ != other.kind_ || nodes_.size() != other.nodes_.size() || groups_ != other.groups_) return false;
    for (const auto& n : nodes_) {
        auto* m = other.find(n.id);
        if (!m || !(*m == n)) return false;
    }
    auto a = edges_;
    auto b = other.edges_;
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    return a == b;
}

std::set<std::string> files_in_graph(const MapGraph& graph) {
    std::set<std::string> out;
    for (const auto& node : graph.nodes()) {
        for (const auto& f : node.key_files()) {
            auto b = f.find_first_not_of(" \t\r\n");
            if (b == std::string::npos) continue;
            auto e = f.find_last_not_of(" \t\r\n");
            auto p = normalize_path(std::string_view(f).substr(b, e - b + 1));
            if (!p.empty()) out.insert(std::move(p));
        }
    }
    return out;
}

}  // namespace atlas
