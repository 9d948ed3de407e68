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

#include <algorithm>
#include <array>

#include "atlas/error.hpp"
#include "atlas/graph.hpp"

namespace atlas {

using nlohmann::json;

namespace {

// Canonical key followed by accepted aliases.
struct FieldSpec {
    const char* canonical;
    std::vector<const char*> aliases;
};

const std::array<FieldSpec, 5> kRequired = {{
    {"summary", {"projectSummary"}},
    {"entryPoint", {"entry_point", "mainEntryPoint"}},
    {"howToRun", {"how_to_run"}},
    {"modules", {"keyModules", "components"}},
    {"architectureGuide", {"projectArchitectureGuide", "stepByStepGuide", "guide"}},
}};

// Overviews are sometimes nested under one wrapper object by the model.
constexpr std::array kWrappers{"projectOverview", "overview"};

const json* lookup(const json& obj, const FieldSpec& spec, std::string* used_key = nullptr) {
    if (auto it = obj.find(spec.canonical); it != obj.end()) {
        if (used_key) *used_key = spec.canonical;
        return &*it;
    }
    for (const auto* alias : spec.aliases) {
        if (auto it = obj.find(alias); it != obj.end()) {
            if (used_key) *used_key = alias;
            return &*it;
        }
    }
    return nullptr;
}

std::string require_string(const json& v, const std::string& where) {
    if (!v.is_string()) throw Error(ErrorCode::SchemaViolation, where + " must be a string", {where});
    return v.get<std::string>();
}

std::string optional_string(const json& obj, std::initializer_list<const char*> keys, const std::string& where) {
    for (const auto* k : keys) {
        if (auto it = obj.find(k); it != obj.end() && !it->is_null()) return require_string(*it, where + "." + k);
    }
    return {};
}

void note_unknown(const json& obj, std::initializer_list<const char*> known, const std::string& where,
                  std::vector<std::string>& warnings) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (std::none_of(known.begin(), known.end(), [&](const char* k) { return it.key() == k; })) {
            warnings.push_back("ignored unknown field " + where + it.key());
        }
    }
}

ModuleSummary read_module(const json& m, std::size_t i, std::vector<std::string>& warnings) {
    auto where = "modules[" + std::to_string(i) + "]";
    if (!m.is_object()) throw Error(ErrorCode::SchemaViolation, where + " must be an object", {where});
    ModuleSummary out;
    out.name = optional_string(m, {"name", "moduleName"}, where);
    if (out.name.empty()) throw Error(ErrorCode::MissingField, where + ".name is required", {where + ".name"});
    out.description = optional_string(m, {"description", "function"}, where);
    for (const auto* key : {"componentNames", "components"}) {
        if (auto it = m.find(key); it != m.end()) {
            if (!it->is_array()) throw Error(ErrorCode::SchemaViolation, where + "." + key + " must be an array");
            for (const auto& c : *it) out.component_names.push_back(require_string(c, where + "." + key + "[]"));
            break;
        }
    }
    note_unknown(m, {"name", "moduleName", "description", "function", "componentNames", "components"}, where + ".",
                 warnings);
    return out;
}

GuideStep read_step(const json& s, std::size_t i, std::vector<std::string>& warnings) {
    auto where = "architectureGuide[" + std::to_string(i) + "]";
    if (!s.is_object()) throw Error(ErrorCode::SchemaViolation, where + " must be an object", {where});
    GuideStep out;
    const json* num = nullptr;
    for (const auto* key : {"stepNumber", "step"}) {
        if (auto it = s.find(key); it != s.end()) {
            num = &*it;
            break;
        }
    }
    if (!num) throw Error(ErrorCode::MissingField, where + ".stepNumber is required", {where + ".stepNumber"});
    if (!num->is_number_integer()) {
        throw Error(ErrorCode::SchemaViolation, where + ".stepNumber must be an integer", {where + ".stepNumber"});
    }
    out.step_number = num->get<int>();
    out.text = optional_string(s, {"text", "description"}, where);
    out.module_name = optional_string(s, {"moduleName", "module"}, where);
    auto file = optional_string(s, {"fileName", "file"}, where);
    if (!file.empty()) {
        if (out.module_name.empty()) {
            throw Error(ErrorCode::GuideLinkage,
                        where + " names file '" + file + "' without the module it belongs to",
                        {where, file});
        }
        out.file_name = file;
    }
    note_unknown(s, {"stepNumber", "step", "text", "description", "moduleName", "module", "fileName", "file"},
                 where + ".", warnings);
    return out;
}

}  // namespace

ParsedOverview parse_overview(std::string_view json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::MalformedJson, std::string("overview is not valid JSON: ") + e.what());
    }
    return parse_overview(j);
}

ParsedOverview parse_overview(const json& root) {
    if (!root.is_object()) throw Error(ErrorCode::SchemaViolation, "overview must be a JSON object");
    ParsedOverview out;

    // Fields may sit at top level or inside one wrapper object.
    std::vector<const json*> scopes{&root};
    for (const auto* w : kWrappers) {
        if (auto it = root.find(w); it != root.end() && it->is_object()) scopes.push_back(&*it);
    }

    std::vector<std::string> missing;
    std::array<const json*, 5> found{};
    std::vector<std::string> consumed;
    for (std::size_t i = 0; i < kRequired.size(); ++i) {
        for (const auto* scope : scopes) {
            std::string key;
            if (const auto* v = lookup(*scope, kRequired[i], &key)) {
                found[i] = v;
                consumed.push_back(key);
                break;
            }
        }
        if (!found[i]) missing.emplace_back(kRequired[i].canonical);
    }
    if (!missing.empty()) {
        std::string msg = "overview is missing required field(s):";
        for (const auto& m : missing) msg += " " + m;
        throw Error(ErrorCode::MissingField, msg, missing);
    }

    auto& ov = out.overview;
    ov.summary = require_string(*found[0], "summary");
    ov.entry_point = require_string(*found[1], "entryPoint");
    ov.how_to_run = require_string(*found[2], "howToRun");
    if (!found[3]->is_array()) throw Error(ErrorCode::SchemaViolation, "modules must be an array", {"modules"});
    for (std::size_t i = 0; i < found[3]->size(); ++i) {
        ov.modules.push_back(read_module((*found[3])[i], i, out.warnings));
    }
    if (!found[4]->is_array()) {
        throw Error(ErrorCode::SchemaViolation, "architectureGuide must be an array", {"architectureGuide"});
    }
    for (std::size_t i = 0; i < found[4]->size(); ++i) {
        ov.architecture_guide.push_back(read_step((*found[4])[i], i, out.warnings));
    }
    std::stable_sort(ov.architecture_guide.begin(), ov.architecture_guide.end(),
                     [](const GuideStep& a, const GuideStep& b) { return a.step_number < b.step_number; });
    for (std::size_t i = 0; i < ov.architecture_guide.size(); ++i) {
        if (ov.architecture_guide[i].step_number != static_cast<int>(i + 1)) {
            throw Error(ErrorCode::SchemaViolation,
                        "architectureGuide step numbers must run 1.." + std::to_string(ov.architecture_guide.size()) +
                            " without gaps or repeats",
                        {"architectureGuide"});
        }
    }

    for (const auto* scope : scopes) {
        for (auto it = scope->begin(); it != scope->end(); ++it) {
            const auto& key = it.key();
            bool is_wrapper = scope == &root && std::find(kWrappers.begin(), kWrappers.end(), key) != kWrappers.end() &&
                              it->is_object();
            if (is_wrapper || std::find(consumed.begin(), consumed.end(), key) != consumed.end()) continue;
            out.warnings.push_back("ignored unknown field " + key);
        }
    }
    return out;
}

json GlobalOverview::to_json() const {
    json mods = json::array();
    for (const auto& m : modules) {
        mods.push_back({{"name", m.name}, {"description", m.description}, {"componentNames", m.component_names}});
    }
    json guide = json::array();
    for (const auto& s : architecture_guide) {
        json step = {{"stepNumber", s.step_number}, {"text", s.text}, {"moduleName", s.module_name}};
        if (s.file_name) step["fileName"] = *s.file_name;
        guide.push_back(std::move(step));
    }
    return {{"summary", summary},
            {"entryPoint", entry_point},
            {"howToRun", how_to_run},
            {"modules", mods},
            {"architectureGuide", guide}};
}

}  // namespace atlas
