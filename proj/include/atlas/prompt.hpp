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

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "atlas/graph.hpp"

namespace atlas {

enum class TemplateId { GlobalBusiness, GlobalFunctionCall, LocalMap, NodeQuery, Refine };
enum class SectionName { TaskDescription, Requirements, FewShotExample, PriorOutput, NodeContext, UserQuestion };

std::string_view to_string(TemplateId id) noexcept;
std::optional<TemplateId> parse_template_id(std::string_view text);
std::string_view to_string(SectionName name) noexcept;
std::optional<SectionName> parse_section_name(std::string_view text);

using SlotBindings = std::map<std::string, std::string>;

struct TemplateSection {
    SectionName name;
    std::string body;
};

// A prompt template file:
//
//   #! id: GlobalBusiness        metadata lines, only before the first section
//   #! version: 1
//   [[TaskDescription]]          section header
//   text with {{slot}} markers, {{#slot}}...{{/slot}} blocks rendered only
//   when the slot is non-empty, {{^slot}}...{{/slot}} blocks rendered only
//   when it is empty, and {{> relative/file}} includes resolved at load time.
class PromptTemplate {
public:
    using IncludeResolver = std::function<std::string(const std::string&)>;

    static PromptTemplate parse(std::string_view text, const IncludeResolver& resolve_include);

    TemplateId id() const { return id_; }
    int version() const { return version_; }
    const std::vector<TemplateSection>& sections() const { return sections_; }
    const TemplateSection* section(SectionName name) const;
    bool has_section(SectionName name) const { return section(name) != nullptr; }

    // Slot names referenced anywhere in the template.
    std::set<std::string> slots() const;

private:
    TemplateId id_ = TemplateId::GlobalBusiness;
    int version_ = 0;
    std::vector<TemplateSection> sections_;
};

// Renders one template body. Throws TemplateError for a {{slot}} without a
// binding or for unbalanced blocks.
std::string render_body(std::string_view body, const SlotBindings& bindings);

struct AssembledPrompt {
    TemplateId template_id;
    int template_version = 0;
    // Global template a Refine prompt was built on.
    std::optional<TemplateId> base_template;
    int base_version = 0;
    std::string rendered_text;
    SlotBindings slot_bindings;
    std::map<SectionName, std::string> rendered_sections;

    // "GlobalBusiness@1" or "Refine@1+GlobalBusiness@1".
    std::string prompt_ref() const;
};

struct CodeExcerpt {
    std::string path;
    std::string snippet;
};

class PromptLibrary {
public:
    // Templates compiled into the binary from the prompts/ directory.
    static PromptLibrary builtin();
    // Same layout read from disk, for editing templates without rebuilding.
    static PromptLibrary from_directory(const std::filesystem::path& dir);

    const PromptTemplate& get(TemplateId id) const;

    AssembledPrompt assemble_global(MapKind kind) const;
    AssembledPrompt assemble_refinement(MapKind kind, std::string_view prior_graph_dot,
                                        std::string_view prior_overview_json,
                                        const std::vector<std::string>& missing_files) const;
    AssembledPrompt assemble_local(const MapNode& node, const std::vector<CodeExcerpt>& excerpts) const;
    AssembledPrompt assemble_query(std::string_view question, const MapNode* selected_node) const;

    // Copy of `prompt` with the format reminder appended, for a re-ask after a
    // parse failure.
    AssembledPrompt with_format_reminder(const AssembledPrompt& prompt) const;

private:
    using FileReader = std::function<std::optional<std::string>(const std::string&)>;
    static PromptLibrary load(const FileReader& read);

    AssembledPrompt render(const PromptTemplate& tpl, const SlotBindings& bindings) const;

    std::map<TemplateId, PromptTemplate> templates_;
    std::string format_reminder_;
    std::string format_reminder_local_;
};

}  // namespace atlas
