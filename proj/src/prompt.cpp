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

#include "atlas/prompt.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "atlas/error.hpp"

namespace atlas {

namespace detail {
// Generated from prompts/ at build time.
const std::map<std::string, std::string_view>& embedded_prompt_files();
}  // namespace detail

namespace {

constexpr std::string_view kOpen = "{{";
constexpr std::string_view kClose = "}}";

struct TemplateFile {
    TemplateId id;
    const char* file;
};

constexpr TemplateFile kTemplateFiles[] = {
    {TemplateId::GlobalBusiness, "global_business.txt"},
    {TemplateId::GlobalFunctionCall, "global_function_call.txt"},
    {TemplateId::LocalMap, "local_map.txt"},
    {TemplateId::NodeQuery, "node_query.txt"},
    {TemplateId::Refine, "refine.txt"},
};

std::string trim(std::string_view s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::string trim_newlines(std::string_view s) {
    auto b = s.find_first_not_of("\r\n");
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

bool valid_slot_name(std::string_view name) {
    return !name.empty() && std::all_of(name.begin(), name.end(), [](unsigned char c) {
        return std::isalnum(c) || c == '_';
    });
}

class BodyRenderer {
public:
    BodyRenderer(std::string_view body, const SlotBindings& bindings) : body_(body), bindings_(bindings) {}

    std::string run() {
        auto out = until({});
        if (pos_ < body_.size()) throw Error(ErrorCode::TemplateError, "unexpected block close in template");
        return out;
    }

private:
    bool truthy(const std::string& name) const {
        auto it = bindings_.find(name);
        return it != bindings_.end() && !it->second.empty();
    }

    // A block tag alone on its line swallows that line.
    void skip_standalone(std::size_t tag_start, std::string& out) {
        auto line_start = tag_start;
        while (line_start > 0 && body_[line_start - 1] != '\n') --line_start;
        bool blank_before = body_.substr(line_start, tag_start - line_start).find_first_not_of(" \t") ==
                            std::string_view::npos;
        bool newline_after = pos_ >= body_.size() || body_[pos_] == '\n';
        if (blank_before && newline_after) {
            auto drop = tag_start - line_start;
            if (out.size() >= drop) out.resize(out.size() - drop);
            if (pos_ < body_.size()) ++pos_;
        }
    }

    std::string until(const std::string& closing) {
        std::string out;
        while (pos_ < body_.size()) {
            auto open = body_.find(kOpen, pos_);
            if (open == std::string_view::npos) {
                out.append(body_.substr(pos_));
                pos_ = body_.size();
                break;
            }
            out.append(body_.substr(pos_, open - pos_));
            auto close = body_.find(kClose, open + kOpen.size());
            if (close == std::string_view::npos) throw Error(ErrorCode::TemplateError, "unterminated '{{' in template");
            auto tag = trim(body_.substr(open + kOpen.size(), close - open - kOpen.size()));
            pos_ = close + kClose.size();
            if (tag.empty()) throw Error(ErrorCode::TemplateError, "empty tag in template");

            char sigil = tag.front();
            if (sigil == '#' || sigil == '^') {
                auto name = trim(std::string_view(tag).substr(1));
                skip_standalone(open, out);
                auto inner = until(name);
                bool show = truthy(name) == (sigil == '#');
                if (show) out += inner;
            } else if (sigil == '/') {
                auto name = trim(std::string_view(tag).substr(1));
                if (name != closing) throw Error(ErrorCode::TemplateError, "mismatched block close '" + name + "'");
                skip_standalone(open, out);
                return out;
            } else if (sigil == '>') {
                throw Error(ErrorCode::TemplateError, "unresolved include '" + tag + "'");
            } else {
                if (!valid_slot_name(tag)) throw Error(ErrorCode::TemplateError, "invalid slot name '" + tag + "'");
                auto it = bindings_.find(tag);
                if (it == bindings_.end()) throw Error(ErrorCode::TemplateError, "unbound slot '" + tag + "'", {tag});
                out += it->second;
            }
        }
        if (!closing.empty()) throw Error(ErrorCode::TemplateError, "unclosed block '" + closing + "'");
        return out;
    }

    std::string_view body_;
    const SlotBindings& bindings_;
    std::size_t pos_ = 0;
};

std::string resolve_includes(std::string_view text, const PromptTemplate::IncludeResolver& resolve) {
    std::string out;
    std::size_t pos = 0;
    while (true) {
        auto open = text.find("{{>", pos);
        if (open == std::string_view::npos) break;
        auto close = text.find(kClose, open);
        if (close == std::string_view::npos) throw Error(ErrorCode::TemplateError, "unterminated include");
        out.append(text.substr(pos, open - pos));
        auto name = trim(text.substr(open + 3, close - open - 3));
        auto content = resolve(name);
        while (!content.empty() && (content.back() == '\n' || content.back() == '\r')) content.pop_back();
        out += content;
        pos = close + kClose.size();
    }
    out.append(text.substr(pos));
    return out;
}

std::string format_excerpts(const std::vector<CodeExcerpt>& excerpts) {
    std::string out;
    for (std::size_t i = 0; i < excerpts.size(); ++i) {
        if (i) out += "\n\n";
        auto snippet = excerpts[i].snippet;
        while (!snippet.empty() && snippet.back() == '\n') snippet.pop_back();
        out += "File: " + excerpts[i].path + "\n```\n" + snippet + "\n```";
    }
    return out;
}

TemplateId global_template(MapKind kind) {
    switch (kind) {
        case MapKind::BusinessComponent: return TemplateId::GlobalBusiness;
        case MapKind::FunctionCall: return TemplateId::GlobalFunctionCall;
        case MapKind::Local: break;
    }
    throw Error(ErrorCode::InvalidArgument, "global prompts exist only for the business and function-call maps");
}

}  // namespace

std::string_view to_string(TemplateId id) noexcept {
    switch (id) {
        case TemplateId::GlobalBusiness: return "GlobalBusiness";
        case TemplateId::GlobalFunctionCall: return "GlobalFunctionCall";
        case TemplateId::LocalMap: return "LocalMap";
        case TemplateId::NodeQuery: return "NodeQuery";
        case TemplateId::Refine: return "Refine";
    }
    return "Refine";
}

std::optional<TemplateId> parse_template_id(std::string_view text) {
    for (auto id : {TemplateId::GlobalBusiness, TemplateId::GlobalFunctionCall, TemplateId::LocalMap,
                    TemplateId::NodeQuery, TemplateId::Refine}) {
        if (to_string(id) == text) return id;
    }
    return std::nullopt;
}

std::string_view to_string(SectionName name) noexcept {
    switch (name) {
        case SectionName::TaskDescription: return "TaskDescription";
        case SectionName::Requirements: return "Requirements";
        case SectionName::FewShotExample: return "FewShotExample";
        case SectionName::PriorOutput: return "PriorOutput";
        case SectionName::NodeContext: return "NodeContext";
        case SectionName::UserQuestion: return "UserQuestion";
    }
    return "UserQuestion";
}

std::optional<SectionName> parse_section_name(std::string_view text) {
    for (auto n : {SectionName::TaskDescription, SectionName::Requirements, SectionName::FewShotExample,
                   SectionName::PriorOutput, SectionName::NodeContext, SectionName::UserQuestion}) {
        if (to_string(n) == text) return n;
    }
    return std::nullopt;
}

PromptTemplate PromptTemplate::parse(std::string_view text, const IncludeResolver& resolve_include) {
    PromptTemplate tpl;
    bool have_id = false;
    std::istringstream in{std::string(text)};
    std::string line;
    std::string body;
    std::optional<SectionName> current;
    auto flush = [&] {
        if (current) tpl.sections_.push_back({*current, trim_newlines(resolve_includes(body, resolve_include))});
        body.clear();
    };
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!current && line.starts_with("#!")) {
            auto meta = std::string_view(line).substr(2);
            auto colon = meta.find(':');
            if (colon == std::string_view::npos) continue;
            auto key = trim(meta.substr(0, colon));
            auto value = trim(meta.substr(colon + 1));
            if (key == "id") {
                auto id = parse_template_id(value);
                if (!id) throw Error(ErrorCode::TemplateError, "unknown template id '" + value + "'");
                tpl.id_ = *id;
                have_id = true;
            } else if (key == "version") {
                tpl.version_ = std::stoi(value);
            }
            continue;
        }
        if (line.starts_with("[[") && line.ends_with("]]")) {
            auto name = parse_section_name(line.substr(2, line.size() - 4));
            if (!name) throw Error(ErrorCode::TemplateError, "unknown section '" + line + "'");
            flush();
            current = name;
            continue;
        }
        if (!current) {
            if (trim(line).empty()) continue;
            throw Error(ErrorCode::TemplateError, "text before the first section: '" + line + "'");
        }
        body += line;
        body += '\n';
    }
    flush();
    if (!have_id) throw Error(ErrorCode::TemplateError, "template has no '#! id:' line");
    if (tpl.version_ <= 0) throw Error(ErrorCode::TemplateError, "template has no positive '#! version:'");
    return tpl;
}

const TemplateSection* PromptTemplate::section(SectionName name) const {
    auto it = std::find_if(sections_.begin(), sections_.end(), [&](const auto& s) { return s.name == name; });
    return it == sections_.end() ? nullptr : &*it;
}

std::set<std::string> PromptTemplate::slots() const {
    std::set<std::string> out;
    for (const auto& s : sections_) {
        std::size_t pos = 0;
        while ((pos = s.body.find(kOpen, pos)) != std::string::npos) {
            auto close = s.body.find(kClose, pos);
            if (close == std::string::npos) break;
            auto tag = trim(std::string_view(s.body).substr(pos + 2, close - pos - 2));
            if (!tag.empty() && (tag[0] == '#' || tag[0] == '^' || tag[0] == '/')) tag = trim(tag.substr(1));
            if (valid_slot_name(tag)) out.insert(tag);
            pos = close + 2;
        }
    }
    return out;
}

std::string render_body(std::string_view body, const SlotBindings& bindings) {
    return BodyRenderer(body, bindings).run();
}

std::string AssembledPrompt::prompt_ref() const {
    auto ref = std::string(to_string(template_id)) + "@" + std::to_string(template_version);
    if (base_template) ref += "+" + std::string(to_string(*base_template)) + "@" + std::to_string(base_version);
    return ref;
}

PromptLibrary PromptLibrary::load(const FileReader& read) {
    auto must_read = [&](const std::string& name) {
        auto content = read(name);
        if (!content) throw Error(ErrorCode::TemplateError, "prompt file not found: " + name, {name});
        return *content;
    };
    PromptLibrary lib;
    for (const auto& [id, file] : kTemplateFiles) {
        auto tpl = PromptTemplate::parse(must_read(file), must_read);
        if (tpl.id() != id) {
            throw Error(ErrorCode::TemplateError, std::string(file) + " declares id " + std::string(to_string(tpl.id())));
        }
        lib.templates_.emplace(id, std::move(tpl));
    }
    for (auto id : {TemplateId::GlobalBusiness, TemplateId::GlobalFunctionCall}) {
        const auto& tpl = lib.templates_.at(id);
        for (auto s : {SectionName::TaskDescription, SectionName::Requirements, SectionName::FewShotExample}) {
            if (!tpl.has_section(s)) {
                throw Error(ErrorCode::TemplateError, std::string(to_string(id)) + " lacks section " +
                                                          std::string(to_string(s)));
            }
        }
    }
    if (!lib.templates_.at(TemplateId::Refine).has_section(SectionName::PriorOutput)) {
        throw Error(ErrorCode::TemplateError, "Refine template lacks a PriorOutput section");
    }
    lib.format_reminder_ = must_read("format_reminder.txt");
    lib.format_reminder_local_ = must_read("format_reminder_local.txt");
    return lib;
}

PromptLibrary PromptLibrary::builtin() {
    static const PromptLibrary lib = load([](const std::string& name) -> std::optional<std::string> {
        const auto& files = detail::embedded_prompt_files();
        auto it = files.find(name);
        if (it == files.end()) return std::nullopt;
        return std::string(it->second);
    });
    return lib;
}

PromptLibrary PromptLibrary::from_directory(const std::filesystem::path& dir) {
    return load([&](const std::string& name) -> std::optional<std::string> {
        std::ifstream in(dir / name, std::ios::binary);
        if (!in) return std::nullopt;
        std::ostringstream buf;
        buf << in.rdbuf();
        return buf.str();
    });
}

const PromptTemplate& PromptLibrary::get(TemplateId id) const { return templates_.at(id); }

AssembledPrompt PromptLibrary::render(const PromptTemplate& tpl, const SlotBindings& bindings) const {
    AssembledPrompt out{tpl.id(), tpl.version(), std::nullopt, 0, {}, bindings, {}};
    for (const auto& s : tpl.sections()) {
        auto text = trim_newlines(render_body(s.body, bindings));
        out.rendered_sections[s.name] = text;
        if (!out.rendered_text.empty()) out.rendered_text += "\n\n";
        out.rendered_text += text;
    }
    out.rendered_text += '\n';
    return out;
}

AssembledPrompt PromptLibrary::assemble_global(MapKind kind) const {
    return render(get(global_template(kind)), {});
}

AssembledPrompt PromptLibrary::assemble_refinement(MapKind kind, std::string_view prior_graph_dot,
                                                   std::string_view prior_overview_json,
                                                   const std::vector<std::string>& missing_files) const {
    auto base_id = global_template(kind);
    try {
        parse_dot(prior_graph_dot, kind);
    } catch (const Error& e) {
        throw Error(ErrorCode::UnparseablePriorOutput, std::string("prior graph does not parse: ") + e.what());
    }
    std::string overview = trim(prior_overview_json);
    if (overview.empty()) overview = "{}";
    if (!nlohmann::json::accept(overview)) {
        throw Error(ErrorCode::UnparseablePriorOutput, "prior overview is not valid JSON");
    }

    auto files = missing_files;
    std::sort(files.begin(), files.end());
    files.erase(std::unique(files.begin(), files.end()), files.end());
    std::string listed;
    for (const auto& f : files) listed += "- " + f + "\n";
    if (!listed.empty()) listed.pop_back();

    SlotBindings bindings{{"prior_graph_dot", trim(prior_graph_dot)},
                          {"prior_overview_json", overview},
                          {"missing_files", listed}};

    // Global sections first, then the prior output.
    const auto& base = get(base_id);
    const auto& refine = get(TemplateId::Refine);
    auto out = render(base, bindings);
    auto prior = trim_newlines(render_body(refine.section(SectionName::PriorOutput)->body, bindings));
    out.rendered_sections[SectionName::PriorOutput] = prior;
    while (!out.rendered_text.empty() && out.rendered_text.back() == '\n') out.rendered_text.pop_back();
    out.rendered_text += "\n\n" + prior + "\n";
    out.template_id = TemplateId::Refine;
    out.template_version = refine.version();
    out.base_template = base_id;
    out.base_version = base.version();
    return out;
}

AssembledPrompt PromptLibrary::assemble_local(const MapNode& node, const std::vector<CodeExcerpt>& excerpts) const {
    if (node.key_files().empty() && node.key_functions().empty() && excerpts.empty()) {
        throw Error(ErrorCode::EmptyContext, "node '" + node.id + "' has no key files, key functions or excerpts",
                    {node.id});
    }
    return render(get(TemplateId::LocalMap),
                  {{"node_payload", node.payload_json().dump(2)}, {"excerpts", format_excerpts(excerpts)}});
}

AssembledPrompt PromptLibrary::assemble_query(std::string_view question, const MapNode* selected_node) const {
    auto q = trim(question);
    if (q.empty()) throw Error(ErrorCode::EmptyQuestion, "question must not be empty");
    return render(get(TemplateId::NodeQuery),
                  {{"question", q}, {"node_payload", selected_node ? selected_node->payload_json().dump(2) : ""}});
}

AssembledPrompt PromptLibrary::with_format_reminder(const AssembledPrompt& prompt) const {
    auto out = prompt;
    while (!out.rendered_text.empty() && out.rendered_text.back() == '\n') out.rendered_text.pop_back();
    out.rendered_text += '\n';
    out.rendered_text += prompt.template_id == TemplateId::LocalMap ? format_reminder_local_ : format_reminder_;
    return out;
}

}  // namespace atlas
