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

// Parser and serializer for the DOT subset documented in docs/dot-subset.md.

#include <algorithm>
#include <cctype>
#include <map>
#include <sstream>

#include "atlas/error.hpp"
#include "atlas/graph.hpp"

namespace atlas {

namespace {

enum class Tok { Id, Quoted, LBrace, RBrace, LBracket, RBracket, Equals, Semi, Comma, Arrow, UndirEdge, Colon, Html, Plus, End };

struct Token {
    Tok type;
    std::string text;
    int line;
    int col;
};

[[noreturn]] void syntax_error(int line, int col, const std::string& what) {
    throw Error(ErrorCode::DotSyntax, std::to_string(line) + ":" + std::to_string(col) + ": " + what,
                {std::to_string(line) + ":" + std::to_string(col)});
}

class Lexer {
public:
    explicit Lexer(std::string_view src) : src_(src) {}

    std::vector<Token> run() {
        std::vector<Token> out;
        for (;;) {
            skip_space_and_comments();
            int line = line_, col = col_;
            if (pos_ >= src_.size()) {
                out.push_back({Tok::End, {}, line, col});
                return out;
            }
            char c = src_[pos_];
            auto single = [&](Tok t) {
                advance();
                out.push_back({t, std::string(1, c), line, col});
            };
            switch (c) {
                case '{': single(Tok::LBrace); continue;
                case '}': single(Tok::RBrace); continue;
                case '[': single(Tok::LBracket); continue;
                case ']': single(Tok::RBracket); continue;
                case '=': single(Tok::Equals); continue;
                case ';': single(Tok::Semi); continue;
                case ',': single(Tok::Comma); continue;
                case ':': single(Tok::Colon); continue;
                case '<': single(Tok::Html); continue;
                case '+': single(Tok::Plus); continue;
                case '"': out.push_back({Tok::Quoted, quoted(), line, col}); continue;
                default: break;
            }
            if (c == '-' && pos_ + 1 < src_.size() && (src_[pos_ + 1] == '>' || src_[pos_ + 1] == '-')) {
                bool arrow = src_[pos_ + 1] == '>';
                advance();
                advance();
                out.push_back({arrow ? Tok::Arrow : Tok::UndirEdge, arrow ? "->" : "--", line, col});
                continue;
            }
            if (is_id_start(c)) {
                std::string id;
                while (pos_ < src_.size() && is_id_char(src_[pos_])) id += advance();
                out.push_back({Tok::Id, std::move(id), line, col});
                continue;
            }
            if (c == '-' || c == '.' || std::isdigit(static_cast<unsigned char>(c))) {
                std::string num;
                if (c == '-') num += advance();
                while (pos_ < src_.size() &&
                       (std::isdigit(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '.')) {
                    num += advance();
                }
                if (num == "-" || num.empty()) syntax_error(line, col, "unexpected character '-'");
                out.push_back({Tok::Id, std::move(num), line, col});
                continue;
            }
            syntax_error(line, col, std::string("unexpected character '") + c + "'");
        }
    }

private:
    static bool is_id_start(char c) {
        auto u = static_cast<unsigned char>(c);
        return std::isalpha(u) || c == '_' || u >= 0x80;
    }
    static bool is_id_char(char c) { return is_id_start(c) || std::isdigit(static_cast<unsigned char>(c)); }

    char advance() {
        char c = src_[pos_++];
        if (c == '\n') {
            ++line_;
            col_ = 1;
        } else {
            ++col_;
        }
        return c;
    }

    void skip_space_and_comments() {
        while (pos_ < src_.size()) {
            char c = src_[pos_];
            if (std::isspace(static_cast<unsigned char>(c))) {
                advance();
            } else if (c == '/' && pos_ + 1 < src_.size() && src_[pos_ + 1] == '/') {
                while (pos_ < src_.size() && src_[pos_] != '\n') advance();
            } else if (c == '#' && col_ == 1) {
                while (pos_ < src_.size() && src_[pos_] != '\n') advance();
            } else if (c == '/' && pos_ + 1 < src_.size() && src_[pos_ + 1] == '*') {
                int line = line_, col = col_;
                advance();
                advance();
                while (pos_ + 1 < src_.size() && !(src_[pos_] == '*' && src_[pos_ + 1] == '/')) advance();
                if (pos_ + 1 >= src_.size()) syntax_error(line, col, "unterminated comment");
                advance();
                advance();
            } else {
                return;
            }
        }
    }

    // Escapes: \" and \\ are unescaped, backslash-newline is a line
    // continuation, anything else after a backslash is kept verbatim.
    std::string quoted() {
        int line = line_, col = col_;
        advance();
        std::string out;
        while (pos_ < src_.size()) {
            char c = advance();
            if (c == '"') return out;
            if (c == '\\' && pos_ < src_.size()) {
                char n = src_[pos_];
                if (n == '"' || n == '\\') {
                    out += advance();
                    continue;
                }
                if (n == '\n') {
                    advance();
                    continue;
                }
            }
            out += c;
        }
        syntax_error(line, col, "unterminated string");
    }

    std::string_view src_;
    std::size_t pos_ = 0;
    int line_ = 1;
    int col_ = 1;
};

using Attrs = std::map<std::string, std::string>;

struct PendingNode {
    Attrs attrs;
    bool has_attrs = false;
    bool explicit_stmt = false;
};

struct PendingEdge {
    std::string src;
    std::string dst;
    Attrs attrs;
    int line;
    int col;
};

struct PendingCluster {
    std::string id;
    std::string label;
    std::set<std::string> members;
};

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

class Parser {
public:
    Parser(std::vector<Token> tokens, MapKind kind, const DotParseOptions& options)
        : toks_(std::move(tokens)), kind_(kind), options_(options) {}

    MapGraph run() {
        if (is_keyword("strict")) ++pos_;
        if (is_keyword("graph")) syntax_error(peek().line, peek().col, "undirected graphs are not supported");
        if (!is_keyword("digraph")) syntax_error(peek().line, peek().col, "expected 'digraph'");
        ++pos_;
        if (peek().type == Tok::Id || peek().type == Tok::Quoted) id();
        expect(Tok::LBrace, "'{'");
        statements();
        expect(Tok::RBrace, "'}'");
        if (peek().type != Tok::End) syntax_error(peek().line, peek().col, "trailing content after graph");
        return build();
    }

private:
    const Token& peek(std::size_t ahead = 0) const { return toks_[std::min(pos_ + ahead, toks_.size() - 1)]; }

    bool is_keyword(std::string_view kw, std::size_t ahead = 0) const {
        return peek(ahead).type == Tok::Id && lower(peek(ahead).text) == kw;
    }

    const Token& expect(Tok type, const char* what) {
        if (peek().type != type) {
            syntax_error(peek().line, peek().col, std::string("expected ") + what + ", found '" + peek().text + "'");
        }
        return toks_[pos_++];
    }

    std::string id() {
        const auto& t = peek();
        if (t.type == Tok::Html) syntax_error(t.line, t.col, "HTML labels are not supported");
        if (t.type == Tok::Id) {
            ++pos_;
            return t.text;
        }
        if (t.type == Tok::Quoted) {
            ++pos_;
            std::string out = t.text;
            while (peek().type == Tok::Plus) {
                ++pos_;
                out += expect(Tok::Quoted, "quoted string after '+'").text;
            }
            return out;
        }
        syntax_error(t.line, t.col, "expected identifier, found '" + t.text + "'");
    }

    void statements() {
        while (peek().type != Tok::RBrace && peek().type != Tok::End) {
            statement();
            if (peek().type == Tok::Semi) ++pos_;
        }
    }

    void statement() {
        const auto& t = peek();
        if (t.type == Tok::LBrace) syntax_error(t.line, t.col, "anonymous subgraphs are not supported");
        if (is_keyword("subgraph")) {
            subgraph();
            return;
        }
        if ((is_keyword("graph") || is_keyword("node") || is_keyword("edge")) && peek(1).type == Tok::LBracket) {
            auto which = lower(toks_[pos_++].text);
            auto attrs = attr_lists();
            if (which == "graph") {
                for (const auto& [k, v] : attrs) graph_attr(k, v, t);
            }
            return;  // node/edge defaults carry presentation only
        }
        if ((t.type == Tok::Id || t.type == Tok::Quoted) && peek(1).type == Tok::Equals) {
            auto key = id();
            ++pos_;
            auto value = id();
            graph_attr(key, value, t);
            return;
        }
        auto first = node_ref();
        if (peek().type == Tok::UndirEdge) syntax_error(peek().line, peek().col, "'--' edges are not supported");
        if (peek().type == Tok::Arrow) {
            std::vector<std::pair<std::string, const Token*>> chain{{first, &t}};
            while (peek().type == Tok::Arrow) {
                ++pos_;
                if (is_keyword("subgraph") || peek().type == Tok::LBrace) {
                    syntax_error(peek().line, peek().col, "subgraphs as edge endpoints are not supported");
                }
                const Token* at = &peek();
                chain.emplace_back(node_ref(), at);
            }
            if (peek().type == Tok::UndirEdge) syntax_error(peek().line, peek().col, "'--' edges are not supported");
            Attrs attrs = peek().type == Tok::LBracket ? attr_lists() : Attrs{};
            for (const auto& [name, at] : chain) {
                touch(name);
                for (auto idx : cluster_stack_) clusters_[idx].members.insert(name);
            }
            for (std::size_t i = 0; i + 1 < chain.size(); ++i) {
                edges_.push_back({chain[i].first, chain[i + 1].first, attrs, chain[i + 1].second->line,
                                  chain[i + 1].second->col});
            }
            return;
        }
        // node statement
        bool with_attrs = peek().type == Tok::LBracket;
        Attrs attrs = with_attrs ? attr_lists() : Attrs{};
        auto& node = touch(first);
        node.explicit_stmt = true;
        if (with_attrs) {
            if (node.has_attrs) {
                throw Error(ErrorCode::DuplicateNode,
                            std::to_string(t.line) + ":" + std::to_string(t.col) + ": duplicate node '" + first + "'",
                            {first});
            }
            node.has_attrs = true;
            node.attrs = std::move(attrs);
        }
        for (auto idx : cluster_stack_) clusters_[idx].members.insert(first);
    }

    std::string node_ref() {
        auto name = id();
        if (peek().type == Tok::Colon) syntax_error(peek().line, peek().col, "ports are not supported");
        return name;
    }

    PendingNode& touch(const std::string& name) {
        auto [it, inserted] = nodes_.try_emplace(name);
        if (inserted) order_.push_back(name);
        return it->second;
    }

    void graph_attr(const std::string& key, const std::string& value, const Token& at) {
        auto k = lower(key);
        if (k == "rank") syntax_error(at.line, at.col, "rank directives are not supported");
        if (k == "label" && !cluster_stack_.empty()) clusters_[cluster_stack_.back()].label = value;
    }

    void subgraph() {
        const auto& start = toks_[pos_++];
        std::string name;
        if (peek().type == Tok::Id || peek().type == Tok::Quoted) name = id();
        if (!lower(name).starts_with("cluster")) {
            syntax_error(start.line, start.col, "only 'subgraph cluster_*' blocks are supported");
        }
        clusters_.push_back({name, {}, {}});
        cluster_stack_.push_back(clusters_.size() - 1);
        expect(Tok::LBrace, "'{'");
        statements();
        expect(Tok::RBrace, "'}'");
        cluster_stack_.pop_back();
    }

    Attrs attr_lists() {
        Attrs out;
        while (peek().type == Tok::LBracket) {
            ++pos_;
            while (peek().type != Tok::RBracket) {
                if (peek().type == Tok::End) syntax_error(peek().line, peek().col, "unterminated attribute list");
                auto key = id();
                expect(Tok::Equals, "'=' in attribute");
                out[key] = id();
                if (peek().type == Tok::Comma || peek().type == Tok::Semi) ++pos_;
            }
            ++pos_;
        }
        return out;
    }

    MapGraph build();

    std::vector<Token> toks_;
    std::size_t pos_ = 0;
    MapKind kind_;
    DotParseOptions options_;
    std::map<std::string, PendingNode> nodes_;
    std::vector<std::string> order_;
    std::vector<PendingEdge> edges_;
    std::vector<PendingCluster> clusters_;
    std::vector<std::size_t> cluster_stack_;
};

std::string trim(std::string_view s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(std::string_view s, std::string_view seps) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= s.size()) {
        auto end = s.find_first_of(seps, start);
        if (end == std::string_view::npos) end = s.size();
        auto item = trim(s.substr(start, end - start));
        if (!item.empty()) out.push_back(std::move(item));
        start = end + 1;
    }
    return out;
}

// Splits a label on real newlines and on the DOT escapes \n, \l and \r.
std::vector<std::string> label_lines(std::string_view label) {
    std::vector<std::string> out;
    std::string cur;
    for (std::size_t i = 0; i < label.size(); ++i) {
        if (label[i] == '\n' ||
            (label[i] == '\\' && i + 1 < label.size() && (label[i + 1] == 'n' || label[i + 1] == 'l' || label[i + 1] == 'r'))) {
            if (label[i] == '\\') ++i;
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur += label[i];
        }
    }
    out.push_back(trim(cur));
    std::erase_if(out, [](const std::string& l) { return l.empty(); });
    return out;
}

// Lenient reading of a free-text label following the "Name: (description)"
// convention, with optional "Key Functions:", "Key Variables:" and
// "Key Files:" lines.
struct LabelFields {
    std::string name;
    std::string description;
    std::optional<std::vector<std::string>> functions;
    std::optional<std::vector<std::string>> variables;
    std::optional<std::vector<std::string>> files;
};

LabelFields read_label(std::string_view label) {
    LabelFields out;
    auto lines = label_lines(label);
    if (lines.empty()) return out;
    const auto& head = lines.front();
    auto strip_parens = [](std::string s) {
        s = trim(s);
        if (s.size() >= 2 && s.front() == '(' && s.back() == ')') s = trim(s.substr(1, s.size() - 2));
        return s;
    };
    if (auto colon = head.find(':'); colon != std::string::npos) {
        out.name = trim(head.substr(0, colon));
        out.description = strip_parens(head.substr(colon + 1));
    } else if (auto paren = head.find('('); paren != std::string::npos && head.back() == ')') {
        out.name = trim(head.substr(0, paren));
        out.description = strip_parens(head.substr(paren));
    } else {
        out.name = head;
    }
    for (std::size_t i = 1; i < lines.size(); ++i) {
        auto colon = lines[i].find(':');
        if (colon == std::string::npos) continue;
        auto key = lower(lines[i].substr(0, colon));
        std::erase_if(key, [](char c) { return !std::isalpha(static_cast<unsigned char>(c)); });
        if (key.starts_with("key")) key = key.substr(3);
        auto items = split_list(std::string_view(lines[i]).substr(colon + 1), ",;");
        if (key == "functions" || key == "function" || key == "methods") out.functions = items;
        else if (key == "variables" || key == "variable") out.variables = items;
        else if (key == "files" || key == "file" || key == "filepaths" || key == "paths") out.files = items;
    }
    return out;
}

std::string attr_or(const Attrs& attrs, const std::string& key, const std::string& fallback) {
    auto it = attrs.find(key);
    return it == attrs.end() ? fallback : it->second;
}

std::vector<std::string> list_attr_or(const Attrs& attrs, const std::string& key,
                                      const std::optional<std::vector<std::string>>& fallback) {
    auto it = attrs.find(key);
    if (it != attrs.end()) return split_list(it->second, ";");
    return fallback.value_or(std::vector<std::string>{});
}

NodePayload payload_from(MapKind kind, const PendingNode& node) {
    if (!node.has_attrs) return empty_payload(kind);
    const auto& a = node.attrs;
    LabelFields lf;
    if (auto it = a.find("label"); it != a.end()) lf = read_label(it->second);
    switch (kind) {
        case MapKind::BusinessComponent:
            return ComponentPayload{attr_or(a, "componentName", lf.name),
                                    attr_or(a, "componentDescription", lf.description),
                                    list_attr_or(a, "keyFunctions", lf.functions),
                                    list_attr_or(a, "keyVariables", lf.variables),
                                    list_attr_or(a, "keyFiles", lf.files)};
        case MapKind::FunctionCall:
            return ClassPayload{attr_or(a, "className", lf.name), attr_or(a, "classDescription", lf.description),
                                list_attr_or(a, "keyFunctions", lf.functions),
                                list_attr_or(a, "keyVariables", lf.variables), list_attr_or(a, "keyFiles", lf.files)};
        case MapKind::Local: {
            MemberPayload p;
            std::string name = lf.name;
            std::optional<MemberKind> kind_hint;
            // "class Foo", "method: bar" style labels
            if (auto sp = name.find_first_of(" :"); sp != std::string::npos) {
                if (auto mk = parse_member_kind(name.substr(0, sp))) {
                    kind_hint = mk;
                    name = trim(std::string_view(name).substr(sp + 1));
                    if (!name.empty() && name.front() == ':') name = trim(std::string_view(name).substr(1));
                }
            }
            if (!kind_hint && name.find('(') != std::string::npos) kind_hint = MemberKind::Method;
            p.member_name = attr_or(a, "memberName", name);
            if (auto it = a.find("memberKind"); it != a.end()) {
                auto mk = parse_member_kind(it->second);
                if (!mk) throw Error(ErrorCode::SchemaViolation, "unknown memberKind '" + it->second + "'", {it->second});
                p.member_kind = *mk;
            } else {
                p.member_kind = kind_hint.value_or(MemberKind::Method);
            }
            return p;
        }
    }
    return empty_payload(kind);
}

MapGraph Parser::build() {
    MapGraph g(kind_);
    for (const auto& name : order_) {
        const auto& pending = nodes_.at(name);
        if (!options_.allow_implicit_nodes && !pending.explicit_stmt) {
            throw Error(ErrorCode::UndeclaredNode, "edge references undeclared node '" + name + "'", {name});
        }
        MapNode node{name, attr_or(pending.attrs, "label", name), payload_from(kind_, pending)};
        g.add_node(std::move(node));
    }
    for (const auto& e : edges_) {
        auto where = std::to_string(e.line) + ":" + std::to_string(e.col) + ": ";
        if (e.src == e.dst) throw Error(ErrorCode::SelfLoop, where + "self-loop on node '" + e.src + "'", {e.src});
        auto label = attr_or(e.attrs, "label", "");
        std::optional<Relation> rel;
        if (auto it = e.attrs.find("relation"); it != e.attrs.end()) {
            rel = parse_relation(it->second);
            if (!rel || !is_legal(kind_, *rel)) {
                throw Error(ErrorCode::IllegalRelation,
                            where + "relation '" + it->second + "' is not legal in a " +
                                std::string(to_string(kind_)) + " graph",
                            {it->second});
            }
        } else {
            rel = infer_relation(kind_, label);
            if (!rel) {
                throw Error(ErrorCode::IllegalRelation,
                            where + "edge label '" + label + "' names no relation legal in a " +
                                std::string(to_string(kind_)) + " graph",
                            {label});
            }
        }
        g.add_edge({e.src, e.dst, *rel, label});
    }
    for (const auto& c : clusters_) {
        auto module = c.label;
        if (module.empty()) {
            module = c.id.substr(std::string_view("cluster").size());
            if (module.starts_with('_')) module.erase(0, 1);
        }
        if (module.empty()) module = c.id;
        g.ensure_group(module);
        for (const auto& m : c.members) g.add_to_group(module, m);
    }
    return g;
}

std::string quote(std::string_view s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"' || c == '\\') out += '\\';
        out += c;
    }
    out += '"';
    return out;
}

std::string join(const std::vector<std::string>& items) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i) out += ';';
        out += items[i];
    }
    return out;
}

}  // namespace

MapGraph parse_dot(std::string_view text, MapKind kind, const DotParseOptions& options) {
    return Parser(Lexer(text).run(), kind, options).run();
}

std::string serialize_dot(const MapGraph& graph) {
    std::ostringstream out;
    out << "digraph G {\n";

    std::vector<const MapNode*> nodes;
    for (const auto& n : graph.nodes()) nodes.push_back(&n);
    std::sort(nodes.begin(), nodes.end(), [](auto* a, auto* b) { return a->id < b->id; });
    for (const auto* n : nodes) {
        out << "  " << quote(n->id) << " [label=" << quote(n->label);
        std::visit(
            [&](const auto& p) {
                using T = std::decay_t<decltype(p)>;
                if constexpr (std::is_same_v<T, ComponentPayload>) {
                    out << ", componentName=" << quote(p.component_name)
                        << ", componentDescription=" << quote(p.component_description);
                } else if constexpr (std::is_same_v<T, ClassPayload>) {
                    out << ", className=" << quote(p.class_name) << ", classDescription=" << quote(p.class_description);
                } else {
                    out << ", memberName=" << quote(p.member_name) << ", memberKind=" << quote(to_string(p.member_kind));
                }
                if constexpr (!std::is_same_v<T, MemberPayload>) {
                    out << ", keyFunctions=" << quote(join(p.key_functions))
                        << ", keyVariables=" << quote(join(p.key_variables)) << ", keyFiles=" << quote(join(p.key_files));
                }
            },
            n->payload);
        out << "];\n";
    }

    auto edges = graph.edges();
    std::sort(edges.begin(), edges.end());
    for (const auto& e : edges) {
        out << "  " << quote(e.src) << " -> " << quote(e.dst) << " [relation=" << quote(to_string(e.relation))
            << ", label=" << quote(e.annotation) << "];\n";
    }

    std::size_t cluster = 0;
    for (const auto& [module, members] : graph.module_groups()) {
        out << "  subgraph " << quote("cluster_" + std::to_string(cluster++)) << " {\n";
        out << "    label=" << quote(module) << ";\n";
        for (const auto& m : members) out << "    " << quote(m) << ";\n";
        out << "  }\n";
    }
    out << "}\n";
    return out.str();
}

}  // namespace atlas
