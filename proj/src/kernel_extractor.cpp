#include "blocktune/kernel_extractor.hpp"

#include "blocktune/error.hpp"
#include "blocktune/lexer.hpp"
#include "blocktune/text.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <deque>
#include <fstream>
#include <set>
#include <thread>

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace blocktune::extract {

using lex::Token;
using lex::TokenKind;

std::string_view to_string(ParamRole r) {
    switch (r) {
        case ParamRole::unknown: return "unknown";
        case ParamRole::buffer: return "buffer";
        case ParamRole::width: return "width";
        case ParamRole::height: return "height";
        case ParamRole::size: return "size";
        case ParamRole::k_like: return "k_like";
        case ParamRole::static_one: return "static_one";
    }
    return "unknown";
}

std::string_view to_string(CandidateStatus s) {
    switch (s) {
        case CandidateStatus::ok: return "ok";
        case CandidateStatus::non_buildable: return "non_buildable";
        case CandidateStatus::failed: return "failed";
    }
    return "failed";
}

namespace {

const std::set<std::string_view> kAttributeCalls = {
    "__launch_bounds__", "__attribute__", "__declspec", "alignas", "__align__", "decltype",
};

const std::set<std::string_view> kTypeWords = {
    "const",  "volatile", "__restrict__", "__restrict", "restrict", "unsigned", "signed",
    "int",    "long",     "short",        "char",       "float",    "double",   "bool",
    "void",   "auto",     "struct",       "class",      "enum",     "typename", "register",
};

const std::set<std::string_view> kQualifierWords = {
    "const", "volatile", "__restrict__", "__restrict", "restrict", "register",
};

const std::set<std::string_view> kTextureFetches = {
    "tex1Dfetch", "tex1D", "tex2D", "tex3D", "tex1DLayered", "tex2DLayered", "texCubemap",
};

bool no_space_before(std::string_view t) {
    return t == "*" || t == "&" || t == "[" || t == "]" || t == "<" || t == ">" || t == "," ||
           t == ")" || t == "(" || t == ":";
}
bool no_space_after(std::string_view t) { return t == "[" || t == "<" || t == "(" || t == ":"; }

std::string join_tokens(const std::vector<std::string_view>& toks) {
    std::string out;
    for (std::size_t i = 0; i < toks.size(); ++i) {
        if (i > 0 && !no_space_before(toks[i]) && !no_space_after(toks[i - 1])) out += ' ';
        out += toks[i];
    }
    return out;
}

// Splits at commas outside any bracket pair.
std::vector<std::vector<Token>> split_top_level(const std::vector<Token>& toks) {
    std::vector<std::vector<Token>> groups(1);
    int depth = 0;
    for (const auto& t : toks) {
        if (t.is('(') || t.is('[') || t.is('{') || t.is('<')) ++depth;
        if (t.is(')') || t.is(']') || t.is('}') || t.is('>')) depth = std::max(0, depth - 1);
        if (depth == 0 && t.is(',')) {
            groups.emplace_back();
            continue;
        }
        groups.back().push_back(t);
    }
    return groups;
}

ParamSpec parse_one(std::vector<Token> toks) {
    // Drop a default argument.
    int depth = 0;
    for (std::size_t i = 0; i < toks.size(); ++i) {
        if (toks[i].is('(') || toks[i].is('[') || toks[i].is('<')) ++depth;
        if (toks[i].is(')') || toks[i].is(']') || toks[i].is('>')) --depth;
        if (depth == 0 && toks[i].is('=')) {
            toks.resize(i);
            break;
        }
    }

    ParamSpec p;
    std::size_t name_at = lex::npos;

    auto paren = std::find_if(toks.begin(), toks.end(), [](const Token& t) { return t.is('('); });
    if (paren != toks.end()) {
        // Function pointer: "ret (*name)(args)".
        for (auto it = paren; it != toks.end() && !it->is(')'); ++it) {
            if (it->kind == TokenKind::identifier && !kQualifierWords.contains(it->text)) {
                name_at = static_cast<std::size_t>(it - toks.begin());
                break;
            }
        }
        p.is_pointer = true;
    } else {
        auto bracket = std::find_if(toks.begin(), toks.end(), [](const Token& t) { return t.is('['); });
        std::size_t candidate = bracket == toks.end() ? toks.size() : static_cast<std::size_t>(bracket - toks.begin());
        if (candidate > 0) {
            const auto& c = toks[candidate - 1];
            bool has_type_before = false;
            for (std::size_t i = 0; i + 1 < candidate; ++i) {
                if (!kQualifierWords.contains(toks[i].text)) has_type_before = true;
            }
            if (c.kind == TokenKind::identifier && !kTypeWords.contains(c.text) && has_type_before) {
                name_at = candidate - 1;
            }
        }
    }

    std::vector<std::string_view> type_toks;
    for (std::size_t i = 0; i < toks.size(); ++i) {
        if (i == name_at) continue;
        type_toks.push_back(toks[i].text);
        if (toks[i].is('*') || toks[i].is('[')) p.is_pointer = true;
    }
    if (name_at != lex::npos) p.name = std::string(toks[name_at].text);
    p.type_text = join_tokens(type_toks);
    return p;
}

bool opens_scope(const std::vector<Token>& t, std::size_t stmt, std::size_t brace) {
    if (stmt >= brace) return false;
    std::size_t k = stmt;
    if (t[k].is_ident("inline") && k + 1 < brace) ++k;
    if (t[k].is_ident("namespace")) return true;
    return t[stmt].is_ident("extern") && brace == stmt + 2 && t[stmt + 1].kind == TokenKind::string;
}

// Index one past the '>' closing a template header starting at `lt`.
std::size_t skip_angle(const std::vector<Token>& t, std::size_t lt, std::size_t limit) {
    int depth = 0;
    for (std::size_t i = lt; i < limit; ++i) {
        if (t[i].is('(')) {
            auto j = lex::match_bracket(t, i);
            if (j == lex::npos || j >= limit) return limit;
            i = j;
            continue;
        }
        if (t[i].is('<')) ++depth;
        if (t[i].is('>') && --depth == 0) return i + 1;
    }
    return limit;
}

std::optional<FunctionDecl> function_at(std::string_view content, const std::vector<Token>& t,
                                        std::size_t stmt, std::size_t brace, std::size_t close,
                                        const SourceFile& file) {
    if (stmt >= brace) return std::nullopt;
    FunctionDecl d;
    std::size_t head = stmt;
    if (t[head].is_ident("template")) {
        d.is_template = true;
        if (head + 1 < brace && t[head + 1].is('<')) head = skip_angle(t, head + 1, brace);
    }

    std::size_t name_at = lex::npos;
    std::size_t open = lex::npos;
    std::size_t shut = lex::npos;
    for (std::size_t k = head; k < brace; ++k) {
        const auto& tok = t[k];
        if (tok.kind == TokenKind::identifier &&
            (tok.text == "struct" || tok.text == "class" || tok.text == "union" || tok.text == "enum")) {
            return std::nullopt;
        }
        if (tok.is('=')) return std::nullopt;
        if (!tok.is('(')) continue;
        auto m = lex::match_bracket(t, k);
        if (m == lex::npos || m >= brace) return std::nullopt;
        if (k == head || t[k - 1].kind != TokenKind::identifier) return std::nullopt;
        if (kAttributeCalls.contains(t[k - 1].text)) {
            k = m;
            continue;
        }
        name_at = k - 1;
        open = k;
        shut = m;
        break;
    }
    if (name_at == lex::npos || t[name_at].text == "operator") return std::nullopt;
    if (name_at > head && t[name_at - 1].is(':')) return std::nullopt;  // out-of-line member
    for (std::size_t k = shut + 1; k < brace; ++k) {
        if (t[k].is('=') || t[k].is(';')) return std::nullopt;
    }

    bool global = false;
    bool device = false;
    bool launch_bounds = false;
    for (std::size_t k = stmt; k < brace; ++k) {
        if (t[k].is_ident("__global__")) global = true;
        if (t[k].is_ident("__device__")) device = true;
        if (t[k].is_ident("__launch_bounds__")) launch_bounds = true;
    }
    if (!global && !device) return std::nullopt;

    d.name = std::string(t[name_at].text);
    d.qualifier = global ? Qualifier::global : Qualifier::device;
    d.source_file = file;
    d.decl_span = {t[stmt].begin, t[close].end};
    d.body_span = {t[brace].begin, t[close].end};
    d.params = parse_params(content.substr(t[open].end, t[shut].begin - t[open].end));

    if (launch_bounds) d.flags.emplace_back("launch_bounds");
    bool extern_shared = false;
    bool texture = false;
    for (std::size_t k = brace; k < close; ++k) {
        if (t[k].is_ident("extern")) {
            for (std::size_t m = k + 1; m < std::min(close, k + 4); ++m) {
                if (t[m].is_ident("__shared__")) extern_shared = true;
            }
        }
        if (t[k].kind == TokenKind::identifier && kTextureFetches.contains(t[k].text)) texture = true;
    }
    if (extern_shared) d.flags.emplace_back("extern_shared");
    if (texture) d.flags.emplace_back("texture");
    return d;
}

std::string directive_body(std::string_view text) {
    auto s = trim(text);
    if (!s.empty() && s.front() == '#') s.remove_prefix(1);
    return std::string(trim(s));
}

std::vector<std::string> define_and_include_directives(std::string_view content) {
    std::vector<std::string> out;
    for (const auto& t : lex::tokenize(content).tokens) {
        if (t.kind != TokenKind::directive) continue;
        auto body = directive_body(t.text);
        if (body.starts_with("include") || body.starts_with("define")) out.emplace_back(t.text);
    }
    return out;
}

std::vector<std::string> identifiers_in(std::string_view text) {
    std::vector<std::string> out;
    std::set<std::string_view> seen;
    auto lx = lex::tokenize(text);
    for (const auto& t : lx.tokens) {
        if (t.kind == TokenKind::identifier && seen.insert(t.text).second) out.emplace_back(t.text);
    }
    return out;
}

std::string parent_dir(const std::string& rel) { return fs::path(rel).parent_path().generic_string(); }

std::string relative_to_dir(const std::string& rel, const std::string& dir) {
    return fs::path(rel).lexically_relative(dir.empty() ? fs::path(".") : fs::path(dir)).generic_string();
}

bool escapes(const std::string& rel) { return rel.starts_with("../") || rel == ".."; }

}  // namespace

std::vector<ParamSpec> parse_params(std::string_view param_list) {
    auto lx = lex::tokenize(param_list);
    std::vector<ParamSpec> params;
    if (lx.tokens.empty()) return params;
    auto groups = split_top_level(lx.tokens);
    if (groups.size() == 1 && groups[0].size() == 1 && groups[0][0].is_ident("void")) return params;
    for (auto& g : groups) {
        if (g.empty()) continue;
        if (g.size() == 1 && g[0].is('.')) continue;
        params.push_back(parse_one(std::move(g)));
    }
    return params;
}

ScanResult scan_functions(std::string_view content, const SourceFile& file) {
    ScanResult out;
    auto lx = lex::tokenize(content);
    for (auto& d : lx.diagnostics) out.diagnostics.push_back(file.relative_path + ": " + d);
    const auto& t = lx.tokens;

    int scope_depth = 0;
    std::size_t stmt = 0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        const auto& tok = t[i];
        if (tok.kind == TokenKind::directive || tok.is(';')) {
            stmt = i + 1;
            continue;
        }
        if (tok.is('}')) {
            if (scope_depth > 0) {
                --scope_depth;
            } else {
                out.diagnostics.push_back(file.relative_path + ": unmatched '}' at line " +
                                          std::to_string(tok.line));
            }
            stmt = i + 1;
            continue;
        }
        if (tok.is('(')) {
            auto j = lex::match_bracket(t, i);
            if (j == lex::npos) {
                out.diagnostics.push_back(file.relative_path + ": unbalanced '(' at line " +
                                          std::to_string(tok.line));
                break;
            }
            i = j;
            continue;
        }
        if (!tok.is('{')) continue;
        if (opens_scope(t, stmt, i)) {
            ++scope_depth;
            stmt = i + 1;
            continue;
        }
        auto j = lex::match_bracket(t, i);
        if (j == lex::npos) {
            out.diagnostics.push_back(file.relative_path + ": unbalanced braces at end of file ('{' at line " +
                                      std::to_string(tok.line) + ")");
            break;
        }
        if (auto d = function_at(content, t, stmt, i, j, file)) out.functions.push_back(std::move(*d));
        i = j;
        stmt = j + 1;
    }
    return out;
}

std::vector<IncludeLine> include_lines(std::string_view content) {
    std::vector<IncludeLine> out;
    for (const auto& t : lex::tokenize(content).tokens) {
        if (t.kind != TokenKind::directive) continue;
        auto body = directive_body(t.text);
        if (!body.starts_with("include")) continue;
        auto rest = std::string(trim(std::string_view(body).substr(7)));
        if (rest.empty()) continue;
        IncludeLine inc;
        inc.text = std::string(t.text);
        char open = rest.front();
        char close = open == '"' ? '"' : open == '<' ? '>' : '\0';
        if (close == '\0') continue;
        auto end = rest.find(close, 1);
        if (end == std::string::npos) continue;
        inc.target = rest.substr(1, end - 1);
        inc.quoted = open == '"';
        out.push_back(std::move(inc));
    }
    return out;
}

Repo::Repo(fs::path dir, std::vector<SourceFile> files) : dir_(std::move(dir)), files_(std::move(files)) {
    std::sort(files_.begin(), files_.end(),
              [](const SourceFile& a, const SourceFile& b) { return a.relative_path < b.relative_path; });
    for (const auto& f : files_) {
        contents_[f.relative_path] = read_file(dir_ / f.relative_path);
    }
    for (const auto& f : files_) {
        scans_[f.relative_path] = scan_functions(contents_[f.relative_path], f);
    }
    for (const auto& f : files_) {
        for (const auto& d : scans_[f.relative_path].functions) {
            if (d.qualifier == Qualifier::device) device_by_name_.emplace(d.name, &d);
        }
    }
}

Repo Repo::load(const fs::path& dir, std::size_t repo_index) {
    std::vector<SourceFile> files;
    for (const auto& entry : fs::recursive_directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        auto kind = corpus::classify(entry.path());
        if (!kind) continue;
        files.push_back({repo_index, entry.path().lexically_relative(dir).generic_string(), *kind});
    }
    return Repo(dir, std::move(files));
}

const std::string& Repo::content(const std::string& rel) const {
    auto it = contents_.find(rel);
    if (it == contents_.end()) throw Error("unknown source file " + rel);
    return it->second;
}

const ScanResult& Repo::scan(const std::string& rel) const {
    auto it = scans_.find(rel);
    if (it == scans_.end()) throw Error("unknown source file " + rel);
    return it->second;
}

const SourceFile* Repo::find(const std::string& rel) const {
    auto it = std::lower_bound(files_.begin(), files_.end(), rel,
                               [](const SourceFile& f, const std::string& r) { return f.relative_path < r; });
    return it != files_.end() && it->relative_path == rel ? &*it : nullptr;
}

std::optional<std::string> Repo::resolve_include(const std::string& includer,
                                                 const std::string& target) const {
    auto local = (fs::path(parent_dir(includer)) / target).lexically_normal().generic_string();
    if (!escapes(local) && find(local)) return local;
    auto rooted = fs::path(target).lexically_normal().generic_string();
    if (!escapes(rooted) && find(rooted)) return rooted;
    return std::nullopt;
}

std::vector<const FunctionDecl*> Repo::device_definitions(std::string_view name) const {
    std::vector<const FunctionDecl*> out;
    auto [lo, hi] = device_by_name_.equal_range(name);
    for (auto it = lo; it != hi; ++it) out.push_back(it->second);
    return out;
}

std::vector<const FunctionDecl*> Repo::global_functions() const {
    std::vector<const FunctionDecl*> out;
    for (const auto& f : files_) {
        for (const auto& d : scans_.at(f.relative_path).functions) {
            if (d.qualifier == Qualifier::global) out.push_back(&d);
        }
    }
    return out;
}

Closure closure(const FunctionDecl& entry, const Repo& repo) {
    if (entry.qualifier != Qualifier::global) throw ContractViolation("closure needs a __global__ entry");
    Closure c;
    const auto& entry_file = entry.source_file.relative_path;
    auto is_header = [&](const std::string& rel) { return repo.find(rel)->kind == corpus::SourceKind::header; };

    std::set<std::string> deps{entry_file};
    std::set<std::string> entry_visible;  // reachable from the entry file through includes alone
    std::vector<std::string> extra;
    std::deque<std::string> files{entry_file};
    std::deque<std::pair<std::string, std::string>> names;  // (identifier, file it appeared in)
    std::set<std::string> names_seen;
    std::set<const FunctionDecl*> reached;
    std::vector<const FunctionDecl*> order;

    auto want_extra = [&](const std::string& h) {
        if (!entry_visible.contains(h) && std::find(extra.begin(), extra.end(), h) == extra.end()) {
            extra.push_back(h);
        }
    };
    auto drain_includes = [&](bool from_entry) {
        while (!files.empty()) {
            auto file = files.front();
            files.pop_front();
            // Includes of an inlined source file must be re-issued from kernel.cu.
            bool inlined_source = file != entry_file && !is_header(file);
            for (const auto& inc : include_lines(repo.content(file))) {
                if (!inc.quoted) continue;
                auto resolved = repo.resolve_include(file, inc.target);
                if (!resolved) {
                    c.diagnostics.push_back("unresolved include \"" + inc.target + "\" in " + file);
                    continue;
                }
                if (from_entry) entry_visible.insert(*resolved);
                if (inlined_source) want_extra(*resolved);
                if (deps.insert(*resolved).second) files.push_back(*resolved);
            }
        }
    };
    auto push_names = [&](const FunctionDecl& fn) {
        auto body = std::string_view(repo.content(fn.source_file.relative_path))
                        .substr(fn.body_span.begin, fn.body_span.end - fn.body_span.begin);
        for (auto& id : identifiers_in(body)) {
            if (names_seen.insert(id).second) names.emplace_back(id, fn.source_file.relative_path);
        }
    };

    drain_includes(true);
    push_names(entry);
    while (!names.empty()) {
        auto [name, origin] = names.front();
        names.pop_front();
        auto defs = repo.device_definitions(name);
        if (defs.empty()) continue;

        // Prefer the referencing file, then a file already in the closure.
        std::string chosen;
        for (auto* d : defs) {
            if (d->source_file.relative_path == origin) chosen = origin;
        }
        for (auto* d : defs) {
            if (chosen.empty() && deps.contains(d->source_file.relative_path)) chosen = d->source_file.relative_path;
        }
        if (chosen.empty()) chosen = defs.front()->source_file.relative_path;

        for (auto* d : defs) {
            if (d->source_file.relative_path == chosen && reached.insert(d).second) {
                order.push_back(d);
                push_names(*d);
            }
        }
        if (deps.insert(chosen).second) {
            if (is_header(chosen)) want_extra(chosen);
            files.push_back(chosen);
            drain_includes(false);
        }
    }
    c.extra_includes = std::move(extra);

    std::stable_sort(order.begin(), order.end(), [&](const FunctionDecl* a, const FunctionDecl* b) {
        bool a_entry = a->source_file.relative_path == entry_file;
        bool b_entry = b->source_file.relative_path == entry_file;
        if (a_entry != b_entry) return b_entry;
        if (a->source_file.relative_path != b->source_file.relative_path) {
            return a->source_file.relative_path < b->source_file.relative_path;
        }
        return a->decl_span.begin < b->decl_span.begin;
    });
    for (auto* d : order) c.device_fns.push_back(*d);
    for (const auto& p : deps) c.deps.push_back(*repo.find(p));

    std::sort(c.diagnostics.begin(), c.diagnostics.end());
    c.diagnostics.erase(std::unique(c.diagnostics.begin(), c.diagnostics.end()), c.diagnostics.end());
    return c;
}

std::string unit_id(const FunctionDecl& entry) {
    auto flat = entry.source_file.relative_path;
    std::replace(flat.begin(), flat.end(), '/', '_');
    return std::to_string(entry.source_file.repo_index) + "-" + flat + "-" + entry.name;
}

namespace {

bool inlined(const FunctionDecl& fn, const std::string& entry_file) {
    return fn.source_file.relative_path == entry_file || fn.source_file.kind != corpus::SourceKind::header;
}

}  // namespace

std::string render_kernel_source(const FunctionDecl& entry, const Closure& c, const Repo& repo) {
    const auto& entry_file = entry.source_file.relative_path;
    const auto entry_dir = parent_dir(entry_file);
    std::string out;
    std::set<std::string> emitted;
    auto emit = [&](const std::string& line) {
        if (emitted.insert(line).second) out += line + "\n";
    };

    for (const auto& line : define_and_include_directives(repo.content(entry_file))) emit(line);
    for (const auto& dep : c.deps) {
        if (dep.relative_path == entry_file || dep.kind == corpus::SourceKind::header) continue;
        bool contributes = std::any_of(c.device_fns.begin(), c.device_fns.end(), [&](const FunctionDecl& f) {
            return f.source_file.relative_path == dep.relative_path;
        });
        if (!contributes) continue;
        for (const auto& inc : include_lines(repo.content(dep.relative_path))) {
            if (!inc.quoted) emit(inc.text);
        }
    }
    for (const auto& h : c.extra_includes) emit("#include \"" + relative_to_dir(h, entry_dir) + "\"");
    out += "\n";

    for (const auto& fn : c.device_fns) {
        if (!inlined(fn, entry_file)) continue;
        const auto& src = repo.content(fn.source_file.relative_path);
        out += src.substr(fn.decl_span.begin, fn.decl_span.end - fn.decl_span.begin);
        out += "\n\n";
    }
    out += "// isolated kernel\n";
    const auto& src = repo.content(entry_file);
    out += src.substr(entry.decl_span.begin, entry.decl_span.end - entry.decl_span.begin);
    out += "\n";
    return out;
}

std::string params_json(const FunctionDecl& entry) {
    ordered_json j;
    j["function"] = entry.name;
    j["params"] = ordered_json::array();
    for (const auto& p : entry.params) {
        ordered_json pj;
        pj["name"] = p.name;
        pj["type"] = p.type_text;
        pj["pointer"] = p.is_pointer;
        j["params"].push_back(pj);
    }
    return j.dump(2) + "\n";
}

KernelUnit isolate(const FunctionDecl& entry, const Closure& c, const Repo& repo, const fs::path& units_root) {
    KernelUnit unit;
    unit.id = unit_id(entry);
    unit.folder = units_root / unit.id;
    if (fs::exists(unit.folder)) {
        unit.id += "-2";
        unit.folder = units_root / unit.id;
        if (fs::exists(unit.folder)) throw Error("unit id collision for " + unit_id(entry));
    }
    fs::create_directories(unit.folder);

    unit.entry = entry;
    unit.deps = c.deps;
    unit.device_fns = c.device_fns;
    unit.flags = entry.flags;
    unit.diagnostics = c.diagnostics;

    const auto& entry_file = entry.source_file.relative_path;
    const auto entry_dir = parent_dir(entry_file);
    for (const auto& dep : c.deps) {
        if (dep.relative_path == entry_file) continue;
        auto rel = relative_to_dir(dep.relative_path, entry_dir);
        if (escapes(rel)) {
            unit.diagnostics.push_back("unresolved include " + rel + ": outside the kernel directory, copied to " +
                                       dep.relative_path);
            rel = dep.relative_path;
        }
        auto dest = unit.folder / rel;
        fs::create_directories(dest.parent_path());
        fs::copy_file(repo.dir() / dep.relative_path, dest, fs::copy_options::overwrite_existing);
    }
    write_file(unit.folder / "kernel.cu", render_kernel_source(entry, c, repo));
    write_file(unit.folder / "params.json", params_json(entry));
    return unit;
}

std::vector<CandidateRecord> extract_repo(const Repo& repo, const fs::path& units_root) {
    std::vector<CandidateRecord> records;
    for (const auto* fn : repo.global_functions()) {
        CandidateRecord r;
        r.id = unit_id(*fn);
        r.repo_index = fn->source_file.repo_index;
        r.file = fn->source_file.relative_path;
        r.function = fn->name;
        r.params = fn->params;
        r.flags = fn->flags;
        r.diagnostics = repo.scan(r.file).diagnostics;
        if (fn->is_template) {
            r.status = CandidateStatus::non_buildable;
            r.diagnostics.push_back("template kernel: instantiation needs call-site types");
            records.push_back(std::move(r));
            continue;
        }
        try {
            auto c = closure(*fn, repo);
            auto unit = isolate(*fn, c, repo, units_root);
            r.id = unit.id;
            for (const auto& d : unit.deps) r.deps.push_back(d.relative_path);
            for (const auto& d : unit.device_fns) r.device_fns.push_back(d.name);
            r.diagnostics.insert(r.diagnostics.end(), unit.diagnostics.begin(), unit.diagnostics.end());
        } catch (const Error& e) {
            r.status = CandidateStatus::failed;
            r.diagnostics.emplace_back(e.what());
        }
        records.push_back(std::move(r));
    }
    return records;
}

std::string manifest_line(const CandidateRecord& r) {
    ordered_json j;
    j["id"] = r.id;
    j["repo_index"] = r.repo_index;
    j["file"] = r.file;
    j["function"] = r.function;
    j["status"] = std::string(to_string(r.status));
    j["params"] = ordered_json::array();
    for (const auto& p : r.params) {
        j["params"].push_back(ordered_json{{"name", p.name}, {"type", p.type_text}, {"pointer", p.is_pointer}});
    }
    j["deps"] = r.deps;
    j["device_fns"] = r.device_fns;
    j["flags"] = r.flags;
    j["diagnostics"] = r.diagnostics;
    return j.dump();
}

std::vector<CandidateRecord> read_manifest(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read " + path.string());
    std::vector<CandidateRecord> out;
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        auto j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) throw Error("malformed manifest line in " + path.string());
        CandidateRecord r;
        r.id = j.value("id", "");
        r.repo_index = j.value("repo_index", std::size_t{0});
        r.file = j.value("file", "");
        r.function = j.value("function", "");
        auto st = j.value("status", "failed");
        r.status = st == "ok" ? CandidateStatus::ok
                   : st == "non_buildable" ? CandidateStatus::non_buildable
                                           : CandidateStatus::failed;
        for (const auto& p : j.value("params", nlohmann::json::array())) {
            r.params.push_back({p.value("name", ""), p.value("type", ""), p.value("pointer", false)});
        }
        r.deps = j.value("deps", std::vector<std::string>{});
        r.device_fns = j.value("device_fns", std::vector<std::string>{});
        r.flags = j.value("flags", std::vector<std::string>{});
        r.diagnostics = j.value("diagnostics", std::vector<std::string>{});
        out.push_back(std::move(r));
    }
    return out;
}

std::vector<CandidateRecord> extract_corpus(const fs::path& corpus_root) {
    std::vector<std::size_t> repos;
    auto mine_manifest = corpus_root / std::string(corpus::kMineManifest);
    if (fs::exists(mine_manifest)) {
        for (const auto& ref : corpus::read_manifest(mine_manifest)) {
            if (ref.status == corpus::RepoStatus::downloaded) repos.push_back(ref.index);
        }
    } else {
        for (const auto& entry : fs::directory_iterator(corpus_root)) {
            if (!entry.is_directory()) continue;
            if (auto idx = parse_int(entry.path().filename().string()); idx && *idx >= 0) {
                repos.push_back(static_cast<std::size_t>(*idx));
            }
        }
    }
    std::sort(repos.begin(), repos.end());

    auto units_root = corpus_root / std::string(kUnitsDir);
    fs::remove_all(units_root);
    fs::create_directories(units_root);

    std::vector<std::vector<CandidateRecord>> per_repo(repos.size());
    std::atomic<std::size_t> next{0};
    std::exception_ptr fatal;
    std::mutex fatal_mutex;
    auto worker = [&] {
        for (auto i = next.fetch_add(1); i < repos.size(); i = next.fetch_add(1)) {
            try {
                auto dir = corpus_root / std::to_string(repos[i]);
                if (!fs::is_directory(dir)) continue;
                auto repo = Repo::load(dir, repos[i]);
                per_repo[i] = extract_repo(repo, units_root);
            } catch (...) {
                std::lock_guard lock(fatal_mutex);
                if (!fatal) fatal = std::current_exception();
            }
        }
    };
    {
        std::vector<std::jthread> pool;
        unsigned n = std::max(1u, std::min(8u, std::thread::hardware_concurrency()));
        for (unsigned t = 0; t < n; ++t) pool.emplace_back(worker);
    }
    if (fatal) std::rethrow_exception(fatal);

    std::vector<CandidateRecord> all;
    std::string manifest;
    for (auto& recs : per_repo) {
        for (auto& r : recs) {
            manifest += manifest_line(r) + "\n";
            all.push_back(std::move(r));
        }
    }
    write_file(corpus_root / std::string(kExtractManifest), manifest);
    return all;
}

FunctionDecl load_unit_signature(const fs::path& unit_folder) {
    auto j = nlohmann::json::parse(read_file(unit_folder / "params.json"), nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw Error("malformed params.json in " + unit_folder.string());
    FunctionDecl d;
    d.qualifier = Qualifier::global;
    d.name = j.value("function", "");
    for (const auto& p : j.value("params", nlohmann::json::array())) {
        d.params.push_back({p.value("name", ""), p.value("type", ""), p.value("pointer", false)});
    }
    return d;
}

}  // namespace blocktune::extract
