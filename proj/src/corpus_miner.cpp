#include "blocktune/corpus_miner.hpp"

#include "blocktune/error.hpp"
#include "blocktune/text.hpp"
#include "blocktune/zip.hpp"

#include <httplib.h>
#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <fstream>
#include <mutex>
#include <thread>

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace blocktune::corpus {

std::string_view to_string(RepoStatus s) {
    switch (s) {
        case RepoStatus::pending: return "pending";
        case RepoStatus::downloaded: return "downloaded";
        case RepoStatus::missing: return "missing";
        case RepoStatus::failed: return "failed";
    }
    return "failed";
}

std::optional<RepoStatus> parse_repo_status(std::string_view s) {
    for (auto st : {RepoStatus::pending, RepoStatus::downloaded, RepoStatus::missing,
                    RepoStatus::failed}) {
        if (to_string(st) == s) return st;
    }
    return std::nullopt;
}

std::string_view to_string(SourceKind k) {
    switch (k) {
        case SourceKind::c: return "c";
        case SourceKind::cpp: return "cpp";
        case SourceKind::cu: return "cu";
        case SourceKind::header: return "header";
    }
    return "header";
}

std::optional<SourceKind> classify(const fs::path& p) {
    auto ext = p.extension().string();
    if (ext == ".c") return SourceKind::c;
    if (ext == ".cpp" || ext == ".cc") return SourceKind::cpp;
    if (ext == ".cu") return SourceKind::cu;
    if (ext == ".h" || ext == ".hpp" || ext == ".cuh") return SourceKind::header;
    return std::nullopt;
}

std::optional<Url> parse_url(std::string_view text) {
    text = trim(text);
    auto sep = text.find("://");
    if (sep == std::string_view::npos || sep == 0) return std::nullopt;
    Url u;
    u.scheme = to_lower(text.substr(0, sep));
    if (u.scheme.compare("http") != 0 && u.scheme.compare("https") != 0) return std::nullopt;
    auto rest = text.substr(sep + 3);
    auto slash = rest.find('/');
    auto authority = rest.substr(0, slash);
    u.path = slash == std::string_view::npos ? "/" : std::string(rest.substr(slash));
    if (authority.find('@') != std::string_view::npos) return std::nullopt;
    auto colon = authority.rfind(':');
    if (colon != std::string_view::npos) {
        auto port = parse_int(authority.substr(colon + 1));
        if (!port || *port <= 0 || *port > 65535) return std::nullopt;
        u.port = *port;
        authority = authority.substr(0, colon);
    } else {
        u.port = u.scheme == "https" ? 443 : 80;
    }
    if (authority.empty()) return std::nullopt;
    for (char c : authority) {
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-')) return std::nullopt;
    }
    u.host = std::string(authority);
    return u;
}

std::vector<RepoRef> load_repo_list(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read repository list " + path.string());
    std::vector<RepoRef> refs;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto text = trim(line);
        if (text.empty() || text.front() == '#') continue;
        RepoRef ref;
        ref.index = refs.size();
        ref.url = std::string(text);
        if (!parse_url(text)) {
            ref.status = RepoStatus::failed;
            ref.diagnostic = "line " + std::to_string(lineno) + ": malformed URL (needs http(s)://host)";
        }
        refs.push_back(std::move(ref));
    }
    if (in.bad()) throw Error("error reading " + path.string());
    return refs;
}

namespace {

struct HttpResponse {
    int status = 0;
    std::string body;
    std::string location;
    std::string error;
};

HttpResponse http_get(const Url& url, int timeout_s) {
    HttpResponse out;
    auto origin = url.scheme + "://" + url.host + ":" + std::to_string(url.port);
    httplib::Client client(origin);
    client.set_connection_timeout(timeout_s, 0);
    client.set_read_timeout(timeout_s, 0);
    client.set_follow_location(false);
    auto res = client.Get(url.path);
    if (!res) {
        out.error = "request failed: " + httplib::to_string(res.error());
        return out;
    }
    out.status = res->status;
    out.body = std::move(res->body);
    if (res->has_header("Location")) out.location = res->get_header_value("Location");
    return out;
}

std::optional<Url> resolve_location(const Url& base, const std::string& location) {
    if (location.find("://") != std::string::npos) return parse_url(location);
    if (location.empty()) return std::nullopt;
    Url next = base;
    if (location.front() == '/') {
        next.path = location;
    } else {
        auto dir = base.path.substr(0, base.path.rfind('/') + 1);
        next.path = dir + location;
    }
    return next;
}

std::string archive_base(std::string url) {
    while (!url.empty() && url.back() == '/') url.pop_back();
    if (url.size() > 4 && url.ends_with(".git")) url.resize(url.size() - 4);
    return url;
}

bool is_gone(int status) { return status == 404 || status == 410; }

}  // namespace

RepoRef fetch_repo(RepoRef ref, const fs::path& dest_root, const FetchOptions& options) {
    if (ref.status != RepoStatus::pending) return ref;
    auto base = archive_base(ref.url);
    std::vector<std::string> notes;

    for (const auto& branch : options.branches) {
        auto url = parse_url(base + "/archive/" + branch + ".zip");
        if (!url) {
            ref.status = RepoStatus::failed;
            ref.diagnostic = "malformed URL";
            return ref;
        }
        HttpResponse res;
        for (int hop = 0;; ++hop) {
            res = http_get(*url, options.timeout_s);
            if (!res.error.empty()) {
                ref.status = RepoStatus::failed;
                ref.diagnostic = branch + ": " + res.error;
                return ref;
            }
            if (res.status < 300 || res.status >= 400 || res.location.empty()) break;
            if (hop + 1 > options.max_redirects) {
                ref.status = RepoStatus::failed;
                ref.diagnostic = branch + ": more than " + std::to_string(options.max_redirects) +
                                 " redirects";
                return ref;
            }
            url = resolve_location(*url, res.location);
            if (!url) {
                ref.status = RepoStatus::failed;
                ref.diagnostic = branch + ": bad redirect target '" + res.location + "'";
                return ref;
            }
        }

        if (is_gone(res.status)) {
            notes.push_back(branch + ": HTTP " + std::to_string(res.status));
            continue;
        }
        if (res.status != 200) {
            ref.status = RepoStatus::failed;
            ref.diagnostic = branch + ": HTTP " + std::to_string(res.status);
            return ref;
        }

        auto dest = dest_root / std::to_string(ref.index);
        try {
            auto entries = zip::read_archive(res.body);
            fs::remove_all(dest);
            zip::extract(entries, dest);
        } catch (const zip::ArchiveError& e) {
            fs::remove_all(dest);
            ref.status = RepoStatus::failed;
            ref.diagnostic = branch + ": " + e.what();
            return ref;
        }
        if (!fs::exists(dest) || fs::is_empty(dest)) {
            fs::remove_all(dest);
            ref.status = RepoStatus::failed;
            ref.diagnostic = branch + ": empty archive";
            return ref;
        }
        ref.status = RepoStatus::downloaded;
        ref.diagnostic.clear();
        return ref;
    }

    ref.status = RepoStatus::missing;
    std::string joined;
    for (const auto& n : notes) joined += (joined.empty() ? "" : "; ") + n;
    ref.diagnostic = joined;
    return ref;
}

std::vector<SourceFile> filter_sources(const fs::path& repo_dir, std::size_t repo_index) {
    std::vector<SourceFile> kept;
    std::vector<fs::path> doomed;
    std::vector<fs::path> dirs;
    for (auto it = fs::recursive_directory_iterator(repo_dir); it != fs::recursive_directory_iterator();
         ++it) {
        const auto& entry = *it;
        if (entry.is_symlink()) {
            doomed.push_back(entry.path());
            if (entry.is_directory()) it.disable_recursion_pending();
            continue;
        }
        if (entry.is_directory()) {
            dirs.push_back(entry.path());
            continue;
        }
        auto kind = entry.is_regular_file() ? classify(entry.path()) : std::nullopt;
        if (!kind) {
            doomed.push_back(entry.path());
            continue;
        }
        kept.push_back({repo_index, entry.path().lexically_relative(repo_dir).generic_string(), *kind});
    }
    for (const auto& p : doomed) fs::remove(p);
    // Deepest first so parents empty out before they are checked.
    std::sort(dirs.begin(), dirs.end(), [](const fs::path& a, const fs::path& b) {
        return a.string().size() > b.string().size();
    });
    for (const auto& d : dirs) {
        if (fs::is_empty(d)) fs::remove(d);
    }
    std::sort(kept.begin(), kept.end(),
              [](const SourceFile& a, const SourceFile& b) { return a.relative_path < b.relative_path; });
    return kept;
}

std::string manifest_line(const RepoRef& ref) {
    ordered_json j;
    j["index"] = ref.index;
    j["url"] = ref.url;
    j["status"] = std::string(to_string(ref.status));
    j["diagnostic"] = ref.diagnostic;
    return j.dump();
}

void write_manifest(const fs::path& path, const std::vector<RepoRef>& refs) {
    std::string out;
    for (const auto& r : refs) out += manifest_line(r) + "\n";
    write_file(path, out);
}

std::vector<RepoRef> read_manifest(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read " + path.string());
    std::vector<RepoRef> refs;
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        auto j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) throw Error("malformed manifest line in " + path.string());
        RepoRef r;
        r.index = j.value("index", std::size_t{0});
        r.url = j.value("url", std::string{});
        r.status = parse_repo_status(j.value("status", std::string{"failed"})).value_or(RepoStatus::failed);
        r.diagnostic = j.value("diagnostic", std::string{});
        refs.push_back(std::move(r));
    }
    return refs;
}

std::vector<RepoRef> mine(const fs::path& repo_list, const fs::path& dest_root,
                          const MineOptions& options) {
    auto refs = load_repo_list(repo_list);
    fs::create_directories(dest_root);
    auto manifest = dest_root / std::string(kMineManifest);
    write_file(manifest, "");

    std::mutex log_mutex;
    std::atomic<std::size_t> next{0};
    std::exception_ptr fatal;
    auto worker = [&] {
        while (true) {
            auto i = next.fetch_add(1);
            if (i >= refs.size()) return;
            try {
                auto ref = fetch_repo(refs[i], dest_root, options.fetch);
                if (ref.status == RepoStatus::downloaded) {
                    filter_sources(dest_root / std::to_string(ref.index), ref.index);
                }
                std::lock_guard lock(log_mutex);
                refs[i] = ref;
                append_file(manifest, manifest_line(ref) + "\n");
            } catch (...) {
                std::lock_guard lock(log_mutex);
                if (!fatal) fatal = std::current_exception();
                next = refs.size();
                return;
            }
        }
    };
    {
        std::vector<std::jthread> pool;
        auto n = std::max(1, options.concurrency);
        for (int t = 0; t < n; ++t) pool.emplace_back(worker);
    }
    if (fatal) std::rethrow_exception(fatal);

    // The append log is in completion order; compact it to index order.
    write_manifest(manifest, refs);
    return refs;
}

}  // namespace blocktune::corpus
