#include "blocktune/zip.hpp"

#include "blocktune/text.hpp"

#include <zlib.h>

#include <cstdint>
#include <cstring>
#include <optional>

namespace blocktune::zip {
namespace {

constexpr std::uint32_t kLocalHeaderSig = 0x04034b50;
constexpr std::uint32_t kCentralHeaderSig = 0x02014b50;
constexpr std::uint32_t kEndOfCentralDirSig = 0x06054b50;

class Reader {
public:
    explicit Reader(std::string_view buf) : buf_(buf) {}

    std::uint16_t u16(std::size_t at) const {
        need(at, 2);
        return static_cast<std::uint16_t>(byte(at) | byte(at + 1) << 8);
    }
    std::uint32_t u32(std::size_t at) const {
        need(at, 4);
        return static_cast<std::uint32_t>(byte(at)) | static_cast<std::uint32_t>(byte(at + 1)) << 8 |
               static_cast<std::uint32_t>(byte(at + 2)) << 16 |
               static_cast<std::uint32_t>(byte(at + 3)) << 24;
    }
    std::string_view bytes(std::size_t at, std::size_t n) const {
        need(at, n);
        return buf_.substr(at, n);
    }
    std::size_t size() const { return buf_.size(); }

private:
    unsigned byte(std::size_t i) const { return static_cast<unsigned char>(buf_[i]); }
    void need(std::size_t at, std::size_t n) const {
        if (at > buf_.size() || n > buf_.size() - at) throw ArchiveError("zip: truncated archive");
    }
    std::string_view buf_;
};

std::string inflate_raw(std::string_view in, std::size_t expected) {
    std::string out(expected, '\0');
    z_stream zs{};
    if (inflateInit2(&zs, -MAX_WBITS) != Z_OK) throw ArchiveError("zip: inflate init failed");
    zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(in.data()));
    zs.avail_in = static_cast<uInt>(in.size());
    zs.next_out = reinterpret_cast<Bytef*>(out.data());
    zs.avail_out = static_cast<uInt>(out.size());
    int rc = inflate(&zs, Z_FINISH);
    auto produced = zs.total_out;
    inflateEnd(&zs);
    if (rc != Z_STREAM_END || produced != expected) throw ArchiveError("zip: corrupt deflate stream");
    return out;
}

std::optional<std::size_t> find_end_of_central_dir(const Reader& r) {
    if (r.size() < 22) return std::nullopt;
    std::size_t lowest = r.size() > 22 + 0xFFFF ? r.size() - 22 - 0xFFFF : 0;
    for (std::size_t at = r.size() - 22;; --at) {
        if (r.u32(at) == kEndOfCentralDirSig) return at;
        if (at == lowest) break;
    }
    return std::nullopt;
}

bool escapes(const std::filesystem::path& rel) {
    if (rel.is_absolute() || rel.has_root_name()) return true;
    for (const auto& part : rel) {
        if (part == "..") return true;
    }
    return false;
}

}  // namespace

std::vector<Entry> read_archive(std::string_view archive) {
    Reader r(archive);
    auto eocd = find_end_of_central_dir(r);
    if (!eocd) throw ArchiveError("zip: end of central directory not found");

    std::size_t count = r.u16(*eocd + 10);
    std::size_t cd_offset = r.u32(*eocd + 16);
    if (cd_offset == 0xFFFFFFFFu || count == 0xFFFF) throw ArchiveError("zip: zip64 not supported");

    std::vector<Entry> entries;
    entries.reserve(count);
    std::size_t at = cd_offset;
    for (std::size_t i = 0; i < count; ++i) {
        if (r.u32(at) != kCentralHeaderSig) throw ArchiveError("zip: bad central directory");
        std::uint16_t flags = r.u16(at + 8);
        std::uint16_t method = r.u16(at + 10);
        std::uint32_t crc = r.u32(at + 16);
        std::size_t csize = r.u32(at + 20);
        std::size_t usize = r.u32(at + 24);
        std::size_t name_len = r.u16(at + 28);
        std::size_t extra_len = r.u16(at + 30);
        std::size_t comment_len = r.u16(at + 32);
        std::size_t local = r.u32(at + 42);
        Entry e;
        e.name = std::string(r.bytes(at + 46, name_len));
        at += 46 + name_len + extra_len + comment_len;

        if (flags & 0x1) throw ArchiveError("zip: encrypted member " + e.name);
        if (r.u32(local) != kLocalHeaderSig) throw ArchiveError("zip: bad local header for " + e.name);
        std::size_t data_at = local + 30 + r.u16(local + 26) + r.u16(local + 28);
        auto payload = r.bytes(data_at, csize);

        e.is_directory = !e.name.empty() && e.name.back() == '/';
        if (method == 0) {
            if (csize != usize) throw ArchiveError("zip: size mismatch for " + e.name);
            e.data = std::string(payload);
        } else if (method == 8) {
            e.data = inflate_raw(payload, usize);
        } else {
            throw ArchiveError("zip: unsupported compression method " + std::to_string(method));
        }
        auto actual = crc32(0L, reinterpret_cast<const Bytef*>(e.data.data()),
                            static_cast<uInt>(e.data.size()));
        if (actual != crc) throw ArchiveError("zip: CRC mismatch for " + e.name);
        entries.push_back(std::move(e));
    }
    return entries;
}

std::size_t extract(const std::vector<Entry>& entries, const std::filesystem::path& dest) {
    namespace fs = std::filesystem;

    // Common single top-level directory, e.g. "repo-master/".
    std::string prefix;
    bool shared = !entries.empty();
    for (const auto& e : entries) {
        auto slash = e.name.find('/');
        if (slash == std::string::npos) {
            shared = false;
            break;
        }
        auto head = e.name.substr(0, slash + 1);
        if (prefix.empty()) prefix = head;
        if (head != prefix) {
            shared = false;
            break;
        }
    }
    if (!shared) prefix.clear();

    fs::create_directories(dest);
    std::size_t files = 0;
    for (const auto& e : entries) {
        std::string_view name = e.name;
        name.remove_prefix(prefix.size());
        if (name.empty()) continue;
        fs::path rel = fs::path(std::string(name)).lexically_normal();
        if (escapes(rel)) throw ArchiveError("zip: entry escapes destination: " + e.name);
        if (e.is_directory) {
            fs::create_directories(dest / rel);
            continue;
        }
        write_file(dest / rel, e.data);
        ++files;
    }
    return files;
}

}  // namespace blocktune::zip
