#pragma once

#include "blocktune/error.hpp"

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace blocktune::zip {

class ArchiveError : public Error {
public:
    using Error::Error;
};

struct Entry {
    std::string name;  // forward-slash path as stored in the archive
    std::string data;
    bool is_directory = false;
};

// Decodes every entry of a zip archive held in memory. Supports stored and
// deflated members; CRCs are verified. Throws ArchiveError on any damage.
std::vector<Entry> read_archive(std::string_view archive);

// Writes the entries below dest. A single top-level directory shared by all
// entries (the layout of hosted repository snapshots) is stripped. Entry
// names that would escape dest are rejected. Returns the number of files.
std::size_t extract(const std::vector<Entry>& entries, const std::filesystem::path& dest);

}  // namespace blocktune::zip
