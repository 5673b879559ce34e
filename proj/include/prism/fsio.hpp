#pragma once
// Small filesystem helpers. Writes go through a temp file + atomic rename so
// concurrent writers of identical content are race-free.

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "prism/errors.hpp"
#include "prism/sha256.hpp"

namespace prism {

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    const fs::path tmp =
        path.parent_path() /
        (path.filename().string() + ".tmp." + sha256_hex(content).substr(0, 8) + "." +
         std::to_string(reinterpret_cast<std::uintptr_t>(&content)));
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw IoError("short write to " + tmp.string());
    }
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp);
        throw IoError("rename to " + path.string() + " failed: " + ec.message());
    }
}

} // namespace prism
