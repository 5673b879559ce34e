#pragma once
// Content-addressed artifact store with a schema registry. Flat directory
// sharded by digest prefix, atomic writes, no database.

#include <filesystem>
#include <mutex>
#include <set>
#include <string>

#include "prism/errors.hpp"
#include "prism/fsio.hpp"
#include "prism/sha256.hpp"

namespace prism {

struct ArtifactRef {
    std::string digest;     // hex sha256 of the stored bytes
    std::string schema_id;
    std::string path;       // relative to the store root

    bool operator==(const ArtifactRef& other) const = default;
};

class ArtifactStore {
public:
    explicit ArtifactStore(std::filesystem::path root) : root_(std::move(root)) {
        for (const char* s : {"raw/1", "prism-graph/1", "prism-seeds/1", "prism-generation/1",
                              "prism-run-meta/1", "prism-manifest/1", "prism-report/1",
                              "prism-docs/1", "prism-chunks/1", "prism-cases/1"})
            schemas_.insert(s);
    }

    void register_schema(const std::string& schema_id) {
        std::lock_guard<std::mutex> lock(mu_);
        schemas_.insert(schema_id);
    }

    bool knows_schema(const std::string& schema_id) const {
        std::lock_guard<std::mutex> lock(mu_);
        return schemas_.count(schema_id) > 0;
    }

    ArtifactRef put(std::string_view bytes, const std::string& schema_id) {
        if (!knows_schema(schema_id)) throw UnknownSchema("schema '" + schema_id + "'");
        ArtifactRef ref;
        ref.digest = sha256_hex(bytes);
        ref.schema_id = schema_id;
        ref.path = "objects/" + ref.digest.substr(0, 2) + "/" + ref.digest.substr(2);
        const auto full = root_ / ref.path;
        if (!std::filesystem::exists(full)) write_file_atomic(full, bytes);
        return ref;
    }

    std::string get(const ArtifactRef& ref) const {
        const auto full = root_ / ref.path;
        if (!std::filesystem::exists(full)) throw NotFound("artifact " + ref.digest);
        std::string bytes = read_file(full);
        if (sha256_hex(bytes) != ref.digest)
            throw CorruptArtifact("artifact " + ref.digest + " failed hash verification");
        return bytes;
    }

    bool contains(const ArtifactRef& ref) const {
        return std::filesystem::exists(root_ / ref.path);
    }

    const std::filesystem::path& root() const { return root_; }

private:
    std::filesystem::path root_;
    mutable std::mutex mu_;
    std::set<std::string> schemas_;
};

} // namespace prism
