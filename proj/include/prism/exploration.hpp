#pragma once
// Phase I: stochastic lexical seeding, parallel wild retrieval and the corpus
// hygiene pipeline (dedup, content filter, sliding-window chunking).

#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <unordered_set>
#include <vector>

#include "prism/errors.hpp"
#include "prism/parallel.hpp"
#include "prism/providers.hpp"
#include "prism/rng.hpp"
#include "prism/sha256.hpp"
#include "prism/text.hpp"

namespace prism {

struct Lexicon {
    std::vector<std::string> nouns;
    std::string source_id = "general";
};

// Lexicon file: UTF-8, one noun per line, '#' starts a comment.
// Entries are deduplicated after case-folding.
inline Lexicon load_lexicon(const std::filesystem::path& path, std::string source_id = "general") {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read lexicon " + path.string());
    Lexicon lex;
    lex.source_id = std::move(source_id);
    std::unordered_set<std::string> seen;
    std::string line;
    while (std::getline(in, line)) {
        if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        std::string noun = trim(line);
        if (noun.empty()) continue;
        if (seen.insert(ascii_casefold(noun)).second) lex.nouns.push_back(noun);
    }
    require(!lex.nouns.empty(), "lexicon is empty: " + path.string());
    return lex;
}

struct SeedSet {
    std::vector<std::string> seeds;
    std::uint64_t rng_seed = 0;
    std::string lexicon_id;
};

struct RetrievedDoc {
    std::string url;
    std::string body;
    std::string content_hash;  // hex sha256 of normalize_for_hash(body)
    std::string seed_origin;
};

struct Chunk {
    std::string url;
    std::string content_hash;
    std::size_t start_token = 0;
    std::size_t token_len = 0;
    std::string text;
    std::string chunk_id;
};

struct ExplorationConfig {
    std::size_t k = 3;                      // seed count
    std::size_t window = 400;               // tokens per chunk
    std::size_t overlap = 80;               // tokens shared by consecutive chunks
    std::size_t chunk_sample_n = 8;
    std::size_t per_seed_result_limit = 10;
    std::size_t retrieval_fan_out = 8;
    // content filter thresholds
    std::size_t min_body_chars = 200;
    double min_entropy_bits = 2.5;
    double max_link_density = 0.5;

    void validate() const {
        require(k >= 1, "k must be >= 1");
        require(overlap < window, "overlap must be < window");
        require(chunk_sample_n >= 1, "chunk_sample_n must be >= 1");
    }
};

// k distinct nouns, uniform without replacement, deterministic per rng_seed.
inline SeedSet sample_seeds(const Lexicon& lexicon, std::size_t k, std::uint64_t rng_seed) {
    require(k >= 1, "k must be >= 1");
    if (k > lexicon.nouns.size())
        throw LexiconTooSmall("need " + std::to_string(k) + " nouns, lexicon has " +
                              std::to_string(lexicon.nouns.size()));
    Rng rng(rng_seed);
    SeedSet out;
    out.seeds = rng.sample(lexicon.nouns, k);
    out.rng_seed = rng_seed;
    out.lexicon_id = lexicon.source_id;
    return out;
}

enum class QueryMode { syntactic, semantic };

// syntactic: "<seed> <query-keywords>"; semantic: expert-authored seed strings
// pass through verbatim. One query per seed, order preserved.
inline std::vector<std::string> build_queries(const SeedSet& seed_set, const std::string& query,
                                              QueryMode mode) {
    std::vector<std::string> out;
    out.reserve(seed_set.seeds.size());
    for (const auto& seed : seed_set.seeds) {
        if (mode == QueryMode::semantic) {
            out.push_back(seed);
        } else {
            std::string q = seed;
            const std::string keywords = trim(query);
            if (!keywords.empty()) q += " " + keywords;
            out.push_back(q);
        }
    }
    return out;
}

inline std::string content_hash_of(const std::string& body) {
    return sha256_hex(normalize_for_hash(body));
}

struct RetrievalOutcome {
    std::vector<RetrievedDoc> docs;
    std::vector<std::string> warnings;  // one per failed query
};

// Issues all queries with bounded fan-out and merges results in query order.
// A failed query degrades to an empty contribution; only the case where every
// query failed aborts.
inline RetrievalOutcome retrieve_all(const std::vector<std::string>& queries,
                                     SearchProvider& search, std::size_t limit,
                                     std::size_t fan_out = 8) {
    require(!queries.empty(), "retrieve_all needs at least one query");
    auto results = parallel_map(queries, fan_out, [&](const std::string& q) {
        return search.search(q, limit);
    });

    RetrievalOutcome out;
    std::size_t failures = 0;
    for (std::size_t i = 0; i < queries.size(); ++i) {
        if (!results[i].ok()) {
            ++failures;
            out.warnings.push_back("query '" + queries[i] +
                                   "' failed: " + describe_exception(results[i].error));
            continue;
        }
        for (const auto& hit : *results[i].value) {
            RetrievedDoc doc;
            doc.url = hit.url;
            doc.body = hit.snippet_or_body;
            doc.content_hash = content_hash_of(doc.body);
            doc.seed_origin = queries[i];
            out.docs.push_back(std::move(doc));
        }
    }
    if (failures == queries.size())
        throw AllQueriesFailed("all " + std::to_string(failures) + " queries failed");
    return out;
}

// First occurrence kept under (a) canonical URL equality, then (b) content
// hash equality. Stable order, idempotent.
inline std::vector<RetrievedDoc> dedup(const std::vector<RetrievedDoc>& docs) {
    std::vector<RetrievedDoc> out;
    std::unordered_set<std::string> urls, hashes;
    for (const auto& doc : docs) {
        if (!urls.insert(canonicalize_url(doc.url)).second) continue;
        if (!hashes.insert(doc.content_hash).second) continue;
        out.push_back(doc);
    }
    return out;
}

// Drops navigational/commercial/low-entropy pages by heuristic: short bodies,
// low byte entropy, or link-marker dominated line structure.
inline std::vector<RetrievedDoc> filter_content(const std::vector<RetrievedDoc>& docs,
                                               const ExplorationConfig& cfg = {}) {
    std::vector<RetrievedDoc> out;
    for (const auto& doc : docs) {
        if (doc.body.size() < cfg.min_body_chars) continue;
        if (shannon_entropy_bits(doc.body) < cfg.min_entropy_bits) continue;
        if (link_marker_density(doc.body) > cfg.max_link_density) continue;
        out.push_back(doc);
    }
    return out;
}

// Sliding-window chunking over whitespace tokens. Windows start at multiples
// of stride = window - overlap and the final window clamps to the document
// end; iteration stops once a window has reached the end, so every token is
// covered and no fully-redundant tail window is emitted.
inline std::vector<Chunk> chunk_docs(const std::vector<RetrievedDoc>& docs, std::size_t window,
                                     std::size_t overlap) {
    require(overlap < window, "overlap must be < window");
    const std::size_t stride = window - overlap;
    std::vector<Chunk> chunks;
    for (const auto& doc : docs) {
        const auto tokens = tokenize_ws(doc.body);
        const std::size_t n = tokens.size();
        for (std::size_t start = 0; start < n; start += stride) {
            const std::size_t len = std::min(window, n - start);
            Chunk c;
            c.url = doc.url;
            c.content_hash = doc.content_hash;
            c.start_token = start;
            c.token_len = len;
            std::vector<std::string> slice(tokens.begin() + static_cast<std::ptrdiff_t>(start),
                                           tokens.begin() + static_cast<std::ptrdiff_t>(start + len));
            c.text = join(slice, " ");
            c.chunk_id = doc.content_hash.substr(0, 12) + ":" + std::to_string(start);
            chunks.push_back(std::move(c));
            if (start + window >= n) break;  // final window reached the end
        }
    }
    return chunks;
}

// min(n, |chunks|) chunks, uniform without replacement, deterministic.
inline std::vector<Chunk> sample_chunks(const std::vector<Chunk>& chunks, std::size_t n,
                                        std::uint64_t rng_seed) {
    require(n >= 1, "n must be >= 1");
    Rng rng(rng_seed);
    return rng.sample(chunks, n);
}

} // namespace prism
