#pragma once
// Phase II: epistemic graph construction. Context nodes anchor the query,
// spark nodes carry retrieved inspiration, and creative edges bridge them via
// the cognitive operators Mapping / Blending / Inversion under the
// no-context-to-context topology constraint.

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "prism/errors.hpp"
#include "prism/exploration.hpp"
#include "prism/line_grammar.hpp"
#include "prism/parallel.hpp"
#include "prism/prompts.hpp"
#include "prism/providers.hpp"
#include "prism/rng.hpp"

namespace prism {

struct ContextNode {
    std::string node_id;  // c0, c1, ... in sorted-label order
    std::string label;
    std::string description;
    std::string origin;  // the query
};

enum class SparkKind { mechanism, property, byproduct };

inline const char* to_string(SparkKind k) {
    switch (k) {
        case SparkKind::mechanism: return "mechanism";
        case SparkKind::property: return "property";
        case SparkKind::byproduct: return "byproduct";
    }
    return "mechanism";
}

inline std::optional<SparkKind> spark_kind_from(std::string_view s) {
    if (s == "mechanism") return SparkKind::mechanism;
    if (s == "property") return SparkKind::property;
    if (s == "byproduct") return SparkKind::byproduct;
    return std::nullopt;
}

struct SparkNode {
    std::string node_id;  // s0, s1, ... in sorted-label order
    std::string label;
    SparkKind kind = SparkKind::mechanism;
    std::string source_chunk;                // first contributing chunk
    std::vector<std::string> source_chunks;  // all contributing chunks
    std::string rationale;
};

enum class Operator { mapping, blending, inversion };

inline const char* to_string(Operator op) {
    switch (op) {
        case Operator::mapping: return "Mapping";
        case Operator::blending: return "Blending";
        case Operator::inversion: return "Inversion";
    }
    return "Mapping";
}

inline std::optional<Operator> operator_from(std::string_view s) {
    if (s == "Mapping") return Operator::mapping;
    if (s == "Blending") return Operator::blending;
    if (s == "Inversion") return Operator::inversion;
    return std::nullopt;
}

struct CreativeEdge {
    std::string src;
    std::string dst;
    Operator op = Operator::mapping;
    std::string bridge_text;
};

struct GraphProvenance {
    SeedSet seed_set;
    std::vector<std::string> chunk_ids;
    std::uint64_t rng_seed = 0;
    std::map<std::string, std::string> provider_ids;
};

struct EpistemicGraph {
    std::string query;
    std::vector<ContextNode> context_nodes;
    std::vector<SparkNode> spark_nodes;
    std::vector<CreativeEdge> edges;
    GraphProvenance provenance;
};

struct GraphBuildConfig {
    std::size_t spark_limit = 7;
    double temp_context = 0.0;
    double temp_spark = 0.3;
    double temp_bridge = 1.2;
    std::optional<std::size_t> edge_pair_budget;  // nullopt = all admissible pairs
    std::size_t fan_out = 8;
    std::size_t max_tokens = 512;

    void validate() const {
        require(spark_limit >= 1, "spark_limit must be >= 1");
        for (double t : {temp_context, temp_spark, temp_bridge})
            require(t >= 0.0 && t <= 2.0, "temperatures must be in [0,2]");
    }
};

namespace detail {

inline bool is_context_id(std::string_view id) { return !id.empty() && id.front() == 'c'; }
inline bool is_spark_id(std::string_view id) { return !id.empty() && id.front() == 's'; }

// Orders c0 < c1 < ... < c10 numerically; string compare would not.
inline bool id_less(const std::string& a, const std::string& b) {
    if (a.empty() || b.empty() || a.front() != b.front()) return a < b;
    const auto na = a.substr(1), nb = b.substr(1);
    if (na.size() != nb.size()) return na.size() < nb.size();
    return na < nb;
}

struct LabelLess {
    bool operator()(const std::string& a, const std::string& b) const {
        const std::string fa = ascii_casefold(a), fb = ascii_casefold(b);
        if (fa != fb) return fa < fb;
        return a < b;
    }
};

} // namespace detail

// Extracts context nodes from the query at temp_context. Ids are assigned in
// sorted-label order; duplicate labels merge to the first description.
inline std::vector<ContextNode> extract_context_nodes(const std::string& query,
                                                      ChatProvider& chat,
                                                      const GraphBuildConfig& cfg = {}) {
    require(!query.empty(), "query must be non-empty");
    cfg.validate();

    ChatRequest req;
    req.system_prompt = prompts::context_extraction_system();
    req.user_prompt = prompts::context_extraction_user(query);
    req.temperature = cfg.temp_context;
    req.max_tokens = cfg.max_tokens;
    auto parsed = chat_line_records(chat, req);
    if (!parsed.ok) throw ExtractionParseError("context extraction: " + parsed.error);

    std::map<std::string, std::string, detail::LabelLess> by_label;
    for (const auto& record : parsed.records) {
        auto label_it = record.find("LABEL");
        if (label_it == record.end() || label_it->second.empty())
            throw ExtractionParseError("context record without LABEL");
        std::string description;
        if (auto it = record.find("DESCRIPTION"); it != record.end()) description = it->second;
        by_label.emplace(label_it->second, description);  // first occurrence wins
    }

    std::vector<ContextNode> nodes;
    std::size_t i = 0;
    for (const auto& [label, description] : by_label) {
        ContextNode n;
        n.node_id = "c" + std::to_string(i++);
        n.label = label;
        n.description = description;
        n.origin = query;
        nodes.push_back(std::move(n));
    }
    return nodes;
}

// Runs the spark extractor over every chunk at temp_spark (bounded fan-out).
// A failing chunk is skipped, never the batch. Duplicate labels across chunks
// merge: first occurrence wins, provenance lists all contributing chunks.
inline std::vector<SparkNode> extract_spark_nodes(const std::vector<Chunk>& chunks,
                                                  const std::string& query, ChatProvider& chat,
                                                  const GraphBuildConfig& cfg = {},
                                                  std::vector<std::string>* warnings = nullptr) {
    require(!chunks.empty(), "extract_spark_nodes needs at least one chunk");
    cfg.validate();

    struct RawSpark {
        std::string label;
        SparkKind kind;
        std::string chunk_id;
        std::string rationale;
    };

    auto results = parallel_map(chunks, cfg.fan_out, [&](const Chunk& chunk) {
        ChatRequest req;
        req.system_prompt = prompts::spark_extraction_system();
        req.user_prompt = prompts::spark_extraction_user(query, chunk.text);
        req.temperature = cfg.temp_spark;
        req.max_tokens = cfg.max_tokens;
        auto parsed = chat_line_records(chat, req);
        if (!parsed.ok) throw ExtractionParseError("spark extraction: " + parsed.error);
        std::vector<RawSpark> sparks;
        for (const auto& record : parsed.records) {
            auto label_it = record.find("LABEL");
            auto kind_it = record.find("KIND");
            if (label_it == record.end() || label_it->second.empty() || kind_it == record.end())
                throw ExtractionParseError("spark record missing LABEL/KIND");
            auto kind = spark_kind_from(kind_it->second);
            if (!kind)
                throw ExtractionParseError("unknown spark kind '" + kind_it->second + "'");
            RawSpark s;
            s.label = label_it->second;
            s.kind = *kind;
            s.chunk_id = chunk.chunk_id;
            if (auto it = record.find("RATIONALE"); it != record.end()) s.rationale = it->second;
            sparks.push_back(std::move(s));
        }
        return sparks;
    });

    std::map<std::string, SparkNode, detail::LabelLess> by_label;
    for (std::size_t i = 0; i < chunks.size(); ++i) {
        if (!results[i].ok()) {
            if (warnings)
                warnings->push_back("chunk " + chunks[i].chunk_id +
                                    " skipped: " + describe_exception(results[i].error));
            continue;
        }
        for (const auto& raw : *results[i].value) {
            auto it = by_label.find(raw.label);
            if (it == by_label.end()) {
                SparkNode n;
                n.label = raw.label;
                n.kind = raw.kind;
                n.source_chunk = raw.chunk_id;
                n.source_chunks = {raw.chunk_id};
                n.rationale = raw.rationale;
                by_label.emplace(raw.label, std::move(n));
            } else if (std::find(it->second.source_chunks.begin(), it->second.source_chunks.end(),
                                 raw.chunk_id) == it->second.source_chunks.end()) {
                it->second.source_chunks.push_back(raw.chunk_id);
            }
        }
    }

    std::vector<SparkNode> nodes;
    std::size_t i = 0;
    for (auto& [label, node] : by_label) {
        node.node_id = "s" + std::to_string(i++);
        nodes.push_back(std::move(node));
    }
    return nodes;
}

// min(limit, |sparks|) nodes, uniform without replacement, deterministic.
// Selected nodes keep their extraction-assigned ids; output sorted by id.
inline std::vector<SparkNode> sample_spark_nodes(const std::vector<SparkNode>& sparks,
                                                 std::size_t limit, std::uint64_t rng_seed) {
    require(limit >= 1, "limit must be >= 1");
    Rng rng(rng_seed);
    auto picked = rng.sample(sparks, limit);
    std::sort(picked.begin(), picked.end(), [](const SparkNode& a, const SparkNode& b) {
        return detail::id_less(a.node_id, b.node_id);
    });
    return picked;
}

struct EdgeGenerationOutcome {
    std::vector<CreativeEdge> edges;
    std::vector<std::string> violations;  // discarded candidates and why
};

// Candidate pairs are all (context, spark) pairs then all (spark, spark)
// pairs, truncated to the budget. One bridging call per pair at temp_bridge.
// Responses may override SRC/DST; anything naming a context-context pair (or
// failing the grammar after one reprompt) is discarded, never fatal.
inline EdgeGenerationOutcome generate_edges(const std::vector<ContextNode>& context,
                                            const std::vector<SparkNode>& sparks,
                                            ChatProvider& chat,
                                            const GraphBuildConfig& cfg = {}) {
    require(!context.empty(), "generate_edges needs context nodes");
    cfg.validate();

    std::unordered_map<std::string, std::string> labels;  // id -> label
    for (const auto& c : context) labels[c.node_id] = c.label;
    for (const auto& s : sparks) labels[s.node_id] = s.label;

    std::vector<std::pair<std::string, std::string>> pairs;
    for (const auto& c : context)
        for (const auto& s : sparks) pairs.emplace_back(c.node_id, s.node_id);
    for (std::size_t i = 0; i < sparks.size(); ++i)
        for (std::size_t j = i + 1; j < sparks.size(); ++j)
            pairs.emplace_back(sparks[i].node_id, sparks[j].node_id);

    const std::size_t budget = cfg.edge_pair_budget.value_or(pairs.size());
    if (pairs.empty() && budget > 0)
        throw NoAdmissiblePairs("no candidate pairs: " + std::to_string(context.size()) +
                                " context node(s), " + std::to_string(sparks.size()) +
                                " spark node(s)");
    if (pairs.size() > budget) pairs.resize(budget);

    EdgeGenerationOutcome out;
    auto results = parallel_map(pairs, cfg.fan_out, [&](const auto& pair) -> LineParseResult {
        ChatRequest req;
        req.system_prompt = prompts::bridge_system();
        req.user_prompt = prompts::bridge_user(pair.first, labels.at(pair.first), pair.second,
                                               labels.at(pair.second));
        req.temperature = cfg.temp_bridge;
        req.max_tokens = cfg.max_tokens;
        return chat_line_records(chat, req);
    });

    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const auto& [qsrc, qdst] = pairs[i];
        const std::string pair_name = qsrc + "->" + qdst;
        if (!results[i].ok() || !results[i].value->ok) {
            out.violations.push_back("pair " + pair_name + ": " +
                                     (results[i].ok() ? results[i].value->error
                                                      : describe_exception(results[i].error)));
            continue;
        }
        const auto& record = results[i].value->records.front();
        auto op_it = record.find("OP");
        auto text_it = record.find("TEXT");
        if (op_it == record.end() || text_it == record.end() || text_it->second.empty()) {
            out.violations.push_back("pair " + pair_name + ": missing OP/TEXT");
            continue;
        }
        auto op = operator_from(op_it->second);
        if (!op) {
            out.violations.push_back("pair " + pair_name + ": unknown operator '" +
                                     op_it->second + "'");
            continue;
        }
        std::string src = qsrc, dst = qdst;
        if (auto it = record.find("SRC"); it != record.end()) src = it->second;
        if (auto it = record.find("DST"); it != record.end()) dst = it->second;
        if (!labels.count(src) || !labels.count(dst)) {
            out.violations.push_back("pair " + pair_name + ": unknown endpoint " + src + "/" + dst);
            continue;
        }
        if (src == dst) {
            out.violations.push_back("pair " + pair_name + ": self edge " + src);
            continue;
        }
        if (detail::is_context_id(src) && detail::is_context_id(dst)) {
            out.violations.push_back("pair " + pair_name + ": context-context edge " + src +
                                     "<->" + dst + " prohibited");
            continue;
        }
        if (detail::is_context_id(dst) && !detail::is_context_id(src)) std::swap(src, dst);
        CreativeEdge e;
        e.src = src;
        e.dst = dst;
        e.op = *op;
        e.bridge_text = text_it->second;
        out.edges.push_back(std::move(e));
    }

    std::sort(out.edges.begin(), out.edges.end(), [](const CreativeEdge& a, const CreativeEdge& b) {
        if (a.src != b.src) return detail::id_less(a.src, b.src);
        return detail::id_less(a.dst, b.dst);
    });
    return out;
}

// Reports every invariant violation; never throws. Empty result == valid.
inline std::vector<std::string> validate_topology(const EpistemicGraph& graph) {
    std::vector<std::string> violations;
    std::unordered_set<std::string> ids;
    for (const auto& n : graph.context_nodes) {
        if (n.label.empty()) violations.push_back("context node " + n.node_id + ": empty label");
        if (!ids.insert(n.node_id).second)
            violations.push_back("duplicate node id " + n.node_id);
    }
    std::unordered_set<std::string> spark_ids;
    for (const auto& n : graph.spark_nodes) {
        if (n.label.empty()) violations.push_back("spark node " + n.node_id + ": empty label");
        if (!ids.insert(n.node_id).second)
            violations.push_back("duplicate node id " + n.node_id);
        else
            spark_ids.insert(n.node_id);
    }
    std::unordered_set<std::string> context_ids;
    for (const auto& n : graph.context_nodes) context_ids.insert(n.node_id);

    for (const auto& e : graph.edges) {
        const std::string name = e.src + "->" + e.dst;
        if (!ids.count(e.src))
            violations.push_back("edge " + name + ": unknown endpoint " + e.src);
        if (!ids.count(e.dst))
            violations.push_back("edge " + name + ": unknown endpoint " + e.dst);
        if (e.src == e.dst) violations.push_back("edge " + name + ": self loop");
        if (context_ids.count(e.src) && context_ids.count(e.dst))
            violations.push_back("edge " + name + ": context-context connection prohibited (" +
                                 e.src + ", " + e.dst + ")");
        if (e.bridge_text.empty()) violations.push_back("edge " + name + ": empty bridge text");
    }
    return violations;
}

// Immutable assembly: validates the candidate and attaches provenance.
inline EpistemicGraph assemble_graph(const std::string& query,
                                     std::vector<ContextNode> context,
                                     std::vector<SparkNode> sparks,
                                     std::vector<CreativeEdge> edges,
                                     GraphProvenance provenance) {
    if (context.empty()) throw EmptyContext("graph for query '" + query + "' has no context nodes");
    EpistemicGraph g;
    g.query = query;
    g.context_nodes = std::move(context);
    g.spark_nodes = std::move(sparks);
    g.edges = std::move(edges);
    g.provenance = std::move(provenance);
    auto violations = validate_topology(g);
    if (!violations.empty()) throw TopologyViolation(std::move(violations));
    return g;
}

inline constexpr const char* kGraphSchema = "prism-graph/1";

inline nlohmann::json graph_to_json(const EpistemicGraph& g) {
    nlohmann::json context = nlohmann::json::array();
    for (const auto& n : g.context_nodes)
        context.push_back({{"node_id", n.node_id},
                           {"label", n.label},
                           {"description", n.description},
                           {"origin", n.origin}});
    nlohmann::json sparks = nlohmann::json::array();
    for (const auto& n : g.spark_nodes)
        sparks.push_back({{"node_id", n.node_id},
                          {"label", n.label},
                          {"kind", to_string(n.kind)},
                          {"source_chunk", n.source_chunk},
                          {"source_chunks", n.source_chunks},
                          {"rationale", n.rationale}});
    nlohmann::json edges = nlohmann::json::array();
    for (const auto& e : g.edges)
        edges.push_back({{"src", e.src},
                         {"dst", e.dst},
                         {"operator", to_string(e.op)},
                         {"bridge_text", e.bridge_text}});
    return {{"schema", kGraphSchema},
            {"query", g.query},
            {"context_nodes", context},
            {"spark_nodes", sparks},
            {"edges", edges},
            {"provenance",
             {{"seeds", g.provenance.seed_set.seeds},
              {"lexicon_id", g.provenance.seed_set.lexicon_id},
              {"chunk_ids", g.provenance.chunk_ids},
              {"rng_seed", g.provenance.rng_seed},
              {"rng_algorithm", Rng::kAlgorithm},
              {"provider_ids", g.provenance.provider_ids}}}};
}

inline EpistemicGraph graph_from_json(const nlohmann::json& j) {
    if (j.value("schema", "") != kGraphSchema)
        throw MalformedResponse("graph schema mismatch: expected " + std::string(kGraphSchema));
    EpistemicGraph g;
    g.query = j.at("query").get<std::string>();
    for (const auto& n : j.at("context_nodes")) {
        ContextNode c;
        c.node_id = n.at("node_id").get<std::string>();
        c.label = n.at("label").get<std::string>();
        c.description = n.value("description", "");
        c.origin = n.value("origin", g.query);
        g.context_nodes.push_back(std::move(c));
    }
    for (const auto& n : j.at("spark_nodes")) {
        SparkNode s;
        s.node_id = n.at("node_id").get<std::string>();
        s.label = n.at("label").get<std::string>();
        auto kind = spark_kind_from(n.value("kind", "mechanism"));
        s.kind = kind.value_or(SparkKind::mechanism);
        s.source_chunk = n.value("source_chunk", "");
        if (n.contains("source_chunks"))
            s.source_chunks = n.at("source_chunks").get<std::vector<std::string>>();
        s.rationale = n.value("rationale", "");
        g.spark_nodes.push_back(std::move(s));
    }
    for (const auto& e : j.at("edges")) {
        CreativeEdge edge;
        edge.src = e.at("src").get<std::string>();
        edge.dst = e.at("dst").get<std::string>();
        auto op = operator_from(e.at("operator").get<std::string>());
        if (!op) throw MalformedResponse("unknown operator in graph JSON");
        edge.op = *op;
        edge.bridge_text = e.value("bridge_text", "");
        g.edges.push_back(std::move(edge));
    }
    if (j.contains("provenance")) {
        const auto& p = j.at("provenance");
        g.provenance.seed_set.seeds = p.value("seeds", std::vector<std::string>{});
        g.provenance.seed_set.lexicon_id = p.value("lexicon_id", "");
        g.provenance.chunk_ids = p.value("chunk_ids", std::vector<std::string>{});
        g.provenance.rng_seed = p.value("rng_seed", std::uint64_t{0});
        if (p.contains("provider_ids"))
            g.provenance.provider_ids =
                p.at("provider_ids").get<std::map<std::string, std::string>>();
    }
    return g;
}

} // namespace prism
