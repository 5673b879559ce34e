#pragma once
// Phase III: deterministic graph serialization and graph-conditioned
// generation, plus the end-to-end pipeline composing all stages.

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "prism/errors.hpp"
#include "prism/exploration.hpp"
#include "prism/fsio.hpp"
#include "prism/graph.hpp"
#include "prism/prompts.hpp"
#include "prism/providers.hpp"

namespace prism {

inline constexpr const char* kSerialLayoutVersion = "prism-serial/1";

struct SerializedGraph {
    std::string text;
    std::string graph_hash;  // sha256 of the canonical graph JSON
    std::string layout_version = kSerialLayoutVersion;
};

// Fixed layout: header, CONTEXT NODES, SPARK NODES, BRIDGES. Equal graphs
// serialize to byte-identical text.
inline SerializedGraph serialize_graph(const EpistemicGraph& graph) {
    SerializedGraph out;
    out.graph_hash = sha256_hex(graph_to_json(graph).dump());

    std::string& t = out.text;
    t += "EPISTEMIC GRAPH (";
    t += kSerialLayoutVersion;
    t += ")\n";
    t += "QUERY: " + graph.query + "\n";
    t += "CONTEXT NODES:\n";
    for (const auto& n : graph.context_nodes) {
        t += n.node_id + " | " + n.label;
        if (!n.description.empty()) t += " | " + n.description;
        t += "\n";
    }
    t += "SPARK NODES:\n";
    for (const auto& n : graph.spark_nodes) {
        t += n.node_id + " | " + n.label + " | " + to_string(n.kind);
        if (!n.rationale.empty()) t += " | " + n.rationale;
        t += "\n";
    }
    t += "BRIDGES:\n";
    for (const auto& e : graph.edges) {
        t += e.src + " -[" + to_string(e.op) + "]-> " + e.dst + " : " + e.bridge_text + "\n";
    }
    return out;
}

enum class GenerationMode { vanilla, flat_rag, prism };

inline const char* to_string(GenerationMode m) {
    switch (m) {
        case GenerationMode::vanilla: return "vanilla";
        case GenerationMode::flat_rag: return "flat_rag";
        case GenerationMode::prism: return "prism";
    }
    return "prism";
}

inline std::optional<GenerationMode> generation_mode_from(std::string_view s) {
    if (s == "vanilla") return GenerationMode::vanilla;
    if (s == "flat_rag") return GenerationMode::flat_rag;
    if (s == "prism") return GenerationMode::prism;
    return std::nullopt;
}

struct GenerationConfig {
    double temperature = 1.0;
    std::size_t max_tokens = 1024;
    enum class Placement { after_query, before_query } placement = Placement::after_query;

    void validate() const {
        require(temperature >= 0.0 && temperature <= 2.0, "temperature must be in [0,2]");
        require(max_tokens >= 1, "max_tokens must be >= 1");
    }
};

struct GenerationRecord {
    std::string run_id;
    std::string query;
    GenerationMode mode = GenerationMode::prism;
    std::optional<SerializedGraph> serialized_graph;
    std::string output;
    std::string provider_id;
    double temperature = 1.0;
    std::string system_prompt;  // captured prompt, verbatim
    std::string user_prompt;
    std::uint64_t started_unix_ms = 0;
    std::uint64_t finished_unix_ms = 0;
    TokenUsage usage;
};

using NowFn = std::function<std::uint64_t()>;

inline std::uint64_t system_now_unix_ms() {
    return static_cast<std::uint64_t>(
        std::chrono::duration_cast<std::chrono::milliseconds>(
            std::chrono::system_clock::now().time_since_epoch())
            .count());
}

// Fixed clock for reproducible run directories under mocks.
inline NowFn fixed_clock(std::uint64_t value = 0) {
    return [value]() { return value; };
}

// One conditioned generation call. vanilla takes neither graph nor chunks,
// flat_rag takes raw chunk texts, prism takes the serialized graph.
inline GenerationRecord generate(const std::string& query,
                                 const std::optional<SerializedGraph>& graph,
                                 const std::optional<std::vector<std::string>>& chunk_texts,
                                 ChatProvider& chat, GenerationMode mode,
                                 const GenerationConfig& cfg = {},
                                 const NowFn& now = system_now_unix_ms) {
    cfg.validate();
    switch (mode) {
        case GenerationMode::vanilla:
            if (graph || chunk_texts)
                throw ModeArgumentMismatch("vanilla takes neither graph nor chunks");
            break;
        case GenerationMode::flat_rag:
            if (!chunk_texts) throw ModeArgumentMismatch("flat_rag requires chunk texts");
            if (graph) throw ModeArgumentMismatch("flat_rag does not take a graph");
            break;
        case GenerationMode::prism:
            if (!graph) throw ModeArgumentMismatch("prism requires a serialized graph");
            if (chunk_texts) throw ModeArgumentMismatch("prism does not take raw chunks");
            break;
    }

    GenerationRecord rec;
    rec.query = query;
    rec.mode = mode;
    rec.serialized_graph = graph;
    rec.temperature = cfg.temperature;

    std::string payload;
    if (mode == GenerationMode::prism) {
        payload = prompts::fence_evidence(graph->text);
    } else if (mode == GenerationMode::flat_rag) {
        std::string joined;
        for (std::size_t i = 0; i < chunk_texts->size(); ++i) {
            if (i) joined += "\n---\n";
            joined += (*chunk_texts)[i];
        }
        payload = prompts::fence_evidence(joined);
    }

    ChatRequest req;
    req.system_prompt = prompts::generation_system();
    const std::string query_line = "QUERY: " + query;
    if (payload.empty()) {
        req.user_prompt = query_line;
    } else if (cfg.placement == GenerationConfig::Placement::after_query) {
        req.user_prompt = query_line + "\n" + payload;
    } else {
        req.user_prompt = payload + "\n" + query_line;
    }
    req.temperature = cfg.temperature;
    req.max_tokens = cfg.max_tokens;

    rec.system_prompt = req.system_prompt;
    rec.user_prompt = req.user_prompt;
    rec.started_unix_ms = now();
    ChatResponse resp = chat.complete(req);
    rec.finished_unix_ms = now();
    if (resp.text.empty()) throw MalformedResponse("empty generation output");
    rec.output = resp.text;
    rec.provider_id = resp.provider_id;
    rec.usage = resp.usage;
    return rec;
}

struct PipelineConfig {
    ExplorationConfig exploration;
    GraphBuildConfig graph;
    GenerationConfig generation;
    GenerationMode mode = GenerationMode::prism;
    QueryMode query_mode = QueryMode::syntactic;
    std::uint64_t rng_seed = 0;
    // When set, lexical sampling is bypassed; used by the expert-panel flow
    // to inject semantic seed queries.
    std::optional<SeedSet> fixed_seeds;

    void validate() const {
        exploration.validate();
        graph.validate();
        generation.validate();
        if (fixed_seeds) require(!fixed_seeds->seeds.empty(), "fixed_seeds must be non-empty");
    }
};

inline nlohmann::json pipeline_config_to_json(const PipelineConfig& cfg) {
    nlohmann::json graph_budget;
    if (cfg.graph.edge_pair_budget) graph_budget = *cfg.graph.edge_pair_budget;
    return {{"exploration",
             {{"k", cfg.exploration.k},
              {"window", cfg.exploration.window},
              {"overlap", cfg.exploration.overlap},
              {"chunk_sample_n", cfg.exploration.chunk_sample_n},
              {"per_seed_result_limit", cfg.exploration.per_seed_result_limit},
              {"retrieval_fan_out", cfg.exploration.retrieval_fan_out},
              {"min_body_chars", cfg.exploration.min_body_chars},
              {"min_entropy_bits", cfg.exploration.min_entropy_bits},
              {"max_link_density", cfg.exploration.max_link_density}}},
            {"graph",
             {{"spark_limit", cfg.graph.spark_limit},
              {"temp_context", cfg.graph.temp_context},
              {"temp_spark", cfg.graph.temp_spark},
              {"temp_bridge", cfg.graph.temp_bridge},
              {"edge_pair_budget", graph_budget},
              {"fan_out", cfg.graph.fan_out},
              {"max_tokens", cfg.graph.max_tokens}}},
            {"generation",
             {{"temperature", cfg.generation.temperature},
              {"max_tokens", cfg.generation.max_tokens},
              {"placement",
               cfg.generation.placement == GenerationConfig::Placement::after_query
                   ? "after_query"
                   : "before_query"}}},
            {"mode", to_string(cfg.mode)},
            {"query_mode", cfg.query_mode == QueryMode::semantic ? "semantic" : "syntactic"},
            {"fixed_seeds", cfg.fixed_seeds ? nlohmann::json(cfg.fixed_seeds->seeds)
                                            : nlohmann::json(nullptr)},
            {"rng_seed", cfg.rng_seed},
            {"rng_algorithm", Rng::kAlgorithm}};
}

struct PipelineResult {
    std::string run_id;
    GenerationRecord record;
    SeedSet seeds;
    std::vector<RetrievedDoc> docs;  // after dedup + filter
    std::vector<Chunk> sampled_chunks;
    std::optional<EpistemicGraph> graph;
    std::optional<SerializedGraph> serialized;
    std::vector<std::string> warnings;
    nlohmann::json stage_counts;
};

namespace detail {

inline std::uint64_t stage_seed(std::uint64_t rng_seed, std::string_view stage) {
    return sha256_prefix64("stage:" + std::to_string(rng_seed) + ":" + std::string(stage));
}

template <class Fn>
auto run_stage(const char* name, Fn&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(name, e.what());
    }
}

} // namespace detail

inline std::string derive_run_id(const std::string& query, const PipelineConfig& cfg) {
    return "run-" + sha256_hex("run:" + query + "|" + pipeline_config_to_json(cfg).dump())
                        .substr(0, 16);
}

inline nlohmann::json generation_record_to_json(const GenerationRecord& rec) {
    nlohmann::json j = {{"schema", "prism-generation/1"},
                        {"run_id", rec.run_id},
                        {"query", rec.query},
                        {"mode", to_string(rec.mode)},
                        {"output", rec.output},
                        {"provider_id", rec.provider_id},
                        {"temperature", rec.temperature},
                        {"prompt", {{"system", rec.system_prompt}, {"user", rec.user_prompt}}},
                        {"started_unix_ms", rec.started_unix_ms},
                        {"finished_unix_ms", rec.finished_unix_ms},
                        {"usage",
                         {{"prompt_tokens", rec.usage.prompt_tokens},
                          {"completion_tokens", rec.usage.completion_tokens}}}};
    if (rec.serialized_graph) {
        j["serialized_graph"] = {{"graph_hash", rec.serialized_graph->graph_hash},
                                 {"layout_version", rec.serialized_graph->layout_version}};
    } else {
        j["serialized_graph"] = nullptr;
    }
    return j;
}

inline GenerationRecord generation_record_from_json(const nlohmann::json& j) {
    GenerationRecord rec;
    rec.run_id = j.value("run_id", "");
    rec.query = j.at("query").get<std::string>();
    rec.mode = generation_mode_from(j.value("mode", "prism")).value_or(GenerationMode::prism);
    rec.output = j.at("output").get<std::string>();
    rec.provider_id = j.value("provider_id", "");
    rec.temperature = j.value("temperature", 1.0);
    if (j.contains("prompt")) {
        rec.system_prompt = j["prompt"].value("system", "");
        rec.user_prompt = j["prompt"].value("user", "");
    }
    rec.started_unix_ms = j.value("started_unix_ms", std::uint64_t{0});
    rec.finished_unix_ms = j.value("finished_unix_ms", std::uint64_t{0});
    if (j.contains("serialized_graph") && !j["serialized_graph"].is_null()) {
        SerializedGraph sg;
        sg.graph_hash = j["serialized_graph"].value("graph_hash", "");
        sg.layout_version = j["serialized_graph"].value("layout_version", kSerialLayoutVersion);
        rec.serialized_graph = sg;
    }
    return rec;
}

// Executes the full pipeline for one query and, when run_root is given,
// persists every intermediate artifact under runs/<run_id>/.
inline PipelineResult run_pipeline(const std::string& query, const PipelineConfig& cfg,
                                   const Lexicon& lexicon, const Providers& providers,
                                   const std::optional<std::filesystem::path>& run_root = {},
                                   const NowFn& now = system_now_unix_ms) {
    require(!query.empty(), "query must be non-empty");
    cfg.validate();
    require(providers.chat != nullptr, "chat provider required");

    PipelineResult result;
    result.run_id = derive_run_id(query, cfg);
    result.stage_counts = nlohmann::json::object();

    const bool needs_retrieval = cfg.mode != GenerationMode::vanilla;
    if (needs_retrieval) {
        require(providers.search != nullptr, "search provider required");
        result.seeds = detail::run_stage("sample_seeds", [&] {
            if (cfg.fixed_seeds) return *cfg.fixed_seeds;
            return sample_seeds(lexicon, cfg.exploration.k,
                                detail::stage_seed(cfg.rng_seed, "seeds"));
        });

        auto queries = detail::run_stage("build_queries", [&] {
            return build_queries(result.seeds, query, cfg.query_mode);
        });

        auto retrieval = detail::run_stage("retrieve_all", [&] {
            return retrieve_all(queries, *providers.search, cfg.exploration.per_seed_result_limit,
                                cfg.exploration.retrieval_fan_out);
        });
        for (auto& w : retrieval.warnings) result.warnings.push_back(w);
        result.stage_counts["retrieved"] = retrieval.docs.size();

        auto deduped = detail::run_stage("dedup", [&] { return dedup(retrieval.docs); });
        result.stage_counts["after_dedup"] = deduped.size();

        result.docs = detail::run_stage("filter_content",
                                        [&] { return filter_content(deduped, cfg.exploration); });
        result.stage_counts["after_filter"] = result.docs.size();

        auto chunks = detail::run_stage("chunk_docs", [&] {
            return chunk_docs(result.docs, cfg.exploration.window, cfg.exploration.overlap);
        });
        result.stage_counts["chunks"] = chunks.size();

        result.sampled_chunks = detail::run_stage("sample_chunks", [&] {
            if (chunks.empty()) return std::vector<Chunk>{};
            return sample_chunks(chunks, cfg.exploration.chunk_sample_n,
                                 detail::stage_seed(cfg.rng_seed, "chunk-sample"));
        });
        result.stage_counts["sampled_chunks"] = result.sampled_chunks.size();
    }

    if (cfg.mode == GenerationMode::prism) {
        auto context = detail::run_stage("extract_context_nodes", [&] {
            return extract_context_nodes(query, *providers.chat, cfg.graph);
        });

        std::vector<SparkNode> sparks;
        if (!result.sampled_chunks.empty()) {
            auto all_sparks = detail::run_stage("extract_spark_nodes", [&] {
                return extract_spark_nodes(result.sampled_chunks, query, *providers.chat,
                                           cfg.graph, &result.warnings);
            });
            sparks = detail::run_stage("sample_spark_nodes", [&] {
                if (all_sparks.empty()) return std::vector<SparkNode>{};
                return sample_spark_nodes(all_sparks, cfg.graph.spark_limit,
                                          detail::stage_seed(cfg.rng_seed, "spark-sample"));
            });
        }
        if (sparks.empty())
            result.warnings.push_back("graph degenerated to context-only: no spark nodes");

        std::vector<CreativeEdge> edges;
        if (!sparks.empty()) {
            auto outcome = detail::run_stage("generate_edges", [&] {
                return generate_edges(context, sparks, *providers.chat, cfg.graph);
            });
            edges = std::move(outcome.edges);
            for (auto& v : outcome.violations)
                result.warnings.push_back("edge discarded: " + v);
        }

        GraphProvenance prov;
        prov.seed_set = result.seeds;
        for (const auto& c : result.sampled_chunks) prov.chunk_ids.push_back(c.chunk_id);
        prov.rng_seed = cfg.rng_seed;
        prov.provider_ids["chat"] = providers.chat->id();
        if (providers.search) prov.provider_ids["search"] = providers.search->id();
        if (providers.embed) prov.provider_ids["embed"] = providers.embed->id();

        result.graph = detail::run_stage("assemble_graph", [&] {
            return assemble_graph(query, std::move(context), std::move(sparks), std::move(edges),
                                  std::move(prov));
        });
        result.serialized =
            detail::run_stage("serialize_graph", [&] { return serialize_graph(*result.graph); });
        result.stage_counts["context_nodes"] = result.graph->context_nodes.size();
        result.stage_counts["spark_nodes"] = result.graph->spark_nodes.size();
        result.stage_counts["edges"] = result.graph->edges.size();
    }

    result.record = detail::run_stage("generate", [&] {
        std::optional<std::vector<std::string>> chunk_texts;
        if (cfg.mode == GenerationMode::flat_rag) {
            chunk_texts.emplace();
            for (const auto& c : result.sampled_chunks) chunk_texts->push_back(c.text);
        }
        return generate(query, result.serialized, chunk_texts, *providers.chat, cfg.mode,
                        cfg.generation, now);
    });
    result.record.run_id = result.run_id;

    if (run_root) {
        const std::filesystem::path dir = *run_root / result.run_id;
        detail::run_stage("persist", [&] {
            nlohmann::json seeds_json = {{"schema", "prism-seeds/1"},
                                         {"seeds", result.seeds.seeds},
                                         {"rng_seed", result.seeds.rng_seed},
                                         {"lexicon_id", result.seeds.lexicon_id}};
            write_file_atomic(dir / "seeds.json", seeds_json.dump(2) + "\n");

            std::string docs_lines;
            for (const auto& d : result.docs) {
                nlohmann::json dj = {{"url", d.url},
                                     {"content_hash", d.content_hash},
                                     {"seed_origin", d.seed_origin},
                                     {"body", d.body}};
                docs_lines += dj.dump() + "\n";
            }
            write_file_atomic(dir / "docs.jsonl", docs_lines);

            std::string chunk_lines;
            for (const auto& c : result.sampled_chunks) {
                nlohmann::json cj = {{"chunk_id", c.chunk_id},
                                     {"url", c.url},
                                     {"content_hash", c.content_hash},
                                     {"start_token", c.start_token},
                                     {"token_len", c.token_len},
                                     {"text", c.text}};
                chunk_lines += cj.dump() + "\n";
            }
            write_file_atomic(dir / "chunks.jsonl", chunk_lines);

            if (result.graph)
                write_file_atomic(dir / "graph.json", graph_to_json(*result.graph).dump(2) + "\n");
            if (result.serialized) write_file_atomic(dir / "serialized.txt", result.serialized->text);

            write_file_atomic(dir / "generation.json",
                              generation_record_to_json(result.record).dump(2) + "\n");

            nlohmann::json provider_ids = nlohmann::json::object();
            provider_ids["chat"] = providers.chat->id();
            if (providers.search) provider_ids["search"] = providers.search->id();
            if (providers.embed) provider_ids["embed"] = providers.embed->id();
            nlohmann::json meta = {{"schema", "prism-run-meta/1"},
                                   {"run_id", result.run_id},
                                   {"query", query},
                                   {"mode", to_string(cfg.mode)},
                                   {"configs", pipeline_config_to_json(cfg)},
                                   {"provider_ids", provider_ids},
                                   {"stage_counts", result.stage_counts},
                                   {"warnings", result.warnings},
                                   {"generated_unix_ms", result.record.finished_unix_ms}};
            write_file_atomic(dir / "meta.json", meta.dump(2) + "\n");
            return 0;
        });
    }
    return result;
}

} // namespace prism
