#pragma once
// Batch experiment runner: (prompt x mode x sample) cells with derived rng
// seeds, record-and-continue failure policy, deterministic manifests, and
// report assembly over the persisted records.

#include <algorithm>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "prism/errors.hpp"
#include "prism/fsio.hpp"
#include "prism/metrics.hpp"
#include "prism/mock_providers.hpp"
#include "prism/parallel.hpp"
#include "prism/synthesis.hpp"

namespace prism {

struct ExperimentSpec {
    std::string name = "experiment";
    std::vector<std::string> prompts;
    std::vector<GenerationMode> modes;
    std::size_t samples_per_prompt = 1;
    PipelineConfig base;     // per-cell mode and rng_seed are derived
    MetricsConfig metrics;
    std::uint64_t rng_seed = 0;
    std::size_t workers = 4;

    void validate() const {
        require(!prompts.empty(), "spec needs prompts");
        require(!modes.empty(), "spec needs modes");
        require(samples_per_prompt >= 1, "samples_per_prompt must be >= 1");
        base.validate();
        metrics.validate();
    }
};

inline nlohmann::json experiment_spec_to_json(const ExperimentSpec& spec) {
    nlohmann::json modes = nlohmann::json::array();
    for (auto m : spec.modes) modes.push_back(to_string(m));
    return {{"schema", "prism-experiment/1"},
            {"name", spec.name},
            {"prompts", spec.prompts},
            {"modes", modes},
            {"samples_per_prompt", spec.samples_per_prompt},
            {"configs", pipeline_config_to_json(spec.base)},
            {"metrics",
             {{"equivalence_threshold", spec.metrics.equivalence_threshold},
              {"patience", spec.metrics.patience},
              {"pca_dims", spec.metrics.pca_dims}}},
            {"rng_seed", spec.rng_seed},
            {"workers", spec.workers}};
}

inline ExperimentSpec experiment_spec_from_json(const nlohmann::json& j) {
    ExperimentSpec spec;
    spec.name = j.value("name", "experiment");
    spec.prompts = j.at("prompts").get<std::vector<std::string>>();
    for (const auto& m : j.at("modes")) {
        auto mode = generation_mode_from(m.get<std::string>());
        require(mode.has_value(), "unknown mode '" + m.get<std::string>() + "'");
        spec.modes.push_back(*mode);
    }
    spec.samples_per_prompt = j.value("samples_per_prompt", std::size_t{1});
    spec.rng_seed = j.value("rng_seed", std::uint64_t{0});
    spec.workers = j.value("workers", std::size_t{4});
    if (j.contains("configs")) {
        const auto& c = j["configs"];
        if (c.contains("exploration")) {
            const auto& e = c["exploration"];
            auto& x = spec.base.exploration;
            x.k = e.value("k", x.k);
            x.window = e.value("window", x.window);
            x.overlap = e.value("overlap", x.overlap);
            x.chunk_sample_n = e.value("chunk_sample_n", x.chunk_sample_n);
            x.per_seed_result_limit = e.value("per_seed_result_limit", x.per_seed_result_limit);
            x.retrieval_fan_out = e.value("retrieval_fan_out", x.retrieval_fan_out);
            x.min_body_chars = e.value("min_body_chars", x.min_body_chars);
            x.min_entropy_bits = e.value("min_entropy_bits", x.min_entropy_bits);
            x.max_link_density = e.value("max_link_density", x.max_link_density);
        }
        if (c.contains("graph")) {
            const auto& g = c["graph"];
            auto& x = spec.base.graph;
            x.spark_limit = g.value("spark_limit", x.spark_limit);
            x.temp_context = g.value("temp_context", x.temp_context);
            x.temp_spark = g.value("temp_spark", x.temp_spark);
            x.temp_bridge = g.value("temp_bridge", x.temp_bridge);
            if (g.contains("edge_pair_budget") && !g["edge_pair_budget"].is_null())
                x.edge_pair_budget = g["edge_pair_budget"].get<std::size_t>();
            x.fan_out = g.value("fan_out", x.fan_out);
            x.max_tokens = g.value("max_tokens", x.max_tokens);
        }
        if (c.contains("generation")) {
            const auto& g = c["generation"];
            auto& x = spec.base.generation;
            x.temperature = g.value("temperature", x.temperature);
            x.max_tokens = g.value("max_tokens", x.max_tokens);
            if (g.value("placement", "after_query") == std::string("before_query"))
                x.placement = GenerationConfig::Placement::before_query;
        }
    }
    if (j.contains("metrics")) {
        const auto& m = j["metrics"];
        spec.metrics.equivalence_threshold =
            m.value("equivalence_threshold", spec.metrics.equivalence_threshold);
        spec.metrics.patience = m.value("patience", spec.metrics.patience);
        spec.metrics.pca_dims = m.value("pca_dims", spec.metrics.pca_dims);
    }
    return spec;
}

// Derived per-cell seed; pairwise distinct across cells with overwhelming
// probability (sha256 mixing).
inline std::uint64_t mix_seed(std::uint64_t base, const std::string& prompt,
                              GenerationMode mode, std::size_t sample_index) {
    return sha256_prefix64("cell:" + std::to_string(base) + "|" + prompt + "|" +
                           to_string(mode) + "|" + std::to_string(sample_index));
}

struct CellOutcome {
    std::string prompt_id;
    std::string prompt;
    GenerationMode mode = GenerationMode::prism;
    std::size_t sample_index = 0;
    std::uint64_t rng_seed = 0;
    std::string run_id;
    bool ok = false;
    bool cached = false;
    std::string error;
};

struct RunManifest {
    std::string name;
    std::uint64_t rng_seed = 0;
    std::string configs_digest;
    std::map<std::string, std::string> provider_ids;
    std::uint64_t wall_clock_ms = 0;
    std::filesystem::path runs_root;
    std::vector<CellOutcome> cells;
    bool complete = false;
};

inline nlohmann::json manifest_to_json(const RunManifest& m) {
    nlohmann::json cells = nlohmann::json::array();
    for (const auto& c : m.cells) {
        cells.push_back({{"prompt_id", c.prompt_id},
                         {"prompt", c.prompt},
                         {"mode", to_string(c.mode)},
                         {"sample_index", c.sample_index},
                         {"rng_seed", c.rng_seed},
                         {"run_id", c.run_id},
                         {"status", c.ok ? "ok" : "failed"},
                         {"cached", c.cached},
                         {"error", c.error}});
    }
    return {{"schema", "prism-manifest/1"},
            {"name", m.name},
            {"rng_seed", m.rng_seed},
            {"configs_digest", m.configs_digest},
            {"provider_ids", m.provider_ids},
            {"wall_clock_ms", m.wall_clock_ms},
            {"runs_root", m.runs_root.string()},
            {"cells", cells},
            {"complete", m.complete}};
}

inline RunManifest manifest_from_json(const nlohmann::json& j) {
    RunManifest m;
    m.name = j.value("name", "");
    m.rng_seed = j.value("rng_seed", std::uint64_t{0});
    m.configs_digest = j.value("configs_digest", "");
    if (j.contains("provider_ids"))
        m.provider_ids = j.at("provider_ids").get<std::map<std::string, std::string>>();
    m.wall_clock_ms = j.value("wall_clock_ms", std::uint64_t{0});
    m.runs_root = j.value("runs_root", "");
    m.complete = j.value("complete", false);
    for (const auto& c : j.at("cells")) {
        CellOutcome cell;
        cell.prompt_id = c.at("prompt_id").get<std::string>();
        cell.prompt = c.at("prompt").get<std::string>();
        cell.mode = generation_mode_from(c.at("mode").get<std::string>())
                        .value_or(GenerationMode::prism);
        cell.sample_index = c.at("sample_index").get<std::size_t>();
        cell.rng_seed = c.at("rng_seed").get<std::uint64_t>();
        cell.run_id = c.at("run_id").get<std::string>();
        cell.ok = c.value("status", "") == "ok";
        cell.cached = c.value("cached", false);
        cell.error = c.value("error", "");
        m.cells.push_back(std::move(cell));
    }
    return m;
}

// Executes every (prompt, mode, sample) cell. Cells whose run directory is
// already complete are skipped (content-addressed reuse); failures are
// recorded per cell and never abort the experiment.
inline RunManifest run_experiment(const ExperimentSpec& spec, const Lexicon& lexicon,
                                  const Providers& providers,
                                  const std::filesystem::path& out_root,
                                  const NowFn& now = system_now_unix_ms) {
    spec.validate();
    const std::uint64_t started = now();

    struct CellPlan {
        std::string prompt_id;
        std::string prompt;
        GenerationMode mode;
        std::size_t sample_index;
        PipelineConfig cfg;
    };
    std::vector<CellPlan> plans;
    for (std::size_t p = 0; p < spec.prompts.size(); ++p) {
        for (auto mode : spec.modes) {
            for (std::size_t s = 0; s < spec.samples_per_prompt; ++s) {
                CellPlan plan;
                plan.prompt_id = "p" + std::to_string(p);
                plan.prompt = spec.prompts[p];
                plan.mode = mode;
                plan.sample_index = s;
                plan.cfg = spec.base;
                plan.cfg.mode = mode;
                plan.cfg.rng_seed = mix_seed(spec.rng_seed, spec.prompts[p], mode, s);
                plans.push_back(std::move(plan));
            }
        }
    }

    const std::filesystem::path runs_root = out_root / "runs";
    auto outcomes = parallel_map(plans, spec.workers, [&](const CellPlan& plan) {
        CellOutcome cell;
        cell.prompt_id = plan.prompt_id;
        cell.prompt = plan.prompt;
        cell.mode = plan.mode;
        cell.sample_index = plan.sample_index;
        cell.rng_seed = plan.cfg.rng_seed;
        cell.run_id = derive_run_id(plan.prompt, plan.cfg);
        const auto dir = runs_root / cell.run_id;
        if (std::filesystem::exists(dir / "generation.json") &&
            std::filesystem::exists(dir / "meta.json")) {
            cell.ok = true;
            cell.cached = true;
            return cell;
        }
        try {
            run_pipeline(plan.prompt, plan.cfg, lexicon, providers, runs_root, now);
            cell.ok = true;
        } catch (const std::exception& e) {
            cell.error = e.what();
        }
        return cell;
    });

    RunManifest manifest;
    manifest.name = spec.name;
    manifest.rng_seed = spec.rng_seed;
    manifest.configs_digest = sha256_hex(experiment_spec_to_json(spec).dump());
    if (providers.chat) manifest.provider_ids["chat"] = providers.chat->id();
    if (providers.embed) manifest.provider_ids["embed"] = providers.embed->id();
    if (providers.search) manifest.provider_ids["search"] = providers.search->id();
    manifest.runs_root = runs_root;
    manifest.complete = true;
    for (auto& o : outcomes) {
        manifest.cells.push_back(*o.value);  // run bodies never throw; errors are recorded
        if (!manifest.cells.back().ok) manifest.complete = false;
    }
    manifest.wall_clock_ms = now() - started;

    write_file_atomic(out_root / "manifest.json", manifest_to_json(manifest).dump(2) + "\n");
    return manifest;
}

struct ReportInputs {
    MetricsConfig metrics;
    std::shared_ptr<EmbedProvider> embed;
    std::vector<RankingOutcome> ranking_outcomes;  // optional; NIS omitted when empty
};

// Pure function of the persisted artifacts: distinct-k, intra/inter
// similarity summaries and projection CSVs per prompt, NIS when ranking
// outcomes exist. Regeneration is byte-identical (sorted keys).
inline nlohmann::json build_report(const RunManifest& manifest, const ReportInputs& inputs,
                                   const std::filesystem::path& out_dir) {
    inputs.metrics.validate();
    require(inputs.embed != nullptr, "report needs an embed provider");

    // (mode -> prompt_id -> outputs in sample order)
    std::map<std::string, std::map<std::string, std::vector<std::string>>> outputs;
    std::map<std::string, std::string> prompt_text;
    for (const auto& cell : manifest.cells) {
        if (!cell.ok) continue;
        const auto path = manifest.runs_root / cell.run_id / "generation.json";
        if (!std::filesystem::exists(path))
            throw MissingArtifacts("cell " + cell.run_id + " lacks generation.json");
        auto record = generation_record_from_json(nlohmann::json::parse(read_file(path)));
        outputs[to_string(cell.mode)][cell.prompt_id].push_back(record.output);
        prompt_text[cell.prompt_id] = cell.prompt;
    }
    if (outputs.empty()) throw MissingArtifacts("manifest has no successful cells");

    auto equivalent = embedding_equivalence(inputs.metrics.equivalence_threshold, inputs.embed);

    nlohmann::json modes_json = nlohmann::json::object();
    for (const auto& [mode, by_prompt] : outputs) {
        nlohmann::json distinct_per_prompt = nlohmann::json::object();
        double distinct_sum = 0.0;
        std::size_t distinct_count = 0;

        nlohmann::json intra_per_prompt = nlohmann::json::object();
        std::array<std::size_t, SimilarityHistogram::kBins> agg_bins{};
        std::size_t agg_negative = 0;
        double intra_mean_sum = 0.0;
        std::size_t intra_mean_count = 0;

        for (const auto& [prompt_id, texts] : by_prompt) {
            const auto d = distinct_k(texts, equivalent);
            distinct_per_prompt[prompt_id] = d;
            distinct_sum += static_cast<double>(d);
            ++distinct_count;

            if (texts.size() >= 2) {
                SampleSet set;
                set.model_id = mode;
                set.prompt_id = prompt_id;
                set.texts = texts;
                auto intra = intra_similarity(set, *inputs.embed);
                intra_per_prompt[prompt_id] = {
                    {"mean_cosine", intra.mean_off_diagonal},
                    {"histogram", intra.histogram.counts},
                    {"negative_clamped", intra.histogram.negative_clamped},
                    {"pairs", intra.histogram.total()}};
                for (std::size_t b = 0; b < agg_bins.size(); ++b)
                    agg_bins[b] += intra.histogram.counts[b];
                agg_negative += intra.histogram.negative_clamped;
                intra_mean_sum += intra.mean_off_diagonal;
                ++intra_mean_count;
            }
        }

        nlohmann::json mode_json = {
            {"distinct", {{"per_prompt", distinct_per_prompt},
                          {"mean", distinct_count ? distinct_sum / distinct_count : 0.0}}}};
        if (intra_mean_count > 0) {
            mode_json["intra_similarity"] = {
                {"per_prompt", intra_per_prompt},
                {"mean_of_means", intra_mean_sum / static_cast<double>(intra_mean_count)},
                {"histogram", agg_bins},
                {"negative_clamped", agg_negative}};
        }
        modes_json[mode] = mode_json;
    }

    // Inter-model similarity per prompt across modes, plus the mean matrix.
    std::vector<std::string> mode_labels;
    for (const auto& [mode, _] : outputs) mode_labels.push_back(mode);
    nlohmann::json inter_json;
    if (mode_labels.size() >= 2) {
        Matrix mean_matrix(mode_labels.size(), std::vector<double>(mode_labels.size(), 0.0));
        std::size_t contributing = 0;
        for (const auto& [prompt_id, _] : prompt_text) {
            std::vector<SampleSet> sets;
            bool all_present = true;
            for (const auto& mode : mode_labels) {
                auto it = outputs.at(mode).find(prompt_id);
                if (it == outputs.at(mode).end() || it->second.empty()) {
                    all_present = false;
                    break;
                }
                SampleSet set;
                set.model_id = mode;
                set.prompt_id = prompt_id;
                set.texts = it->second;
                sets.push_back(std::move(set));
            }
            if (!all_present) continue;
            auto matrix = inter_similarity(sets, *inputs.embed);
            for (std::size_t a = 0; a < mode_labels.size(); ++a)
                for (std::size_t b = 0; b < mode_labels.size(); ++b)
                    mean_matrix[a][b] += matrix.values[a][b];
            ++contributing;
        }
        if (contributing > 0) {
            for (auto& row : mean_matrix)
                for (auto& x : row) x /= static_cast<double>(contributing);
            inter_json = {{"labels", mode_labels},
                          {"mean_values", mean_matrix},
                          {"prompts_aggregated", contributing}};
        }
    }

    // Projection CSV per prompt over all samples of all modes.
    nlohmann::json projection_files = nlohmann::json::array();
    for (const auto& [prompt_id, _] : prompt_text) {
        std::vector<std::string> labels;
        std::vector<std::string> texts;
        for (const auto& mode : mode_labels) {
            auto it = outputs.at(mode).find(prompt_id);
            if (it == outputs.at(mode).end()) continue;
            for (const auto& t : it->second) {
                labels.push_back(mode);
                texts.push_back(t);
            }
        }
        if (texts.size() < 2) continue;
        auto vectors = inputs.embed->embed(texts);
        const std::size_t d = std::min<std::size_t>(inputs.metrics.pca_dims,
                                                    vectors.front().dimension());
        try {
            auto projection = pca_project(vectors, d);
            const std::string filename = "projection_" + prompt_id + ".csv";
            emit_projection(projection, labels, out_dir / filename);
            projection_files.push_back(filename);
        } catch (const DegenerateData&) {
            // identical outputs for every sample: nothing to project
        }
    }

    nlohmann::json report = {
        {"schema", "prism-report/1"},
        {"manifest",
         {{"name", manifest.name},
          {"configs_digest", manifest.configs_digest},
          {"rng_seed", manifest.rng_seed},
          {"complete", manifest.complete}}},
        {"metrics_config",
         {{"equivalence_threshold", inputs.metrics.equivalence_threshold},
          {"patience", inputs.metrics.patience},
          {"pca_dims", inputs.metrics.pca_dims}}},
        {"modes", modes_json},
        {"projection_files", projection_files}};
    if (!inter_json.is_null()) report["inter_similarity"] = inter_json;
    if (!inputs.ranking_outcomes.empty())
        report["novelty_insight_score"] = novelty_insight_score(inputs.ranking_outcomes);

    write_file_atomic(out_dir / "report.json", report.dump(2) + "\n");
    return report;
}

} // namespace prism
