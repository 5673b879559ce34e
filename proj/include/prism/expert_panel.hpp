#pragma once
// PRISM(Expert): a virtual five-specialist consultation panel that turns a
// phenotype case into semantic seed queries and hypothesis nominations, plus
// HPO synonym expansion. The ground-truth diagnosis never enters any prompt
// authored here.

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "prism/errors.hpp"
#include "prism/exploration.hpp"
#include "prism/line_grammar.hpp"
#include "prism/metrics.hpp"
#include "prism/parallel.hpp"
#include "prism/prompts.hpp"
#include "prism/providers.hpp"
#include "prism/synthesis.hpp"

namespace prism {

struct ExpertPersona {
    std::string persona_id;
    std::string specialty;
    std::string focus;
    std::string prompt_template;
};

inline std::vector<ExpertPersona> default_personas() {
    auto make = [](std::string id, std::string specialty, std::string focus) {
        ExpertPersona p;
        p.persona_id = std::move(id);
        p.specialty = std::move(specialty);
        p.focus = std::move(focus);
        p.prompt_template = prompts::expert_system(p.persona_id, p.specialty, p.focus);
        return p;
    };
    return {
        make("clinical-geneticist", "clinical geneticist",
             "You focus on inheritance patterns and genetic etiologies consistent with the "
             "phenotype combination."),
        make("pediatric-neurologist", "pediatric neurologist",
             "You analyze brain involvement: movement disorders, tone abnormalities and "
             "encephalopathy signs."),
        make("metabolic-specialist", "metabolic specialist",
             "You interpret biochemical markers and metabolite abnormalities and their "
             "differential meaning."),
        make("pediatric-intensivist", "pediatric intensivist",
             "You evaluate acute crises: decompensation triggers, their tempo and severity."),
        make("immunologist", "immunologist",
             "You consider systemic and immune-mediated manifestations across organ systems."),
    };
}

struct HpoTerm {
    std::string code;   // HP:nnnnnnn
    std::string label;
};

struct DiagnosisCase {
    std::string case_id;
    std::vector<HpoTerm> phenotypes;
    std::string truth;  // held out from every prompt
};

inline bool valid_hpo_code(std::string_view code) {
    if (code.size() != 10 || !code.starts_with("HP:")) return false;
    for (std::size_t i = 3; i < code.size(); ++i)
        if (!std::isdigit(static_cast<unsigned char>(code[i]))) return false;
    return true;
}

struct OntologyEntry {
    std::string label;
    std::vector<std::string> synonyms;
};

struct OntologyIndex {
    std::string version;
    std::map<std::string, OntologyEntry> terms;

    std::optional<OntologyEntry> lookup(const std::string& code) const {
        auto it = terms.find(code);
        if (it == terms.end()) return std::nullopt;
        return it->second;
    }
};

// Ontology JSON: {version, terms: [{id, label, synonyms: [...]}, ...]}.
inline OntologyIndex load_ontology(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw OntologyParseError("cannot read " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw OntologyParseError("bad ontology JSON: " + std::string(e.what()));
    }
    OntologyIndex index;
    try {
        index.version = j.value("version", "unversioned");
        for (const auto& term : j.at("terms")) {
            const auto id = term.at("id").get<std::string>();
            if (!valid_hpo_code(id))
                throw OntologyParseError("bad HPO code '" + id + "'");
            OntologyEntry entry;
            entry.label = term.at("label").get<std::string>();
            if (term.contains("synonyms"))
                entry.synonyms = term.at("synonyms").get<std::vector<std::string>>();
            index.terms.emplace(id, std::move(entry));
        }
    } catch (const nlohmann::json::exception& e) {
        throw OntologyParseError("ontology shape: " + std::string(e.what()));
    }
    return index;
}

// Per phenotype: its label, the ontology label when it differs, then all
// synonyms. Deduplicated case-insensitively, order stable.
inline std::vector<std::string> expand_synonyms(const DiagnosisCase& diagnosis_case,
                                                const OntologyIndex& ontology) {
    std::vector<std::string> out;
    std::set<std::string> seen;
    auto add = [&](const std::string& s) {
        if (s.empty()) return;
        if (seen.insert(ascii_casefold(s)).second) out.push_back(s);
    };
    for (const auto& phenotype : diagnosis_case.phenotypes) {
        add(phenotype.label);
        if (auto entry = ontology.lookup(phenotype.code)) {
            add(entry->label);
            for (const auto& syn : entry->synonyms) add(syn);
        }
    }
    return out;
}

struct ExpertNomination {
    std::string persona_id;
    std::vector<std::string> hypotheses;  // ordered, most likely first
    std::string rationale;
    std::vector<std::string> seed_queries;
};

inline std::string format_case_prompt(const DiagnosisCase& diagnosis_case) {
    std::string phenos;
    for (std::size_t i = 0; i < diagnosis_case.phenotypes.size(); ++i) {
        if (i) phenos += ", ";
        phenos += diagnosis_case.phenotypes[i].label + " (" + diagnosis_case.phenotypes[i].code + ")";
    }
    return "CASE: " + diagnosis_case.case_id + "\nPHENOTYPES: " + phenos;
}

// One consultation call per persona (concurrent). Truth is withheld. A
// persona whose response fails the grammar after the reprompt is dropped.
inline std::vector<ExpertNomination> consult_panel(const DiagnosisCase& diagnosis_case,
                                                   const std::vector<ExpertPersona>& personas,
                                                   ChatProvider& chat,
                                                   std::vector<std::string>* warnings = nullptr,
                                                   double temperature = 0.3,
                                                   std::size_t fan_out = 8) {
    require(!personas.empty(), "consult_panel needs personas");
    const std::string user = format_case_prompt(diagnosis_case);

    auto results = parallel_map(personas, fan_out, [&](const ExpertPersona& persona) {
        ChatRequest req;
        req.system_prompt = persona.prompt_template;
        req.user_prompt = user;
        req.temperature = temperature;
        auto parsed = chat_line_records(chat, req);
        if (!parsed.ok) throw ExtractionParseError(persona.persona_id + ": " + parsed.error);
        ExpertNomination nomination;
        nomination.persona_id = persona.persona_id;
        for (const auto& record : parsed.records) {
            if (auto it = record.find("HYPOTHESIS"); it != record.end() && !it->second.empty())
                nomination.hypotheses.push_back(it->second);
            if (auto it = record.find("QUERY"); it != record.end() && !it->second.empty())
                nomination.seed_queries.push_back(it->second);
            if (auto it = record.find("RATIONALE"); it != record.end() && !it->second.empty())
                nomination.rationale = it->second;
        }
        if (nomination.hypotheses.empty())
            throw ExtractionParseError(persona.persona_id + ": no HYPOTHESIS line");
        return nomination;
    });

    std::vector<ExpertNomination> nominations;
    for (std::size_t i = 0; i < personas.size(); ++i) {
        if (results[i].ok()) {
            nominations.push_back(std::move(*results[i].value));
        } else if (warnings) {
            warnings->push_back("persona " + personas[i].persona_id +
                                " dropped: " + describe_exception(results[i].error));
        }
    }
    if (nominations.empty()) throw AllExpertsFailed("every persona consultation failed");
    return nominations;
}

// Round-robin interleave of per-persona seed queries, then one phenotype-only
// query built from the synonym expansions, truncated to per_case_limit.
inline std::vector<std::string> aggregate_seed_queries(
    const std::vector<ExpertNomination>& nominations, const std::vector<std::string>& expansions,
    std::size_t per_case_limit = 5) {
    require(!nominations.empty(), "aggregate_seed_queries needs nominations");
    std::vector<std::string> out;
    std::set<std::string> seen;
    std::size_t round = 0;
    for (bool emitted = true; emitted; ++round) {
        emitted = false;
        for (const auto& nomination : nominations) {
            if (round < nomination.seed_queries.size()) {
                emitted = true;
                const auto& q = nomination.seed_queries[round];
                if (seen.insert(ascii_casefold(q)).second) out.push_back(q);
            }
        }
    }
    if (!expansions.empty()) out.push_back(join(expansions, " "));
    if (out.size() > per_case_limit) out.resize(per_case_limit);
    return out;
}

// Vote tally over nominated hypotheses (case-insensitive), first-seen label
// kept, ordered by votes then first nomination.
inline std::vector<std::pair<std::string, std::size_t>> tally_hypotheses(
    const std::vector<ExpertNomination>& nominations) {
    std::vector<std::pair<std::string, std::size_t>> tally;
    std::map<std::string, std::size_t> index;  // casefolded -> position
    for (const auto& nomination : nominations) {
        for (const auto& h : nomination.hypotheses) {
            const std::string key = ascii_casefold(h);
            auto it = index.find(key);
            if (it == index.end()) {
                index.emplace(key, tally.size());
                tally.emplace_back(h, 1);
            } else {
                ++tally[it->second].second;
            }
        }
    }
    std::stable_sort(tally.begin(), tally.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    return tally;
}

struct DiagnoseOptions {
    PipelineConfig pipeline;
    std::size_t top_n = 10;
    std::size_t per_case_limit = 5;
    double panel_temperature = 0.3;
};

struct DiagnoseOutcome {
    DiagnosisResult result;
    std::vector<ExpertNomination> nominations;
    std::vector<std::pair<std::string, std::size_t>> hypothesis_votes;
    PipelineResult pipeline;
    std::vector<std::string> warnings;
};

// Full PRISM(Expert) flow: panel -> semantic seeds -> pipeline -> ranked
// differential. The truth label is never placed in any prompt; retrieved
// evidence and model nominations travel inside fenced evidence blocks.
inline DiagnoseOutcome diagnose(const DiagnosisCase& diagnosis_case,
                                const std::vector<ExpertPersona>& personas,
                                const OntologyIndex& ontology, const Providers& providers,
                                const DiagnoseOptions& options,
                                const std::optional<std::filesystem::path>& run_root = {},
                                const NowFn& now = system_now_unix_ms) {
    require(!diagnosis_case.phenotypes.empty(), "case needs at least one phenotype");
    try {
        DiagnoseOutcome outcome;
        const auto expansions = expand_synonyms(diagnosis_case, ontology);
        outcome.nominations = consult_panel(diagnosis_case, personas, *providers.chat,
                                            &outcome.warnings, options.panel_temperature);
        outcome.hypothesis_votes = tally_hypotheses(outcome.nominations);

        auto queries =
            aggregate_seed_queries(outcome.nominations, expansions, options.per_case_limit);

        PipelineConfig cfg = options.pipeline;
        cfg.mode = GenerationMode::prism;
        cfg.query_mode = QueryMode::semantic;
        SeedSet seeds;
        seeds.seeds = queries;
        seeds.rng_seed = cfg.rng_seed;
        seeds.lexicon_id = "expert-panel";
        cfg.fixed_seeds = seeds;

        std::string phenos;
        for (std::size_t i = 0; i < diagnosis_case.phenotypes.size(); ++i) {
            if (i) phenos += ", ";
            phenos += diagnosis_case.phenotypes[i].label + " (" +
                      diagnosis_case.phenotypes[i].code + ")";
        }
        const std::string query =
            "Diagnose the rare disease based on the following patient phenotypes: " + phenos;

        Lexicon unused;  // sampling is bypassed via fixed_seeds
        unused.nouns = {"placeholder"};
        outcome.pipeline = run_pipeline(query, cfg, unused, providers, run_root, now);

        std::string evidence;
        evidence += "EXPERT NOMINATIONS:\n";
        for (const auto& [label, votes] : outcome.hypothesis_votes)
            evidence += "- " + label + " (" + std::to_string(votes) + "/" +
                        std::to_string(outcome.nominations.size()) + " experts)\n";
        evidence += "\n";
        evidence += outcome.pipeline.serialized ? outcome.pipeline.serialized->text : "";

        ChatRequest req;
        req.system_prompt = prompts::diagnosis_system(options.top_n);
        req.user_prompt = query + "\n" + prompts::fence_evidence(evidence);
        req.temperature = options.pipeline.generation.temperature;
        auto parsed = chat_line_records(*providers.chat, req);
        if (!parsed.ok) throw ExtractionParseError("differential: " + parsed.error);

        std::vector<std::pair<std::size_t, std::string>> ranked;
        for (const auto& record : parsed.records) {
            auto rank_it = record.find("RANK");
            auto disease_it = record.find("DISEASE");
            if (rank_it == record.end() || disease_it == record.end() ||
                disease_it->second.empty())
                throw ExtractionParseError("differential record missing RANK/DISEASE");
            std::size_t rank = 0;
            for (char c : rank_it->second)
                if (std::isdigit(static_cast<unsigned char>(c)))
                    rank = rank * 10 + static_cast<std::size_t>(c - '0');
            ranked.emplace_back(rank, disease_it->second);
        }
        std::stable_sort(ranked.begin(), ranked.end(),
                         [](const auto& a, const auto& b) { return a.first < b.first; });

        outcome.result.case_id = diagnosis_case.case_id;
        outcome.result.truth = diagnosis_case.truth;
        std::set<std::string> seen;
        for (const auto& [rank, disease] : ranked) {
            if (outcome.result.ranked_candidates.size() == options.top_n) break;
            if (seen.insert(ascii_casefold(disease)).second)
                outcome.result.ranked_candidates.push_back(disease);
        }
        return outcome;
    } catch (const std::exception& e) {
        throw StageError("diagnose[" + diagnosis_case.case_id + "]", e.what());
    }
}

// Case file: JSON-lines of {case_id, phenotypes: [{code, label}], truth}.
inline std::vector<DiagnosisCase> load_cases(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read cases " + path.string());
    std::vector<DiagnosisCase> cases;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const std::exception& e) {
            throw IoError("cases line " + std::to_string(lineno) + ": " + e.what());
        }
        DiagnosisCase c;
        c.case_id = j.at("case_id").get<std::string>();
        for (const auto& p : j.at("phenotypes")) {
            HpoTerm t;
            t.code = p.at("code").get<std::string>();
            t.label = p.at("label").get<std::string>();
            require(valid_hpo_code(t.code), "bad HPO code '" + t.code + "' in " + c.case_id);
            c.phenotypes.push_back(std::move(t));
        }
        c.truth = j.at("truth").get<std::string>();
        require(!c.phenotypes.empty(), "case " + c.case_id + " has no phenotypes");
        cases.push_back(std::move(c));
    }
    return cases;
}

} // namespace prism
