#pragma once
// All module-authored prompt text lives here. Prompts carry a TASK marker the
// deterministic mocks dispatch on, and retrieval-derived payloads are fenced
// between evidence markers so audits can separate module-authored text from
// retrieved content.

#include <string>
#include <string_view>
#include <vector>

namespace prism::prompts {

inline constexpr std::string_view kTaskContext = "TASK: context-extraction";
inline constexpr std::string_view kTaskSpark = "TASK: spark-extraction";
inline constexpr std::string_view kTaskBridge = "TASK: bridge-generation";
inline constexpr std::string_view kTaskJudge = "TASK: rank-candidates";
inline constexpr std::string_view kTaskExpert = "TASK: expert-consult";
inline constexpr std::string_view kTaskDiagnosis = "TASK: differential-diagnosis";

inline constexpr std::string_view kEvidenceBegin = "BEGIN EXTERNAL EVIDENCE";
inline constexpr std::string_view kEvidenceEnd = "END EXTERNAL EVIDENCE";

inline constexpr std::string_view kLineGrammarReminder =
    "Respond only with lines of the form FIELD=value | FIELD=value. No prose.";

inline constexpr std::string_view kReformat =
    "REFORMAT: the previous reply violated the output format. ";

inline std::string fence_evidence(std::string_view payload) {
    std::string out;
    out += kEvidenceBegin;
    out += "\n";
    out += payload;
    out += "\n";
    out += kEvidenceEnd;
    return out;
}

// Removes every fenced evidence block; used by the truth-isolation audit to
// inspect only module-authored prompt text.
inline std::string strip_evidence(std::string_view text) {
    std::string out;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t b = text.find(kEvidenceBegin, pos);
        if (b == std::string_view::npos) {
            out += text.substr(pos);
            break;
        }
        out += text.substr(pos, b - pos);
        std::size_t e = text.find(kEvidenceEnd, b);
        if (e == std::string_view::npos) break;  // unterminated block: drop the rest
        pos = e + kEvidenceEnd.size();
    }
    return out;
}

inline std::string context_extraction_system() {
    std::string s = "You extract the immutable constraints and core entities of a user query.\n";
    s += kTaskContext;
    s += "\nEmit one line per entity: LABEL=<short label> | DESCRIPTION=<one sentence>.\n";
    s += kLineGrammarReminder;
    return s;
}

inline std::string context_extraction_user(std::string_view query) {
    return "QUERY: " + std::string(query);
}

inline std::string spark_extraction_system() {
    std::string s =
        "You read one retrieved text chunk and name the operational mechanisms (how things "
        "work), salient properties, and emergent byproducts it describes.\n";
    s += kTaskSpark;
    s += "\nEmit one line per finding: LABEL=<short label> | KIND=<mechanism|property|byproduct>"
         " | RATIONALE=<one sentence>.\n";
    s += kLineGrammarReminder;
    return s;
}

inline std::string spark_extraction_user(std::string_view query, std::string_view chunk_text) {
    std::string s = "QUERY: " + std::string(query) + "\n";
    s += fence_evidence(chunk_text);
    return s;
}

inline std::string bridge_system() {
    std::string s =
        "You connect two concepts with one cognitive operator: Mapping transfers a mechanism "
        "across domains, Blending composes attributes into a novel composite, Inversion finds "
        "productive functional opposition.\n";
    s += kTaskBridge;
    s += "\nEmit exactly one line: OP=<Mapping|Blending|Inversion> | TEXT=<the bridge>.\n";
    s += kLineGrammarReminder;
    return s;
}

inline std::string bridge_user(std::string_view src_id, std::string_view src_label,
                               std::string_view dst_id, std::string_view dst_label) {
    std::string s = "SRC: " + std::string(src_id) + " | " + std::string(src_label) + "\n";
    s += "DST: " + std::string(dst_id) + " | " + std::string(dst_label) + "\n";
    return s;
}

inline std::string generation_system() {
    return "You answer the user query. When an epistemic graph is provided, reason along its "
           "bridges: treat context nodes as fixed constraints and spark nodes as inspiration, "
           "and let each bridge suggest a distinct angle.";
}

inline std::string judge_system(std::string_view dimension, std::size_t candidate_count) {
    std::string s = "You rank " + std::to_string(candidate_count) +
                    " candidate texts by the quality dimension '" + std::string(dimension) +
                    "', best first. You do not know where the candidates come from.\n";
    s += kTaskJudge;
    s += "\nEmit exactly one line: ORDER=<comma-separated candidate numbers, best first>.\n";
    s += kLineGrammarReminder;
    return s;
}

inline std::string expert_system(std::string_view persona_id, std::string_view specialty,
                                 std::string_view focus) {
    std::string s = "You are a " + std::string(specialty) + " (persona=" + std::string(persona_id) +
                    ") on a diagnostic consultation panel. " + std::string(focus) + "\n";
    s += kTaskExpert;
    s += "\nEmit one HYPOTHESIS=<disease> line per candidate diagnosis, most likely first, then "
         "one or more QUERY=<search query> lines for evidence retrieval. Optionally one "
         "RATIONALE=<sentence> line.\n";
    s += kLineGrammarReminder;
    return s;
}

inline std::string diagnosis_system(std::size_t top_n) {
    std::string s = "You produce a ranked differential diagnosis with at most " +
                    std::to_string(top_n) + " distinct candidates, most likely first.\n";
    s += kTaskDiagnosis;
    s += "\nEmit one line per candidate: RANK=<1-based rank> | DISEASE=<label>.\n";
    s += kLineGrammarReminder;
    return s;
}

} // namespace prism::prompts
