#pragma once
// Error taxonomy shared by all prism modules.

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace prism {

class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& what)
        : std::runtime_error(code + ": " + what), code_(std::move(code)) {}

    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

#define PRISM_DEFINE_ERROR(Name)                               \
    class Name : public Error {                                \
    public:                                                    \
        explicit Name(const std::string& what)                 \
            : Error(#Name, what) {}                            \
    }

// Preconditions and generic plumbing.
PRISM_DEFINE_ERROR(PreconditionError);
PRISM_DEFINE_ERROR(IoError);

// providers
PRISM_DEFINE_ERROR(AuthError);
PRISM_DEFINE_ERROR(RateLimited);
PRISM_DEFINE_ERROR(MalformedResponse);
PRISM_DEFINE_ERROR(ProviderUnavailable);
PRISM_DEFINE_ERROR(DimensionMismatch);
PRISM_DEFINE_ERROR(FixtureLoadError);

// exploration
PRISM_DEFINE_ERROR(LexiconTooSmall);
PRISM_DEFINE_ERROR(AllQueriesFailed);

// graph_builder
PRISM_DEFINE_ERROR(ExtractionParseError);
PRISM_DEFINE_ERROR(NoAdmissiblePairs);
PRISM_DEFINE_ERROR(EmptyContext);

// synthesis
PRISM_DEFINE_ERROR(ModeArgumentMismatch);

// metrics
PRISM_DEFINE_ERROR(ZeroVector);
PRISM_DEFINE_ERROR(PromptMismatch);
PRISM_DEFINE_ERROR(DegenerateData);
PRISM_DEFINE_ERROR(MixedDimensions);
PRISM_DEFINE_ERROR(MixedN);
PRISM_DEFINE_ERROR(JudgeParseError);
PRISM_DEFINE_ERROR(IncompleteRanking);
PRISM_DEFINE_ERROR(NoHits);

// expert_panel
PRISM_DEFINE_ERROR(OntologyParseError);
PRISM_DEFINE_ERROR(AllExpertsFailed);

// persistence
PRISM_DEFINE_ERROR(UnknownSchema);
PRISM_DEFINE_ERROR(NotFound);
PRISM_DEFINE_ERROR(CorruptArtifact);

// harness
PRISM_DEFINE_ERROR(MissingArtifacts);

#undef PRISM_DEFINE_ERROR

// Carries the violation list produced by validate_topology.
class TopologyViolation : public Error {
public:
    explicit TopologyViolation(std::vector<std::string> violations)
        : Error("TopologyViolation", summarize(violations)),
          violations_(std::move(violations)) {}

    const std::vector<std::string>& violations() const noexcept { return violations_; }

private:
    static std::string summarize(const std::vector<std::string>& v) {
        std::string s = std::to_string(v.size()) + " violation(s)";
        for (const auto& item : v) {
            s += "; ";
            s += item;
        }
        return s;
    }

    std::vector<std::string> violations_;
};

// Pipeline stage failures keep the original error text and name the stage.
class StageError : public Error {
public:
    StageError(const std::string& stage, const std::string& what)
        : Error("StageError", "[" + stage + "] " + what), stage_(stage) {}

    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

inline void require(bool cond, const std::string& what) {
    if (!cond) throw PreconditionError(what);
}

} // namespace prism
