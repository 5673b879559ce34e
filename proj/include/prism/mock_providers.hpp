#pragma once
// Deterministic in-process providers. Every response is a pure function of
// (request, rng_seed, fixture), which is what makes whole-pipeline runs
// byte-reproducible and testable offline.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "prism/errors.hpp"
#include "prism/prompts.hpp"
#include "prism/providers.hpp"
#include "prism/rng.hpp"
#include "prism/sha256.hpp"
#include "prism/text.hpp"

namespace prism {

struct FixtureDoc {
    std::string url;
    std::string title;
    std::string body;
};

// Scripted chat rule: fires when every `contains` string occurs in the
// concatenated system+user prompt. First matching rule wins.
struct ChatScriptRule {
    std::vector<std::string> contains;
    std::string response;
};

struct Fixture {
    std::vector<FixtureDoc> docs;
    std::vector<ChatScriptRule> chat_rules;
};

// Loads a fixture directory: manifest.json [{url, path, title?}], documents as
// UTF-8 text files, optional chat_script.json {rules:[{contains:[..],response}]}.
inline Fixture load_fixture(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    Fixture fx;
    const fs::path manifest = dir / "manifest.json";
    std::ifstream in(manifest);
    if (!in) throw FixtureLoadError("cannot read " + manifest.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw FixtureLoadError("bad manifest JSON: " + std::string(e.what()));
    }
    if (!j.is_array()) throw FixtureLoadError("manifest must be a JSON array");
    for (const auto& entry : j) {
        FixtureDoc doc;
        doc.url = entry.at("url").get<std::string>();
        const fs::path p = dir / entry.at("path").get<std::string>();
        std::ifstream body(p, std::ios::binary);
        if (!body) throw FixtureLoadError("cannot read document " + p.string());
        std::ostringstream ss;
        ss << body.rdbuf();
        doc.body = ss.str();
        if (entry.contains("title")) {
            doc.title = entry.at("title").get<std::string>();
        } else {
            auto nl = doc.body.find('\n');
            doc.title = trim(doc.body.substr(0, nl));
        }
        fx.docs.push_back(std::move(doc));
    }
    const fs::path script = dir / "chat_script.json";
    if (fs::exists(script)) {
        std::ifstream sin(script);
        if (!sin) throw FixtureLoadError("cannot read " + script.string());
        nlohmann::json sj;
        try {
            sin >> sj;
        } catch (const std::exception& e) {
            throw FixtureLoadError("bad chat_script JSON: " + std::string(e.what()));
        }
        for (const auto& rule : sj.at("rules")) {
            ChatScriptRule r;
            for (const auto& c : rule.at("contains")) r.contains.push_back(c.get<std::string>());
            r.response = rule.at("response").get<std::string>();
            fx.chat_rules.push_back(std::move(r));
        }
    }
    return fx;
}

namespace detail {

// Distinct "interesting" words of a text: alphabetic, at least min_len chars,
// casefolded, appearance order, longest first (stable).
inline std::vector<std::string> salient_words(std::string_view text, std::size_t min_len,
                                              std::size_t max_words) {
    std::vector<std::string> words;
    for (const auto& raw : tokenize_ws(text)) {
        std::string w;
        for (unsigned char c : raw)
            if (std::isalpha(c)) w.push_back(static_cast<char>(std::tolower(c)));
        if (w.size() < min_len) continue;
        if (std::find(words.begin(), words.end(), w) == words.end()) words.push_back(w);
    }
    std::stable_sort(words.begin(), words.end(),
                     [](const std::string& a, const std::string& b) { return a.size() > b.size(); });
    if (words.size() > max_words) words.resize(max_words);
    return words;
}

inline std::string line_after(std::string_view text, std::string_view prefix) {
    for (const auto& line : split(text, '\n')) {
        if (std::string_view(line).starts_with(prefix))
            return trim(std::string_view(line).substr(prefix.size()));
    }
    return "";
}

inline std::string evidence_payload(std::string_view text) {
    auto b = text.find(prompts::kEvidenceBegin);
    if (b == std::string_view::npos) return "";
    b += prompts::kEvidenceBegin.size();
    auto e = text.find(prompts::kEvidenceEnd, b);
    if (e == std::string_view::npos) e = text.size();
    return trim(text.substr(b, e - b));
}

} // namespace detail

class MockChatProvider : public ChatProvider {
public:
    MockChatProvider(std::uint64_t rng_seed, std::vector<ChatScriptRule> rules)
        : seed_(rng_seed), rules_(std::move(rules)) {}

    ChatResponse complete(const ChatRequest& req) override {
        req.validate();
        const std::string combined = req.system_prompt + "\n" + req.user_prompt;
        std::string text = respond(req, combined);
        ChatResponse resp;
        resp.text = std::move(text);
        resp.provider_id = id();
        resp.usage.prompt_tokens = approx_token_count(combined);
        resp.usage.completion_tokens = approx_token_count(resp.text);
        record(req, resp.text);
        return resp;
    }

    std::string id() const override { return "mock-chat"; }

private:
    std::string respond(const ChatRequest& req, const std::string& combined) const {
        for (const auto& rule : rules_) {
            bool all = true;
            for (const auto& needle : rule.contains) {
                if (combined.find(needle) == std::string::npos) {
                    all = false;
                    break;
                }
            }
            if (all && !rule.contains.empty()) return rule.response;
        }
        if (auto pos = req.user_prompt.find("echo:"); pos != std::string::npos)
            return req.user_prompt.substr(pos + 5);

        const auto& sys = req.system_prompt;
        if (sys.find(prompts::kTaskContext) != std::string::npos) return context_response(req);
        if (sys.find(prompts::kTaskSpark) != std::string::npos) return spark_response(req);
        if (sys.find(prompts::kTaskBridge) != std::string::npos) return bridge_response(req);
        if (sys.find(prompts::kTaskJudge) != std::string::npos) return judge_response(req);
        if (sys.find(prompts::kTaskExpert) != std::string::npos) return expert_response(req);
        if (sys.find(prompts::kTaskDiagnosis) != std::string::npos) return diagnosis_response(req);
        return default_generation(combined);
    }

    std::string context_response(const ChatRequest& req) const {
        const std::string query = detail::line_after(req.user_prompt, "QUERY:");
        auto words = detail::salient_words(query, 4, 3);
        if (words.empty()) words = detail::salient_words(query, 1, 1);
        if (words.empty()) words.push_back("topic");
        std::string out;
        for (const auto& w : words)
            out += "LABEL=" + w + " | DESCRIPTION=core entity named in the query\n";
        return out;
    }

    std::string spark_response(const ChatRequest& req) const {
        const std::string chunk = detail::evidence_payload(req.user_prompt);
        auto words = detail::salient_words(chunk, 5, 2);
        if (words.empty()) words.push_back("fragment");
        static constexpr const char* kinds[3] = {"mechanism", "property", "byproduct"};
        std::string out;
        for (const auto& w : words) {
            const auto kind = kinds[sha256_prefix64("kind:" + std::to_string(seed_) + ":" + w) % 3];
            out += "LABEL=" + w + " | KIND=" + kind + " | RATIONALE=salient in the retrieved text\n";
        }
        return out;
    }

    std::string bridge_response(const ChatRequest& req) const {
        const std::string src = detail::line_after(req.user_prompt, "SRC:");
        const std::string dst = detail::line_after(req.user_prompt, "DST:");
        static constexpr const char* ops[3] = {"Mapping", "Blending", "Inversion"};
        const auto op = ops[sha256_prefix64("op:" + std::to_string(seed_) + ":" + src + ">" + dst) % 3];
        auto label_of = [](const std::string& s) {
            auto bar = s.find('|');
            return bar == std::string::npos ? s : trim(std::string_view(s).substr(bar + 1));
        };
        return std::string("OP=") + op + " | TEXT=links " + label_of(src) + " with " +
               label_of(dst) + " through a shared working principle\n";
    }

    std::string judge_response(const ChatRequest& req) const {
        // Deterministic judge: lexicographic order of the candidate texts.
        std::vector<std::pair<std::string, std::size_t>> candidates;
        for (const auto& line : split(req.user_prompt, '\n')) {
            std::string_view v(line);
            if (!v.starts_with("CANDIDATE ")) continue;
            auto colon = v.find(':');
            if (colon == std::string_view::npos) continue;
            std::size_t num = 0;
            auto numsv = v.substr(10, colon - 10);
            for (char c : numsv)
                if (std::isdigit(static_cast<unsigned char>(c))) num = num * 10 + (c - '0');
            candidates.emplace_back(trim(v.substr(colon + 1)), num);
        }
        std::sort(candidates.begin(), candidates.end());
        std::string order;
        for (std::size_t i = 0; i < candidates.size(); ++i) {
            if (i) order += ",";
            order += std::to_string(candidates[i].second);
        }
        return "ORDER=" + order + "\n";
    }

    std::string expert_response(const ChatRequest& req) const {
        const std::string phenos = detail::line_after(req.user_prompt, "PHENOTYPES:");
        auto words = detail::salient_words(phenos, 4, 2);
        if (words.empty()) words.push_back("condition");
        std::string out = "HYPOTHESIS=" + words.front() + " related disorder\n";
        out += "QUERY=" + join(words, " ") + " differential diagnosis\n";
        return out;
    }

    std::string diagnosis_response(const ChatRequest& req) const {
        auto words = detail::salient_words(detail::evidence_payload(req.user_prompt), 5, 5);
        if (words.empty()) words = detail::salient_words(req.user_prompt, 5, 5);
        if (words.empty()) words.push_back("unspecified");
        std::string out;
        for (std::size_t i = 0; i < words.size(); ++i)
            out += "RANK=" + std::to_string(i + 1) + " | DISEASE=" + words[i] + " syndrome\n";
        return out;
    }

    std::string default_generation(const std::string& combined) const {
        const std::string tag =
            sha256_hex("gen:" + std::to_string(seed_) + ":" + combined).substr(0, 16);
        Rng rng(sha256_prefix64("genrng:" + std::to_string(seed_) + ":" + combined));
        auto words = detail::salient_words(combined, 4, 24);
        std::string out = "mock-gen-" + tag;
        if (!words.empty()) {
            for (int i = 0; i < 6; ++i)
                out += " " + words[static_cast<std::size_t>(rng.below(words.size()))];
        }
        return out;
    }

    std::uint64_t seed_;
    std::vector<ChatScriptRule> rules_;
};

// Seeded hash of the normalized text expanded to a unit vector; gives real
// cosine geometry with zero network calls.
class MockEmbedProvider : public EmbedProvider {
public:
    static constexpr std::size_t kDim = 64;

    explicit MockEmbedProvider(std::uint64_t rng_seed) : seed_(rng_seed) {}

    std::string id() const override { return "mock-embed-64"; }

protected:
    std::vector<EmbeddingVector> embed_impl(const std::vector<std::string>& texts) override {
        std::vector<EmbeddingVector> out;
        out.reserve(texts.size());
        for (const auto& t : texts) {
            Rng rng(sha256_prefix64("embed:" + std::to_string(seed_) + ":" + normalize_for_hash(t)));
            EmbeddingVector v;
            v.model_id = id();
            v.values.resize(kDim);
            double norm2 = 0.0;
            for (auto& x : v.values) {
                x = rng.unit() * 2.0 - 1.0;
                norm2 += x * x;
            }
            if (norm2 == 0.0) {
                v.values[0] = 1.0;
                norm2 = 1.0;
            }
            const double inv = 1.0 / std::sqrt(norm2);
            for (auto& x : v.values) x *= inv;
            out.push_back(std::move(v));
        }
        return out;
    }

private:
    std::uint64_t seed_;
};

// Ranked substring search over the fixture corpus: a document matches when it
// contains at least one query token (casefolded); more distinct matching
// tokens rank higher, manifest order breaks ties.
class MockSearchProvider : public SearchProvider {
public:
    explicit MockSearchProvider(std::vector<FixtureDoc> docs) : docs_(std::move(docs)) {}

    std::string id() const override { return "mock-search"; }

protected:
    std::vector<SearchResult> search_impl(const std::string& query, std::size_t limit) override {
        auto tokens = tokenize_ws(ascii_casefold(query));
        std::vector<std::pair<std::size_t, std::size_t>> scored;  // (score, doc index)
        for (std::size_t i = 0; i < docs_.size(); ++i) {
            const std::string haystack = ascii_casefold(docs_[i].body + "\n" + docs_[i].title);
            std::size_t score = 0;
            for (const auto& tok : tokens)
                if (haystack.find(tok) != std::string::npos) ++score;
            if (score > 0) scored.emplace_back(score, i);
        }
        std::stable_sort(scored.begin(), scored.end(),
                         [](const auto& a, const auto& b) { return a.first > b.first; });
        std::vector<SearchResult> out;
        for (const auto& [score, i] : scored) {
            if (out.size() == limit) break;
            SearchResult r;
            r.url = docs_[i].url;
            r.title = docs_[i].title;
            r.snippet_or_body = docs_[i].body;
            out.push_back(std::move(r));
        }
        return out;
    }

private:
    std::vector<FixtureDoc> docs_;
};

struct MockSuite {
    Providers providers;
    std::shared_ptr<PromptCapture> capture;
};

inline MockSuite make_mock_suite(std::uint64_t rng_seed, const Fixture& fixture) {
    MockSuite suite;
    suite.capture = std::make_shared<PromptCapture>();
    auto chat = std::make_shared<MockChatProvider>(rng_seed, fixture.chat_rules);
    chat->attach_capture(suite.capture);
    suite.providers.chat = chat;
    suite.providers.embed = std::make_shared<MockEmbedProvider>(rng_seed);
    suite.providers.search = std::make_shared<MockSearchProvider>(fixture.docs);
    return suite;
}

inline MockSuite make_mock_suite(std::uint64_t rng_seed, const std::filesystem::path& fixture_dir) {
    return make_mock_suite(rng_seed, load_fixture(fixture_dir));
}

} // namespace prism
