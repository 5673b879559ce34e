#pragma once
// Provider abstraction: chat completion, embeddings, web search. The rest of
// the pipeline only sees these interfaces; deterministic mocks and HTTP
// clients both implement them.

#include <chrono>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "prism/errors.hpp"
#include "prism/sha256.hpp"
#include "prism/text.hpp"

namespace prism {

struct TokenUsage {
    std::size_t prompt_tokens = 0;
    std::size_t completion_tokens = 0;
};

struct ChatRequest {
    std::string system_prompt;
    std::string user_prompt;
    double temperature = 0.0;
    std::size_t max_tokens = 1024;
    std::vector<std::string> stop;

    void validate() const {
        require(temperature >= 0.0 && temperature <= 2.0, "temperature must be in [0,2]");
        require(max_tokens >= 1, "max_tokens must be >= 1");
    }

    // Canonical form, used as cache key material.
    nlohmann::json to_json() const {
        return {{"system_prompt", system_prompt},
                {"user_prompt", user_prompt},
                {"temperature", temperature},
                {"max_tokens", max_tokens},
                {"stop", stop}};
    }
};

struct ChatResponse {
    std::string text;
    std::string provider_id;
    TokenUsage usage;
};

struct EmbeddingVector {
    std::vector<double> values;
    std::string model_id;

    std::size_t dimension() const { return values.size(); }
};

struct SearchResult {
    std::string url;
    std::string title;
    std::string snippet_or_body;
    std::size_t rank = 1;
};

struct RetryPolicy {
    std::size_t max_attempts = 3;
    std::uint64_t base_backoff_ms = 1000;
    double backoff_factor = 2.0;
    std::uint64_t timeout_ms = 60000;
};

enum class ProviderKind { chat, embed, search };

// Connection data for remote providers. Credentials usually come from
// environment variables; see http_providers.hpp.
struct ProviderHandle {
    ProviderKind kind = ProviderKind::chat;
    std::string endpoint;
    std::string credentials;
    std::string model_id;
    RetryPolicy retry;
};

// Observational log of every chat call; used by the truth-isolation and
// mode-separation audits. Recording does not affect provider outputs.
struct CapturedChatCall {
    std::string system_prompt;
    std::string user_prompt;
    double temperature = 0.0;
    std::string response;
};

class PromptCapture {
public:
    void record(const ChatRequest& req, const std::string& response) {
        std::lock_guard<std::mutex> lock(mu_);
        calls_.push_back({req.system_prompt, req.user_prompt, req.temperature, response});
    }

    std::vector<CapturedChatCall> snapshot() const {
        std::lock_guard<std::mutex> lock(mu_);
        return calls_;
    }

    void clear() {
        std::lock_guard<std::mutex> lock(mu_);
        calls_.clear();
    }

private:
    mutable std::mutex mu_;
    std::vector<CapturedChatCall> calls_;
};

class ChatProvider {
public:
    virtual ~ChatProvider() = default;
    virtual ChatResponse complete(const ChatRequest& req) = 0;
    virtual std::string id() const = 0;

    void attach_capture(std::shared_ptr<PromptCapture> capture) { capture_ = std::move(capture); }
    std::shared_ptr<PromptCapture> capture() const { return capture_; }

protected:
    void record(const ChatRequest& req, const std::string& response) const {
        if (capture_) capture_->record(req, response);
    }

private:
    std::shared_ptr<PromptCapture> capture_;
};

class EmbedProvider {
public:
    virtual ~EmbedProvider() = default;

    std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) {
        require(!texts.empty(), "embed requires at least one text");
        for (const auto& t : texts) require(!t.empty(), "embed texts must be non-empty");
        auto out = embed_impl(texts);
        if (out.size() != texts.size())
            throw MalformedResponse("embedding count != input count");
        for (const auto& v : out) {
            if (v.values.empty()) throw DimensionMismatch("embedding with dimension 0");
            if (v.values.size() != out.front().values.size())
                throw DimensionMismatch("provider returned inconsistent embedding widths");
            for (double x : v.values)
                if (!std::isfinite(x)) throw MalformedResponse("non-finite embedding value");
        }
        return out;
    }

    virtual std::string id() const = 0;

protected:
    virtual std::vector<EmbeddingVector> embed_impl(const std::vector<std::string>& texts) = 0;
};

class SearchProvider {
public:
    virtual ~SearchProvider() = default;

    std::vector<SearchResult> search(const std::string& query, std::size_t limit) {
        require(!query.empty(), "search query must be non-empty");
        require(limit >= 1, "search limit must be >= 1");
        auto out = search_impl(query, limit);
        if (out.size() > limit) out.resize(limit);
        for (std::size_t i = 0; i < out.size(); ++i) out[i].rank = i + 1;
        return out;
    }

    virtual std::string id() const = 0;

protected:
    virtual std::vector<SearchResult> search_impl(const std::string& query, std::size_t limit) = 0;
};

// The provider bundle threaded through the pipeline.
struct Providers {
    std::shared_ptr<ChatProvider> chat;
    std::shared_ptr<EmbedProvider> embed;
    std::shared_ptr<SearchProvider> search;
};

namespace detail {

struct TransientFailure {
    enum class Kind { rate_limited, unavailable } kind;
    std::string what;
};

// Runs fn up to policy.max_attempts times, sleeping base * factor^i between
// attempts. fn throws TransientFailure to request a retry; anything else
// propagates immediately.
template <class Fn>
auto with_retries(const RetryPolicy& policy, Fn&& fn) -> decltype(fn()) {
    require(policy.max_attempts >= 1, "retry policy needs max_attempts >= 1");
    TransientFailure last{TransientFailure::Kind::unavailable, "no attempt made"};
    for (std::size_t attempt = 0; attempt < policy.max_attempts; ++attempt) {
        if (attempt > 0) {
            double ms = static_cast<double>(policy.base_backoff_ms);
            for (std::size_t i = 1; i < attempt; ++i) ms *= policy.backoff_factor;
            std::this_thread::sleep_for(std::chrono::milliseconds(static_cast<std::int64_t>(ms)));
        }
        try {
            return fn();
        } catch (const TransientFailure& t) {
            last = t;
        }
    }
    if (last.kind == TransientFailure::Kind::rate_limited)
        throw RateLimited("retries exhausted: " + last.what);
    throw ProviderUnavailable("retries exhausted: " + last.what);
}

} // namespace detail

// Thread-safe content-addressed response cache keyed by hash(request).
class ResponseCache {
public:
    std::optional<std::string> get(const std::string& key) const {
        std::lock_guard<std::mutex> lock(mu_);
        auto it = map_.find(key);
        if (it == map_.end()) return std::nullopt;
        return it->second;
    }

    void put(const std::string& key, std::string value) {
        std::lock_guard<std::mutex> lock(mu_);
        map_.emplace(key, std::move(value));
    }

    std::size_t size() const {
        std::lock_guard<std::mutex> lock(mu_);
        return map_.size();
    }

private:
    mutable std::mutex mu_;
    std::unordered_map<std::string, std::string> map_;
};

// Decorator: serves repeated requests from the cache so reruns are cheap and
// reproducible. Key = sha256 of the canonical request JSON.
class CachedChatProvider : public ChatProvider {
public:
    CachedChatProvider(std::shared_ptr<ChatProvider> inner, std::shared_ptr<ResponseCache> cache)
        : inner_(std::move(inner)), cache_(std::move(cache)) {}

    ChatResponse complete(const ChatRequest& req) override {
        req.validate();
        const std::string key = sha256_hex(req.to_json().dump());
        if (auto hit = cache_->get(key)) {
            auto j = nlohmann::json::parse(*hit);
            ChatResponse resp;
            resp.text = j.at("text").get<std::string>();
            resp.provider_id = j.at("provider_id").get<std::string>();
            resp.usage.prompt_tokens = j.at("prompt_tokens").get<std::size_t>();
            resp.usage.completion_tokens = j.at("completion_tokens").get<std::size_t>();
            record(req, resp.text);
            return resp;
        }
        ChatResponse resp = inner_->complete(req);
        nlohmann::json j = {{"text", resp.text},
                            {"provider_id", resp.provider_id},
                            {"prompt_tokens", resp.usage.prompt_tokens},
                            {"completion_tokens", resp.usage.completion_tokens}};
        cache_->put(key, j.dump());
        record(req, resp.text);
        return resp;
    }

    std::string id() const override { return inner_->id(); }

private:
    std::shared_ptr<ChatProvider> inner_;
    std::shared_ptr<ResponseCache> cache_;
};

inline std::size_t approx_token_count(std::string_view s) {
    return tokenize_ws(s).size();
}

} // namespace prism
