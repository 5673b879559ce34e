#pragma once
// HTTP JSON clients for remote chat/embedding/search endpoints. Request and
// response shapes follow the common OpenAI-style contract. Credentials come
// from the handle (typically filled from environment variables by the CLI).

#include <cstdlib>
#include <memory>
#include <string>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "prism/errors.hpp"
#include "prism/providers.hpp"

namespace prism {

namespace detail {

inline httplib::Headers auth_headers(const ProviderHandle& handle) {
    httplib::Headers h;
    if (!handle.credentials.empty())
        h.emplace("Authorization", "Bearer " + handle.credentials);
    return h;
}

inline void classify_http_failure(const httplib::Result& res) {
    if (!res) throw TransientFailure{TransientFailure::Kind::unavailable, "transport error"};
    const int status = res->status;
    if (status == 401 || status == 403) throw AuthError("http status " + std::to_string(status));
    if (status == 429)
        throw TransientFailure{TransientFailure::Kind::rate_limited, "http status 429"};
    if (status >= 500)
        throw TransientFailure{TransientFailure::Kind::unavailable,
                               "http status " + std::to_string(status)};
    if (status != 200) throw ProviderUnavailable("http status " + std::to_string(status));
}

inline nlohmann::json parse_payload(const std::string& body) {
    try {
        return nlohmann::json::parse(body);
    } catch (const std::exception& e) {
        throw MalformedResponse(std::string("unparseable payload: ") + e.what());
    }
}

inline httplib::Client make_client(const ProviderHandle& handle) {
    httplib::Client cli(handle.endpoint);
    const auto secs = static_cast<time_t>(handle.retry.timeout_ms / 1000);
    const auto usecs = static_cast<time_t>((handle.retry.timeout_ms % 1000) * 1000);
    cli.set_connection_timeout(secs, usecs);
    cli.set_read_timeout(secs, usecs);
    cli.set_write_timeout(secs, usecs);
    return cli;
}

} // namespace detail

class HttpChatProvider : public ChatProvider {
public:
    explicit HttpChatProvider(ProviderHandle handle) : handle_(std::move(handle)) {
        require(handle_.kind == ProviderKind::chat, "handle kind must be chat");
    }

    ChatResponse complete(const ChatRequest& req) override {
        req.validate();
        nlohmann::json body = {
            {"model", handle_.model_id},
            {"messages",
             {{{"role", "system"}, {"content", req.system_prompt}},
              {{"role", "user"}, {"content", req.user_prompt}}}},
            {"temperature", req.temperature},
            {"max_tokens", req.max_tokens},
        };
        if (!req.stop.empty()) body["stop"] = req.stop;

        auto resp = detail::with_retries(handle_.retry, [&]() -> ChatResponse {
            auto cli = detail::make_client(handle_);
            auto res = cli.Post("/v1/chat/completions", detail::auth_headers(handle_),
                                body.dump(), "application/json");
            detail::classify_http_failure(res);
            auto j = detail::parse_payload(res->body);
            ChatResponse out;
            try {
                out.text = j.at("choices").at(0).at("message").at("content").get<std::string>();
                if (j.contains("usage")) {
                    out.usage.prompt_tokens = j["usage"].value("prompt_tokens", std::size_t{0});
                    out.usage.completion_tokens =
                        j["usage"].value("completion_tokens", std::size_t{0});
                }
            } catch (const nlohmann::json::exception& e) {
                throw MalformedResponse(std::string("chat payload shape: ") + e.what());
            }
            out.provider_id = handle_.model_id;
            return out;
        });
        record(req, resp.text);
        return resp;
    }

    std::string id() const override { return handle_.model_id; }

private:
    ProviderHandle handle_;
};

class HttpEmbedProvider : public EmbedProvider {
public:
    explicit HttpEmbedProvider(ProviderHandle handle) : handle_(std::move(handle)) {
        require(handle_.kind == ProviderKind::embed, "handle kind must be embed");
    }

    std::string id() const override { return handle_.model_id; }

protected:
    std::vector<EmbeddingVector> embed_impl(const std::vector<std::string>& texts) override {
        nlohmann::json body = {{"model", handle_.model_id}, {"input", texts}};
        return detail::with_retries(handle_.retry, [&]() -> std::vector<EmbeddingVector> {
            auto cli = detail::make_client(handle_);
            auto res = cli.Post("/v1/embeddings", detail::auth_headers(handle_), body.dump(),
                                "application/json");
            detail::classify_http_failure(res);
            auto j = detail::parse_payload(res->body);
            std::vector<EmbeddingVector> out(texts.size());
            try {
                for (const auto& item : j.at("data")) {
                    const auto idx = item.at("index").get<std::size_t>();
                    if (idx >= out.size()) throw MalformedResponse("embedding index out of range");
                    out[idx].values = item.at("embedding").get<std::vector<double>>();
                    out[idx].model_id = handle_.model_id;
                }
            } catch (const nlohmann::json::exception& e) {
                throw MalformedResponse(std::string("embedding payload shape: ") + e.what());
            }
            return out;
        });
    }

private:
    ProviderHandle handle_;
};

class HttpSearchProvider : public SearchProvider {
public:
    explicit HttpSearchProvider(ProviderHandle handle) : handle_(std::move(handle)) {
        require(handle_.kind == ProviderKind::search, "handle kind must be search");
    }

    std::string id() const override {
        return handle_.model_id.empty() ? "http-search" : handle_.model_id;
    }

protected:
    std::vector<SearchResult> search_impl(const std::string& query, std::size_t limit) override {
        httplib::Params params{{"q", query}, {"limit", std::to_string(limit)}};
        return detail::with_retries(handle_.retry, [&]() -> std::vector<SearchResult> {
            auto cli = detail::make_client(handle_);
            auto res = cli.Get("/search", params, detail::auth_headers(handle_));
            detail::classify_http_failure(res);
            auto j = detail::parse_payload(res->body);
            std::vector<SearchResult> out;
            try {
                for (const auto& item : j.at("results")) {
                    SearchResult r;
                    r.url = item.at("url").get<std::string>();
                    r.title = item.value("title", std::string{});
                    r.snippet_or_body = item.value("snippet", std::string{});
                    if (r.url.empty()) throw MalformedResponse("search result with empty url");
                    out.push_back(std::move(r));
                }
            } catch (const nlohmann::json::exception& e) {
                throw MalformedResponse(std::string("search payload shape: ") + e.what());
            }
            return out;
        });
    }

private:
    ProviderHandle handle_;
};

// Environment-variable credential lookup used by the CLI.
inline std::string env_or_empty(const char* name) {
    const char* v = std::getenv(name);
    return v ? std::string(v) : std::string{};
}

} // namespace prism
