#pragma once

#include <atomic>
#include <condition_variable>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "common.hpp"

namespace metro {

struct ChatRequest {
    std::string system;
    std::string user;
    double temperature = 0.0;
    int n_samples = 1;
};

struct EmbeddingVector {
    std::vector<double> values;

    size_t dim() const { return values.size(); }
};

double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b);
void l2_normalize(EmbeddingVector& v);

class Provider {
public:
    virtual ~Provider() = default;
    virtual std::string id() const = 0;
    virtual std::vector<std::string> chat(const ChatRequest& request) = 0;
    virtual EmbeddingVector embed(const std::string& text) = 0;
};

// Deterministic offline provider. Completions are derived from a stable hash
// of the prompt; known prompt formats (critic votes, action labels, deal
// JSON, ...) are recognized so the full pipeline stays parseable offline.
class StubProvider : public Provider {
public:
    explicit StubProvider(size_t embedding_dim = 64) : dim_(embedding_dim) {}

    std::string id() const override { return "stub"; }
    std::vector<std::string> chat(const ChatRequest& request) override;
    EmbeddingVector embed(const std::string& text) override;

private:
    size_t dim_;
};

struct HttpProviderSettings {
    std::string base_url;      // e.g. https://api.openai.com
    std::string api_key;
    std::string chat_model;
    std::string embed_model;
    size_t embedding_dim = 1024;
    int max_retries = 3;
    int backoff_ms = 250;
};

// OpenAI-compatible chat/embeddings endpoints. The transport is injectable so
// tests can assert that stub-mode pipelines never reach it.
class HttpProvider : public Provider {
public:
    // transport(path, request_body_json) -> response_body_json
    using Transport = std::function<std::string(const std::string&, const std::string&)>;

    explicit HttpProvider(HttpProviderSettings settings, Transport transport = nullptr);

    std::string id() const override { return "http:" + settings_.chat_model; }
    std::vector<std::string> chat(const ChatRequest& request) override;
    EmbeddingVector embed(const std::string& text) override;

private:
    std::string post_with_retry(const std::string& path, const std::string& body);

    HttpProviderSettings settings_;
    Transport transport_;
};

enum class GatewayMode { stub, live, record, replay };

struct GatewayConfig {
    GatewayMode mode = GatewayMode::stub;
    std::filesystem::path cache_dir;  // required for record/replay
    size_t stub_embedding_dim = 64;
    size_t max_in_flight = 8;
    HttpProviderSettings http;
};

struct GatewayCallLog {
    std::atomic<size_t> chat_calls{0};
    std::atomic<size_t> embed_calls{0};
};

// Uniform front-end over providers with bounded concurrency and a
// record/replay cache keyed per sample.
class Gateway {
public:
    explicit Gateway(GatewayConfig config, std::unique_ptr<Provider> provider_override = nullptr);

    std::vector<std::string> chat(const ChatRequest& request);
    EmbeddingVector embed(const std::string& text);

    const GatewayCallLog& call_log() const { return log_; }
    void reset_call_log();
    size_t embedding_dim() const;

private:
    std::string cache_key(const std::string& kind, const std::string& payload, double temperature,
                          int sample_index) const;
    bool cache_read(const std::string& key, std::string& out) const;
    void cache_write(const std::string& key, const std::string& value);

    GatewayConfig config_;
    std::unique_ptr<Provider> provider_;
    GatewayCallLog log_;
    mutable std::mutex cache_mutex_;
    std::mutex inflight_mutex_;
    std::condition_variable_any inflight_cv_;
    size_t in_flight_ = 0;
};

}  // namespace metro
