#include "gateway.hpp"

#include <chrono>
#include <cmath>
#include <condition_variable>
#include <thread>

#include <nlohmann/json.hpp>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

namespace metro {

using nlohmann::json;

double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
    if (a.dim() != b.dim())
        fail(ErrorCode::invalid_argument, "cosine_similarity: dimension mismatch");
    double dot = 0, na = 0, nb = 0;
    for (size_t i = 0; i < a.dim(); ++i) {
        dot += a.values[i] * b.values[i];
        na += a.values[i] * a.values[i];
        nb += b.values[i] * b.values[i];
    }
    if (na == 0.0 || nb == 0.0) fail(ErrorCode::invalid_argument, "cosine_similarity: zero vector");
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

void l2_normalize(EmbeddingVector& v) {
    double n = 0;
    for (double x : v.values) n += x * x;
    n = std::sqrt(n);
    if (n == 0.0) fail(ErrorCode::invalid_argument, "cannot normalize zero vector");
    for (double& x : v.values) x /= n;
}

// ---- stub provider ----

namespace {

const char* kStubWords[] = {"value",    "trust",   "urgency",  "price",   "empathy", "evidence",
                            "fairness", "benefit", "timing",   "rapport", "detail",  "concern",
                            "option",   "quality", "interest", "offer"};

std::string stub_word(uint64_t h, int slot) {
    return kStubWords[(h >> (slot * 4)) % (sizeof(kStubWords) / sizeof(kStubWords[0]))];
}

bool contains(const std::string& haystack, const char* needle) {
    return haystack.find(needle) != std::string::npos;
}

// Labels are listed one per line as "- label: description".
std::vector<std::string> parse_listed_labels(const std::string& prompt) {
    std::vector<std::string> labels;
    size_t pos = 0;
    while (pos < prompt.size()) {
        size_t eol = prompt.find('\n', pos);
        if (eol == std::string::npos) eol = prompt.size();
        std::string line = prompt.substr(pos, eol - pos);
        if (line.rfind("- ", 0) == 0) {
            size_t colon = line.find(':');
            if (colon != std::string::npos) labels.push_back(trim(line.substr(2, colon - 2)));
        }
        pos = eol + 1;
    }
    return labels;
}

std::string stub_completion(const std::string& prompt, uint64_t h) {
    if (contains(prompt, "Answer with exactly one action label")) {
        auto labels = parse_listed_labels(prompt);
        if (!labels.empty()) return labels[h % labels.size()];
        // taxonomy-free mode: induce a free-form label
        return stub_word(h, 0) + "-" + stub_word(h, 1);
    }
    if (contains(prompt, "exactly one word: better, worse, or neutral")) {
        const char* votes[] = {"better", "worse", "neutral"};
        return votes[h % 3];
    }
    if (contains(prompt, "must begin with the word \"When\"")) {
        bool avoid = contains(prompt, "avoid-principle");
        std::string tactic = std::string(avoid ? "avoid " : "do ") + "emphasizing " + stub_word(h, 2) +
                             " and " + stub_word(h, 3);
        return "Principle: When the counterpart raises " + stub_word(h, 0) + " about " + stub_word(h, 1) +
               ", " + tactic + ".\nRationale: observed " + stub_word(h, 4) + " effect.";
    }
    if (contains(prompt, "Answer (one letter only)")) {
        const char* letters[] = {"A", "B", "C", "D"};
        return letters[h % 4];
    }
    if (contains(prompt, "STRICT definition of \"deal\"")) {
        if (h % 3 == 0) {
            double price = 100.0 + static_cast<double>(h % 300);
            return std::string("{\"deal\": true, \"price\": ") + std::to_string(price) + "}";
        }
        return "{\"deal\": false, \"price\": null}";
    }
    if (contains(prompt, "second-person persona description")) {
        std::string desc = "You approach conversations with a distinct style.";
        for (int i = 0; i < 36; ++i) {
            uint64_t hh = h + static_cast<uint64_t>(i) * 0x9e37ULL;
            desc += " You weigh " + stub_word(hh, 0) + " against " + stub_word(hh, 1) + ".";
        }
        return desc;
    }
    return "stub(" + hex64(h) + ") response touching on " + stub_word(h, 0) + " and " + stub_word(h, 1) + ".";
}

}  // namespace

std::vector<std::string> StubProvider::chat(const ChatRequest& request) {
    std::vector<std::string> out;
    std::string prompt = request.system + "\n" + request.user;
    for (int i = 0; i < request.n_samples; ++i) {
        uint64_t h = fnv1a(prompt, 0xcbf29ce484222325ULL + static_cast<uint64_t>(i) * 0x10001ULL);
        out.push_back(stub_completion(prompt, h));
    }
    return out;
}

EmbeddingVector StubProvider::embed(const std::string& text) {
    EmbeddingVector v;
    v.values.resize(dim_);
    uint64_t state = fnv1a(text);
    for (size_t i = 0; i < dim_; ++i) {
        // map to [-1, 1)
        v.values[i] = static_cast<double>(splitmix64(state) >> 11) * 0x1.0p-52 - 1.0;
    }
    l2_normalize(v);
    return v;
}

// ---- http provider ----

HttpProvider::HttpProvider(HttpProviderSettings settings, Transport transport)
    : settings_(std::move(settings)), transport_(std::move(transport)) {
    if (!transport_) {
        transport_ = [this](const std::string& path, const std::string& body) -> std::string {
            httplib::Client client(settings_.base_url);
            client.set_read_timeout(120, 0);
            httplib::Headers headers;
            if (!settings_.api_key.empty())
                headers.emplace("Authorization", "Bearer " + settings_.api_key);
            auto res = client.Post(path, headers, body, "application/json");
            if (!res) fail(ErrorCode::gateway, "provider unreachable: " + settings_.base_url + path);
            if (res->status < 200 || res->status >= 300)
                fail(ErrorCode::gateway, "provider returned HTTP " + std::to_string(res->status));
            return res->body;
        };
    }
}

std::string HttpProvider::post_with_retry(const std::string& path, const std::string& body) {
    int delay = settings_.backoff_ms;
    for (int attempt = 0;; ++attempt) {
        try {
            return transport_(path, body);
        } catch (const std::exception& e) {
            if (attempt >= settings_.max_retries)
                fail(ErrorCode::gateway, std::string("provider failed after retries: ") + e.what());
            std::this_thread::sleep_for(std::chrono::milliseconds(delay));
            delay *= 2;
        }
    }
}

std::vector<std::string> HttpProvider::chat(const ChatRequest& request) {
    json body = {
        {"model", settings_.chat_model},
        {"temperature", request.temperature},
        {"n", request.n_samples},
        {"messages",
         json::array({{{"role", "system"}, {"content", request.system}},
                      {{"role", "user"}, {"content", request.user}}})},
    };
    json res = json::parse(post_with_retry("/v1/chat/completions", body.dump()));
    std::vector<std::string> out;
    for (const auto& choice : res.at("choices"))
        out.push_back(choice.at("message").at("content").get<std::string>());
    if (static_cast<int>(out.size()) != request.n_samples)
        fail(ErrorCode::gateway, "provider returned wrong completion count");
    return out;
}

EmbeddingVector HttpProvider::embed(const std::string& text) {
    json body = {{"model", settings_.embed_model}, {"input", text}};
    json res = json::parse(post_with_retry("/v1/embeddings", body.dump()));
    EmbeddingVector v;
    for (const auto& x : res.at("data").at(0).at("embedding")) v.values.push_back(x.get<double>());
    if (v.dim() != settings_.embedding_dim)
        fail(ErrorCode::gateway, "provider embedding dim " + std::to_string(v.dim()) +
                                     " != configured " + std::to_string(settings_.embedding_dim));
    return v;
}

// ---- gateway ----

Gateway::Gateway(GatewayConfig config, std::unique_ptr<Provider> provider_override)
    : config_(std::move(config)), provider_(std::move(provider_override)) {
    if (!provider_) {
        if (config_.mode == GatewayMode::stub)
            provider_ = std::make_unique<StubProvider>(config_.stub_embedding_dim);
        else
            provider_ = std::make_unique<HttpProvider>(config_.http);
    }
    if ((config_.mode == GatewayMode::record || config_.mode == GatewayMode::replay) &&
        config_.cache_dir.empty())
        fail(ErrorCode::config, "record/replay mode requires a cache directory");
}

size_t Gateway::embedding_dim() const {
    return config_.mode == GatewayMode::stub ? config_.stub_embedding_dim
                                             : config_.http.embedding_dim;
}

void Gateway::reset_call_log() {
    log_.chat_calls = 0;
    log_.embed_calls = 0;
}

std::string Gateway::cache_key(const std::string& kind, const std::string& payload, double temperature,
                               int sample_index) const {
    std::string material = provider_->id() + "\x1f" + kind + "\x1f" + payload + "\x1f" +
                           std::to_string(temperature) + "\x1f" + std::to_string(sample_index);
    // two passes with different seeds to get 128 bits of key
    return hex64(fnv1a(material)) + hex64(fnv1a(material, 0x9e3779b97f4a7c15ULL));
}

bool Gateway::cache_read(const std::string& key, std::string& out) const {
    std::lock_guard lock(cache_mutex_);
    auto path = config_.cache_dir / (key + ".json");
    if (!std::filesystem::exists(path)) return false;
    out = json::parse(read_file(path)).at("response").get<std::string>();
    return true;
}

void Gateway::cache_write(const std::string& key, const std::string& value) {
    std::lock_guard lock(cache_mutex_);
    json j = {{"response", value}};
    write_file(config_.cache_dir / (key + ".json"), j.dump());
}

namespace {

class InFlightGuard {
public:
    InFlightGuard(std::mutex& m, std::condition_variable_any& cv, size_t& count, size_t limit)
        : m_(m), cv_(cv), count_(count) {
        std::unique_lock lock(m_);
        cv_.wait(lock, [&] { return count_ < limit; });
        ++count_;
    }
    ~InFlightGuard() {
        {
            std::lock_guard lock(m_);
            --count_;
        }
        cv_.notify_one();
    }

private:
    std::mutex& m_;
    std::condition_variable_any& cv_;
    size_t& count_;
};

}  // namespace

std::vector<std::string> Gateway::chat(const ChatRequest& request) {
    if (request.n_samples < 1) fail(ErrorCode::invalid_argument, "n_samples must be >= 1");
    if (trim(request.user).empty() && trim(request.system).empty())
        fail(ErrorCode::invalid_argument, "empty prompt");
    log_.chat_calls += 1;

    std::string payload = request.system + "\x1f" + request.user;
    bool use_cache = config_.mode == GatewayMode::record || config_.mode == GatewayMode::replay;

    if (use_cache) {
        std::vector<std::string> cached(static_cast<size_t>(request.n_samples));
        bool all_hit = true;
        for (int i = 0; i < request.n_samples; ++i) {
            if (!cache_read(cache_key("chat", payload, request.temperature, i), cached[static_cast<size_t>(i)])) {
                all_hit = false;
                break;
            }
        }
        if (all_hit) return cached;
        if (config_.mode == GatewayMode::replay)
            fail(ErrorCode::gateway, "replay cache miss for chat request");
    }

    std::vector<std::string> out;
    {
        InFlightGuard guard(inflight_mutex_, inflight_cv_, in_flight_, config_.max_in_flight);
        out = provider_->chat(request);
    }
    if (static_cast<int>(out.size()) != request.n_samples)
        fail(ErrorCode::gateway, "provider returned wrong completion count");
    if (config_.mode == GatewayMode::record)
        for (int i = 0; i < request.n_samples; ++i)
            cache_write(cache_key("chat", payload, request.temperature, i), out[static_cast<size_t>(i)]);
    return out;
}

EmbeddingVector Gateway::embed(const std::string& text) {
    if (trim(text).empty()) fail(ErrorCode::invalid_argument, "cannot embed empty text");
    log_.embed_calls += 1;

    bool use_cache = config_.mode == GatewayMode::record || config_.mode == GatewayMode::replay;
    std::string key = cache_key("embed", text, 0.0, 0);
    if (use_cache) {
        std::string cached;
        if (cache_read(key, cached)) {
            EmbeddingVector v;
            for (const auto& x : json::parse(cached)) v.values.push_back(x.get<double>());
            return v;
        }
        if (config_.mode == GatewayMode::replay)
            fail(ErrorCode::gateway, "replay cache miss for embedding");
    }

    EmbeddingVector v;
    {
        InFlightGuard guard(inflight_mutex_, inflight_cv_, in_flight_, config_.max_in_flight);
        v = provider_->embed(text);
    }
    for (double x : v.values)
        if (!std::isfinite(x)) fail(ErrorCode::gateway, "non-finite embedding value");
    if (config_.mode == GatewayMode::record) cache_write(key, json(v.values).dump());
    return v;
}

}  // namespace metro
