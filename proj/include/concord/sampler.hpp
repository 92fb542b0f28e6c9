#pragma once
// Client for an OpenAI-compatible chat-completions endpoint. Collects the n
// temperature-sampled generations per query and the P(True)/verbalized probe
// responses, with a content-addressed response cache, bounded concurrency,
// and retry with exponential backoff on 429/5xx.
//
// Wire protocol: POST {base_url}/chat/completions with JSON body fields
//   model, messages [{role, content}], n, temperature, max_tokens,
//   frequency_penalty, presence_penalty, and optionally logprobs /
//   top_logprobs. Bearer credential from the CONCORD_API_KEY environment
//   variable. Cache layout: one JSON file per request digest under
//   cache_dir, {"base_url", "request", "response"}.
//
// Sampled outputs are stochastic, so a cached response is permanent: a cache
// hit returns the stored samples without any network call, and replaying
// from cache needs no credential.

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <unistd.h>

#include <httplib.h>
#include <json.hpp>

#include "concord/detail/sha256.hpp"
#include "concord/records.hpp"
#include "concord/types.hpp"

namespace concord {

inline constexpr const char* kApiKeyEnvVar = "CONCORD_API_KEY";

struct SamplerConfig {
    std::string base_url;  // e.g. "http://localhost:8000/v1"
    std::string model;
    int n = 40;
    double temperature = 0.4;
    int max_tokens = 1000;
    double frequency_penalty = 0.0;
    double presence_penalty = 0.0;
    int max_in_flight = 4;
    int retry_budget = 5;
    std::string cache_dir = ".concord-cache";
    bool request_logprobs = true; // samples carry logprobs when the endpoint returns them
    int top_logprobs = 5;         // alternatives requested for P(True) probes
    int retry_base_delay_ms = 500;
    int http_timeout_s = 300;
};

enum class ProbeMode { PTrue, VerbLing, VerbPercent };

inline std::string_view to_string(ProbeMode m) {
    switch (m) {
        case ProbeMode::PTrue: return "ptrue";
        case ProbeMode::VerbLing: return "verb_ling";
        case ProbeMode::VerbPercent: return "verb_percent";
    }
    return "";
}

inline std::optional<ProbeMode> probe_mode_from(std::string_view s) {
    if (s == "ptrue") return ProbeMode::PTrue;
    if (s == "verb_ling") return ProbeMode::VerbLing;
    if (s == "verb_percent") return ProbeMode::VerbPercent;
    return std::nullopt;
}

namespace detail {

// (scheme://host:port, path_prefix) from a base URL.
inline std::pair<std::string, std::string> split_base_url(const std::string& base_url) {
    auto scheme_end = base_url.find("://");
    if (scheme_end == std::string::npos)
        throw ConfigError("base_url must include a scheme, got '" + base_url + "'");
    auto path_start = base_url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {base_url, ""};
    std::string host = base_url.substr(0, path_start);
    std::string prefix = base_url.substr(path_start);
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
    return {host, prefix};
}

class Semaphore {
  public:
    explicit Semaphore(int count) : count_(count) {}

    void acquire() {
        std::unique_lock lock(mutex_);
        cv_.wait(lock, [&] { return count_ > 0; });
        --count_;
    }

    void release() {
        {
            std::lock_guard lock(mutex_);
            ++count_;
        }
        cv_.notify_one();
    }

  private:
    std::mutex mutex_;
    std::condition_variable cv_;
    int count_;
};

struct SemaphoreGuard {
    explicit SemaphoreGuard(Semaphore& s) : sem(s) { sem.acquire(); }
    ~SemaphoreGuard() { sem.release(); }
    Semaphore& sem;
};

} // namespace detail

class SamplerClient {
  public:
    explicit SamplerClient(SamplerConfig config)
        : config_(std::move(config)), in_flight_(config_.max_in_flight) {
        if (config_.n < 1) throw ConfigError("sampler n must be >= 1");
        if (config_.max_in_flight < 1) throw ConfigError("max_in_flight must be >= 1");
    }

    const SamplerConfig& config() const { return config_; }

    // Exactly n samples with dense indices; logprobs recorded per sample when
    // the endpoint returns them.
    std::vector<GenerationSample> sample_generations(const std::string& prompt) {
        json body = chat_body(prompt, config_.n, config_.temperature,
                              config_.request_logprobs, /*top_logprobs=*/0);
        json response = post_with_cache(body);
        const json& choices = expect(response, "choices", "response");
        if (!choices.is_array() || static_cast<int>(choices.size()) != config_.n)
            throw DataError("response.choices: expected " + std::to_string(config_.n) +
                            " choices, got " + std::to_string(choices.size()));
        std::vector<GenerationSample> samples;
        samples.reserve(choices.size());
        for (size_t i = 0; i < choices.size(); ++i) {
            std::string path = "response.choices[" + std::to_string(i) + "]";
            GenerationSample s;
            s.sample_index = static_cast<int>(i);
            s.raw_text = expect(expect(choices[i], "message", path), "content", path + ".message")
                             .get<std::string>();
            auto lps = read_logprobs(choices[i]);
            if (!lps.empty()) s.token_logprobs = std::move(lps);
            samples.push_back(std::move(s));
        }
        return samples;
    }

    // One probe call. Probes are judgment queries, so they decode greedily
    // (n=1, temperature 0). PTrue additionally needs token probabilities and
    // fails loudly when the endpoint cannot provide them.
    ProbeRecord probe(const std::string& prompt, ProbeMode mode) {
        bool want_logprobs = mode == ProbeMode::PTrue;
        json body = chat_body(prompt, /*n=*/1, /*temperature=*/0.0, want_logprobs,
                              want_logprobs ? config_.top_logprobs : 0);
        json response = post_with_cache(body);
        const json& choices = expect(response, "choices", "response");
        if (!choices.is_array() || choices.empty())
            throw DataError("response.choices: expected at least one choice");
        const json& choice = choices[0];
        ProbeRecord record;
        record.method = std::string(to_string(mode));
        record.response_text =
            expect(expect(choice, "message", "response.choices[0]"), "content",
                   "response.choices[0].message")
                .get<std::string>();
        if (mode == ProbeMode::PTrue) {
            auto [p_yes, p_no] = yes_no_mass(choice);
            record.p_yes = p_yes;
            record.p_no = p_no;
        }
        return record;
    }

    // Digest identifying one request; any parameter change changes the key.
    std::string cache_key(const json& body) const {
        return detail::sha256_hex(config_.base_url + "\n" + body.dump());
    }

    json chat_body(const std::string& prompt, int n, double temperature,
                   bool want_logprobs, int top_logprobs) const {
        json body;
        body["model"] = config_.model;
        body["messages"] = json::array({json{{"role", "user"}, {"content", prompt}}});
        body["n"] = n;
        body["temperature"] = temperature;
        body["max_tokens"] = config_.max_tokens;
        body["frequency_penalty"] = config_.frequency_penalty;
        body["presence_penalty"] = config_.presence_penalty;
        if (want_logprobs) {
            body["logprobs"] = true;
            if (top_logprobs > 0) body["top_logprobs"] = top_logprobs;
        }
        return body;
    }

  private:
    static const json& expect(const json& obj, const char* key, const std::string& path) {
        auto it = obj.find(key);
        if (it == obj.end() || it->is_null())
            throw DataError("malformed response payload: missing " + path + "." + key);
        return *it;
    }

    static std::vector<double> read_logprobs(const json& choice) {
        std::vector<double> out;
        auto lp = choice.find("logprobs");
        if (lp == choice.end() || lp->is_null()) return out;
        auto content = lp->find("content");
        if (content == lp->end() || !content->is_array()) return out;
        for (const auto& tok : *content)
            if (tok.contains("logprob") && tok["logprob"].is_number())
                out.push_back(tok["logprob"].get<double>());
        return out;
    }

    // Summed probability over case variants of Yes/No among the first
    // token's alternatives (plus the chosen token itself).
    static std::pair<double, double> yes_no_mass(const json& choice) {
        auto lp = choice.find("logprobs");
        if (lp == choice.end() || lp->is_null() || !lp->contains("content") ||
            !(*lp)["content"].is_array() || (*lp)["content"].empty())
            throw DataError("endpoint did not return token probabilities; "
                            "ptrue probes need logprobs support");
        const json& first = (*lp)["content"][0];
        std::map<std::string, double> mass; // raw token -> logprob
        if (first.contains("token") && first.contains("logprob"))
            mass[first["token"].get<std::string>()] = first["logprob"].get<double>();
        if (first.contains("top_logprobs") && first["top_logprobs"].is_array())
            for (const auto& alt : first["top_logprobs"])
                if (alt.contains("token") && alt.contains("logprob"))
                    mass[alt["token"].get<std::string>()] = alt["logprob"].get<double>();
        double p_yes = 0.0, p_no = 0.0;
        for (const auto& [token, logprob] : mass) {
            std::string folded = to_lower(trim(token));
            if (folded == "yes") p_yes += std::exp(logprob);
            else if (folded == "no") p_no += std::exp(logprob);
        }
        return {p_yes, p_no};
    }

    json post_with_cache(const json& body) {
        namespace fs = std::filesystem;
        fs::path cache_file = fs::path(config_.cache_dir) / (cache_key(body) + ".json");
        if (fs::exists(cache_file)) {
            std::ifstream in(cache_file);
            json stored = json::parse(in, nullptr, /*allow_exceptions=*/true);
            return stored.at("response");
        }

        const char* key = std::getenv(kApiKeyEnvVar);
        if (key == nullptr || *key == '\0')
            throw ConfigError(std::string("no API credential: set the ") + kApiKeyEnvVar +
                              " environment variable");

        json response = post_with_retries(body, key);

        fs::create_directories(config_.cache_dir);
        json stored;
        stored["base_url"] = config_.base_url;
        stored["request"] = body;
        stored["response"] = response;
        // write-temp-then-rename keeps concurrent writers from tearing entries
        static std::atomic<unsigned> counter{0};
        fs::path tmp = cache_file;
        tmp += ".tmp." + std::to_string(::getpid()) + "." + std::to_string(counter++);
        {
            std::ofstream out(tmp, std::ios::trunc);
            out << stored.dump() << '\n';
        }
        fs::rename(tmp, cache_file);
        return response;
    }

    json post_with_retries(const json& body, const std::string& key) {
        auto [host, prefix] = detail::split_base_url(config_.base_url);
        std::string target = prefix + "/chat/completions";
        std::string payload = body.dump();
        httplib::Headers headers = {{"Authorization", "Bearer " + key}};

        detail::SemaphoreGuard guard(in_flight_);
        int attempt = 0;
        while (true) {
            httplib::Client client(host);
            client.set_connection_timeout(10, 0);
            client.set_read_timeout(config_.http_timeout_s, 0);
            auto res = client.Post(target, headers, payload, "application/json");

            std::string failure;
            if (!res) {
                failure = "connection error (" + httplib::to_string(res.error()) + ")";
            } else if (res->status == 200) {
                try {
                    return json::parse(res->body);
                } catch (const json::parse_error& e) {
                    throw DataError("malformed response payload: " + std::string(e.what()));
                }
            } else if (res->status == 429 || res->status >= 500) {
                failure = "HTTP " + std::to_string(res->status);
            } else {
                throw DataError("HTTP " + std::to_string(res->status) + " from " + host +
                                target + ": " + res->body.substr(0, 256));
            }

            if (attempt >= config_.retry_budget)
                throw DataError(failure + " after " + std::to_string(attempt) +
                                " retries to " + host + target);
            std::this_thread::sleep_for(backoff_delay(attempt));
            ++attempt;
        }
    }

    std::chrono::milliseconds backoff_delay(int attempt) {
        long base = config_.retry_base_delay_ms;
        long delay = base << std::min(attempt, 10);
        std::uniform_int_distribution<long> jitter(0, std::max(base, 1L));
        std::lock_guard lock(rng_mutex_);
        return std::chrono::milliseconds(delay + jitter(rng_));
    }

    SamplerConfig config_;
    detail::Semaphore in_flight_;
    std::mt19937_64 rng_{std::random_device{}()};
    std::mutex rng_mutex_;
};

} // namespace concord
