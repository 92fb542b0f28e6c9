#include <doctest.h>

#include <thread>

#include "concord/detail/sha256.hpp"
#include "concord/sampler.hpp"
#include "mock_endpoint.hpp"
#include "test_support.hpp"

using namespace concord;
using testutil::EnvVar;
using testutil::MockEndpoint;
using testutil::TempDir;

namespace {

SamplerConfig fast_config(const MockEndpoint& mock, const TempDir& tmp, int n = 2) {
    SamplerConfig cfg;
    cfg.base_url = mock.base_url();
    cfg.model = "mock-model";
    cfg.n = n;
    cfg.temperature = 0.4;
    cfg.cache_dir = tmp.file("cache").string();
    cfg.retry_base_delay_ms = 1;
    cfg.retry_budget = 5;
    return cfg;
}

} // namespace

TEST_CASE("sha256 known vectors") {
    CHECK(detail::sha256_hex("") ==
          "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(detail::sha256_hex("abc") ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(detail::sha256_hex("abcdbcdecdefdefgefghfghighijhijkijkljklmklmnlmnomnopnopq") ==
          "248d6a61d20638b8e5c026930c3e6039a33ce45964ff2167f6ecedd419db06c1");
}

TEST_CASE("sampler defaults") {
    SamplerConfig cfg;
    CHECK(cfg.n == 40);
    CHECK(cfg.temperature == 0.4);
    CHECK(cfg.max_tokens == 1000);
    CHECK(cfg.frequency_penalty == 0.0);
    CHECK(cfg.presence_penalty == 0.0);
}

TEST_CASE("cache keys track every request parameter") {
    SamplerConfig cfg;
    cfg.base_url = "http://example/v1";
    cfg.model = "m";
    SamplerClient client(cfg);
    json base = client.chat_body("prompt", 40, 0.4, false, 0);
    CHECK(client.cache_key(base) == client.cache_key(client.chat_body("prompt", 40, 0.4, false, 0)));
    CHECK(client.cache_key(base) != client.cache_key(client.chat_body("prompt2", 40, 0.4, false, 0)));
    CHECK(client.cache_key(base) != client.cache_key(client.chat_body("prompt", 39, 0.4, false, 0)));
    CHECK(client.cache_key(base) != client.cache_key(client.chat_body("prompt", 40, 0.5, false, 0)));
    CHECK(client.cache_key(base) != client.cache_key(client.chat_body("prompt", 40, 0.4, true, 5)));

    SamplerConfig other = cfg;
    other.base_url = "http://elsewhere/v1";
    SamplerClient client2(other);
    CHECK(client.cache_key(base) != client2.cache_key(base));
}

TEST_CASE("base url splitting") {
    auto [host, prefix] = detail::split_base_url("http://127.0.0.1:8000/v1");
    CHECK(host == "http://127.0.0.1:8000");
    CHECK(prefix == "/v1");
    auto [host2, prefix2] = detail::split_base_url("https://api.example.com");
    CHECK(host2 == "https://api.example.com");
    CHECK(prefix2.empty());
    CHECK_THROWS_AS(detail::split_base_url("no-scheme/v1"), ConfigError);
}

TEST_CASE("sample_generations returns n dense samples") {
    MockEndpoint mock;
    mock.with_logprobs = true;
    TempDir tmp;
    EnvVar key(kApiKeyEnvVar, "test-key");
    SamplerClient client(fast_config(mock, tmp, 3));

    auto samples = client.sample_generations("What is 6*7?");
    REQUIRE(samples.size() == 3);
    for (int i = 0; i < 3; ++i) {
        CHECK(samples[i].sample_index == i);
        CHECK(samples[i].raw_text == "The answer is 42.");
        REQUIRE(samples[i].token_logprobs.has_value());
        CHECK(samples[i].token_logprobs->size() == 2);
    }
}

TEST_CASE("cache hit performs zero network calls") {
    MockEndpoint mock;
    TempDir tmp;
    EnvVar key(kApiKeyEnvVar, "test-key");
    SamplerClient client(fast_config(mock, tmp));

    auto first = client.sample_generations("cached prompt");
    int after_first = mock.requests.load();
    CHECK(after_first == 1);

    auto second = client.sample_generations("cached prompt");
    CHECK(mock.requests.load() == after_first); // served from cache
    REQUIRE(second.size() == first.size());
    for (size_t i = 0; i < first.size(); ++i) {
        CHECK(first[i].raw_text == second[i].raw_text);
        CHECK(first[i].sample_index == second[i].sample_index);
    }

    // cache replay does not need the credential
    EnvVar unset(kApiKeyEnvVar, nullptr);
    auto third = client.sample_generations("cached prompt");
    CHECK(third.size() == first.size());
    CHECK(mock.requests.load() == after_first);
}

TEST_CASE("missing credential fails before any network call") {
    MockEndpoint mock;
    TempDir tmp;
    EnvVar unset(kApiKeyEnvVar, nullptr);
    SamplerClient client(fast_config(mock, tmp));
    CHECK_THROWS_WITH_AS(client.sample_generations("p"), doctest::Contains("CONCORD_API_KEY"),
                         ConfigError);
    CHECK(mock.requests.load() == 0);
}

TEST_CASE("429 responses are retried within budget") {
    MockEndpoint mock;
    TempDir tmp;
    EnvVar key(kApiKeyEnvVar, "test-key");
    mock.fail_first = 2;
    SamplerClient client(fast_config(mock, tmp));
    auto samples = client.sample_generations("retry me");
    CHECK(samples.size() == 2);
    CHECK(mock.requests.load() == 3); // two 429s, then success
}

TEST_CASE("retry budget exhaustion raises") {
    MockEndpoint mock;
    TempDir tmp;
    EnvVar key(kApiKeyEnvVar, "test-key");
    mock.status_override = 500;
    SamplerConfig cfg = fast_config(mock, tmp);
    cfg.retry_budget = 2;
    SamplerClient client(cfg);
    CHECK_THROWS_WITH_AS(client.sample_generations("p"), doctest::Contains("HTTP 500"),
                         DataError);
    CHECK(mock.requests.load() == 3); // initial + 2 retries
}

TEST_CASE("schema 4xx errors are not retried") {
    MockEndpoint mock;
    TempDir tmp;
    EnvVar key(kApiKeyEnvVar, "test-key");
    mock.status_override = 400;
    SamplerClient client(fast_config(mock, tmp));
    CHECK_THROWS_AS(client.sample_generations("p"), DataError);
    CHECK(mock.requests.load() == 1);
}

TEST_CASE("concurrency never exceeds max_in_flight") {
    MockEndpoint mock;
    mock.handler_delay_ms = 25;
    TempDir tmp;
    EnvVar key(kApiKeyEnvVar, "test-key");
    SamplerConfig cfg = fast_config(mock, tmp, 1);
    cfg.max_in_flight = 3;
    SamplerClient client(cfg);

    std::vector<std::thread> callers;
    for (int i = 0; i < 10; ++i)
        callers.emplace_back(
            [&client, i] { client.sample_generations("prompt " + std::to_string(i)); });
    for (auto& t : callers) t.join();

    CHECK(mock.requests.load() == 10);
    CHECK(mock.peak_in_flight.load() <= 3);
    CHECK(mock.peak_in_flight.load() >= 2); // the pool actually ran concurrently
}

TEST_CASE("request body matches the documented wire schema bit-exact") {
    MockEndpoint mock;
    TempDir tmp;
    EnvVar key(kApiKeyEnvVar, "test-key");
    SamplerConfig cfg = fast_config(mock, tmp, 4);
    cfg.request_logprobs = true;
    SamplerClient client(cfg);
    client.sample_generations("check my body");

    REQUIRE(mock.bodies.size() == 1);
    json sent = json::parse(mock.bodies[0]);
    json expected = {
        {"model", "mock-model"},
        {"messages", json::array({json{{"role", "user"}, {"content", "check my body"}}})},
        {"n", 4},
        {"temperature", 0.4},
        {"max_tokens", 1000},
        {"frequency_penalty", 0.0},
        {"presence_penalty", 0.0},
        {"logprobs", true},
    };
    CHECK(sent == expected);
    CHECK(sent.dump() == expected.dump());
}

TEST_CASE("request bodies follow the wire schema across a config sweep") {
    MockEndpoint mock;
    TempDir tmp;
    EnvVar key(kApiKeyEnvVar, "test-key");
    std::mt19937 gen(61);
    std::uniform_real_distribution<double> temp(0.0, 2.0);
    for (int iter = 0; iter < 20; ++iter) {
        SamplerConfig cfg = fast_config(mock, tmp, 1 + static_cast<int>(gen() % 8));
        cfg.temperature = temp(gen);
        cfg.max_tokens = 100 + static_cast<int>(gen() % 900);
        cfg.frequency_penalty = (gen() % 5) * 0.1;
        cfg.presence_penalty = (gen() % 5) * 0.1;
        cfg.request_logprobs = gen() % 2 == 0;
        SamplerClient client(cfg);
        std::string prompt = "sweep " + std::to_string(iter);
        client.sample_generations(prompt);

        json sent = json::parse(mock.bodies.back());
        CHECK(sent["model"] == cfg.model);
        CHECK(sent["messages"] ==
              json::array({json{{"role", "user"}, {"content", prompt}}}));
        CHECK(sent["n"] == cfg.n);
        CHECK(sent["temperature"] == cfg.temperature);
        CHECK(sent["max_tokens"] == cfg.max_tokens);
        CHECK(sent["frequency_penalty"] == cfg.frequency_penalty);
        CHECK(sent["presence_penalty"] == cfg.presence_penalty);
        CHECK(sent.contains("logprobs") == cfg.request_logprobs);
        size_t expected_fields = cfg.request_logprobs ? 8 : 7;
        CHECK(sent.size() == expected_fields);
    }
}

TEST_CASE("ptrue probe sums case variants of yes/no") {
    MockEndpoint mock;
    mock.with_logprobs = true;
    mock.content = "Yes";
    mock.top_logprobs = json::array({
        json{{"token", "Yes"}, {"logprob", std::log(0.5)}},
        json{{"token", "yes"}, {"logprob", std::log(0.2)}},
        json{{"token", " No"}, {"logprob", std::log(0.1)}},
        json{{"token", "maybe"}, {"logprob", std::log(0.05)}},
    });
    TempDir tmp;
    EnvVar key(kApiKeyEnvVar, "test-key");
    SamplerClient client(fast_config(mock, tmp, 1));

    ProbeRecord probe = client.probe("Is it correct?", ProbeMode::PTrue);
    CHECK(probe.method == "ptrue");
    REQUIRE(probe.p_yes.has_value());
    REQUIRE(probe.p_no.has_value());
    // "The" (the chosen first token) is neither yes nor no; variants sum
    CHECK(*probe.p_yes == doctest::Approx(0.7).epsilon(1e-9));
    CHECK(*probe.p_no == doctest::Approx(0.1).epsilon(1e-9));
    CHECK(*probe.response_text == "Yes");

    // probe requests are greedy single-shot with logprobs
    json sent = json::parse(mock.bodies[0]);
    CHECK(sent["n"] == 1);
    CHECK(sent["temperature"] == 0.0);
    CHECK(sent["logprobs"] == true);
    CHECK(sent["top_logprobs"] == 5);
}

TEST_CASE("ptrue probe without logprob support is a capability error") {
    MockEndpoint mock;
    mock.with_logprobs = false;
    TempDir tmp;
    EnvVar key(kApiKeyEnvVar, "test-key");
    SamplerClient client(fast_config(mock, tmp, 1));
    CHECK_THROWS_WITH_AS(client.probe("p", ProbeMode::PTrue),
                         doctest::Contains("token probabilities"), DataError);
}

TEST_CASE("verbalized probes pass the reply text through") {
    MockEndpoint mock;
    mock.content = "85";
    TempDir tmp;
    EnvVar key(kApiKeyEnvVar, "test-key");
    SamplerClient client(fast_config(mock, tmp, 1));
    ProbeRecord probe = client.probe("how confident?", ProbeMode::VerbPercent);
    CHECK(probe.method == "verb_percent");
    CHECK(*probe.response_text == "85");
    CHECK_FALSE(probe.p_yes.has_value());

    // repeated probe is a cache hit
    int before = mock.requests.load();
    client.probe("how confident?", ProbeMode::VerbPercent);
    CHECK(mock.requests.load() == before);
}

TEST_CASE("malformed response bodies name the offending path") {
    httplib::Server server;
    server.Post("/v1/chat/completions", [](const httplib::Request&, httplib::Response& res) {
        res.set_content(R"({"id":"x","object":"chat.completion"})", "application/json");
    });
    int port = server.bind_to_any_port("127.0.0.1");
    std::thread thread([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    TempDir tmp;
    EnvVar key(kApiKeyEnvVar, "test-key");
    SamplerConfig cfg;
    cfg.base_url = "http://127.0.0.1:" + std::to_string(port) + "/v1";
    cfg.model = "m";
    cfg.n = 1;
    cfg.cache_dir = tmp.file("cache").string();
    cfg.retry_base_delay_ms = 1;
    SamplerClient client(cfg);
    CHECK_THROWS_WITH_AS(client.sample_generations("p"), doctest::Contains("choices"),
                         DataError);

    server.stop();
    thread.join();
}
