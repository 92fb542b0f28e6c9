#include <doctest.h>

#include <cmath>

#include "concord/baselines.hpp"
#include "test_support.hpp"

using namespace concord;

TEST_CASE("logit confidence is reciprocal perplexity") {
    GenerationSample s = testutil::make_sample(0, "x");
    s.token_logprobs = std::vector<double>{0.0, 0.0, 0.0};
    CHECK(logit_confidence(s) == 1.0);

    s.token_logprobs = std::vector<double>{-std::log(2.0), -std::log(2.0)};
    // direct perplexity oracle: PPL = exp(-mean lp), confidence = 1/PPL
    double mean = -std::log(2.0);
    double ppl = std::exp(-mean);
    CHECK(logit_confidence(s) == doctest::Approx(1.0 / ppl).epsilon(1e-12));
    CHECK(logit_confidence(s) == doctest::Approx(0.5).epsilon(1e-12));

    GenerationSample empty = testutil::make_sample(1, "y");
    CHECK_THROWS_AS(logit_confidence(empty), DataError);
}

TEST_CASE("logit confidence ignores token count at constant log-probability") {
    for (int len : {1, 3, 10, 100}) {
        GenerationSample s = testutil::make_sample(0, "x");
        s.token_logprobs = std::vector<double>(static_cast<size_t>(len), -0.7);
        CHECK(logit_confidence(s) == doctest::Approx(std::exp(-0.7)).epsilon(1e-12));
    }
}

TEST_CASE("select_logit_sample picks the lowest qualifying index") {
    QueryRecord r = testutil::make_math_record(
        "q", {"The answer is 5.", "The answer is 5.", "The answer is 6."}, "5");
    r.samples[0].token_logprobs = std::vector<double>{-0.1};
    r.samples[1].token_logprobs = std::vector<double>{-0.2};
    std::vector<AnswerValue> extracted = {AnswerValue::numeric("5"), AnswerValue::numeric("5"),
                                          AnswerValue::numeric("6")};
    AnswerValue voted = AnswerValue::numeric("5");

    CHECK(select_logit_sample(r, extracted, voted).sample_index == 0);

    // only a later sample qualifies
    r.samples[0].token_logprobs.reset();
    CHECK(select_logit_sample(r, extracted, voted).sample_index == 1);

    // no sample with logprobs extracts to the vote
    r.samples[1].token_logprobs.reset();
    CHECK_THROWS_AS(select_logit_sample(r, extracted, voted), DataError);
}

TEST_CASE("ptrue confidence") {
    CHECK(ptrue_confidence({0.8, 0.2}) == doctest::Approx(0.8));
    CHECK(ptrue_confidence({0.3, 0.1}) == doctest::Approx(0.75));
    CHECK(ptrue_confidence({0.0, 0.0}) == 0.5);
    CHECK_THROWS_AS(ptrue_confidence({-0.1, 0.2}), DataError);
    CHECK_THROWS_AS(ptrue_confidence({0.9, 0.2}), DataError);
}

TEST_CASE("ptrue complement property") {
    std::mt19937 gen(3);
    std::uniform_real_distribution<double> u(0.0, 0.5);
    for (int i = 0; i < 200; ++i) {
        double p = u(gen), q = u(gen);
        if (p + q == 0.0) continue;
        CHECK(ptrue_confidence({p, q}) + ptrue_confidence({q, p}) ==
              doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("ptrue prompt template") {
    std::string prompt = build_ptrue_prompt("What is 2+2?", "2+2 = 4.", "4");
    CHECK(prompt ==
          "Q: What is 2+2?\n"
          "A: 2+2 = 4.\n"
          "Answer: 4\n"
          "Is the above answer correct? (Yes/No):");

    // exactly one probe question line in the 0-shot prompt
    size_t count = 0;
    for (size_t pos = prompt.find(kPTrueQuestionLine); pos != std::string::npos;
         pos = prompt.find(kPTrueQuestionLine, pos + 1))
        ++count;
    CHECK(count == 1);
}

TEST_CASE("ptrue prompt with 8 shots") {
    std::vector<PTrueShot> shots;
    for (int i = 0; i < 8; ++i)
        shots.push_back({"q" + std::to_string(i), "chain", "a", i % 2 == 0});
    std::string prompt = build_ptrue_prompt("Q?", "chain", "a", shots);

    size_t count = 0;
    for (size_t pos = prompt.find(kPTrueQuestionLine); pos != std::string::npos;
         pos = prompt.find(kPTrueQuestionLine, pos + 1))
        ++count;
    CHECK(count == 9); // 8 exemplar blocks + 1 query block
    CHECK(prompt.find("(Yes/No): Yes") != std::string::npos);
    CHECK(prompt.find("(Yes/No): No") != std::string::npos);

    shots.resize(3);
    CHECK_THROWS_AS(build_ptrue_prompt("Q?", "c", "a", shots), DataError);

    std::vector<PTrueShot> skewed(8, PTrueShot{"q", "c", "a", true});
    CHECK_THROWS_AS(build_ptrue_prompt("Q?", "c", "a", skewed), DataError);
}

TEST_CASE("linguistic expression mapping") {
    CHECK(verbalized_linguistic_confidence("Almost no chance") == doctest::Approx(0.05));
    CHECK(verbalized_linguistic_confidence("Almost certain") == doctest::Approx(0.95));
    CHECK(verbalized_linguistic_confidence("About even") == doctest::Approx(0.45));
    CHECK(verbalized_linguistic_confidence("  highly LIKELY  ") == doctest::Approx(0.85));
    CHECK_THROWS_AS(verbalized_linguistic_confidence("no idea"), DataError);

    // strictly increasing along the listed order
    double prev = -1.0;
    for (auto expr : kLinguisticExpressions) {
        double v = verbalized_linguistic_confidence(expr);
        CHECK(v > prev);
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
        prev = v;
    }
}

TEST_CASE("verbalized percent parsing") {
    CHECK(verbalized_percent_confidence("90") == doctest::Approx(0.9));
    CHECK(verbalized_percent_confidence("I am 85% confident.") == doctest::Approx(0.85));
    CHECK_THROWS_AS(verbalized_percent_confidence("very confident"), DataError);
    // first in-range number wins; out-of-range numbers are skipped
    CHECK(verbalized_percent_confidence("150 is silly, I'd say 70 out of 100") ==
          doctest::Approx(0.7));
    CHECK_FALSE(try_parse_verbalized_percent("no numbers").has_value());
}

TEST_CASE("verbalized prompt templates") {
    std::string percent = build_verbalized_prompt("Q?", "chain", "4", VerbalMode::Percent);
    CHECK(percent ==
          "Q: Q?\n"
          "A: chain\n"
          "Answer: 4\n"
          "How confident are you in the above answer\n"
          "(0-100%)?:");

    std::string ling = build_verbalized_prompt("Q?", "chain", "4", VerbalMode::Linguistic);
    for (auto expr : kLinguisticExpressions)
        CHECK(ling.find("\"" + std::string(expr) + "\"") != std::string::npos);

    // both modes share the Q:/A:/Answer: prefix
    std::string prefix = "Q: Q?\nA: chain\nAnswer: 4\n";
    CHECK(percent.substr(0, prefix.size()) == prefix);
    CHECK(ling.substr(0, prefix.size()) == prefix);
}
