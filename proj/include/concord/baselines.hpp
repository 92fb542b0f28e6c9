#pragma once
// Post-hoc baseline confidences: raw logit (reciprocal perplexity), P(True)
// from a Yes/No probe, and verbalized confidence (linguistic expression or
// 0-100 percentage). Prompt builders emit the exact probe templates the
// sampler client sends; the templates are also what probe responses are
// expected to answer.

#include <array>
#include <cmath>
#include <numeric>
#include <optional>
#include <regex>
#include <string>
#include <string_view>
#include <vector>

#include "concord/answer.hpp"
#include "concord/records.hpp"
#include "concord/types.hpp"

namespace concord {

// Probability mass on "Yes"/"No" summed over case variants of each token.
struct TokenProbePair {
    double p_yes = 0.0;
    double p_no = 0.0;
};

inline void validate_probe_pair(const TokenProbePair& p) {
    if (p.p_yes < 0.0 || p.p_no < 0.0)
        throw DataError("probe probabilities must be non-negative");
    if (p.p_yes + p.p_no > 1.0 + 1e-9)
        throw DataError("probe probabilities sum above 1");
}

// exp(mean token log-probability) = 1/PPL of the sampled chain.
inline double logit_confidence(const GenerationSample& sample) {
    if (!sample.token_logprobs || sample.token_logprobs->empty())
        throw DataError("sample " + std::to_string(sample.sample_index) +
                        " carries no token log-probabilities");
    const auto& lps = *sample.token_logprobs;
    double sum = std::accumulate(lps.begin(), lps.end(), 0.0);
    return std::exp(sum / static_cast<double>(lps.size()));
}

// The chain scored by the logit baseline: the lowest-index sample that has
// log-probabilities and extracts to the voted answer.
inline const GenerationSample& select_logit_sample(const QueryRecord& record,
                                                   const std::vector<AnswerValue>& extracted,
                                                   const AnswerValue& voted) {
    for (size_t i = 0; i < record.samples.size(); ++i) {
        const auto& s = record.samples[i];
        if (!s.token_logprobs || s.token_logprobs->empty()) continue;
        if (i < extracted.size() && answers_equal(extracted[i], voted, record.task_kind))
            return s;
    }
    throw DataError("record '" + record.query_id +
                    "': no sample with log-probabilities extracts to the voted answer");
}

// Normalized probability of "Yes". An uninformative probe (both masses zero)
// maps to 0.5; callers flag that case in diagnostics.
inline double ptrue_confidence(const TokenProbePair& probe) {
    validate_probe_pair(probe);
    double total = probe.p_yes + probe.p_no;
    if (total == 0.0) return 0.5;
    return probe.p_yes / total;
}

struct PTrueShot {
    std::string question;
    std::string reasoning_chain;
    std::string answer;
    bool correct = false;
};

inline constexpr std::string_view kPTrueQuestionLine =
    "Is the above answer correct? (Yes/No):";

namespace detail {
inline std::string probe_block(const std::string& question, const std::string& chain,
                               const std::string& answer) {
    return "Q: " + question + "\nA: " + chain + "\nAnswer: " + answer + "\n";
}
} // namespace detail

// P(True) probe prompt. 0-shot emits the bare template; 8-shot prepends the
// caller-supplied exemplars (exactly 4 correct and 4 incorrect, kept in the
// given order) in the same format with their Yes/No labels filled in.
inline std::string build_ptrue_prompt(const std::string& question,
                                      const std::string& reasoning_chain,
                                      const std::string& answer,
                                      const std::vector<PTrueShot>& shots = {}) {
    if (shots.size() != 0 && shots.size() != 8)
        throw DataError("ptrue prompts take 0 or 8 shots, got " +
                        std::to_string(shots.size()));
    if (!shots.empty()) {
        int yes = 0;
        for (const auto& s : shots) yes += s.correct ? 1 : 0;
        if (yes != 4)
            throw DataError("8-shot ptrue prompts need 4 correct and 4 incorrect exemplars");
    }
    std::string out;
    for (const auto& shot : shots) {
        out += detail::probe_block(shot.question, shot.reasoning_chain, shot.answer);
        out += std::string(kPTrueQuestionLine) + " " + (shot.correct ? "Yes" : "No") + "\n\n";
    }
    out += detail::probe_block(question, reasoning_chain, answer);
    out += kPTrueQuestionLine;
    return out;
}

// The ten expressions, least to most confident, mapped to 0.05 .. 0.95 in
// steps of 0.10. The endpoints are fixed at 5% and 95%; a uniform step is
// the only spacing consistent with ten expressions between them.
inline constexpr std::array<std::string_view, 10> kLinguisticExpressions = {
    "Almost no chance", "Highly unlikely", "Unlikely", "Probably not",
    "About even",       "Better than even", "Likely",  "Probably",
    "Highly likely",    "Almost certain"};

inline double verbalized_linguistic_confidence(std::string_view expr) {
    std::string needle = to_lower(trim(expr));
    for (size_t i = 0; i < kLinguisticExpressions.size(); ++i) {
        if (needle == to_lower(kLinguisticExpressions[i]))
            return 0.05 + 0.10 * static_cast<double>(i);
    }
    throw DataError("unrecognized confidence expression: '" + std::string(expr) + "'");
}

// First number in [0,100] found in the reply, as a fraction. nullopt when
// the reply carries no in-range number.
inline std::optional<double> try_parse_verbalized_percent(std::string_view reply) {
    static const std::regex number(R"([0-9]+(?:\.[0-9]+)?)");
    for (std::cregex_iterator it(reply.data(), reply.data() + reply.size(), number), end;
         it != end; ++it) {
        double v = std::strtod(it->str().c_str(), nullptr);
        if (v <= 100.0) return v / 100.0;
    }
    return std::nullopt;
}

inline double verbalized_percent_confidence(std::string_view reply) {
    auto v = try_parse_verbalized_percent(reply);
    if (!v)
        throw DataError("no percentage found in reply: '" + std::string(reply) + "'");
    return *v;
}

enum class VerbalMode { Linguistic, Percent };

// Verbalized-confidence probe prompt, sharing the Q:/A:/Answer: prefix with
// the P(True) template.
inline std::string build_verbalized_prompt(const std::string& question,
                                           const std::string& reasoning_chain,
                                           const std::string& answer, VerbalMode mode) {
    std::string out = detail::probe_block(question, reasoning_chain, answer);
    if (mode == VerbalMode::Percent) {
        out += "How confident are you in the above answer\n(0-100%)?:";
    } else {
        out += "How confident are you in the above answer?\n(choose from ";
        for (size_t i = 0; i < kLinguisticExpressions.size(); ++i) {
            if (i) out += ", ";
            out += "\"" + std::string(kLinguisticExpressions[i]) + "\"";
        }
        out += "):";
    }
    return out;
}

} // namespace concord
