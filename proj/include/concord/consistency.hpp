#pragma once
// Answer distribution over n sampled generations and the three
// consistency-based confidence scores: agreement (mode frequency),
// entropy consistency (one minus normalized Shannon entropy of the unique
// answer frequencies), and FSD (frequency gap between the two most-voted
// answers). The majority vote is the toolkit's final prediction.

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "concord/answer.hpp"
#include "concord/extraction.hpp"
#include "concord/records.hpp"
#include "concord/types.hpp"

namespace concord {

struct DistributionEntry {
    AnswerValue answer;
    int count = 0;
    int first_index = 0; // earliest sample position of this answer
};

struct AnswerDistribution {
    int n = 0; // total samples, Invalid included
    std::vector<DistributionEntry> entries; // count desc, then first_index asc

    int unique_count() const { return static_cast<int>(entries.size()); }
    double frequency(size_t i) const { return entries[i].count / static_cast<double>(n); }
};

// Groups answers by answers_equal; the first occurrence is each group's
// representative. Deterministic for a given input order.
inline AnswerDistribution build_distribution(const std::vector<AnswerValue>& answers,
                                             TaskKind task_kind) {
    if (answers.empty()) throw DataError("cannot build a distribution from zero answers");
    AnswerDistribution dist;
    dist.n = static_cast<int>(answers.size());
    for (size_t i = 0; i < answers.size(); ++i) {
        bool grouped = false;
        for (auto& entry : dist.entries) {
            if (answers_equal(entry.answer, answers[i], task_kind)) {
                ++entry.count;
                grouped = true;
                break;
            }
        }
        if (!grouped)
            dist.entries.push_back({answers[i], 1, static_cast<int>(i)});
    }
    std::stable_sort(dist.entries.begin(), dist.entries.end(),
                     [](const DistributionEntry& a, const DistributionEntry& b) {
                         if (a.count != b.count) return a.count > b.count;
                         return a.first_index < b.first_index;
                     });
    return dist;
}

// Most-voted answer; count ties broken by earliest first occurrence.
inline const AnswerValue& majority_answer(const AnswerDistribution& dist) {
    return dist.entries.front().answer;
}

// Fraction of samples agreeing with the most-voted answer. Range [1/n, 1].
inline double agreement(const AnswerDistribution& dist) {
    return dist.frequency(0);
}

// One minus the normalized entropy of the unique-answer frequencies.
// A single unique answer is maximal consistency: 1.0 (the denominator
// log|unique| vanishes there, and agreement = fsd = 1 agree).
inline double entropy_consistency(const AnswerDistribution& dist) {
    int unique = dist.unique_count();
    if (unique <= 1) return 1.0;
    double entropy = 0.0;
    for (size_t i = 0; i < dist.entries.size(); ++i) {
        double p = dist.frequency(i);
        if (p > 0.0) entropy -= p * std::log(p);
    }
    double normalized = entropy / std::log(static_cast<double>(unique));
    return std::clamp(1.0 - normalized, 0.0, 1.0);
}

// Frequency gap between the two most-voted answers; the second frequency is
// 0 when nothing competes with the mode.
inline double fsd(const AnswerDistribution& dist) {
    double first = dist.frequency(0);
    double second = dist.unique_count() > 1 ? dist.frequency(1) : 0.0;
    return first - second;
}

struct ConsistencyScores {
    AnswerValue voted;
    std::map<std::string, double> scores; // entropy, agreement, fsd
};

// Extracts every sample's answer, builds one distribution, and returns the
// majority vote plus all three consistency confidences.
inline ConsistencyScores consistency_confidences(const QueryRecord& record,
                                                 const RuleSet& rules) {
    if (record.samples.empty())
        throw DataError("record '" + record.query_id + "' has no samples");
    std::vector<AnswerValue> answers = extract_all(record, rules);
    AnswerDistribution dist = build_distribution(answers, record.task_kind);
    ConsistencyScores out;
    out.voted = majority_answer(dist);
    out.scores["agreement"] = agreement(dist);
    out.scores["entropy"] = entropy_consistency(dist);
    out.scores["fsd"] = fsd(dist);
    return out;
}

} // namespace concord
