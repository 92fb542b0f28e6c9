#pragma once
// Calibration metrics over scored records: Brier score, ECE with reliability
// bins, accuracy, plus the case-study operations (threshold-tuned correctness
// discrimination with Macro-F1, oracle correction of the least-confident
// top-k%) and the sample-count Brier curve.
//
// All aggregation runs in fixed left-to-right record order so results are
// reproducible byte-for-byte.

#include <algorithm>
#include <cfenv>
#include <cmath>
#include <map>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "concord/consistency.hpp"
#include "concord/records.hpp"
#include "concord/types.hpp"

namespace concord {

struct ReliabilityBin {
    double lower = 0.0;   // bin m covers ((m-1)/M, m/M]
    double upper = 0.0;
    int count = 0;
    double mean_conf = 0.0; // 0 when empty
    double mean_acc = 0.0;  // 0 when empty
};

struct CalibrationReport {
    std::string method;
    int n_records = 0;
    double brier = 0.0;
    double ece = 0.0;
    double accuracy = 0.0;
    std::vector<ReliabilityBin> bins;
    std::map<std::string, std::string> group_keys; // model_tag / strategy_tag / dataset
};

struct ClassScores {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

struct DiscriminationResult {
    double threshold = 0.0;
    double macro_f1 = 0.0;
    ClassScores correct_class;
    ClassScores incorrect_class;
};

struct OracleCorrection {
    double pre_acc = 0.0;
    double post_acc = 0.0;
    double k = 0.0; // error rate = fraction of predictions corrected
    int corrected = 0;
};

inline double confidence_for(const ScoredRecord& r, const std::string& method) {
    auto it = r.confidences.find(method);
    if (it == r.confidences.end())
        throw DataError("record '" + r.query_id + "' has no '" + method + "' confidence");
    return it->second;
}

// Mean squared error between confidence and the 0/1 correctness indicator.
inline double brier(const std::vector<ScoredRecord>& records, const std::string& method) {
    if (records.empty()) throw DataError("brier over an empty record list");
    double sum = 0.0;
    for (const auto& r : records) {
        double d = confidence_for(r, method) - (r.is_correct ? 1.0 : 0.0);
        sum += d * d;
    }
    return sum / static_cast<double>(records.size());
}

inline double accuracy(const std::vector<ScoredRecord>& records) {
    if (records.empty()) throw DataError("accuracy over an empty record list");
    int correct = 0;
    for (const auto& r : records) correct += r.is_correct ? 1 : 0;
    return correct / static_cast<double>(records.size());
}

// Bin index in 1..M for interval ((m-1)/M, m/M]; confidence exactly 0 lands
// in bin 1. The comparisons below repair any ceil/division disagreement at
// bin edges so this matches an interval-scan oracle exactly.
inline int reliability_bin_index(double conf, int m_bins) {
    int m = static_cast<int>(std::ceil(conf * m_bins));
    m = std::clamp(m, 1, m_bins);
    while (m > 1 && conf <= static_cast<double>(m - 1) / m_bins) --m;
    while (m < m_bins && conf > static_cast<double>(m) / m_bins) ++m;
    return m;
}

// Expected calibration error with M equal-width bins; empty bins contribute
// zero and report zero means.
inline std::pair<double, std::vector<ReliabilityBin>> ece(
    const std::vector<ScoredRecord>& records, const std::string& method, int m_bins) {
    if (records.empty()) throw DataError("ece over an empty record list");
    if (m_bins < 1) throw ConfigError("ece needs at least one bin");

    std::vector<ReliabilityBin> bins(static_cast<size_t>(m_bins));
    std::vector<double> conf_sum(static_cast<size_t>(m_bins), 0.0);
    std::vector<double> acc_sum(static_cast<size_t>(m_bins), 0.0);
    for (int m = 1; m <= m_bins; ++m) {
        bins[m - 1].lower = static_cast<double>(m - 1) / m_bins;
        bins[m - 1].upper = static_cast<double>(m) / m_bins;
    }
    for (const auto& r : records) {
        double conf = confidence_for(r, method);
        int m = reliability_bin_index(conf, m_bins);
        ++bins[m - 1].count;
        conf_sum[m - 1] += conf;
        acc_sum[m - 1] += r.is_correct ? 1.0 : 0.0;
    }
    double total = static_cast<double>(records.size());
    double value = 0.0;
    for (int m = 0; m < m_bins; ++m) {
        if (bins[m].count == 0) continue;
        bins[m].mean_conf = conf_sum[m] / bins[m].count;
        bins[m].mean_acc = acc_sum[m] / bins[m].count;
        value += (bins[m].count / total) * std::fabs(bins[m].mean_acc - bins[m].mean_conf);
    }
    return {value, std::move(bins)};
}

// Case-study threshold grid: 0.00..0.90 step 0.05, then 0.91..1.00 step
// 0.01; 29 ascending values with the seam deduplicated.
inline std::vector<double> threshold_grid() {
    std::vector<double> grid;
    grid.reserve(29);
    for (int i = 0; i <= 18; ++i) grid.push_back(i / 20.0);
    for (int j = 91; j <= 100; ++j) grid.push_back(j / 100.0);
    return grid;
}

namespace detail {
inline ClassScores class_scores(int tp, int fp, int fn) {
    ClassScores s;
    s.precision = (tp + fp) > 0 ? tp / static_cast<double>(tp + fp) : 0.0;
    s.recall = (tp + fn) > 0 ? tp / static_cast<double>(tp + fn) : 0.0;
    s.f1 = (s.precision + s.recall) > 0.0
               ? 2.0 * s.precision * s.recall / (s.precision + s.recall)
               : 0.0;
    return s;
}
} // namespace detail

// Predicts "correct" iff confidence is strictly above theta, then scores the
// two classes. Degenerate 0/0 ratios are 0, so one-class inputs stay finite.
inline DiscriminationResult discriminate(const std::vector<ScoredRecord>& records,
                                         const std::string& method, double theta) {
    if (theta < 0.0 || theta > 1.0) throw ConfigError("threshold outside [0,1]");
    int tp_c = 0, fp_c = 0, fn_c = 0; // "correct" class
    int tp_i = 0, fp_i = 0, fn_i = 0; // "incorrect" class
    for (const auto& r : records) {
        bool predicted_correct = confidence_for(r, method) > theta;
        if (predicted_correct && r.is_correct) ++tp_c;
        if (predicted_correct && !r.is_correct) { ++fp_c; ++fn_i; }
        if (!predicted_correct && r.is_correct) { ++fn_c; ++fp_i; }
        if (!predicted_correct && !r.is_correct) ++tp_i;
    }
    DiscriminationResult out;
    out.threshold = theta;
    out.correct_class = detail::class_scores(tp_c, fp_c, fn_c);
    out.incorrect_class = detail::class_scores(tp_i, fp_i, fn_i);
    out.macro_f1 = 0.5 * (out.correct_class.f1 + out.incorrect_class.f1);
    return out;
}

// Scans the full grid on the dev set and returns the best threshold; ties go
// to the smallest theta.
inline DiscriminationResult tune_threshold(const std::vector<ScoredRecord>& dev_records,
                                           const std::string& method) {
    if (dev_records.empty()) throw DataError("cannot tune a threshold on an empty dev set");
    DiscriminationResult best;
    bool have_best = false;
    for (double theta : threshold_grid()) {
        DiscriminationResult r = discriminate(dev_records, method, theta);
        if (!have_best || r.macro_f1 > best.macro_f1) {
            best = r;
            have_best = true;
        }
    }
    return best;
}

// Flips the round(k*N) least-confident records to correct, k = error rate.
// Confidence ties break by ascending query_id so runs are reproducible.
inline OracleCorrection oracle_correct(const std::vector<ScoredRecord>& records,
                                       const std::string& method) {
    if (records.empty()) throw DataError("oracle correction over an empty record list");
    OracleCorrection out;
    out.pre_acc = accuracy(records);
    out.k = 1.0 - out.pre_acc;

    const auto n = records.size();
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> conf(n);
    for (size_t i = 0; i < n; ++i) conf[i] = confidence_for(records[i], method);
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        if (conf[a] != conf[b]) return conf[a] < conf[b];
        return records[a].query_id < records[b].query_id;
    });

    // k*N is an integer in exact arithmetic; nearbyint (round-half-to-even
    // under the default rounding mode) recovers it from the float product.
    auto to_fix = static_cast<size_t>(std::nearbyint(out.k * static_cast<double>(n)));
    to_fix = std::min(to_fix, n);
    std::vector<bool> corrected(n, false);
    for (size_t i = 0; i < to_fix; ++i) corrected[order[i]] = true;

    int post_correct = 0;
    for (size_t i = 0; i < n; ++i)
        post_correct += (records[i].is_correct || corrected[i]) ? 1 : 0;
    out.post_acc = post_correct / static_cast<double>(n);
    out.corrected = static_cast<int>(to_fix);
    return out;
}

// Brier as a function of sample count: each record is re-scored from exactly
// its first m samples (deterministic prefix subsampling), the majority vote
// is re-derived, and Brier is taken over the re-scored set.
inline std::vector<std::pair<int, double>> sample_size_curve(
    const std::vector<QueryRecord>& records, const RuleSet& rules,
    const std::string& method, std::vector<int> m_values) {
    if (!is_consistency_method(method))
        throw ConfigError("sample-size curves apply to consistency methods, not '" +
                          method + "'");
    if (records.empty()) throw DataError("sample-size curve over an empty record list");
    std::sort(m_values.begin(), m_values.end());
    m_values.erase(std::unique(m_values.begin(), m_values.end()), m_values.end());

    int min_n = static_cast<int>(records.front().samples.size());
    for (const auto& r : records)
        min_n = std::min(min_n, static_cast<int>(r.samples.size()));
    for (int m : m_values)
        if (m < 1 || m > min_n)
            throw DataError("sample count m=" + std::to_string(m) +
                            " is out of range for the given records (max " +
                            std::to_string(min_n) + ")");

    std::vector<std::vector<AnswerValue>> all_answers;
    all_answers.reserve(records.size());
    for (const auto& r : records) all_answers.push_back(extract_all(r, rules));

    std::vector<std::pair<int, double>> curve;
    for (int m : m_values) {
        double sum = 0.0;
        for (size_t i = 0; i < records.size(); ++i) {
            std::vector<AnswerValue> prefix(all_answers[i].begin(),
                                            all_answers[i].begin() + m);
            AnswerDistribution dist = build_distribution(prefix, records[i].task_kind);
            double conf = 0.0;
            if (method == "agreement") conf = agreement(dist);
            else if (method == "entropy") conf = entropy_consistency(dist);
            else conf = fsd(dist);
            bool correct = answers_equal(majority_answer(dist), records[i].gold_answer,
                                         records[i].task_kind);
            double d = conf - (correct ? 1.0 : 0.0);
            sum += d * d;
        }
        curve.emplace_back(m, sum / static_cast<double>(records.size()));
    }
    return curve;
}

} // namespace concord
