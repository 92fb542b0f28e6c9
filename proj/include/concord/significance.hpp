#pragma once
// Paired comparison of two calibration methods' per-record squared-error
// losses via a two-sided sign-flip permutation test. Distribution-free and
// matched to the paired per-example structure of Brier contributions.

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "concord/calibration.hpp"
#include "concord/records.hpp"
#include "concord/types.hpp"

namespace concord {

struct SignificanceResult {
    std::string method_a;
    std::string method_b;
    double mean_delta = 0.0; // mean Brier(a) - mean Brier(b)
    double p_value = 1.0;
    int n_resamples = 0;
    std::uint64_t seed = 0;
};

namespace detail {

// splitmix64-style mix so each resample draws from an independent stream
// determined only by (seed, iteration).
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

} // namespace detail

// Two-sided paired permutation test on per-record loss differences with
// add-one smoothing: p = (1 + #{|flipped mean| >= |observed mean|}) / (1 + R).
inline SignificanceResult paired_significance(const std::vector<ScoredRecord>& records,
                                              const std::string& method_a,
                                              const std::string& method_b,
                                              int n_resamples, std::uint64_t seed) {
    if (n_resamples < 100)
        throw ConfigError("paired significance needs at least 100 resamples, got " +
                          std::to_string(n_resamples));
    if (records.empty()) throw DataError("paired significance over an empty record list");

    std::vector<double> deltas;
    deltas.reserve(records.size());
    double observed_sum = 0.0;
    for (const auto& r : records) {
        double ind = r.is_correct ? 1.0 : 0.0;
        double la = confidence_for(r, method_a) - ind;
        double lb = confidence_for(r, method_b) - ind;
        double d = la * la - lb * lb;
        deltas.push_back(d);
        observed_sum += d;
    }
    const double n = static_cast<double>(deltas.size());
    const double observed = observed_sum / n;

    int at_least_as_extreme = 0;
    for (int it = 0; it < n_resamples; ++it) {
        std::mt19937_64 gen(detail::mix_seed(seed, static_cast<std::uint64_t>(it)));
        double sum = 0.0;
        for (double d : deltas) sum += (gen() & 1u) ? d : -d;
        if (std::fabs(sum / n) >= std::fabs(observed)) ++at_least_as_extreme;
    }

    SignificanceResult out;
    out.method_a = method_a;
    out.method_b = method_b;
    out.mean_delta = observed;
    out.p_value = (1.0 + at_least_as_extreme) / (1.0 + n_resamples);
    out.n_resamples = n_resamples;
    out.seed = seed;
    return out;
}

} // namespace concord
