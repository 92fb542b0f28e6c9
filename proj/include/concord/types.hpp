#pragma once
// Shared enums, method names, and error types used across the toolkit.

#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace concord {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed or unusable input data: schema violations, bad payloads,
// unsatisfiable preconditions. CLI maps these to exit status 1.
struct DataError : Error {
    using Error::Error;
};

// Unusable configuration: bad flags, missing credentials, missing paths.
// CLI maps these to exit status 2.
struct ConfigError : Error {
    using Error::Error;
};

enum class TaskKind { Math, BooleanQa, StringQa, Plan, Relation };
enum class StrategyTag { Standard, Cot, Ltm, Pot, Fcot, Other };

constexpr std::array<std::string_view, 5> kTaskKindNames = {
    "math", "boolean-qa", "string-qa", "plan", "relation"};
constexpr std::array<std::string_view, 6> kStrategyNames = {
    "standard", "cot", "ltm", "pot", "fcot", "other"};

inline std::string_view to_string(TaskKind k) {
    return kTaskKindNames[static_cast<size_t>(k)];
}

inline std::string_view to_string(StrategyTag s) {
    return kStrategyNames[static_cast<size_t>(s)];
}

inline std::optional<TaskKind> task_kind_from(std::string_view s) {
    for (size_t i = 0; i < kTaskKindNames.size(); ++i)
        if (kTaskKindNames[i] == s) return static_cast<TaskKind>(i);
    return std::nullopt;
}

inline std::optional<StrategyTag> strategy_from(std::string_view s) {
    for (size_t i = 0; i < kStrategyNames.size(); ++i)
        if (kStrategyNames[i] == s) return static_cast<StrategyTag>(i);
    return std::nullopt;
}

// The seven confidence methods, in canonical reporting order.
constexpr std::array<std::string_view, 7> kAllMethods = {
    "entropy", "agreement", "fsd", "logit", "ptrue", "verb_ling", "verb_percent"};
constexpr std::array<std::string_view, 3> kConsistencyMethods = {
    "entropy", "agreement", "fsd"};

inline bool is_known_method(std::string_view m) {
    for (auto name : kAllMethods)
        if (name == m) return true;
    return false;
}

inline bool is_consistency_method(std::string_view m) {
    for (auto name : kConsistencyMethods)
        if (name == m) return true;
    return false;
}

// Canonical position of a method for stable report ordering; unknown -> -1.
inline int method_order(std::string_view m) {
    for (size_t i = 0; i < kAllMethods.size(); ++i)
        if (kAllMethods[i] == m) return static_cast<int>(i);
    return -1;
}

} // namespace concord
