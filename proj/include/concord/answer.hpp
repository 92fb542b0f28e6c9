#pragma once
// AnswerValue: a normalized final answer, the unit of agreement comparison.
//
// Kinds: numeric (canonical decimal), boolean, text, plan (ordered action
// steps), invalid. Invalid is a real value: an unparseable sample still
// counts toward n, it just only ever equals other invalids.

#include <cmath>
#include <cstdlib>
#include <optional>
#include <regex>
#include <string>
#include <string_view>
#include <vector>

#include "concord/detail/util.hpp"
#include "concord/types.hpp"

namespace concord {

enum class AnswerKind { Numeric, Boolean, Text, ActionPlan, Invalid };

constexpr std::array<std::string_view, 5> kAnswerKindNames = {
    "numeric", "boolean", "text", "plan", "invalid"};

inline std::string_view to_string(AnswerKind k) {
    return kAnswerKindNames[static_cast<size_t>(k)];
}

inline std::optional<AnswerKind> answer_kind_from(std::string_view s) {
    for (size_t i = 0; i < kAnswerKindNames.size(); ++i)
        if (kAnswerKindNames[i] == s) return static_cast<AnswerKind>(i);
    return std::nullopt;
}

// Canonical decimal text: no sign on zero, no leading '+', no leading or
// trailing zero padding ("+01.50" -> "1.5", "-0" -> "0", "1." -> "1").
// Values only representable in exponent form keep their shortest round-trip
// spelling. Returns nullopt when `raw` is not a finite number.
inline std::optional<std::string> canonical_decimal(std::string_view raw) {
    std::string s = trim(raw);
    if (s.empty()) return std::nullopt;
    if (s.front() == '+') s.erase(0, 1);
    bool neg = false;
    if (!s.empty() && s.front() == '-') {
        neg = true;
        s.erase(0, 1);
    }
    if (s.empty()) return std::nullopt;

    bool plain = s.find_first_not_of("0123456789.") == std::string::npos &&
                 std::count(s.begin(), s.end(), '.') <= 1 &&
                 s != ".";
    if (!plain) {
        // Exponent or otherwise non-plain spelling: accept anything strtod
        // fully consumes, then re-canonicalize its shortest form.
        std::string full = (neg ? "-" : "") + s;
        char* end = nullptr;
        double v = std::strtod(full.c_str(), &end);
        if (end != full.c_str() + full.size() || !std::isfinite(v)) return std::nullopt;
        std::string shortest = format_double(v);
        if (shortest.find_first_of("eE") != std::string::npos) return shortest;
        return canonical_decimal(shortest);
    }

    auto dot = s.find('.');
    std::string int_part = dot == std::string::npos ? s : s.substr(0, dot);
    std::string frac_part = dot == std::string::npos ? "" : s.substr(dot + 1);

    size_t first_nonzero = int_part.find_first_not_of('0');
    int_part = first_nonzero == std::string::npos ? "0" : int_part.substr(first_nonzero);
    size_t last_nonzero = frac_part.find_last_not_of('0');
    frac_part = last_nonzero == std::string::npos ? "" : frac_part.substr(0, last_nonzero + 1);

    std::string canon = int_part;
    if (!frac_part.empty()) canon += "." + frac_part;
    if (canon == "0") neg = false;
    if (neg) canon.insert(canon.begin(), '-');

    char* end = nullptr;
    double v = std::strtod(canon.c_str(), &end);
    if (!std::isfinite(v)) return std::nullopt;
    return canon;
}

// Text payload normalization: trim, strip surrounding quote marks and
// trailing sentence punctuation, case-fold. "``05/02/2021''." -> "05/02/2021".
inline std::string normalize_text_payload(std::string_view s) {
    auto lead = [](char c) { return c == '`' || c == '\'' || c == '"' || is_space(c); };
    auto tail = [](char c) {
        return c == '`' || c == '\'' || c == '"' || c == '.' || c == '!' || c == '?' ||
               is_space(c);
    };
    size_t b = 0, e = s.size();
    while (b < e && lead(s[b])) ++b;
    while (e > b && tail(s[e - 1])) --e;
    return to_lower(s.substr(b, e - b));
}

// One plan step: lowercased with all whitespace removed, trailing '.' dropped.
inline std::string normalize_plan_step(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s)
        if (!is_space(c)) out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    while (!out.empty() && out.back() == '.') out.pop_back();
    return out;
}

struct AnswerValue {
    AnswerKind kind = AnswerKind::Invalid;
    std::string decimal;            // Numeric: canonical decimal text
    double number = 0.0;            // Numeric: parsed value of `decimal`
    bool truth = false;             // Boolean
    std::string text;               // Text: case-folded, trimmed
    std::vector<std::string> steps; // ActionPlan: canonical steps

    bool is_invalid() const { return kind == AnswerKind::Invalid; }

    static AnswerValue invalid() { return AnswerValue{}; }

    static AnswerValue boolean(bool b) {
        AnswerValue v;
        v.kind = AnswerKind::Boolean;
        v.truth = b;
        return v;
    }

    static AnswerValue numeric(std::string_view raw) {
        auto canon = canonical_decimal(raw);
        if (!canon) return invalid();
        AnswerValue v;
        v.kind = AnswerKind::Numeric;
        v.decimal = *canon;
        v.number = std::strtod(v.decimal.c_str(), nullptr);
        return v;
    }

    static AnswerValue numeric(double d) {
        if (!std::isfinite(d)) return invalid();
        return numeric(format_double(d));
    }

    static AnswerValue text_answer(std::string_view raw) {
        std::string t = normalize_text_payload(raw);
        if (t.empty()) return invalid();
        AnswerValue v;
        v.kind = AnswerKind::Text;
        v.text = std::move(t);
        return v;
    }

    static AnswerValue plan(const std::vector<std::string>& raw_steps) {
        std::vector<std::string> steps;
        for (const auto& s : raw_steps) {
            std::string step = normalize_plan_step(s);
            if (!step.empty()) steps.push_back(std::move(step));
        }
        if (steps.empty()) return invalid();
        AnswerValue v;
        v.kind = AnswerKind::ActionPlan;
        v.steps = std::move(steps);
        return v;
    }
};

// Splits the numbered "1.find(x) 2.pick(x)" form; Invalid when no
// "<digits>." marker is present.
inline AnswerValue parse_plan_text(std::string_view raw) {
    static const std::regex marker(R"([0-9]+\s*\.)");
    std::vector<std::pair<size_t, size_t>> marks; // (start, end) of each marker
    for (std::cregex_iterator it(raw.data(), raw.data() + raw.size(), marker), end;
         it != end; ++it)
        marks.emplace_back(static_cast<size_t>(it->position(0)),
                           static_cast<size_t>(it->position(0) + it->length(0)));
    if (marks.empty()) return AnswerValue::invalid();
    std::vector<std::string> steps;
    for (size_t i = 0; i < marks.size(); ++i) {
        size_t from = marks[i].second;
        size_t to = i + 1 < marks.size() ? marks[i + 1].first : raw.size();
        steps.emplace_back(raw.substr(from, to - from));
    }
    return AnswerValue::plan(steps);
}

inline AnswerKind expected_answer_kind(TaskKind task) {
    switch (task) {
        case TaskKind::Math: return AnswerKind::Numeric;
        case TaskKind::BooleanQa: return AnswerKind::Boolean;
        case TaskKind::Plan: return AnswerKind::ActionPlan;
        default: return AnswerKind::Text;
    }
}

// Idempotent normalization. Payloads are re-canonicalized; a Text payload is
// coerced toward the task's expected kind when that reading is unambiguous
// ("yes" -> Boolean for boolean-qa, "42" -> Numeric for math). Anything
// unnormalizable maps to Invalid, never throws.
inline AnswerValue normalize_answer(const AnswerValue& v, TaskKind task) {
    switch (v.kind) {
        case AnswerKind::Invalid:
            return AnswerValue::invalid();
        case AnswerKind::Numeric:
            return AnswerValue::numeric(v.decimal);
        case AnswerKind::Boolean:
            return AnswerValue::boolean(v.truth);
        case AnswerKind::ActionPlan:
            return AnswerValue::plan(v.steps);
        case AnswerKind::Text: {
            std::string t = normalize_text_payload(v.text);
            switch (expected_answer_kind(task)) {
                case AnswerKind::Boolean: {
                    if (t == "yes" || t == "true") return AnswerValue::boolean(true);
                    if (t == "no" || t == "false") return AnswerValue::boolean(false);
                    return AnswerValue::invalid();
                }
                case AnswerKind::Numeric:
                    return AnswerValue::numeric(t);
                case AnswerKind::ActionPlan:
                    return parse_plan_text(v.text);
                default:
                    return AnswerValue::text_answer(t);
            }
        }
    }
    return AnswerValue::invalid();
}

// Equality used by voting and correctness. Numerics compare within 1e-6
// relative tolerance (1e-9 absolute near zero); all other kinds exact.
// Invalid equals only Invalid. Symmetric and reflexive.
inline bool answers_equal(const AnswerValue& a, const AnswerValue& b, TaskKind) {
    if (a.kind != b.kind) return false;
    switch (a.kind) {
        case AnswerKind::Invalid: return true;
        case AnswerKind::Boolean: return a.truth == b.truth;
        case AnswerKind::Text: return a.text == b.text;
        case AnswerKind::ActionPlan: return a.steps == b.steps;
        case AnswerKind::Numeric: {
            double x = a.number, y = b.number;
            double scale = std::max(std::fabs(x), std::fabs(y));
            return std::fabs(x - y) <= std::max(1e-9, 1e-6 * scale);
        }
    }
    return false;
}

// Human-readable rendering for prompts and summaries.
inline std::string answer_display(const AnswerValue& v) {
    switch (v.kind) {
        case AnswerKind::Numeric: return v.decimal;
        case AnswerKind::Boolean: return v.truth ? "yes" : "no";
        case AnswerKind::Text: return v.text;
        case AnswerKind::ActionPlan: {
            std::string out;
            for (size_t i = 0; i < v.steps.size(); ++i) {
                if (i) out += " ";
                out += std::to_string(i + 1) + "." + v.steps[i];
            }
            return out;
        }
        case AnswerKind::Invalid: return "";
    }
    return "";
}

} // namespace concord
