#pragma once
// Final-answer extraction: regex rules per (task kind, strategy), tried in
// order, last occurrence wins. Explanation-first generations state the final
// answer last, so the last match is the stated answer. Extraction never
// throws at runtime: anything unparseable becomes Invalid and still counts
// toward n.

#include <filesystem>
#include <map>
#include <regex>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "concord/answer.hpp"
#include "concord/records.hpp"
#include "concord/types.hpp"

namespace concord {

struct ExtractionRule {
    TaskKind task_kind = TaskKind::StringQa;
    StrategyTag strategy_tag = StrategyTag::Other;
    std::vector<std::string> patterns;  // tried in order
    std::string postprocess;            // numeric | boolean | text | plan
    std::vector<std::regex> compiled;
};

namespace detail {

// Plain or thousands-separated decimal, optionally negative.
inline constexpr const char* kNumberPattern =
    R"((-?(?:[0-9]{1,3}(?:,[0-9]{3})+|[0-9]+)(?:\.[0-9]+)?))";

inline std::vector<std::string> default_patterns(TaskKind kind) {
    const std::string num = kNumberPattern;
    switch (kind) {
        case TaskKind::Math:
            return {
                R"((?:the\s+)?answer\s+is\s*:?\s*\$?\s*)" + num,
                R"(answer\s*:\s*\$?\s*)" + num,
                num,
            };
        case TaskKind::BooleanQa:
            return {
                R"((?:the\s+)?answer\s+is\s*:?\s*["']?(yes|no|true|false)\b)",
                R"(answer\s*:\s*["']?(yes|no|true|false)\b)",
                R"(\b(yes|no|true|false)\b)",
            };
        case TaskKind::Plan:
            return {
                R"((?:the\s+)?answer\s+is\s*:?\s*([^\n]+))",
                R"(answer\s*:\s*([^\n]+))",
                R"((1\s*\.\s*[^\n]+))",
            };
        default: // string-qa, relation
            return {
                R"((?:the\s+)?answer\s+is\s*:?\s*([^\n.]+))",
                R"(answer\s*:\s*([^\n.]+))",
                R"(([A-Za-z0-9][A-Za-z0-9/'_-]*)[.!?]?\s*$)",
            };
    }
}

inline std::string default_postprocess(TaskKind kind) {
    switch (kind) {
        case TaskKind::Math: return "numeric";
        case TaskKind::BooleanQa: return "boolean";
        case TaskKind::Plan: return "plan";
        default: return "text";
    }
}

inline void compile_rule(ExtractionRule& rule) {
    rule.compiled.clear();
    for (const auto& pattern : rule.patterns) {
        try {
            rule.compiled.emplace_back(pattern, std::regex::icase | std::regex::ECMAScript);
        } catch (const std::regex_error& e) {
            throw DataError("cannot compile extraction pattern '" + pattern +
                            "' for (" + std::string(to_string(rule.task_kind)) + ", " +
                            std::string(to_string(rule.strategy_tag)) + "): " + e.what());
        }
    }
}

} // namespace detail

// Applies one normalization pipeline to a matched token. Invalid on failure.
inline AnswerValue run_postprocess(std::string_view token, const std::string& pipeline) {
    if (pipeline == "numeric") {
        std::string cleaned;
        for (char c : trim(token)) {
            if (c == ',' || c == '$') continue;
            cleaned.push_back(c);
        }
        while (!cleaned.empty() && (cleaned.back() == '.' || cleaned.back() == '%'))
            cleaned.pop_back();
        return AnswerValue::numeric(cleaned);
    }
    if (pipeline == "boolean") {
        std::string t = normalize_text_payload(token);
        if (t == "yes" || t == "true") return AnswerValue::boolean(true);
        if (t == "no" || t == "false") return AnswerValue::boolean(false);
        return AnswerValue::invalid();
    }
    if (pipeline == "plan") return parse_plan_text(token);
    if (pipeline == "text") return AnswerValue::text_answer(token);
    return AnswerValue::invalid();
}

class RuleSet {
  public:
    // Built-in rules for every (task kind, strategy) pair. The same per-kind
    // defaults serve all strategies; a rules file overrides by pair.
    static RuleSet defaults() {
        RuleSet rs;
        for (size_t k = 0; k < kTaskKindNames.size(); ++k) {
            auto kind = static_cast<TaskKind>(k);
            ExtractionRule rule;
            rule.task_kind = kind;
            rule.patterns = detail::default_patterns(kind);
            rule.postprocess = detail::default_postprocess(kind);
            for (size_t s = 0; s < kStrategyNames.size(); ++s) {
                rule.strategy_tag = static_cast<StrategyTag>(s);
                detail::compile_rule(rule);
                rs.rules_[{k, s}] = rule;
            }
        }
        return rs;
    }

    // Defaults plus overrides from a JSON rules file:
    //   [{"task_kind": ..., "strategy_tag": ..., "patterns": [...], "postprocess": ...}]
    static RuleSet load(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open rules file '" + path.string() + "'");
        json doc;
        try {
            doc = json::parse(in);
        } catch (const json::parse_error& e) {
            throw DataError("rules file '" + path.string() + "': " + e.what());
        }
        if (!doc.is_array())
            throw DataError("rules file '" + path.string() + "': expected a JSON array");

        RuleSet rs = defaults();
        for (const auto& entry : doc) {
            ExtractionRule rule;
            auto kind = task_kind_from(entry.value("task_kind", ""));
            auto strat = strategy_from(entry.value("strategy_tag", ""));
            if (!kind || !strat)
                throw DataError("rules file '" + path.string() +
                                "': each rule needs a valid task_kind and strategy_tag");
            rule.task_kind = *kind;
            rule.strategy_tag = *strat;
            if (!entry.contains("patterns") || !entry["patterns"].is_array() ||
                entry["patterns"].empty())
                throw DataError("rules file '" + path.string() +
                                "': 'patterns' must be a non-empty array");
            for (const auto& p : entry["patterns"]) rule.patterns.push_back(p.get<std::string>());
            rule.postprocess = entry.value("postprocess", detail::default_postprocess(*kind));
            detail::compile_rule(rule);
            rs.rules_[{static_cast<size_t>(*kind), static_cast<size_t>(*strat)}] =
                std::move(rule);
        }
        return rs;
    }

    const ExtractionRule& rule_for(TaskKind kind, StrategyTag strategy) const {
        return rules_.at({static_cast<size_t>(kind), static_cast<size_t>(strategy)});
    }

  private:
    std::map<std::pair<size_t, size_t>, ExtractionRule> rules_;
};

// Parses the final answer from raw generation text. Patterns are tried in
// order; the first pattern that matches anywhere decides, using its last
// occurrence in the text. Never throws; returns Invalid on no match or
// failed normalization.
inline AnswerValue extract_answer(std::string_view raw_text, TaskKind task_kind,
                                  const RuleSet& rules,
                                  StrategyTag strategy = StrategyTag::Other) {
    try {
        const ExtractionRule& rule = rules.rule_for(task_kind, strategy);
        for (const auto& re : rule.compiled) {
            std::cmatch last;
            bool found = false;
            for (std::cregex_iterator it(raw_text.data(), raw_text.data() + raw_text.size(), re),
                 end;
                 it != end; ++it) {
                last = *it;
                found = true;
            }
            if (!found) continue;
            std::string token = last.size() > 1 && last[1].matched ? last.str(1) : last.str(0);
            return run_postprocess(token, rule.postprocess);
        }
    } catch (...) {
        // fall through: unparseable input is Invalid, never an exception
    }
    return AnswerValue::invalid();
}

// Answers for every sample of a record, honoring pre-extracted values.
inline std::vector<AnswerValue> extract_all(const QueryRecord& record, const RuleSet& rules) {
    std::vector<AnswerValue> answers;
    answers.reserve(record.samples.size());
    for (const auto& sample : record.samples) {
        if (sample.extracted_answer)
            answers.push_back(*sample.extracted_answer);
        else
            answers.push_back(
                extract_answer(sample.raw_text, record.task_kind, rules, record.strategy_tag));
    }
    return answers;
}

} // namespace concord
