#pragma once
// Canonical data model and the JSONL ingestion/serialization layer.
//
// One JSON object per line. Unknown fields are ignored on read. Decimal
// answers are serialized as strings so equality-sensitive values never pass
// through a lossy float round-trip. Strict ingestion fails on the first bad
// line; lenient ingestion reports issues by line number and keeps the rest.

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "concord/answer.hpp"
#include "concord/types.hpp"

namespace concord {

using json = nlohmann::json;

struct GenerationSample {
    int sample_index = 0;
    std::string raw_text;
    std::optional<std::vector<double>> token_logprobs;
    std::optional<AnswerValue> extracted_answer;
};

struct QueryRecord {
    std::string query_id;
    std::string question;
    AnswerValue gold_answer; // Invalid = unlabeled
    TaskKind task_kind = TaskKind::StringQa;
    std::string model_tag;
    StrategyTag strategy_tag = StrategyTag::Other;
    std::vector<GenerationSample> samples;
};

struct ScoredRecord {
    std::string query_id;
    AnswerValue voted_answer;
    bool is_correct = false;
    std::map<std::string, double> confidences; // method -> [0,1]
    // Grouping metadata carried through the pipeline; empty = unset.
    std::string model_tag;
    std::string strategy_tag;
    std::string dataset;

    bool has_method(std::string_view m) const {
        return confidences.count(std::string(m)) > 0;
    }
};

// One secondary-model probe response (P(True) or verbalized confidence).
struct ProbeRecord {
    std::string query_id;
    std::string method; // ptrue | verb_ling | verb_percent
    std::optional<std::string> response_text;
    std::optional<double> p_yes;
    std::optional<double> p_no;
};

enum class IngestMode { Strict, Lenient };

struct IngestIssue {
    int line = 0;
    std::string field;
    std::string message;
};

namespace detail {

// Schema violation inside one JSON object; readers attach the line number.
struct SchemaError {
    std::string field;
    std::string message;
};

inline const json& require_field(const json& obj, const std::string& name,
                                 const std::string& prefix) {
    auto it = obj.find(name);
    if (it == obj.end())
        throw SchemaError{prefix + name, "missing required field"};
    return *it;
}

inline std::string require_string(const json& obj, const std::string& name,
                                  const std::string& prefix) {
    const json& v = require_field(obj, name, prefix);
    if (!v.is_string()) throw SchemaError{prefix + name, "expected a string"};
    return v.get<std::string>();
}

inline json answer_to_json(const AnswerValue& v) {
    json out;
    out["kind"] = std::string(to_string(v.kind));
    switch (v.kind) {
        case AnswerKind::Numeric: out["value"] = v.decimal; break;
        case AnswerKind::Boolean: out["value"] = v.truth; break;
        case AnswerKind::Text: out["value"] = v.text; break;
        case AnswerKind::ActionPlan: out["value"] = v.steps; break;
        case AnswerKind::Invalid: break;
    }
    return out;
}

inline AnswerValue answer_from_json(const json& obj, const std::string& prefix) {
    if (!obj.is_object()) throw SchemaError{prefix, "expected an object {kind, value}"};
    std::string kind_name = require_string(obj, "kind", prefix + ".");
    auto kind = answer_kind_from(kind_name);
    if (!kind) throw SchemaError{prefix + ".kind", "unknown answer kind '" + kind_name + "'"};
    if (*kind == AnswerKind::Invalid) return AnswerValue::invalid();

    const json& value = require_field(obj, "value", prefix + ".");
    AnswerValue out;
    switch (*kind) {
        case AnswerKind::Numeric: {
            if (value.is_string())
                out = AnswerValue::numeric(value.get<std::string>());
            else if (value.is_number())
                out = AnswerValue::numeric(value.get<double>());
            else
                throw SchemaError{prefix + ".value", "expected a decimal string or number"};
            break;
        }
        case AnswerKind::Boolean: {
            if (value.is_boolean())
                out = AnswerValue::boolean(value.get<bool>());
            else if (value.is_string()) {
                std::string t = normalize_text_payload(value.get<std::string>());
                if (t == "yes" || t == "true") out = AnswerValue::boolean(true);
                else if (t == "no" || t == "false") out = AnswerValue::boolean(false);
                else throw SchemaError{prefix + ".value", "not a boolean: '" + t + "'"};
            } else
                throw SchemaError{prefix + ".value", "expected a boolean"};
            break;
        }
        case AnswerKind::Text: {
            if (!value.is_string()) throw SchemaError{prefix + ".value", "expected a string"};
            out = AnswerValue::text_answer(value.get<std::string>());
            break;
        }
        case AnswerKind::ActionPlan: {
            if (value.is_array()) {
                std::vector<std::string> steps;
                for (const auto& s : value) {
                    if (!s.is_string())
                        throw SchemaError{prefix + ".value", "plan steps must be strings"};
                    steps.push_back(s.get<std::string>());
                }
                out = AnswerValue::plan(steps);
            } else if (value.is_string()) {
                out = parse_plan_text(value.get<std::string>());
            } else
                throw SchemaError{prefix + ".value", "expected an array of steps or a string"};
            break;
        }
        case AnswerKind::Invalid: break;
    }
    if (out.is_invalid())
        throw SchemaError{prefix + ".value", "payload does not normalize to a valid " + kind_name};
    return out;
}

inline json sample_to_json(const GenerationSample& s) {
    json out;
    out["sample_index"] = s.sample_index;
    out["raw_text"] = s.raw_text;
    if (s.token_logprobs) out["token_logprobs"] = *s.token_logprobs;
    if (s.extracted_answer) out["extracted_answer"] = answer_to_json(*s.extracted_answer);
    return out;
}

inline GenerationSample sample_from_json(const json& obj, const std::string& prefix,
                                         TaskKind task) {
    if (!obj.is_object()) throw SchemaError{prefix, "expected an object"};
    GenerationSample s;
    const json& idx = require_field(obj, "sample_index", prefix + ".");
    if (!idx.is_number_integer() || idx.get<long long>() < 0)
        throw SchemaError{prefix + ".sample_index", "expected a non-negative integer"};
    s.sample_index = idx.get<int>();
    s.raw_text = require_string(obj, "raw_text", prefix + ".");
    if (auto it = obj.find("token_logprobs"); it != obj.end() && !it->is_null()) {
        if (!it->is_array() || it->empty())
            throw SchemaError{prefix + ".token_logprobs", "expected a non-empty array"};
        std::vector<double> lps;
        for (const auto& lp : *it) {
            if (!lp.is_number() || lp.get<double>() > 0.0)
                throw SchemaError{prefix + ".token_logprobs",
                                  "log-probabilities must be numbers <= 0"};
            lps.push_back(lp.get<double>());
        }
        s.token_logprobs = std::move(lps);
    }
    if (auto it = obj.find("extracted_answer"); it != obj.end() && !it->is_null()) {
        AnswerValue raw = answer_from_json(*it, prefix + ".extracted_answer");
        s.extracted_answer = normalize_answer(raw, task);
    }
    return s;
}

} // namespace detail

inline json to_json(const QueryRecord& r) {
    json out;
    out["query_id"] = r.query_id;
    out["question"] = r.question;
    out["gold_answer"] = detail::answer_to_json(r.gold_answer);
    out["task_kind"] = std::string(to_string(r.task_kind));
    out["model_tag"] = r.model_tag;
    out["strategy_tag"] = std::string(to_string(r.strategy_tag));
    json samples = json::array();
    for (const auto& s : r.samples) samples.push_back(detail::sample_to_json(s));
    out["samples"] = std::move(samples);
    return out;
}

inline QueryRecord query_record_from_json(const json& obj) {
    using detail::SchemaError;
    if (!obj.is_object()) throw SchemaError{"", "expected a JSON object"};
    QueryRecord r;
    r.query_id = detail::require_string(obj, "query_id", "");
    r.question = detail::require_string(obj, "question", "");

    std::string kind_name = detail::require_string(obj, "task_kind", "");
    auto task = task_kind_from(kind_name);
    if (!task) throw SchemaError{"task_kind", "unknown task kind '" + kind_name + "'"};
    r.task_kind = *task;

    r.model_tag = detail::require_string(obj, "model_tag", "");
    std::string strat_name = detail::require_string(obj, "strategy_tag", "");
    auto strat = strategy_from(strat_name);
    if (!strat) throw SchemaError{"strategy_tag", "unknown strategy tag '" + strat_name + "'"};
    r.strategy_tag = *strat;

    // Invalid gold marks an unlabeled query (e.g. fresh sampler output);
    // otherwise the kind must match the task.
    const json& gold = detail::require_field(obj, "gold_answer", "");
    AnswerValue gv;
    if (gold.is_object() && gold.value("kind", "") == "invalid")
        gv = AnswerValue::invalid();
    else
        gv = normalize_answer(detail::answer_from_json(gold, "gold_answer"), r.task_kind);
    if (!gv.is_invalid() && gv.kind != expected_answer_kind(r.task_kind))
        throw SchemaError{"gold_answer.kind",
                          "incompatible with task kind '" + kind_name + "'"};
    r.gold_answer = gv;

    const json& samples = detail::require_field(obj, "samples", "");
    if (!samples.is_array() || samples.empty())
        throw SchemaError{"samples", "expected a non-empty array"};
    for (size_t i = 0; i < samples.size(); ++i) {
        std::string prefix = "samples[" + std::to_string(i) + "]";
        GenerationSample s = detail::sample_from_json(samples[i], prefix, r.task_kind);
        if (s.sample_index != static_cast<int>(i))
            throw SchemaError{prefix + ".sample_index",
                              "sample indices must be dense from 0 in order"};
        r.samples.push_back(std::move(s));
    }
    return r;
}

inline json to_json(const ScoredRecord& r) {
    json out;
    out["query_id"] = r.query_id;
    out["voted_answer"] = detail::answer_to_json(r.voted_answer);
    out["is_correct"] = r.is_correct;
    json conf = json::object();
    for (const auto& [method, value] : r.confidences) conf[method] = value;
    out["confidences"] = std::move(conf);
    if (!r.model_tag.empty()) out["model_tag"] = r.model_tag;
    if (!r.strategy_tag.empty()) out["strategy_tag"] = r.strategy_tag;
    if (!r.dataset.empty()) out["dataset"] = r.dataset;
    return out;
}

inline ScoredRecord scored_record_from_json(const json& obj) {
    using detail::SchemaError;
    if (!obj.is_object()) throw SchemaError{"", "expected a JSON object"};
    ScoredRecord r;
    r.query_id = detail::require_string(obj, "query_id", "");
    r.voted_answer = detail::answer_from_json(
        detail::require_field(obj, "voted_answer", ""), "voted_answer");
    const json& correct = detail::require_field(obj, "is_correct", "");
    if (!correct.is_boolean()) throw SchemaError{"is_correct", "expected a boolean"};
    r.is_correct = correct.get<bool>();

    const json& conf = detail::require_field(obj, "confidences", "");
    if (!conf.is_object()) throw SchemaError{"confidences", "expected an object"};
    bool any_consistency = false;
    for (auto it = conf.begin(); it != conf.end(); ++it) {
        if (!is_known_method(it.key()))
            throw SchemaError{"confidences." + it.key(), "unknown method name"};
        if (!it.value().is_number())
            throw SchemaError{"confidences." + it.key(), "expected a number"};
        double v = it.value().get<double>();
        if (v < 0.0 || v > 1.0)
            throw SchemaError{"confidences." + it.key(), "confidence outside [0,1]"};
        if (is_consistency_method(it.key())) any_consistency = true;
        r.confidences[it.key()] = v;
    }
    if (!any_consistency)
        throw SchemaError{"confidences", "at least one consistency method is required"};

    r.model_tag = obj.value("model_tag", "");
    r.strategy_tag = obj.value("strategy_tag", "");
    r.dataset = obj.value("dataset", "");
    return r;
}

inline json to_json(const ProbeRecord& r) {
    json out;
    out["query_id"] = r.query_id;
    out["method"] = r.method;
    if (r.response_text) out["response_text"] = *r.response_text;
    if (r.p_yes) out["p_yes"] = *r.p_yes;
    if (r.p_no) out["p_no"] = *r.p_no;
    return out;
}

inline ProbeRecord probe_record_from_json(const json& obj) {
    using detail::SchemaError;
    if (!obj.is_object()) throw SchemaError{"", "expected a JSON object"};
    ProbeRecord r;
    r.query_id = detail::require_string(obj, "query_id", "");
    r.method = detail::require_string(obj, "method", "");
    if (r.method != "ptrue" && r.method != "verb_ling" && r.method != "verb_percent")
        throw SchemaError{"method", "unknown probe method '" + r.method + "'"};
    if (auto it = obj.find("response_text"); it != obj.end() && !it->is_null()) {
        if (!it->is_string()) throw SchemaError{"response_text", "expected a string"};
        r.response_text = it->get<std::string>();
    }
    for (const char* name : {"p_yes", "p_no"}) {
        if (auto it = obj.find(name); it != obj.end() && !it->is_null()) {
            if (!it->is_number() || it->get<double>() < 0.0)
                throw SchemaError{name, "expected a number >= 0"};
            (std::string(name) == "p_yes" ? r.p_yes : r.p_no) = it->get<double>();
        }
    }
    return r;
}

namespace detail {

template <typename T, typename ParseFn>
std::vector<T> read_jsonl(const std::filesystem::path& path, IngestMode mode,
                          std::vector<IngestIssue>* issues, ParseFn parse) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open '" + path.string() + "' for reading");
    std::vector<T> out;
    std::string line;
    int line_no = 0;
    auto report = [&](const std::string& field, const std::string& message) {
        if (mode == IngestMode::Strict)
            throw DataError(path.string() + ":" + std::to_string(line_no) +
                            (field.empty() ? "" : ": field '" + field + "'") + ": " + message);
        if (issues) issues->push_back({line_no, field, message});
    };
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        json obj;
        try {
            obj = json::parse(line);
        } catch (const json::parse_error& e) {
            report("", std::string("invalid JSON: ") + e.what());
            continue;
        }
        try {
            out.push_back(parse(obj));
        } catch (const SchemaError& e) {
            report(e.field, e.message);
        }
    }
    if (in.bad()) throw DataError("I/O failure while reading '" + path.string() + "'");
    return out;
}

template <typename T, typename DumpFn>
void write_jsonl(const std::vector<T>& items, const std::filesystem::path& path,
                 DumpFn dump) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw ConfigError("cannot open '" + path.string() + "' for writing");
    for (const auto& item : items) out << dump(item).dump() << '\n';
    out.flush();
    if (!out) throw DataError("I/O failure while writing '" + path.string() + "'");
}

} // namespace detail

inline std::vector<QueryRecord> read_records(const std::filesystem::path& path,
                                             IngestMode mode = IngestMode::Strict,
                                             std::vector<IngestIssue>* issues = nullptr) {
    std::set<std::string> seen;
    return detail::read_jsonl<QueryRecord>(path, mode, issues, [&](const json& obj) {
        QueryRecord r = query_record_from_json(obj);
        if (!seen.insert(r.query_id).second)
            throw detail::SchemaError{"query_id", "duplicate query_id '" + r.query_id + "'"};
        return r;
    });
}

inline void write_records(const std::vector<QueryRecord>& records,
                          const std::filesystem::path& path) {
    detail::write_jsonl(records, path, [](const QueryRecord& r) { return to_json(r); });
}

inline std::vector<ScoredRecord> read_scored(const std::filesystem::path& path,
                                             IngestMode mode = IngestMode::Strict,
                                             std::vector<IngestIssue>* issues = nullptr) {
    return detail::read_jsonl<ScoredRecord>(path, mode, issues,
                                            [](const json& obj) { return scored_record_from_json(obj); });
}

inline void write_scored(const std::vector<ScoredRecord>& records,
                         const std::filesystem::path& path) {
    detail::write_jsonl(records, path, [](const ScoredRecord& r) { return to_json(r); });
}

inline std::vector<ProbeRecord> read_probes(const std::filesystem::path& path,
                                            IngestMode mode = IngestMode::Strict,
                                            std::vector<IngestIssue>* issues = nullptr) {
    return detail::read_jsonl<ProbeRecord>(path, mode, issues,
                                           [](const json& obj) { return probe_record_from_json(obj); });
}

inline void write_probes(const std::vector<ProbeRecord>& records,
                         const std::filesystem::path& path) {
    detail::write_jsonl(records, path, [](const ProbeRecord& r) { return to_json(r); });
}

} // namespace concord
