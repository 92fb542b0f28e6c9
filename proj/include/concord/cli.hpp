#pragma once
// Command-line front end: sample -> score -> report / casestudy / compare.
// The pipeline is staged through files so the expensive sampling stage is
// cached and reusable across metric experiments.
//
// Exit statuses: 0 success, 1 data error, 2 configuration/credential error.

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "concord/baselines.hpp"
#include "concord/calibration.hpp"
#include "concord/consistency.hpp"
#include "concord/csv.hpp"
#include "concord/extraction.hpp"
#include "concord/records.hpp"
#include "concord/sampler.hpp"
#include "concord/significance.hpp"
#include "concord/types.hpp"

namespace concord::cli {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// shared option plumbing

struct SampleOpts {
    std::string input;
    std::string output_dir = ".";
    std::string base_url;
    std::string model;
    int n = 40;
    double temperature = 0.4;
    int max_tokens = 1000;
    double frequency_penalty = 0.0;
    double presence_penalty = 0.0;
    int max_in_flight = 4;
    int retry_budget = 5;
    std::string cache_dir = ".concord-cache";
    std::string probe;    // empty = generation sampling; else ptrue|verb_ling|verb_percent
    std::string rules;    // extraction rules for probe voting
    std::string shots;    // exemplar JSON for 8-shot ptrue probes
    std::string strategy = "other";
    bool no_logprobs = false;
    bool lenient = false;
};

struct ScoreOpts {
    std::string input;
    std::vector<std::string> probes;
    std::string methods = "entropy,agreement,fsd";
    std::string rules;
    std::string output_dir = ".";
    std::string dataset;
    bool lenient = false;
};

struct ReportOpts {
    std::string input;
    std::string output_dir = ".";
    int bins = 10;
    std::string methods;
    std::string group_by = "model_tag,strategy_tag,dataset";
    std::string curve;        // "1,5,40" -> emit curve.csv
    std::string records_path; // QueryRecord JSONL, required with --curve
    std::string rules;
    bool lenient = false;
};

struct CaseStudyOpts {
    std::string dev;
    std::string test;
    int dev_size = 0; // 0 = all
    std::string methods;
    std::string output_dir = ".";
    bool lenient = false;
};

struct CompareOpts {
    std::string input;
    std::string method_a;
    std::string method_b;
    int resamples = 10000;
    std::uint64_t seed = 42;
    std::string output_dir = ".";
    bool lenient = false;
};

namespace detail {

inline void require_path(const std::string& path, const std::string& flag) {
    if (path.empty()) throw ConfigError("missing required flag " + flag);
    if (!fs::exists(path)) throw ConfigError(flag + ": no such path '" + path + "'");
}

inline std::vector<std::string> parse_methods(const std::string& csv) {
    std::set<std::string> wanted;
    if (csv == "all") {
        for (auto m : kAllMethods) wanted.insert(std::string(m));
    } else {
        for (auto& part : split(csv, ',')) {
            std::string m = trim(part);
            if (m.empty()) continue;
            if (!is_known_method(m)) throw ConfigError("unknown method name '" + m + "'");
            wanted.insert(m);
        }
    }
    if (wanted.empty()) throw ConfigError("no methods requested");
    std::vector<std::string> out; // canonical order
    for (auto m : kAllMethods)
        if (wanted.count(std::string(m))) out.push_back(std::string(m));
    return out;
}

inline RuleSet load_rules(const std::string& path) {
    if (path.empty()) return RuleSet::defaults();
    require_path(path, "--rules");
    return RuleSet::load(path);
}

inline void report_issues(const std::vector<IngestIssue>& issues, const std::string& file,
                          std::ostream& err) {
    for (const auto& issue : issues)
        err << file << ":" << issue.line << ": "
            << (issue.field.empty() ? "" : "field '" + issue.field + "': ") << issue.message
            << " (line skipped)\n";
}

inline void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw ConfigError("cannot open '" + path.string() + "' for writing");
    out << text;
    if (!out.flush()) throw DataError("I/O failure while writing '" + path.string() + "'");
}

// Run fn over items with a bounded worker pool; results keep input order.
// The first failure wins; completed results stay available for partial output.
template <typename In, typename Fn>
auto parallel_map(const std::vector<In>& items, int workers, Fn fn,
                  std::vector<char>& done, std::exception_ptr& error) {
    using Out = std::invoke_result_t<Fn, const In&>;
    std::vector<Out> results(items.size());
    done.assign(items.size(), 0);
    std::atomic<size_t> next{0};
    std::atomic<bool> failed{false};
    std::mutex error_mutex;
    auto body = [&] {
        while (!failed.load()) {
            size_t i = next.fetch_add(1);
            if (i >= items.size()) break;
            try {
                results[i] = fn(items[i]);
                done[i] = 1;
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
                failed.store(true);
            }
        }
    };
    std::vector<std::thread> pool;
    int n_workers = std::max(1, std::min<int>(workers, static_cast<int>(items.size())));
    pool.reserve(static_cast<size_t>(n_workers));
    for (int i = 0; i < n_workers; ++i) pool.emplace_back(body);
    for (auto& t : pool) t.join();
    return results;
}

} // namespace detail

// ---------------------------------------------------------------------------
// sample

namespace detail {

struct SampleTask {
    std::string query_id;
    std::string question;
    std::string prompt;
    TaskKind task_kind = TaskKind::StringQa;
    AnswerValue gold; // Invalid = unlabeled
};

inline std::vector<SampleTask> read_tasks(const fs::path& path, IngestMode mode,
                                          std::vector<IngestIssue>* issues) {
    using concord::detail::SchemaError;
    return concord::detail::read_jsonl<SampleTask>(path, mode, issues, [&](const json& obj) {
        SampleTask t;
        t.query_id = concord::detail::require_string(obj, "query_id", "");
        t.question = concord::detail::require_string(obj, "question", "");
        t.prompt = concord::detail::require_string(obj, "prompt", "");
        if (auto it = obj.find("task_kind"); it != obj.end()) {
            auto kind = task_kind_from(it->get<std::string>());
            if (!kind) throw SchemaError{"task_kind", "unknown task kind"};
            t.task_kind = *kind;
        }
        if (auto it = obj.find("gold_answer"); it != obj.end() && !it->is_null()) {
            if (it->is_object() && it->value("kind", "") == "invalid")
                t.gold = AnswerValue::invalid();
            else
                t.gold = normalize_answer(
                    concord::detail::answer_from_json(*it, "gold_answer"), t.task_kind);
        }
        return t;
    });
}

inline std::vector<PTrueShot> read_shots(const std::string& path) {
    if (path.empty()) return {};
    require_path(path, "--shots");
    std::ifstream in(path);
    json doc = json::parse(in, nullptr, true);
    if (!doc.is_array()) throw DataError("shots file must be a JSON array");
    std::vector<PTrueShot> shots;
    for (const auto& s : doc) {
        PTrueShot shot;
        shot.question = s.at("question").get<std::string>();
        shot.reasoning_chain = s.at("reasoning_chain").get<std::string>();
        shot.answer = s.at("answer").get<std::string>();
        shot.correct = s.at("correct").get<bool>();
        shots.push_back(std::move(shot));
    }
    return shots;
}

} // namespace detail

inline int cmd_sample(const SampleOpts& opts, std::ostream& out, std::ostream& err) {
    detail::require_path(opts.input, "--input");
    auto strategy = strategy_from(opts.strategy);
    if (!strategy) throw ConfigError("unknown strategy tag '" + opts.strategy + "'");
    if (opts.model.empty()) throw ConfigError("missing required flag --model");
    if (opts.base_url.empty()) throw ConfigError("missing required flag --base-url");

    SamplerConfig config;
    config.base_url = opts.base_url;
    config.model = opts.model;
    config.n = opts.n;
    config.temperature = opts.temperature;
    config.max_tokens = opts.max_tokens;
    config.frequency_penalty = opts.frequency_penalty;
    config.presence_penalty = opts.presence_penalty;
    config.max_in_flight = opts.max_in_flight;
    config.retry_budget = opts.retry_budget;
    config.cache_dir = opts.cache_dir;
    config.request_logprobs = !opts.no_logprobs;
    SamplerClient client(config);

    fs::create_directories(opts.output_dir);
    IngestMode mode = opts.lenient ? IngestMode::Lenient : IngestMode::Strict;
    std::vector<IngestIssue> issues;

    if (opts.probe.empty()) {
        auto tasks = detail::read_tasks(opts.input, mode, &issues);
        detail::report_issues(issues, opts.input, err);
        if (tasks.empty()) throw DataError("no sampling tasks in '" + opts.input + "'");

        std::vector<char> done;
        std::exception_ptr error;
        auto records = detail::parallel_map(
            tasks, opts.max_in_flight,
            [&](const detail::SampleTask& task) {
                QueryRecord r;
                r.query_id = task.query_id;
                r.question = task.question;
                r.gold_answer = task.gold;
                r.task_kind = task.task_kind;
                r.model_tag = opts.model;
                r.strategy_tag = *strategy;
                r.samples = client.sample_generations(task.prompt);
                return r;
            },
            done, error);

        fs::path final_path = fs::path(opts.output_dir) / "records.jsonl";
        fs::path partial = final_path;
        partial += ".partial";
        std::vector<QueryRecord> completed;
        for (size_t i = 0; i < records.size(); ++i)
            if (done[i]) completed.push_back(std::move(records[i]));
        write_records(completed, partial);
        if (error) std::rethrow_exception(error); // partial output stays behind
        fs::rename(partial, final_path);
        out << "sampled " << completed.size() << " queries x " << opts.n << " -> "
            << final_path.string() << "\n";
        return 0;
    }

    // probe mode: input is full QueryRecord JSONL; emit ProbeRecord JSONL
    auto probe_mode = probe_mode_from(opts.probe);
    if (!probe_mode) throw ConfigError("unknown probe mode '" + opts.probe + "'");
    auto shots = detail::read_shots(opts.shots);
    RuleSet rules = detail::load_rules(opts.rules);
    auto records = read_records(opts.input, mode, &issues);
    detail::report_issues(issues, opts.input, err);
    if (records.empty()) throw DataError("no records in '" + opts.input + "'");

    std::vector<char> done;
    std::exception_ptr error;
    auto probes = detail::parallel_map(
        records, opts.max_in_flight,
        [&](const QueryRecord& record) {
            auto extracted = extract_all(record, rules);
            auto dist = build_distribution(extracted, record.task_kind);
            const AnswerValue& voted = majority_answer(dist);
            // reasoning chain: lowest-index sample stating the voted answer
            const GenerationSample* chain = &record.samples.front();
            for (size_t i = 0; i < record.samples.size(); ++i) {
                if (answers_equal(extracted[i], voted, record.task_kind)) {
                    chain = &record.samples[i];
                    break;
                }
            }
            std::string display = answer_display(voted);
            std::string prompt =
                *probe_mode == ProbeMode::PTrue
                    ? build_ptrue_prompt(record.question, chain->raw_text, display, shots)
                    : build_verbalized_prompt(record.question, chain->raw_text, display,
                                              *probe_mode == ProbeMode::VerbLing
                                                  ? VerbalMode::Linguistic
                                                  : VerbalMode::Percent);
            ProbeRecord probe = client.probe(prompt, *probe_mode);
            probe.query_id = record.query_id;
            return probe;
        },
        done, error);

    fs::path final_path = fs::path(opts.output_dir) / ("probes_" + opts.probe + ".jsonl");
    fs::path partial = final_path;
    partial += ".partial";
    std::vector<ProbeRecord> completed;
    for (size_t i = 0; i < probes.size(); ++i)
        if (done[i]) completed.push_back(std::move(probes[i]));
    write_probes(completed, partial);
    if (error) std::rethrow_exception(error);
    fs::rename(partial, final_path);
    out << "probed " << completed.size() << " queries (" << opts.probe << ") -> "
        << final_path.string() << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// score

namespace detail {

struct ScoreDiagnostics {
    std::map<std::string, std::vector<std::string>> omitted; // method -> query_ids
    std::vector<std::string> ptrue_uninformative;

    json to_json() const {
        json out;
        out["omitted"] = json::object();
        json tallies = json::object();
        for (const auto& [method, ids] : omitted) {
            out["omitted"][method] = ids;
            tallies[method] = ids.size();
        }
        out["tallies"] = std::move(tallies);
        out["ptrue_uninformative"] = ptrue_uninformative;
        return out;
    }
};

using ProbeMap = std::map<std::pair<std::string, std::string>, ProbeRecord>;

} // namespace detail

inline int cmd_score(const ScoreOpts& opts, std::ostream& out, std::ostream& err) {
    detail::require_path(opts.input, "--input");
    auto methods = detail::parse_methods(opts.methods);
    bool any_consistency = false;
    for (const auto& m : methods) any_consistency |= is_consistency_method(m);
    if (!any_consistency)
        throw ConfigError("at least one consistency method (entropy/agreement/fsd) "
                          "must be scored");

    IngestMode mode = opts.lenient ? IngestMode::Lenient : IngestMode::Strict;
    std::vector<IngestIssue> issues;
    auto records = read_records(opts.input, mode, &issues);
    detail::report_issues(issues, opts.input, err);
    if (records.empty()) throw DataError("zero scorable records in '" + opts.input + "'");

    detail::ProbeMap probe_map;
    for (const auto& path : opts.probes) {
        detail::require_path(path, "--probes");
        std::vector<IngestIssue> probe_issues;
        for (auto& p : read_probes(path, mode, &probe_issues))
            probe_map[{p.query_id, p.method}] = std::move(p);
        detail::report_issues(probe_issues, path, err);
    }

    RuleSet rules = detail::load_rules(opts.rules);
    std::string dataset =
        opts.dataset.empty() ? fs::path(opts.input).stem().string() : opts.dataset;

    detail::ScoreDiagnostics diag;
    std::vector<ScoredRecord> scored;
    scored.reserve(records.size());
    for (const auto& record : records) {
        auto extracted = extract_all(record, rules);
        auto dist = build_distribution(extracted, record.task_kind);
        ScoredRecord s;
        s.query_id = record.query_id;
        s.voted_answer = majority_answer(dist);
        s.is_correct = answers_equal(s.voted_answer, record.gold_answer, record.task_kind);
        s.model_tag = record.model_tag;
        s.strategy_tag = std::string(to_string(record.strategy_tag));
        s.dataset = dataset;
        for (const auto& method : methods) {
            if (method == "agreement") s.confidences["agreement"] = agreement(dist);
            else if (method == "entropy") s.confidences["entropy"] = entropy_consistency(dist);
            else if (method == "fsd") s.confidences["fsd"] = fsd(dist);
            else if (method == "logit") {
                try {
                    const GenerationSample& chain =
                        select_logit_sample(record, extracted, s.voted_answer);
                    s.confidences["logit"] = logit_confidence(chain);
                } catch (const DataError&) {
                    diag.omitted["logit"].push_back(record.query_id);
                }
            } else if (method == "ptrue") {
                auto it = probe_map.find({record.query_id, "ptrue"});
                if (it == probe_map.end() || !it->second.p_yes || !it->second.p_no) {
                    diag.omitted["ptrue"].push_back(record.query_id);
                    continue;
                }
                TokenProbePair pair{*it->second.p_yes, *it->second.p_no};
                try {
                    double conf = ptrue_confidence(pair);
                    if (pair.p_yes + pair.p_no == 0.0)
                        diag.ptrue_uninformative.push_back(record.query_id);
                    s.confidences["ptrue"] = conf;
                } catch (const DataError&) {
                    diag.omitted["ptrue"].push_back(record.query_id);
                }
            } else if (method == "verb_ling") {
                auto it = probe_map.find({record.query_id, "verb_ling"});
                if (it == probe_map.end() || !it->second.response_text) {
                    diag.omitted["verb_ling"].push_back(record.query_id);
                    continue;
                }
                try {
                    s.confidences["verb_ling"] =
                        verbalized_linguistic_confidence(*it->second.response_text);
                } catch (const DataError&) {
                    diag.omitted["verb_ling"].push_back(record.query_id);
                }
            } else if (method == "verb_percent") {
                auto it = probe_map.find({record.query_id, "verb_percent"});
                auto conf = (it == probe_map.end() || !it->second.response_text)
                                ? std::nullopt
                                : try_parse_verbalized_percent(*it->second.response_text);
                if (conf) s.confidences["verb_percent"] = *conf;
                else diag.omitted["verb_percent"].push_back(record.query_id);
            }
        }
        scored.push_back(std::move(s));
    }

    fs::create_directories(opts.output_dir);
    fs::path scored_path = fs::path(opts.output_dir) / "scored.jsonl";
    write_scored(scored, scored_path);
    detail::write_text(fs::path(opts.output_dir) / "diagnostics.json",
                       diag.to_json().dump(2) + "\n");

    out << "scored " << scored.size() << " records -> " << scored_path.string() << "\n";
    for (const auto& [method, ids] : diag.omitted)
        out << "  " << method << ": " << ids.size() << " record(s) omitted (see diagnostics.json)\n";
    return 0;
}

// ---------------------------------------------------------------------------
// report

namespace detail {

struct GroupKey {
    std::string model_tag = "*";
    std::string strategy_tag = "*";
    std::string dataset = "*";

    bool operator<(const GroupKey& o) const {
        return std::tie(model_tag, strategy_tag, dataset) <
               std::tie(o.model_tag, o.strategy_tag, o.dataset);
    }
    std::string label() const { return model_tag + "/" + strategy_tag + "/" + dataset; }
};

inline std::set<std::string> parse_group_by(const std::string& csv) {
    std::set<std::string> keys;
    for (auto& part : split(csv, ',')) {
        std::string k = trim(part);
        if (k.empty()) continue;
        if (k != "model_tag" && k != "strategy_tag" && k != "dataset")
            throw ConfigError("unknown group-by key '" + k +
                              "' (expected model_tag, strategy_tag, dataset)");
        keys.insert(k);
    }
    return keys;
}

} // namespace detail

inline int cmd_report(const ReportOpts& opts, std::ostream& out, std::ostream& err) {
    detail::require_path(opts.input, "--input");
    if (opts.bins < 1) throw ConfigError("--bins must be >= 1");
    IngestMode mode = opts.lenient ? IngestMode::Lenient : IngestMode::Strict;
    std::vector<IngestIssue> issues;
    auto scored = read_scored(opts.input, mode, &issues);
    detail::report_issues(issues, opts.input, err);
    if (scored.empty()) throw DataError("no scored records in '" + opts.input + "'");

    auto group_keys = detail::parse_group_by(opts.group_by);
    std::map<detail::GroupKey, std::vector<const ScoredRecord*>> groups;
    for (const auto& r : scored) {
        detail::GroupKey key;
        if (group_keys.count("model_tag")) key.model_tag = r.model_tag;
        if (group_keys.count("strategy_tag")) key.strategy_tag = r.strategy_tag;
        if (group_keys.count("dataset")) key.dataset = r.dataset;
        groups[key].push_back(&r);
    }

    std::vector<std::string> methods;
    if (opts.methods.empty()) {
        std::set<std::string> present;
        for (const auto& r : scored)
            for (const auto& [m, _] : r.confidences) present.insert(m);
        for (auto m : kAllMethods)
            if (present.count(std::string(m))) methods.push_back(std::string(m));
    } else {
        methods = detail::parse_methods(opts.methods);
    }

    std::string report_csv = csv_row({"model_tag", "strategy_tag", "dataset", "method", "n",
                                      "accuracy", "brier", "ece", "m_bins"});
    std::string bins_csv =
        csv_row({"method", "bin_lower", "bin_upper", "count", "mean_conf", "mean_acc"});

    struct SummaryCell { bool present = false; double brier = 0.0; };
    std::vector<std::pair<std::string, std::vector<SummaryCell>>> summary;

    for (const auto& [key, members] : groups) {
        summary.push_back({key.label(), std::vector<SummaryCell>(methods.size())});
        for (size_t mi = 0; mi < methods.size(); ++mi) {
            const auto& method = methods[mi];
            std::vector<ScoredRecord> subset;
            for (const auto* r : members)
                if (r->has_method(method)) subset.push_back(*r);
            if (subset.empty()) continue;
            double bs = brier(subset, method);
            auto [ece_value, bins] = ece(subset, method, opts.bins);
            double acc = accuracy(subset);
            report_csv += csv_row({key.model_tag, key.strategy_tag, key.dataset, method,
                                   std::to_string(subset.size()), format_double(acc),
                                   format_double(bs), format_double(ece_value),
                                   std::to_string(opts.bins)});
            for (const auto& bin : bins)
                bins_csv += csv_row({method, format_double(bin.lower), format_double(bin.upper),
                                     std::to_string(bin.count), format_double(bin.mean_conf),
                                     format_double(bin.mean_acc)});
            summary.back().second[mi] = {true, bs};
        }
    }

    fs::create_directories(opts.output_dir);
    detail::write_text(fs::path(opts.output_dir) / "report.csv", report_csv);
    detail::write_text(fs::path(opts.output_dir) / "bins.csv", bins_csv);

    if (!opts.curve.empty()) {
        if (opts.records_path.empty())
            throw ConfigError("--curve needs --records (QueryRecord JSONL)");
        detail::require_path(opts.records_path, "--records");
        std::vector<int> m_values;
        for (auto& part : split(opts.curve, ',')) {
            std::string token = trim(part);
            if (token.empty()) continue;
            try {
                m_values.push_back(std::stoi(token));
            } catch (const std::exception&) {
                throw ConfigError("--curve expects integers, got '" + token + "'");
            }
        }
        if (m_values.empty()) throw ConfigError("--curve expects at least one sample count");
        RuleSet rules = detail::load_rules(opts.rules);
        std::vector<IngestIssue> rec_issues;
        auto query_records = read_records(opts.records_path, mode, &rec_issues);
        detail::report_issues(rec_issues, opts.records_path, err);
        std::string curve_csv = csv_row({"method", "m", "brier"});
        for (const auto& method : methods) {
            if (!is_consistency_method(method)) continue;
            for (auto [m, bs] : sample_size_curve(query_records, rules, method, m_values))
                curve_csv += csv_row({method, std::to_string(m), format_double(bs)});
        }
        detail::write_text(fs::path(opts.output_dir) / "curve.csv", curve_csv);
    }

    // summary: methods as columns, groups as rows, best (lowest) Brier starred
    out << "brier by group (best starred)\n";
    std::ostringstream header;
    header << "  " << std::left << std::setw(36) << "group";
    for (const auto& m : methods) header << std::right << std::setw(14) << m;
    out << header.str() << "\n";
    for (const auto& [label, cells] : summary) {
        double best = 2.0;
        for (const auto& c : cells)
            if (c.present && c.brier < best) best = c.brier;
        std::ostringstream line;
        line << "  " << std::left << std::setw(36) << label;
        for (const auto& c : cells) {
            char cell[32];
            if (c.present)
                std::snprintf(cell, sizeof(cell), "%.4f%s", c.brier,
                              c.brier == best ? "*" : "");
            else
                std::snprintf(cell, sizeof(cell), "-");
            line << std::right << std::setw(14) << cell;
        }
        out << line.str() << "\n";
    }
    return 0;
}

// ---------------------------------------------------------------------------
// casestudy

inline int cmd_casestudy(const CaseStudyOpts& opts, std::ostream& out, std::ostream& err) {
    detail::require_path(opts.dev, "--dev");
    detail::require_path(opts.test, "--test");
    IngestMode mode = opts.lenient ? IngestMode::Lenient : IngestMode::Strict;
    std::vector<IngestIssue> dev_issues, test_issues;
    auto dev = read_scored(opts.dev, mode, &dev_issues);
    auto test = read_scored(opts.test, mode, &test_issues);
    detail::report_issues(dev_issues, opts.dev, err);
    detail::report_issues(test_issues, opts.test, err);
    if (dev.empty()) throw DataError("empty dev set '" + opts.dev + "'");
    if (test.empty()) throw DataError("empty test set '" + opts.test + "'");
    if (opts.dev_size < 0) throw ConfigError("--dev-size must be >= 0");
    if (opts.dev_size > 0) {
        if (static_cast<size_t>(opts.dev_size) > dev.size())
            throw ConfigError("--dev-size " + std::to_string(opts.dev_size) +
                              " exceeds dev set size " + std::to_string(dev.size()));
        dev.resize(static_cast<size_t>(opts.dev_size));
    }

    std::vector<std::string> methods;
    if (opts.methods.empty()) {
        std::set<std::string> in_dev, in_test;
        for (const auto& r : dev)
            for (const auto& [m, _] : r.confidences) in_dev.insert(m);
        for (const auto& r : test)
            for (const auto& [m, _] : r.confidences) in_test.insert(m);
        for (auto m : kAllMethods) {
            std::string name(m);
            if (in_dev.count(name) && in_test.count(name)) methods.push_back(name);
        }
    } else {
        methods = detail::parse_methods(opts.methods);
    }

    std::string csv = csv_row({"method", "theta", "dev_macro_f1", "test_macro_f1", "pre_acc",
                               "post_acc", "k"});
    out << "case study: correctness discrimination and oracle correction\n";
    for (const auto& method : methods) {
        std::vector<ScoredRecord> dev_subset, test_subset;
        for (const auto& r : dev)
            if (r.has_method(method)) dev_subset.push_back(r);
        for (const auto& r : test)
            if (r.has_method(method)) test_subset.push_back(r);
        if (dev_subset.empty() || test_subset.empty()) {
            err << "skipping '" << method << "': no records carry it in dev or test\n";
            continue;
        }
        DiscriminationResult tuned = tune_threshold(dev_subset, method);
        DiscriminationResult on_test = discriminate(test_subset, method, tuned.threshold);
        OracleCorrection oc = oracle_correct(test_subset, method);
        csv += csv_row({method, format_double(tuned.threshold), format_double(tuned.macro_f1),
                        format_double(on_test.macro_f1), format_double(oc.pre_acc),
                        format_double(oc.post_acc), format_double(oc.k)});
        out << "  " << method << ": theta=" << format_double(tuned.threshold)
            << " test_macro_f1=" << format_double(on_test.macro_f1)
            << " acc " << format_double(oc.pre_acc) << " -> " << format_double(oc.post_acc)
            << " (k=" << format_double(oc.k) << ")\n";
    }

    fs::create_directories(opts.output_dir);
    detail::write_text(fs::path(opts.output_dir) / "casestudy.csv", csv);
    return 0;
}

// ---------------------------------------------------------------------------
// compare

inline int cmd_compare(const CompareOpts& opts, std::ostream& out, std::ostream& err) {
    detail::require_path(opts.input, "--input");
    for (const auto& m : {opts.method_a, opts.method_b})
        if (!is_known_method(m)) throw ConfigError("unknown method name '" + m + "'");

    IngestMode mode = opts.lenient ? IngestMode::Lenient : IngestMode::Strict;
    std::vector<IngestIssue> issues;
    auto scored = read_scored(opts.input, mode, &issues);
    detail::report_issues(issues, opts.input, err);

    std::vector<ScoredRecord> subset;
    for (const auto& r : scored)
        if (r.has_method(opts.method_a) && r.has_method(opts.method_b)) subset.push_back(r);
    if (subset.empty())
        throw DataError("no records carry both '" + opts.method_a + "' and '" +
                        opts.method_b + "'");
    if (subset.size() < scored.size())
        err << (scored.size() - subset.size())
            << " record(s) lack one of the methods and were excluded\n";

    SignificanceResult result =
        paired_significance(subset, opts.method_a, opts.method_b, opts.resamples, opts.seed);

    std::string csv =
        csv_row({"method_a", "method_b", "mean_delta", "p_value", "n_resamples", "seed"});
    csv += csv_row({result.method_a, result.method_b, format_double(result.mean_delta),
                    format_double(result.p_value), std::to_string(result.n_resamples),
                    std::to_string(result.seed)});
    fs::create_directories(opts.output_dir);
    detail::write_text(fs::path(opts.output_dir) / "compare.csv", csv);

    out << "paired sign-flip permutation test over per-record Brier contributions\n"
        << "  " << result.method_a << " vs " << result.method_b << ": mean_delta="
        << format_double(result.mean_delta) << " p=" << format_double(result.p_value)
        << " (" << result.n_resamples << " resamples, seed " << result.seed << ")\n";
    return 0; // reporting, not gating
}

// ---------------------------------------------------------------------------
// entry point

inline int run_cli(std::vector<std::string> args, std::ostream& out = std::cout,
                   std::ostream& err = std::cerr) {
    CLI::App app{"confidence calibration from the consistency of sampled generations"};
    app.require_subcommand(1);

    SampleOpts sample;
    auto* sample_cmd = app.add_subcommand(
        "sample", "collect n sampled generations (or probe responses) per query");
    sample_cmd->add_option("--input", sample.input,
                           "JSONL of {query_id, question, prompt} (or QueryRecord JSONL "
                           "with --probe)");
    sample_cmd->add_option("--output-dir", sample.output_dir, "output directory");
    sample_cmd->add_option("--base-url", sample.base_url,
                           "OpenAI-compatible endpoint base URL, e.g. http://host:8000/v1");
    sample_cmd->add_option("--model", sample.model, "model name sent with each request");
    sample_cmd->add_option("--n", sample.n, "samples per query (default 40)");
    sample_cmd->add_option("--temperature", sample.temperature,
                           "sampling temperature (default 0.4)");
    sample_cmd->add_option("--max-tokens", sample.max_tokens, "max tokens per sample");
    sample_cmd->add_option("--frequency-penalty", sample.frequency_penalty, "frequency penalty");
    sample_cmd->add_option("--presence-penalty", sample.presence_penalty, "presence penalty");
    sample_cmd->add_option("--max-in-flight", sample.max_in_flight,
                           "max concurrent requests");
    sample_cmd->add_option("--retry-budget", sample.retry_budget,
                           "retries on 429/5xx before giving up");
    sample_cmd->add_option("--cache-dir", sample.cache_dir, "response cache directory");
    sample_cmd->add_option("--probe", sample.probe,
                           "collect probe responses instead: ptrue|verb_ling|verb_percent");
    sample_cmd->add_option("--rules", sample.rules, "extraction rules JSON (probe voting)");
    sample_cmd->add_option("--shots", sample.shots, "exemplar JSON for 8-shot ptrue probes");
    sample_cmd->add_option("--strategy", sample.strategy,
                           "strategy tag recorded on sampled records");
    sample_cmd->add_flag("--no-logprobs", sample.no_logprobs,
                         "do not request token log-probabilities");
    sample_cmd->add_flag("--lenient", sample.lenient, "skip malformed input lines");

    ScoreOpts score;
    auto* score_cmd = app.add_subcommand(
        "score", "derive per-record confidences and correctness from QueryRecord JSONL");
    score_cmd->add_option("--input", score.input, "QueryRecord JSONL");
    score_cmd->add_option("--probes", score.probes,
                          "ProbeRecord JSONL (repeatable; needed for ptrue/verb methods)");
    score_cmd->add_option("--methods", score.methods,
                          "comma list or 'all' (default entropy,agreement,fsd)");
    score_cmd->add_option("--rules", score.rules, "extraction rules JSON");
    score_cmd->add_option("--output-dir", score.output_dir, "output directory");
    score_cmd->add_option("--dataset", score.dataset,
                          "dataset tag recorded on scored records (default: input stem)");
    score_cmd->add_flag("--lenient", score.lenient, "skip malformed input lines");

    ReportOpts report;
    auto* report_cmd = app.add_subcommand(
        "report", "calibration report (Brier/ECE/accuracy + reliability bins) from "
                  "ScoredRecord JSONL");
    report_cmd->add_option("--input", report.input, "ScoredRecord JSONL");
    report_cmd->add_option("--output-dir", report.output_dir, "output directory");
    report_cmd->add_option("--bins", report.bins, "ECE bin count (default 10)");
    report_cmd->add_option("--methods", report.methods,
                           "comma list or 'all' (default: methods present)");
    report_cmd->add_option("--group-by", report.group_by,
                           "grouping keys (default model_tag,strategy_tag,dataset)");
    report_cmd->add_option("--curve", report.curve,
                           "sample counts for a Brier curve, e.g. 1,5,40");
    report_cmd->add_option("--records", report.records_path,
                           "QueryRecord JSONL (required with --curve)");
    report_cmd->add_option("--rules", report.rules, "extraction rules JSON (for --curve)");
    report_cmd->add_flag("--lenient", report.lenient, "skip malformed input lines");

    CaseStudyOpts casestudy;
    auto* case_cmd = app.add_subcommand(
        "casestudy", "threshold-tuned correctness discrimination and oracle correction");
    case_cmd->add_option("--dev", casestudy.dev, "dev ScoredRecord JSONL (threshold tuning)");
    case_cmd->add_option("--test", casestudy.test, "test ScoredRecord JSONL");
    case_cmd->add_option("--dev-size", casestudy.dev_size,
                         "use only the first N dev records (0 = all)");
    case_cmd->add_option("--methods", casestudy.methods,
                         "comma list or 'all' (default: methods present in both)");
    case_cmd->add_option("--output-dir", casestudy.output_dir, "output directory");
    case_cmd->add_flag("--lenient", casestudy.lenient, "skip malformed input lines");

    CompareOpts compare;
    auto* compare_cmd = app.add_subcommand(
        "compare", "paired significance test between two methods' Brier losses");
    compare_cmd->add_option("--input", compare.input, "ScoredRecord JSONL");
    compare_cmd->add_option("--a", compare.method_a, "first method");
    compare_cmd->add_option("--b", compare.method_b, "second method");
    compare_cmd->add_option("--resamples", compare.resamples,
                            "sign-flip resamples (default 10000, minimum 100)");
    compare_cmd->add_option("--seed", compare.seed, "random seed (default 42)");
    compare_cmd->add_option("--output-dir", compare.output_dir, "output directory");
    compare_cmd->add_flag("--lenient", compare.lenient, "skip malformed input lines");

    std::vector<const char*> argv;
    argv.reserve(args.size() + 1);
    argv.push_back("concord");
    for (const auto& a : args) argv.push_back(a.c_str());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
        if (sample_cmd->parsed()) return cmd_sample(sample, out, err);
        if (score_cmd->parsed()) return cmd_score(score, out, err);
        if (report_cmd->parsed()) return cmd_report(report, out, err);
        if (case_cmd->parsed()) return cmd_casestudy(casestudy, out, err);
        if (compare_cmd->parsed()) return cmd_compare(compare, out, err);
        err << "error: no subcommand given\n";
        return 2;
    } catch (const CLI::CallForHelp&) {
        auto used = app.get_subcommands();
        out << (used.empty() ? app.help() : used.front()->help());
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

} // namespace concord::cli
