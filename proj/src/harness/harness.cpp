#include "reshape/harness.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>
#include <spdlog/spdlog.h>

namespace reshape {

using nlohmann::json;

namespace {

void check_fields(const json& j, const char* where, std::initializer_list<const char*> allowed) {
    if (!j.is_object()) throw ConfigError(fmt::format("{} must be an object", where));
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [k, _] : j.items())
        if (!ok.count(k)) throw ConfigError(fmt::format("unknown field '{}' in {}", k, where));
}

template <typename T>
void get(const json& j, const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(fmt::format("field '{}': {}", key, e.what()));
    }
}

std::map<Key, double> parse_weights(const json& j) {
    std::map<Key, double> out;
    if (j.is_object()) {
        for (const auto& [k, v] : j.items()) {
            try {
                out[std::stoll(k)] = v.get<double>();
            } catch (const std::exception&) {
                throw ConfigError(fmt::format("bad weight entry '{}'", k));
            }
        }
    } else if (j.is_array()) {
        for (std::size_t i = 0; i < j.size(); ++i) out[static_cast<Key>(i)] = j[i].get<double>();
    } else {
        throw ConfigError("weights must be an object or an array");
    }
    return out;
}

GeneratorKind parse_generator_kind(const std::string& s) {
    if (s == "fixed" || s == "fixed_weights") return GeneratorKind::FixedWeights;
    if (s == "zipf") return GeneratorKind::Zipf;
    if (s == "shifting") return GeneratorKind::Shifting;
    if (s == "uniform") return GeneratorKind::Uniform;
    if (s == "csv") return GeneratorKind::Csv;
    throw ConfigError("unknown generator kind '" + s + "'");
}

SamplingMode parse_mode(const std::string& s) {
    if (s == "exact") return SamplingMode::Exact;
    if (s == "multinomial") return SamplingMode::Multinomial;
    throw ConfigError("unknown sampling mode '" + s + "'");
}

GeneratorSpec parse_generator(const json& j) {
    check_fields(j, "generator",
                 {"kind", "mode", "key_count", "total", "weights", "zipf_exponent", "segments", "csv_path",
                  "payload_bytes"});
    GeneratorSpec g;
    std::string kind = "uniform", mode = "exact";
    get(j, "kind", kind);
    get(j, "mode", mode);
    g.kind = parse_generator_kind(kind);
    g.mode = parse_mode(mode);
    get(j, "key_count", g.key_count);
    get(j, "total", g.total);
    if (j.contains("weights")) g.weights = parse_weights(j["weights"]);
    get(j, "zipf_exponent", g.zipf_exponent);
    get(j, "csv_path", g.csv_path);
    get(j, "payload_bytes", g.payload_bytes);
    if (j.contains("segments")) {
        for (const auto& s : j["segments"]) {
            check_fields(s, "segment", {"records", "weights", "fill_uniform"});
            Segment seg;
            get(s, "records", seg.records);
            if (s.contains("weights")) seg.weights = parse_weights(s["weights"]);
            get(s, "fill_uniform", seg.fill_uniform);
            g.segments.push_back(std::move(seg));
        }
    }
    return g;
}

void parse_strategy(const json& j, StrategyConfig& s) {
    check_fields(j, "strategy",
                 {"kind", "tau", "eta", "dynamic_tau", "epsilon_lo", "epsilon_hi", "tau_step", "max_tau_adjustments",
                  "horizon", "delta", "first_phase", "first_phase_partial", "max_helpers", "share_window",
                  "flowjoin_detect_duration", "flowjoin_heavy_factor", "estimate_noise"});
    if (j.contains("kind")) s.kind = reshape::parse_strategy(j["kind"].get<std::string>());
    get(j, "tau", s.tau);
    get(j, "eta", s.eta);
    get(j, "dynamic_tau", s.dynamic_tau);
    get(j, "epsilon_lo", s.epsilon_lo);
    get(j, "epsilon_hi", s.epsilon_hi);
    get(j, "tau_step", s.tau_step);
    get(j, "max_tau_adjustments", s.max_tau_adjustments);
    get(j, "horizon", s.horizon);
    get(j, "delta", s.delta);
    get(j, "first_phase", s.first_phase);
    get(j, "first_phase_partial", s.first_phase_partial);
    get(j, "max_helpers", s.max_helpers);
    get(j, "share_window", s.share_window);
    get(j, "flowjoin_detect_duration", s.flowjoin_detect_duration);
    get(j, "flowjoin_heavy_factor", s.flowjoin_heavy_factor);
    get(j, "estimate_noise", s.estimate_noise);
}

void parse_engine(const json& j, EngineConfig& e) {
    check_fields(j, "engine",
                 {"mode", "metric_period", "initial_delay", "phase_poll_period", "beta", "migration", "ack_timeout",
                  "tick_micros", "capture_outputs", "max_ticks"});
    if (j.contains("mode")) {
        const auto m = j["mode"].get<std::string>();
        if (m == "deterministic") e.mode = ExecutionMode::Deterministic;
        else if (m == "concurrent") e.mode = ExecutionMode::Concurrent;
        else throw ConfigError("unknown engine mode '" + m + "'");
    }
    if (j.contains("migration")) {
        const auto m = j["migration"].get<std::string>();
        if (m == "markers") e.migration = MigrationMode::Markers;
        else if (m == "pause_resume") e.migration = MigrationMode::PauseResume;
        else throw ConfigError("unknown migration mode '" + m + "'");
    }
    get(j, "metric_period", e.metric_period);
    get(j, "initial_delay", e.initial_delay);
    get(j, "phase_poll_period", e.phase_poll_period);
    get(j, "beta", e.beta);
    get(j, "ack_timeout", e.ack_timeout);
    get(j, "tick_micros", e.tick_micros);
    get(j, "capture_outputs", e.capture_outputs);
    get(j, "max_ticks", e.max_ticks);
}

template <typename T>
T parse_number(const std::string& field, const std::string& value) {
    std::istringstream in(value);
    T out{};
    in >> out;
    if (!in || !in.eof()) throw ConfigError(fmt::format("--{} expects a number, got '{}'", field, value));
    return out;
}

std::string fmt_opt(const std::optional<double>& v) { return v ? fmt::format("{}", *v) : std::string(); }

}  // namespace

Key ExperimentConfig::key_space() const {
    Key n = 0;
    for (const auto& g : generators) n = std::max(n, g.key_count);
    return n;
}

void ExperimentConfig::validate() const {
    if (workers < 2) throw ConfigError("worker count must be at least 2");
    if (generators.empty()) throw ConfigError("at least one generator is required");
    for (const auto& g : generators) g.validate();
    const Key space = key_space();
    auto in_space = [&](Key k) { return space <= 0 || (k >= 0 && k < space); };
    for (Key k : observed_keys)
        if (!in_space(k)) throw ConfigError(fmt::format("observed key {} outside the key space", k));
    if (!observed_keys.empty() && observed_keys.size() != 2) throw ConfigError("observed_keys needs exactly two keys");
    for (const auto& g : generators) {
        for (const auto& [k, _] : g.weights)
            if (!in_space(k)) throw ConfigError(fmt::format("weighted key {} outside the key space", k));
        for (const auto& s : g.segments)
            for (const auto& [k, _] : s.weights)
                if (!in_space(k)) throw ConfigError(fmt::format("weighted key {} outside the key space", k));
    }
    if (balance_pair) {
        const auto [a, b] = *balance_pair;
        if (a < 0 || b < 0 || a >= workers || b >= workers || a == b) throw ConfigError("invalid balance_pair");
    }
    if (partitioner != "hash" && partitioner != "range") throw ConfigError("partitioner must be hash or range");
    if (!(service_rate > 0.0)) throw ConfigError("service_rate must be positive");
    strategy.validate();
    engine.validate();
}

ExperimentConfig parse_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    check_fields(j, "config",
                 {"workflow", "workers", "upstream_workers", "source_rate", "service_rate", "service_rates",
                  "partitioner", "ranges", "generators", "build_tuples_per_key", "strategy", "engine",
                  "observed_keys", "balance_pair", "pinned_helpers", "output", "seed"});
    ExperimentConfig c;
    if (j.contains("workflow")) c.workflow = parse_operator(j["workflow"].get<std::string>());
    get(j, "workers", c.workers);
    get(j, "upstream_workers", c.upstream_workers);
    get(j, "source_rate", c.source_rate);
    get(j, "service_rate", c.service_rate);
    get(j, "service_rates", c.service_rates);
    get(j, "partitioner", c.partitioner);
    if (j.contains("ranges")) {
        for (const auto& r : j["ranges"]) {
            if (!r.is_array() || r.size() != 3) throw ConfigError("ranges entries are [lo, hi, worker]");
            c.ranges.push_back({r[0].get<Key>(), r[1].get<Key>(), r[2].get<WorkerId>()});
        }
    }
    if (j.contains("generators")) {
        const auto& gs = j["generators"];
        if (gs.is_object()) c.generators.push_back(parse_generator(gs));
        else for (const auto& g : gs) c.generators.push_back(parse_generator(g));
    }
    get(j, "build_tuples_per_key", c.build_tuples_per_key);
    if (j.contains("strategy")) {
        if (j["strategy"].is_string()) c.strategy.kind = reshape::parse_strategy(j["strategy"].get<std::string>());
        else parse_strategy(j["strategy"], c.strategy);
    }
    if (j.contains("engine")) parse_engine(j["engine"], c.engine);
    get(j, "observed_keys", c.observed_keys);
    if (j.contains("balance_pair")) {
        const auto p = j["balance_pair"].get<std::vector<WorkerId>>();
        if (p.size() != 2) throw ConfigError("balance_pair needs two workers");
        c.balance_pair = std::make_pair(p[0], p[1]);
    }
    if (j.contains("pinned_helpers")) {
        for (const auto& [k, v] : j["pinned_helpers"].items()) {
            WorkerId w = 0;
            try {
                w = static_cast<WorkerId>(std::stoi(k));
            } catch (const std::exception&) {
                throw ConfigError("pinned_helpers keys must be worker ids, got '" + k + "'");
            }
            c.pinned_helpers[w] = v.get<std::vector<WorkerId>>();
        }
    }
    get(j, "output", c.output);
    get(j, "seed", c.seed);
    c.validate();
    return c;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

void apply_override(ExperimentConfig& c, const std::string& field, const std::string& value) {
    if (field == "strategy") c.strategy.kind = parse_strategy(value);
    else if (field == "tau") c.strategy.tau = parse_number<double>(field, value);
    else if (field == "eta") c.strategy.eta = parse_number<double>(field, value);
    else if (field == "workers") c.workers = parse_number<WorkerId>(field, value);
    else if (field == "seed") c.seed = parse_number<std::uint64_t>(field, value);
    else if (field == "out") c.output = value;
    else if (field == "rate") c.source_rate = parse_number<double>(field, value);
    else if (field == "mode") {
        if (value == "deterministic") c.engine.mode = ExecutionMode::Deterministic;
        else if (value == "concurrent") c.engine.mode = ExecutionMode::Concurrent;
        else throw ConfigError("unknown engine mode '" + value + "'");
    } else {
        throw ConfigError("unknown override '" + field + "'");
    }
}

std::vector<Record> build_input(const ExperimentConfig& config) {
    std::vector<Record> out;
    std::map<Key, Seq> next_seq;
    for (std::size_t i = 0; i < config.generators.size(); ++i) {
        GeneratorSpec g = config.generators[i];
        g.seed = config.seed + i;
        for (auto& r : generate(g)) {
            r.seq = next_seq[r.key]++;
            out.push_back(std::move(r));
        }
    }
    return out;
}

WorkflowSpec build_workflow(const ExperimentConfig& c) {
    WorkflowSpec wf;
    wf.op = c.workflow;
    wf.workers = c.workers;
    wf.upstream_workers = c.upstream_workers;
    wf.source_rate = c.source_rate;
    wf.service_rates = c.service_rates.empty() ? std::vector<double>(static_cast<std::size_t>(c.workers), c.service_rate)
                                               : c.service_rates;
    if (c.partitioner == "range")
        wf.partitioner = c.ranges.empty() ? BasePartitioner::equal_ranges(c.workers, std::max<Key>(1, c.key_space()))
                                          : BasePartitioner::range(c.ranges);
    else
        wf.partitioner = BasePartitioner::hash(c.workers);
    if (c.workflow == OperatorKind::Join)
        for (Key k = 0; k < c.key_space(); ++k) wf.build_keys.push_back(k);
    wf.build_tuples_per_key = c.build_tuples_per_key;
    wf.pinned_helpers = c.pinned_helpers;
    wf.observed_keys = c.observed_keys;
    return wf;
}

double load_balancing_ratio(std::uint64_t a, std::uint64_t b) {
    const auto hi = std::max(a, b);
    if (hi == 0) return 1.0;
    return static_cast<double>(std::min(a, b)) / static_cast<double>(hi);
}

double load_reduction(const ExecutionReport& unmitigated, const ExecutionReport& mitigated, WorkerId skewed,
                      std::span<const WorkerId> helpers) {
    auto group_max = [&](const ExecutionReport& r) {
        auto m = r.received.at(static_cast<std::size_t>(skewed));
        for (WorkerId h : helpers) m = std::max(m, r.received.at(static_cast<std::size_t>(h)));
        return static_cast<double>(m);
    };
    return group_max(unmitigated) - group_max(mitigated);
}

std::vector<RatioPoint> observed_ratio_series(const ExecutionReport& report, double actual_ratio) {
    std::vector<RatioPoint> out;
    for (const auto& p : report.timeline) {
        RatioPoint r;
        r.time = p.time;
        if (p.observed_processed.size() >= 2 && p.observed_processed[1] > 0) {
            r.observed = static_cast<double>(p.observed_processed[0]) / static_cast<double>(p.observed_processed[1]);
            r.abs_diff = std::abs(*r.observed - actual_ratio);
        }
        out.push_back(r);
    }
    return out;
}

std::vector<MetricRow> metric_rows(const ExecutionReport& report) {
    std::vector<MetricRow> rows;
    for (const auto& p : report.timeline) {
        MetricRow r;
        r.time = p.time;
        r.queue = p.queue;
        r.received = p.received;
        if (p.observed_processed.size() >= 2 && p.observed_processed[1] > 0)
            r.observed_ratio =
                static_cast<double>(p.observed_processed[0]) / static_cast<double>(p.observed_processed[1]);
        r.iterations = p.iterations;
        r.tau = p.tau;
        rows.push_back(std::move(r));
    }
    return rows;
}

std::string metrics_csv(const std::vector<MetricRow>& rows, WorkerId workers) {
    std::string out = "time";
    for (WorkerId w = 0; w < workers; ++w) out += fmt::format(",queue_{}", w);
    for (WorkerId w = 0; w < workers; ++w) out += fmt::format(",received_{}", w);
    out += ",observed_ratio,iterations,tau\n";
    for (const auto& r : rows) {
        out += fmt::format("{}", r.time);
        for (auto q : r.queue) out += fmt::format(",{}", q);
        for (auto q : r.received) out += fmt::format(",{}", q);
        out += fmt::format(",{},{},{}\n", fmt_opt(r.observed_ratio), r.iterations, r.tau);
    }
    return out;
}

std::string iterations_csv(const ExecutionReport& report) {
    std::string out = "time,event,skewed,helpers,iteration,tau,detail\n";
    for (const auto& e : report.log) {
        std::string helpers;
        for (std::size_t i = 0; i < e.helpers.size(); ++i) helpers += (i ? ";" : "") + std::to_string(e.helpers[i]);
        std::string detail = e.detail;
        std::replace(detail.begin(), detail.end(), '"', '\'');
        out += fmt::format("{},{},{},{},{},{},\"{}\"\n", e.time, e.event, e.skewed, helpers, e.iteration, e.tau,
                           detail);
    }
    return out;
}

std::pair<WorkerId, WorkerId> choose_balance_pair(const ExperimentConfig& config, const ExecutionReport& report) {
    if (config.balance_pair) return *config.balance_pair;
    for (const auto& p : report.plans)
        if (!p.helpers.empty()) return {p.skewed, p.helpers.front()};
    const auto& r = report.received;
    const auto hi = std::max_element(r.begin(), r.end()) - r.begin();
    const auto lo = std::min_element(r.begin(), r.end()) - r.begin();
    if (hi == lo) return {0, 1};
    return {static_cast<WorkerId>(hi), static_cast<WorkerId>(lo)};
}

double average_balancing_ratio(const ExecutionReport& report, std::pair<WorkerId, WorkerId> pair) {
    if (report.timeline.empty()) return 1.0;
    double sum = 0.0;
    for (const auto& p : report.timeline)
        sum += load_balancing_ratio(p.received.at(static_cast<std::size_t>(pair.first)),
                                    p.received.at(static_cast<std::size_t>(pair.second)));
    return sum / static_cast<double>(report.timeline.size());
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
    config.validate();
    const auto input = build_input(config);
    ExperimentResult res;
    res.report = run_workflow(build_workflow(config), input, config.strategy, config.engine);
    res.balance_pair = choose_balance_pair(config, res.report);
    res.avg_balancing_ratio = average_balancing_ratio(res.report, res.balance_pair);
    return res;
}

ExperimentResult compare_experiment(const ExperimentConfig& config, StrategyKind baseline) {
    config.validate();
    const auto input = build_input(config);
    const auto wf = build_workflow(config);
    StrategyConfig base = config.strategy;
    base.kind = baseline;
    ExperimentResult res;
    res.baseline = run_workflow(wf, input, base, config.engine);
    res.baseline_kind = baseline;
    res.report = run_workflow(wf, input, config.strategy, config.engine);
    res.balance_pair = choose_balance_pair(config, res.report);
    res.avg_balancing_ratio = average_balancing_ratio(res.report, res.balance_pair);
    for (const auto& p : res.report.plans) {
        if (p.helpers.empty()) continue;
        res.load_reduction = load_reduction(*res.baseline, res.report, p.skewed, p.helpers);
        break;
    }
    if (!res.load_reduction) res.load_reduction = 0.0;
    return res;
}

std::string summary_json(const ExperimentConfig& config, const ExperimentResult& result) {
    const auto& r = result.report;
    json j;
    j["workflow"] = to_string(config.workflow);
    j["strategy"] = to_string(config.strategy.kind);
    j["workers"] = config.workers;
    j["seed"] = config.seed;
    j["records"] = r.emitted;
    j["end_time"] = r.end_time;
    j["balance_pair"] = {result.balance_pair.first, result.balance_pair.second};
    j["avg_balancing_ratio"] = result.avg_balancing_ratio;
    j["iterations"] = r.iterations;
    j["logic_changes"] = r.logic_changes;
    j["precondition_skips"] = r.precondition_skips;
    j["tau_adjustments"] = r.tau_adjustments;
    j["final_tau"] = r.final_tau;
    j["received"] = r.received;
    j["output_records"] = r.output_records;
    j["order_inversions"] = r.order_inversions;
    json plans = json::array();
    for (const auto& p : r.plans) plans.push_back({{"skewed", p.skewed}, {"helpers", p.helpers}, {"iterations", p.iterations}});
    j["plans"] = plans;
    if (result.load_reduction) j["load_reduction"] = *result.load_reduction;
    if (result.baseline) {
        j["baseline"] = {{"strategy", to_string(result.baseline_kind)},
                         {"received", result.baseline->received},
                         {"end_time", result.baseline->end_time}};
    }
    return j.dump(2) + "\n";
}

void write_outputs(const ExperimentConfig& config, const ExperimentResult& result) {
    namespace fs = std::filesystem;
    const fs::path dir(config.output);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw ConfigError(fmt::format("cannot create output directory '{}': {}", dir.string(), ec.message()));
    auto write = [&](const char* name, const std::string& body) {
        std::ofstream out(dir / name, std::ios::binary);
        if (!out) throw ConfigError(fmt::format("cannot write {}", (dir / name).string()));
        out << body;
    };
    write("metrics.csv", metrics_csv(metric_rows(result.report), result.report.workers));
    write("iterations.csv", iterations_csv(result.report));
    write("summary.json", summary_json(config, result));
}

void configure_logging() {
    const char* env = std::getenv("RESHAPE_LOG");
    const std::string level = env ? env : "";
    if (level == "debug") spdlog::set_level(spdlog::level::debug);
    else if (level == "info") spdlog::set_level(spdlog::level::info);
    else if (level == "error") spdlog::set_level(spdlog::level::err);
    else spdlog::set_level(spdlog::level::warn);
}

}  // namespace reshape
