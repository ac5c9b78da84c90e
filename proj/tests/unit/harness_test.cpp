#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include "reshape/harness.hpp"
#include "scenarios.hpp"

using namespace reshape;
namespace fs = std::filesystem;

namespace {

const bool quiet = (spdlog::set_level(spdlog::level::warn), true);

const char* kSmall = R"({
  "workflow": "groupby",
  "workers": 3,
  "source_rate": 9,
  "service_rate": 2,
  "generators": [
    {"kind": "fixed", "mode": "multinomial", "key_count": 6, "total": 3000,
     "weights": {"0": 0.6, "1": 0.1, "2": 0.1, "3": 0.1, "4": 0.05, "5": 0.05}}
  ],
  "strategy": {"kind": "reshape-sbr", "tau": 40, "eta": 40},
  "engine": {"metric_period": 5},
  "seed": 3
})";

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("reshape_harness_" + name);
    fs::remove_all(dir);
    return dir;
}

}  // namespace

TEST(Metrics, BalancingRatioExamples) {
    EXPECT_NEAR(load_balancing_ratio(12'000'000, 14'000'000), 0.857, 1e-3);
    EXPECT_NEAR(load_balancing_ratio(17'000'000, 9'000'000), 0.529, 1e-3);
    EXPECT_DOUBLE_EQ(load_balancing_ratio(0, 0), 1.0);
    EXPECT_DOUBLE_EQ(load_balancing_ratio(0, 5), 0.0);
}

TEST(Metrics, LoadReductionUsesMaxOverGroup) {
    ExecutionReport base, mit;
    base.received = {1000, 200, 50};
    mit.received = {610, 590, 50};
    const std::vector<WorkerId> helpers{1};
    EXPECT_DOUBLE_EQ(load_reduction(base, mit, 0, helpers), 390.0);
    mit.received = {1100, 100, 50};
    EXPECT_DOUBLE_EQ(load_reduction(base, mit, 0, helpers), -100.0);
}

TEST(Metrics, ObservedRatioSeries) {
    ExecutionReport r;
    r.timeline.resize(3);
    r.timeline[0].time = 0;
    r.timeline[0].observed_processed = {5, 0};
    r.timeline[1].time = 5;
    r.timeline[1].observed_processed = {10, 5};
    r.timeline[2].time = 10;
    r.timeline[2].observed_processed = {40, 10};
    const auto s = observed_ratio_series(r, 4.0);
    ASSERT_EQ(s.size(), 3u);
    EXPECT_FALSE(s[0].observed);
    EXPECT_DOUBLE_EQ(*s[1].observed, 2.0);
    EXPECT_DOUBLE_EQ(*s[1].abs_diff, 2.0);
    EXPECT_DOUBLE_EQ(*s[2].abs_diff, 0.0);
}

TEST(Config, ParsesAndBuildsInput) {
    const auto c = parse_config(kSmall);
    EXPECT_EQ(c.workflow, OperatorKind::GroupBy);
    EXPECT_EQ(c.workers, 3);
    EXPECT_EQ(c.strategy.kind, StrategyKind::ReshapeSbr);
    EXPECT_EQ(c.key_space(), 6);
    const auto wf = build_workflow(c);
    EXPECT_EQ(wf.service_rates, (std::vector<double>{2, 2, 2}));
    const auto a = build_input(c);
    EXPECT_EQ(a.size(), 3000u);
    EXPECT_EQ(a, build_input(c));
    auto other = c;
    other.seed = 4;
    EXPECT_NE(a, build_input(other));
}

TEST(Config, SeqRunsAcrossGenerators) {
    auto c = parse_config(kSmall);
    c.generators.push_back(c.generators.front());
    const auto in = build_input(c);
    std::map<Key, Seq> next;
    for (const auto& r : in) EXPECT_EQ(r.seq, next[r.key]++);
}

TEST(Config, Errors) {
    // Each case breaks one field of an otherwise valid config.
    auto with = [](const char* field, nlohmann::json value) {
        auto j = nlohmann::json::parse(kSmall);
        j[field] = std::move(value);
        return j.dump();
    };
    EXPECT_NO_THROW(parse_config(kSmall));
    EXPECT_THROW(parse_config("{"), ConfigError);
    EXPECT_THROW(parse_config(with("colour", 1)), ConfigError);
    EXPECT_THROW(parse_config(with("strategy", "best")), ConfigError);
    EXPECT_THROW(parse_config(with("strategy", {{"tau", -1}})), ConfigError);
    EXPECT_THROW(parse_config(with("strategy", {{"estimate_noise", -0.5}})), ConfigError);
    EXPECT_THROW(parse_config(with("generators", nlohmann::json::array())), ConfigError);
    EXPECT_THROW(parse_config(with("generators", {{{"kind", "fixed"}, {"total", 5}, {"weights", {{"0", 0.5}}}}})),
                 ConfigError);
    EXPECT_THROW(parse_config(with("engine", {{"mode", "parallel"}})), ConfigError);
    EXPECT_THROW(parse_config(with("partitioner", "round-robin")), ConfigError);
    EXPECT_THROW(parse_config(with("workers", "two")), ConfigError);
    EXPECT_THROW(parse_config(with("workers", 1)), ConfigError);
    EXPECT_THROW(parse_config(with("observed_keys", {0, 1, 2})), ConfigError);
    EXPECT_THROW(parse_config(with("balance_pair", {0, 0})), ConfigError);
    EXPECT_THROW(parse_config(with("pinned_helpers", {{"x", {1}}})), ConfigError);
    EXPECT_THROW(load_config("/nonexistent/config.json"), ConfigError);
}

TEST(Config, Overrides) {
    auto c = parse_config(kSmall);
    apply_override(c, "strategy", "flux");
    apply_override(c, "tau", "75.5");
    apply_override(c, "workers", "5");
    apply_override(c, "mode", "concurrent");
    apply_override(c, "rate", "12");
    apply_override(c, "out", "elsewhere");
    EXPECT_EQ(c.strategy.kind, StrategyKind::Flux);
    EXPECT_DOUBLE_EQ(c.strategy.tau, 75.5);
    EXPECT_EQ(c.workers, 5);
    EXPECT_EQ(c.engine.mode, ExecutionMode::Concurrent);
    EXPECT_DOUBLE_EQ(c.source_rate, 12);
    EXPECT_EQ(c.output, "elsewhere");
    EXPECT_THROW(apply_override(c, "tau", "abc"), ConfigError);
    EXPECT_THROW(apply_override(c, "colour", "red"), ConfigError);
}

TEST(Outputs, ReproducibleByteForByte) {
    auto c = parse_config(kSmall);
    c.output = scratch("a").string();
    write_outputs(c, run_experiment(c));
    auto d = c;
    d.output = scratch("b").string();
    write_outputs(d, run_experiment(d));
    for (const char* f : {"metrics.csv", "iterations.csv", "summary.json"})
        EXPECT_EQ(slurp(fs::path(c.output) / f), slurp(fs::path(d.output) / f)) << f;
    EXPECT_FALSE(slurp(fs::path(c.output) / "iterations.csv").empty());
}

TEST(Outputs, SummaryAverageMatchesCsv) {
    auto c = parse_config(kSmall);
    c.output = scratch("avg").string();
    const auto result = run_experiment(c);
    write_outputs(c, result);

    const auto summary = nlohmann::json::parse(slurp(fs::path(c.output) / "summary.json"));
    const auto pair = summary["balance_pair"].get<std::vector<int>>();
    ASSERT_EQ(pair.size(), 2u);

    std::ifstream csv(fs::path(c.output) / "metrics.csv");
    std::string line;
    std::getline(csv, line);
    EXPECT_EQ(line, "time,queue_0,queue_1,queue_2,received_0,received_1,received_2,observed_ratio,iterations,tau");
    double sum = 0;
    int rows = 0;
    while (std::getline(csv, line)) {
        std::vector<std::string> cells;
        std::stringstream ss(line);
        for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
        const double a = std::stod(cells[static_cast<std::size_t>(4 + pair[0])]);
        const double b = std::stod(cells[static_cast<std::size_t>(4 + pair[1])]);
        const double hi = std::max(a, b);
        sum += hi == 0 ? 1.0 : std::min(a, b) / hi;
        ++rows;
    }
    ASSERT_GT(rows, 0);
    EXPECT_NEAR(summary["avg_balancing_ratio"].get<double>(), sum / rows, 1e-9);
    EXPECT_EQ(summary["iterations"].get<int>(), result.report.iterations);
}

TEST(Outputs, CompareFillsLoadReduction) {
    const auto c = parse_config(kSmall);
    const auto r = compare_experiment(c, StrategyKind::None);
    ASSERT_TRUE(r.load_reduction);
    ASSERT_TRUE(r.baseline);
    EXPECT_GT(*r.load_reduction, 0.0);
    const auto s = nlohmann::json::parse(summary_json(c, r));
    EXPECT_EQ(s["baseline"]["strategy"], "none");
}

TEST(Outputs, BalancePairChoice) {
    auto c = parse_config(kSmall);
    ExecutionReport r;
    r.received = {5, 50, 20};
    EXPECT_EQ(choose_balance_pair(c, r), (std::pair<WorkerId, WorkerId>{1, 0}));
    r.plans.push_back({2, {0}, 1});
    EXPECT_EQ(choose_balance_pair(c, r), (std::pair<WorkerId, WorkerId>{2, 0}));
    c.balance_pair = std::pair<WorkerId, WorkerId>{0, 1};
    EXPECT_EQ(choose_balance_pair(c, r), (std::pair<WorkerId, WorkerId>{0, 1}));
}
