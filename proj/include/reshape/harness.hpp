#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "reshape/datagen.hpp"
#include "reshape/engine.hpp"

namespace reshape {

/// One experiment: workflow shape, input generators, strategy, engine knobs.
/// JSON field names match the member names.
struct ExperimentConfig {
    OperatorKind workflow = OperatorKind::Join;
    WorkerId workers = 2;
    int upstream_workers = 1;
    double source_rate = 100.0;
    double service_rate = 1.0;            // per worker unless service_rates is set
    std::vector<double> service_rates;
    std::string partitioner = "hash";     // hash | range
    std::vector<KeyRange> ranges;         // explicit ranges for "range"; equal widths otherwise
    std::vector<GeneratorSpec> generators;  // concatenated into one probe stream
    int build_tuples_per_key = 1;
    StrategyConfig strategy;
    EngineConfig engine;
    std::vector<Key> observed_keys;       // two keys A, B for the observed-ratio column
    std::optional<std::pair<WorkerId, WorkerId>> balance_pair;
    std::map<WorkerId, std::vector<WorkerId>> pinned_helpers;
    std::string output = "out";
    std::uint64_t seed = 1;

    /// Largest key count over all generators.
    Key key_space() const;
    void validate() const;
};

ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::string& path);

/// Applies a CLI-style override: strategy, tau, eta, workers, seed, out,
/// mode, rate.
void apply_override(ExperimentConfig& config, const std::string& field, const std::string& value);

/// Probe stream: generators in order, generator i seeded with seed + i.
/// Per-key seq runs across generator boundaries.
std::vector<Record> build_input(const ExperimentConfig& config);
WorkflowSpec build_workflow(const ExperimentConfig& config);

/// min/max of two cumulative counts; 1 when both are zero.
double load_balancing_ratio(std::uint64_t a, std::uint64_t b);

/// Max total input over {skewed} and helpers without mitigation minus the
/// same maximum with mitigation.
double load_reduction(const ExecutionReport& unmitigated, const ExecutionReport& mitigated, WorkerId skewed,
                      std::span<const WorkerId> helpers);

struct RatioPoint {
    Time time = 0;
    std::optional<double> observed;  // A/B processed so far; empty while B is zero
    std::optional<double> abs_diff;  // |observed - actual|
};

/// Observed A:B processed ratio per timeline point against the true ratio.
std::vector<RatioPoint> observed_ratio_series(const ExecutionReport& report, double actual_ratio);

struct MetricRow {
    Time time = 0;
    std::vector<std::uint64_t> queue;
    std::vector<std::uint64_t> received;
    std::optional<double> observed_ratio;
    int iterations = 0;
    double tau = 0.0;
};

std::vector<MetricRow> metric_rows(const ExecutionReport& report);
std::string metrics_csv(const std::vector<MetricRow>& rows, WorkerId workers);
std::string iterations_csv(const ExecutionReport& report);

struct ExperimentResult {
    ExecutionReport report;
    std::pair<WorkerId, WorkerId> balance_pair{0, 1};
    double avg_balancing_ratio = 1.0;
    std::optional<double> load_reduction;
    std::optional<ExecutionReport> baseline;
    StrategyKind baseline_kind = StrategyKind::None;
};

/// Worker pair the balancing ratio is reported for: the configured pair,
/// else the first plan's skewed worker and helper, else the workers with the
/// most and the fewest received records.
std::pair<WorkerId, WorkerId> choose_balance_pair(const ExperimentConfig& config, const ExecutionReport& report);

/// Mean over timeline points of the ratio of cumulative received counts.
double average_balancing_ratio(const ExecutionReport& report, std::pair<WorkerId, WorkerId> pair);

ExperimentResult run_experiment(const ExperimentConfig& config);
/// Runs `baseline` and the configured strategy on the same input and fills
/// load_reduction from the mitigated run's first plan.
ExperimentResult compare_experiment(const ExperimentConfig& config, StrategyKind baseline);

/// Writes metrics.csv, iterations.csv and summary.json under config.output.
void write_outputs(const ExperimentConfig& config, const ExperimentResult& result);
std::string summary_json(const ExperimentConfig& config, const ExperimentResult& result);

/// Reads RESHAPE_LOG (error, info, debug); warnings only when unset.
void configure_logging();

}  // namespace reshape
