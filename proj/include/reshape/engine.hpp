#pragma once

#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "reshape/controller.hpp"
#include "reshape/operators.hpp"
#include "reshape/partition_logic.hpp"
#include "reshape/strategies.hpp"

namespace reshape {

enum class ExecutionMode : std::uint8_t { Deterministic, Concurrent };
enum class MigrationMode : std::uint8_t { Markers, PauseResume };

struct EngineConfig {
    ExecutionMode mode = ExecutionMode::Deterministic;
    Time metric_period = 10;
    Time initial_delay = 2;        // ticks before the first skew test
    Time phase_poll_period = 1;
    double beta = 0.001;           // migration time units per state entry
    MigrationMode migration = MigrationMode::Markers;
    Time ack_timeout = 1000;
    int tick_micros = 200;         // concurrent mode only
    bool capture_outputs = true;
    Time max_ticks = 50'000'000;

    void validate() const;
};

/// Shape of the workflow: a source fed through `upstream_workers` upstream
/// workers into the partitioned operator, and a sink.
struct WorkflowSpec {
    OperatorKind op = OperatorKind::Join;
    WorkerId workers = 2;
    int upstream_workers = 1;
    double source_rate = 100.0;            // records per tick over all upstreams
    std::vector<double> service_rates;     // records per tick per worker
    BasePartitioner partitioner = BasePartitioner::hash(2);
    std::vector<Key> build_keys;           // join only
    int build_tuples_per_key = 1;
    std::map<WorkerId, std::vector<WorkerId>> pinned_helpers;
    std::vector<Key> observed_keys;        // per-key processed counts tracked on the timeline

    void validate() const;
};

struct JoinTuple {
    Key key = 0;
    Seq probe_seq = 0;
    std::uint64_t build_id = 0;
    friend auto operator<=>(const JoinTuple&, const JoinTuple&) = default;
};

struct TimelinePoint {
    Time time = 0;
    std::vector<std::uint64_t> queue;
    std::vector<std::uint64_t> received;
    std::vector<std::uint64_t> processed;
    std::vector<std::uint64_t> observed_processed;  // parallel to WorkflowSpec::observed_keys
    std::uint64_t emitted = 0;
    int iterations = 0;
    double tau = 0.0;
    bool input_exhausted = false;
};

struct IterationRecord {
    Time time = 0;
    WorkerId skewed = kNoWorker;
    std::vector<WorkerId> helpers;
    int iteration = 0;
    std::string event;   // detect, first-phase, second-phase, skip, abort, ...
    double tau = 0.0;
    std::string detail;
};

struct PlanSummary {
    WorkerId skewed = kNoWorker;
    std::vector<WorkerId> helpers;
    int iterations = 0;
};

struct ExecutionReport {
    WorkerId workers = 0;
    std::vector<std::uint64_t> received;
    std::vector<std::uint64_t> processed;
    std::uint64_t emitted = 0;
    Time end_time = 0;

    std::vector<TimelinePoint> timeline;
    std::vector<IterationRecord> log;
    std::vector<PlanSummary> plans;
    int iterations = 0;           // mitigation iterations started
    int logic_changes = 0;
    int precondition_skips = 0;
    int tau_adjustments = 0;
    double final_tau = 0.0;

    std::vector<JoinTuple> join_output;                 // sorted
    std::map<Key, std::uint64_t> group_output;
    std::vector<std::pair<Key, Seq>> sort_output;       // concatenated in range order
    std::uint64_t output_records = 0;
    std::uint64_t order_inversions = 0;                 // per-key seq decreases seen by the operator
};

/// Runs the workflow over `probe` (the mitigated input stream) and returns
/// the execution report. Throws DeadlockError, ProtocolError or ConfigError.
ExecutionReport run_workflow(const WorkflowSpec& workflow, const std::vector<Record>& probe,
                             const StrategyConfig& strategy, const EngineConfig& config);

}  // namespace reshape
