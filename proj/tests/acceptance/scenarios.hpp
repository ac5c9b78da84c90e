#pragma once

// Scenario builders shared by the acceptance binary and the scenario tests.

#include <optional>
#include <string>
#include <vector>

#include "reshape/datagen.hpp"
#include "reshape/engine.hpp"
#include "reshape/harness.hpp"

namespace scenarios {

using namespace reshape;

// Month keys, dictionary-encoded so that hash(key) mod 8 puts Jun and Dec
// on worker 6 and Feb and Oct on worker 4.
inline constexpr Key kFeb = 4;
inline constexpr Key kOct = 12;
inline constexpr Key kJun = 6;
inline constexpr Key kDec = 14;

struct Run {
    WorkflowSpec workflow;
    std::vector<Record> input;
    StrategyConfig strategy;
    EngineConfig engine;

    ExecutionReport execute() const { return run_workflow(workflow, input, strategy, engine); }
};

/// Unit loads Dec 25, Oct 6, Jun 1, Feb 1 per 33 records over 8 workers.
inline Run running_example(StrategyKind kind, std::uint64_t ticks = 200) {
    Run r;
    GeneratorSpec g;
    g.kind = GeneratorKind::FixedWeights;
    g.mode = SamplingMode::Exact;
    g.key_count = 16;
    g.total = 33 * ticks;
    g.weights = {{kDec, 25.0 / 33}, {kOct, 6.0 / 33}, {kJun, 1.0 / 33}, {kFeb, 1.0 / 33}};
    r.input = generate(g);
    r.workflow.op = OperatorKind::Join;
    r.workflow.workers = 8;
    r.workflow.partitioner = BasePartitioner::hash(8);
    r.workflow.source_rate = 33;
    r.workflow.service_rates.assign(8, 17.0);
    r.workflow.build_keys = {kFeb, kJun, kOct, kDec};
    r.workflow.pinned_helpers = {{6, {4}}};
    r.workflow.observed_keys = {kDec, kOct};
    r.strategy.kind = kind;
    r.strategy.tau = 100;
    r.strategy.eta = 100;
    r.strategy.share_window = 33;
    r.engine.metric_period = 5;
    return r;
}

/// Two workers whose totals are 1000 and 200 (exact 5:1 interleaving).
inline Run conservation_instance(StrategyKind kind) {
    Run r;
    GeneratorSpec g;
    g.kind = GeneratorKind::FixedWeights;
    g.mode = SamplingMode::Exact;
    g.key_count = 2;
    g.total = 1200;
    g.weights = {{0, 5.0 / 6}, {1, 1.0 / 6}};
    r.input = generate(g);
    r.workflow.op = OperatorKind::GroupBy;
    r.workflow.workers = 2;
    r.workflow.partitioner = BasePartitioner::hash(2);
    r.workflow.source_rate = 12;
    r.workflow.service_rates = {1.0, 1.0};
    r.strategy.kind = kind;
    r.strategy.tau = 100;
    r.strategy.eta = 100;
    r.strategy.share_window = 12;
    r.engine.metric_period = 5;
    return r;
}

/// Two keys in a 4:1 ratio on two workers.
inline Run heavy_hitter_pair(StrategyKind kind, bool first_phase = true) {
    Run r;
    GeneratorSpec g;
    g.kind = GeneratorKind::FixedWeights;
    g.mode = SamplingMode::Exact;
    g.key_count = 2;
    g.total = 40000;
    g.weights = {{0, 0.8}, {1, 0.2}};
    r.input = generate(g);
    r.workflow.op = OperatorKind::Join;
    r.workflow.workers = 2;
    r.workflow.partitioner = BasePartitioner::hash(2);
    r.workflow.source_rate = 100;
    r.workflow.service_rates = {15.0, 15.0};
    r.workflow.build_keys = {0, 1};
    r.workflow.observed_keys = {0, 1};
    r.strategy.kind = kind;
    r.strategy.tau = 100;
    r.strategy.eta = 100;
    r.strategy.first_phase = first_phase;
    r.engine.metric_period = 5;
    return r;
}

/// Multinomial two-worker stream with about 64 records per snapshot.
inline Run noisy_pair(bool dynamic_tau, std::uint64_t seed) {
    Run r;
    GeneratorSpec g;
    g.kind = GeneratorKind::FixedWeights;
    g.mode = SamplingMode::Multinomial;
    g.key_count = 8;
    g.total = 60000;
    g.weights = {{0, 0.35}, {2, 0.2}, {4, 0.15}, {1, 0.1}, {3, 0.1}, {5, 0.05}, {7, 0.05}};
    g.seed = seed;
    r.input = generate(g);
    r.workflow.op = OperatorKind::GroupBy;
    r.workflow.workers = 2;
    r.workflow.partitioner = BasePartitioner::hash(2);
    r.workflow.source_rate = 6.4;
    r.workflow.service_rates = {2.0, 2.0};
    r.strategy.kind = StrategyKind::ReshapeSbr;
    r.strategy.tau = 10;
    r.strategy.eta = 10;
    r.strategy.dynamic_tau = dynamic_tau;
    r.strategy.tau_step = 50;
    r.strategy.epsilon_lo = 98;
    r.strategy.epsilon_hi = 110;
    r.strategy.horizon = 2000;
    r.strategy.delta = 2;
    r.engine.metric_period = 10;
    return r;
}

/// 42 keys on 40 workers; key 0 takes 80% for the first quarter, then key 0
/// 60% and key 10 20%. Worker 10 is pinned as worker 0's helper.
inline Run changing_distribution(StrategyKind kind, std::uint64_t total = 800000) {
    Run r;
    GeneratorSpec g;
    g.kind = GeneratorKind::Shifting;
    g.mode = SamplingMode::Exact;
    g.key_count = 42;
    g.total = total;
    Segment a, b;
    a.records = total / 4;
    a.weights = {{0, 0.8}};
    a.fill_uniform = true;
    b.records = total - a.records;
    b.weights = {{0, 0.6}, {10, 0.2}};
    b.fill_uniform = true;
    g.segments = {a, b};
    r.input = generate(g);
    r.workflow.op = OperatorKind::Join;
    r.workflow.workers = 40;
    r.workflow.partitioner = BasePartitioner::hash(40);
    r.workflow.source_rate = 1000;
    r.workflow.service_rates.assign(40, 200.0);
    for (Key k = 0; k < 42; ++k) r.workflow.build_keys.push_back(k);
    r.workflow.pinned_helpers = {{0, {10}}};
    r.strategy.kind = kind;
    r.strategy.tau = 2000;
    r.strategy.eta = 2000;
    r.strategy.flowjoin_detect_duration = 20;
    r.engine.metric_period = 10;
    r.engine.capture_outputs = false;
    return r;
}

/// Queue ratio helper/skewed at the last snapshot before input exhaustion.
inline double final_workload_ratio(const ExecutionReport& r, WorkerId s, WorkerId h) {
    const TimelinePoint* last = nullptr;
    for (const auto& p : r.timeline)
        if (!p.input_exhausted) last = &p;
    if (!last) return 0.0;
    const auto qs = static_cast<double>(last->queue.at(static_cast<std::size_t>(s)));
    const auto qh = static_cast<double>(last->queue.at(static_cast<std::size_t>(h)));
    return qs == 0.0 ? (qh == 0.0 ? 1.0 : 1e9) : qh / qs;
}

/// First timeline time at which |observed - actual| <= band, if any.
inline std::optional<Time> first_in_band(const ExecutionReport& r, double actual, double band) {
    for (const auto& p : observed_ratio_series(r, actual))
        if (p.abs_diff && *p.abs_diff <= band) return p.time;
    return std::nullopt;
}

/// Records processed by the operator at timeline time `t`.
inline std::uint64_t processed_at(const ExecutionReport& r, Time t) {
    for (const auto& p : r.timeline) {
        if (p.time != t) continue;
        std::uint64_t s = 0;
        for (auto v : p.processed) s += v;
        return s;
    }
    return 0;
}

}  // namespace scenarios
