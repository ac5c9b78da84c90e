#include "reshape/engine.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "controller_actor.hpp"
#include "upstream.hpp"
#include "worker.hpp"

namespace reshape {

void EngineConfig::validate() const {
    if (metric_period < 1) throw ConfigError("metric_period must be at least 1");
    if (initial_delay < 0) throw ConfigError("initial_delay must be non-negative");
    if (phase_poll_period < 0) throw ConfigError("phase_poll_period must be non-negative");
    if (!(beta >= 0.0)) throw ConfigError("beta must be non-negative");
    if (ack_timeout < 1) throw ConfigError("ack_timeout must be at least 1");
    if (tick_micros < 1) throw ConfigError("tick_micros must be at least 1");
    if (max_ticks < 1) throw ConfigError("max_ticks must be at least 1");
}

void WorkflowSpec::validate() const {
    if (workers < 1) throw ConfigError("at least one worker is required");
    if (upstream_workers < 1) throw ConfigError("at least one upstream worker is required");
    if (!(source_rate > 0.0)) throw ConfigError("source_rate must be positive");
    if (!service_rates.empty() && service_rates.size() != static_cast<std::size_t>(workers))
        throw ConfigError(fmt::format("service_rates has {} entries for {} workers", service_rates.size(), workers));
    for (double r : service_rates)
        if (!(r > 0.0)) throw ConfigError("service rates must be positive");
    if (partitioner.worker_count() != workers)
        throw ConfigError(fmt::format("partitioner covers {} workers, workflow has {}", partitioner.worker_count(),
                                      workers));
    if (op == OperatorKind::Sort && partitioner.kind() != BasePartitioner::Kind::Range)
        throw ConfigError("sort requires a range partitioner");
    if (op == OperatorKind::Join && build_tuples_per_key < 1)
        throw ConfigError("build_tuples_per_key must be at least 1");
    for (const auto& [s, hs] : pinned_helpers) {
        if (s < 0 || s >= workers) throw ConfigError(fmt::format("pinned worker {} out of range", s));
        for (WorkerId h : hs)
            if (h < 0 || h >= workers || h == s) throw ConfigError(fmt::format("invalid pinned helper {}", h));
    }
}

namespace {

using namespace detail;

struct Runtime {
    Runtime(const WorkflowSpec& wf, const std::vector<Record>& probe, const StrategyConfig& strategy,
            const EngineConfig& cfg)
        : wf(wf),
          probe(probe),
          cfg(cfg),
          traits(traits_of(wf.op)),
          board(wf.workers, wf.upstream_workers),
          router(wf.workers, wf.upstream_workers, board),
          sink(cfg.capture_outputs, wf.observed_keys) {
        const PartitionLogic logic(wf.partitioner);
        double total_rate = 0.0;
        for (WorkerId w = 0; w < wf.workers; ++w) {
            WorkerParams p;
            p.id = w;
            p.workers = wf.workers;
            p.upstreams = wf.upstream_workers;
            p.build_sources = wf.op == OperatorKind::Join ? 1 : 0;
            p.service_rate = wf.service_rates.empty() ? 1.0 : wf.service_rates[static_cast<std::size_t>(w)];
            p.beta = cfg.beta;
            total_rate += p.service_rate;
            workers.push_back(std::make_unique<Worker>(p, make_operator(wf.op, wf.partitioner), logic,
                                                       router.worker_control(w), router.worker_data(w), router, sink,
                                                       &board));
        }
        for (int u = 0; u < wf.upstream_workers; ++u)
            upstreams.push_back(
                std::make_unique<Upstream>(u, wf.workers, logic, router.upstream_control(u), router, board));

        ControllerParams cp;
        cp.workers = wf.workers;
        cp.upstreams = wf.upstream_workers;
        cp.traits = traits;
        cp.pinned_helpers = wf.pinned_helpers;
        cp.strategy = strategy;
        cp.engine = cfg;
        cp.total_records = probe.size();
        cp.total_rate = total_rate;
        controller = std::make_unique<ControllerActor>(cp, logic, router.controller_inbox(), router, board, sink);

        min_rate = std::min(total_rate, wf.source_rate);
        for (const auto& w : wf.service_rates) min_rate = std::min(min_rate, w);
    }

    void emit_build() {
        if (wf.op != OperatorKind::Join) return;
        std::uint64_t id = 0;
        for (Key k : wf.build_keys) {
            for (int i = 0; i < wf.build_tuples_per_key; ++i) {
                Record r{k, id++, {}};
                router.data(wf.partitioner.owner(k), {Port::Build, std::move(r)});
            }
        }
        for (WorkerId w = 0; w < wf.workers; ++w) router.data(w, {Port::Build, Marker{MarkerKind::End, 0, 0}});
    }

    std::uint64_t quota(Time t) const {
        const double q = std::floor(wf.source_rate * static_cast<double>(t + 1) + 1e-9);
        return std::min<std::uint64_t>(probe.size(), static_cast<std::uint64_t>(q));
    }

    /// Ticks without progress after which the run counts as stuck.
    Time stall_limit() const {
        const double slow = std::ceil(10.0 / std::max(min_rate, 1e-9));
        return std::max<Time>(10 * static_cast<Time>(wf.workers), static_cast<Time>(slow));
    }

    bool all_finished() const { return board.workers_finished.load() == wf.workers; }

    ExecutionReport report(Time end) {
        controller->final_snapshot(end);
        ExecutionReport r;
        r.workers = wf.workers;
        for (WorkerId w = 0; w < wf.workers; ++w) {
            r.received.push_back(board.received[static_cast<std::size_t>(w)].load());
            r.processed.push_back(board.processed[static_cast<std::size_t>(w)].load());
        }
        r.emitted = board.emitted.load();
        r.end_time = end;
        controller->fill_report(r);
        auto out = sink.take();
        r.join_output.reserve(out.join.size());
        for (const auto& [k, s, b] : out.join) r.join_output.push_back({k, s, b});
        std::sort(r.join_output.begin(), r.join_output.end());
        r.group_output = std::move(out.groups);
        for (auto& [scope, items] : out.runs) r.sort_output.insert(r.sort_output.end(), items.begin(), items.end());
        r.output_records = out.outputs;
        r.order_inversions = out.inversions;
        return r;
    }

    const WorkflowSpec& wf;
    const std::vector<Record>& probe;
    const EngineConfig& cfg;
    OperatorTraits traits;
    MetricsBoard board;
    Router router;
    Sink sink;
    std::vector<std::unique_ptr<Worker>> workers;
    std::vector<std::unique_ptr<Upstream>> upstreams;
    std::unique_ptr<ControllerActor> controller;
    double min_rate = 1.0;
};

ExecutionReport run_deterministic(Runtime& rt) {
    const auto U = static_cast<std::uint64_t>(rt.upstreams.size());
    std::uint64_t emitted = 0;
    bool ended = false;
    std::uint64_t last_progress = ~std::uint64_t{0};
    Time stalled_since = 0;
    const Time limit = rt.stall_limit();

    for (Time t = 0; t < rt.cfg.max_ticks; ++t) {
        rt.router.set_now(t);
        rt.controller->step(t);
        for (auto& u : rt.upstreams) u->drain_control(t);
        if (t == 0) rt.emit_build();

        if (!ended) {
            const auto target = rt.quota(t);
            while (emitted < target) {
                auto& u = *rt.upstreams[emitted % U];
                if (u.paused()) break;
                u.emit(rt.probe[emitted]);
                ++emitted;
            }
            if (emitted == rt.probe.size()) {
                for (auto& u : rt.upstreams) u->end(t);
                ended = true;
            }
        }
        for (auto& w : rt.workers) w->step(t);

        if (rt.all_finished()) return rt.report(t);

        const auto progress = rt.board.progress.load();
        if (progress != last_progress) {
            last_progress = progress;
            stalled_since = t;
        } else if (t - stalled_since >= limit && rt.router.pending_control() == 0) {
            throw DeadlockError(fmt::format("no progress for {} ticks at t={} ({} of {} workers finished)", limit, t,
                                            rt.board.workers_finished.load(), rt.wf.workers));
        }
    }
    throw DeadlockError(fmt::format("run exceeded {} ticks", rt.cfg.max_ticks));
}

ExecutionReport run_concurrent(Runtime& rt) {
    const auto tick = std::chrono::microseconds(rt.cfg.tick_micros);
    const auto nap = std::max(std::chrono::microseconds(1), tick / 4);
    std::atomic<bool> stop{false};
    std::mutex err_mu;
    std::exception_ptr error;
    auto guarded = [&](auto body) {
        return [&, body]() {
            try {
                body();
            } catch (...) {
                std::lock_guard lock(err_mu);
                if (!error) error = std::current_exception();
                stop = true;
            }
        };
    };

    rt.router.use_wall_clock(tick);
    rt.emit_build();

    std::vector<std::thread> threads;
    threads.emplace_back(guarded([&] {
        Time last = -1;
        while (!stop) {
            const Time now = rt.router.now();
            for (Time t = last + 1; t <= now; ++t) rt.controller->step(t);
            last = now;
            std::this_thread::sleep_for(nap);
        }
    }));
    const auto U = static_cast<std::uint64_t>(rt.upstreams.size());
    for (std::uint64_t u = 0; u < U; ++u) {
        threads.emplace_back(guarded([&, u] {
            auto& up = *rt.upstreams[u];
            std::uint64_t next = u;
            while (!stop) {
                const Time now = rt.router.now();
                up.drain_control(now);
                const auto target = rt.quota(now);
                while (!up.paused() && next < target) {
                    up.emit(rt.probe[next]);
                    next += U;
                }
                if (next >= rt.probe.size()) {
                    up.end(now);
                    break;
                }
                std::this_thread::sleep_for(nap);
            }
            // Keep answering control messages once ended.
            while (!stop) {
                up.drain_control(rt.router.now());
                std::this_thread::sleep_for(nap);
            }
        }));
    }
    for (auto& w : rt.workers) {
        threads.emplace_back(guarded([&, worker = w.get()] {
            while (!stop && !worker->finished())
                if (!worker->step(rt.router.now())) std::this_thread::sleep_for(nap);
        }));
    }

    std::uint64_t last_progress = ~std::uint64_t{0};
    Time stalled_since = 0;
    Time end = 0;
    const Time limit = rt.stall_limit();
    while (!stop) {
        const Time now = rt.router.now();
        if (rt.all_finished()) {
            end = now;
            break;
        }
        const auto progress = rt.board.progress.load();
        if (progress != last_progress) {
            last_progress = progress;
            stalled_since = now;
        } else if (now - stalled_since >= limit && rt.router.pending_control() == 0) {
            std::lock_guard lock(err_mu);
            if (!error)
                error = std::make_exception_ptr(DeadlockError(fmt::format("no progress for {} ticks at t={}", limit, now)));
            break;
        }
        if (now >= rt.cfg.max_ticks) {
            std::lock_guard lock(err_mu);
            if (!error) error = std::make_exception_ptr(DeadlockError("run exceeded max_ticks"));
            break;
        }
        std::this_thread::sleep_for(tick);
    }
    stop = true;
    for (auto& th : threads) th.join();
    if (error) std::rethrow_exception(error);
    return rt.report(end);
}

}  // namespace

ExecutionReport run_workflow(const WorkflowSpec& workflow, const std::vector<Record>& probe,
                             const StrategyConfig& strategy, const EngineConfig& config) {
    workflow.validate();
    strategy.validate();
    config.validate();
    Runtime rt(workflow, probe, strategy, config);
    spdlog::debug("run: {} workers, {} upstreams, {} records, strategy {}", workflow.workers,
                  workflow.upstream_workers, probe.size(), to_string(strategy.kind));
    return config.mode == ExecutionMode::Deterministic ? run_deterministic(rt) : run_concurrent(rt);
}

}  // namespace reshape
