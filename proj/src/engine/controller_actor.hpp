#pragma once

#include <functional>
#include <list>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "reshape/engine.hpp"
#include "reshape/estimation.hpp"
#include "runtime.hpp"

namespace reshape::detail {

struct ControllerParams {
    WorkerId workers = 2;
    int upstreams = 1;
    OperatorTraits traits;
    std::map<WorkerId, std::vector<WorkerId>> pinned_helpers;
    StrategyConfig strategy;
    EngineConfig engine;
    std::uint64_t total_records = 0;
    double total_rate = 0.0;
};

/// The controller: snapshots metrics, detects skew, and drives each
/// mitigation plan through its phases by issuing control messages.
class ControllerActor {
  public:
    ControllerActor(ControllerParams params, PartitionLogic initial, ControlMailbox& inbox, Transport& transport,
                    MetricsBoard& board, Sink& sink);

    void step(Time now);
    /// Records a last timeline point after the run ended.
    void final_snapshot(Time now);

    bool sealed() const { return sealed_; }
    bool waiting() const;
    const PartitionLogic& logic() const { return logic_; }

    void fill_report(ExecutionReport& report) const;

  private:
    using Mutation = std::function<PartitionLogic(const PartitionLogic&)>;

    struct KeyMove {
        std::vector<Key> keys;
        WorkerId from = kNoWorker;
        WorkerId to = kNoWorker;
    };

    struct Change {
        std::string what;
        Mutation mutation;
        std::vector<KeyMove> moves;          // sent after pausing (pause/resume mode)
        std::set<CorrelationId> acks;
        int paused_needed = 0;
        int paused = 0;
        bool publish_on_complete = false;
        bool resume_on_complete = false;
        bool abort_on_timeout = false;
        std::vector<WorkerId> new_replicas;
        Time started = 0;
    };

    struct Plan {
        MitigationPlan m;
        WorkloadSample sample;
        std::map<Key, std::uint64_t> window_keys;
        bool forward = true;
        std::optional<Change> change;
        std::size_t summary = 0;  // index into summaries_
        std::optional<Key> partial_key;
        bool deferral_logged = false;
        bool transient = false;  // removed once its change completes
        bool aborted = false;
    };

    // metrics
    MetricsSnapshot snapshot(Time now);
    std::vector<double> live_queue() const;

    // inbox
    void drain_inbox(Time now);
    void complete(Plan& plan, Time now);
    void check_timeouts(Time now);

    // strategies
    void decide_reshape(const MetricsSnapshot& s, Time now);
    void decide_flux(const MetricsSnapshot& s, Time now);
    void decide_flowjoin(const MetricsSnapshot& s, Time now);
    void poll_phases(Time now);

    std::set<WorkerId> busy_workers() const;
    std::vector<WorkerId> helper_pool(WorkerId skewed, const std::set<WorkerId>& busy) const;
    double migration_cost(WorkerId skewed) const;
    bool maybe_adjust_tau(double gap, double phi, const WorkloadSample& sample, WorkerId skewed, bool passed,
                          Time now);

    void start_iteration(Plan& plan, const MetricsSnapshot& s, Time now);
    void begin_first_phase(Plan& plan, Time now);
    void begin_second_phase(Plan& plan, Time now);
    std::vector<Key> keys_of(WorkerId base_owner) const;
    std::map<Key, std::uint64_t> window_counts(const Plan& plan) const;

    // logic changes
    void issue(Plan& plan, Change change, std::vector<KeyMove> moves, std::vector<WorkerId> replicate_to, Time now);
    void publish(const Mutation& mutation, Time now);
    Plan& new_plan(WorkerId skewed, std::vector<WorkerId> helpers);
    void drop_plan(Plan& plan);
    void log(Time now, const Plan* plan, std::string event, std::string detail = {});

    ControllerParams p_;
    PartitionLogic logic_;
    ControlMailbox& inbox_;
    Transport& transport_;
    MetricsBoard& board_;
    Sink& sink_;

    double tau_;
    int tau_adjustments_ = 0;
    std::list<Plan> plans_;
    std::vector<PlanSummary> summaries_;
    std::set<std::pair<WorkerId, WorkerId>> replicas_;  // (owner, helper) pairs holding a state copy
    WorkloadSample global_sample_;
    std::vector<std::uint64_t> last_input_;
    std::map<CorrelationId, Plan*> ack_owner_;
    CorrelationId next_id_ = 1;
    bool flowjoin_done_ = false;
    bool sealed_ = false;
    std::set<WorkerId> flux_noop_logged_;

    std::vector<TimelinePoint> timeline_;
    std::vector<IterationRecord> log_;
    int iterations_ = 0;
    int logic_changes_ = 0;
    int precondition_skips_ = 0;
};

}  // namespace reshape::detail
