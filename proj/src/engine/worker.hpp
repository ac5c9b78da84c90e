#pragma once

#include <deque>
#include <map>
#include <memory>
#include <set>
#include <vector>

#include "runtime.hpp"

namespace reshape::detail {

struct WorkerParams {
    WorkerId id = 0;
    WorkerId workers = 1;
    int upstreams = 1;
    int build_sources = 0;   // 1 for a join, 0 otherwise
    double service_rate = 1.0;
    double beta = 0.001;
};

/// One operator worker: a sequential actor with a prioritised control
/// mailbox and a FIFO data mailbox.
class Worker {
  public:
    Worker(WorkerParams params, std::unique_ptr<Operator> op, PartitionLogic logic, ControlMailbox& control,
           DataMailbox& data, Transport& transport, Sink& sink, MetricsBoard* board);

    /// Runs one scheduling slice at `now`. Returns true if anything happened.
    bool step(Time now);

    bool finished() const { return finished_; }
    WorkerId id() const { return p_.id; }
    const Operator& op() const { return *op_; }
    std::size_t buffered() const { return buffered_.size(); }
    bool sealed() const { return sealed_; }

  private:
    struct OwedHandoff {
        Handoff order;
        bool sent = false;
    };

    bool drain_control(Time now);
    void on_control(ControlBody body, Time now);
    bool process_one(Time now);
    void process_probe(const Record& r);
    void on_marker(const Marker& m, Port port);
    bool try_orders(Time now);
    bool markers_complete(Epoch e) const;
    bool queue_drained() const;
    void send_fragment(CorrelationId id, WorkerId to, KeyedState fragment, bool replica, Time now);
    void install(const AcceptState& msg, Time now);
    bool try_finish(Time now);
    WorkerId resolution_target(const Scope& scope) const;
    void publish_gauges();

    WorkerParams p_;
    std::unique_ptr<Operator> op_;
    std::shared_ptr<const PartitionLogic> logic_;
    ControlMailbox& control_;
    DataMailbox& data_;
    Transport& transport_;
    Sink& sink_;
    MetricsBoard* board_;

    double credit_ = 0.0;
    Time last_tick_ = -1;
    double busy_until_ = 0.0;  // serialises outgoing state transfers

    int ends_ = 0;
    int build_ends_ = 0;
    bool state_dirty_ = false;
    std::vector<Epoch> marker_epoch_;
    bool sealed_ = false;

    std::vector<Replicate> deferred_replicas_;
    std::vector<OwedHandoff> owed_;
    std::map<Key, CorrelationId> awaiting_;
    std::set<CorrelationId> installed_;
    std::deque<Record> buffered_;
    std::deque<Record> ready_;

    bool resolve_sent_ = false;
    int parts_ = 0;
    bool finished_ = false;
};

}  // namespace reshape::detail
