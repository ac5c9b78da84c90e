#pragma once

#include <atomic>
#include <chrono>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <queue>
#include <variant>
#include <vector>

#include "reshape/keyed_state.hpp"
#include "reshape/operators.hpp"
#include "reshape/partition_logic.hpp"
#include "reshape/types.hpp"

namespace reshape::detail {

using CorrelationId = std::uint64_t;

// Control message bodies.

struct Replicate {  // to S: copy all state to `to`
    CorrelationId id = 0;
    WorkerId to = kNoWorker;
};

struct Handoff {  // to the loser of a key move
    CorrelationId id = 0;
    std::vector<Key> keys;
    WorkerId to = kNoWorker;
    Epoch epoch = 0;          // wait for markers of this epoch from every upstream
    bool drain_first = false;  // pause/resume variant: wait for an empty queue instead
};

struct ExpectKeys {  // to the gainer of a key move
    CorrelationId id = 0;
    std::vector<Key> keys;
};

struct AcceptState {
    CorrelationId id = 0;
    WorkerId from = kNoWorker;
    KeyedState fragment;
    bool replica = false;
};

struct StateAck {
    CorrelationId id = 0;
    WorkerId from = kNoWorker;
};

struct Pause {};
struct Resume {};
struct Paused {
    int upstream = 0;
};

struct UpdateLogic {
    std::shared_ptr<const PartitionLogic> logic;
};

struct ResolvePart {
    WorkerId from = kNoWorker;
    KeyedState fragment;
};

/// No further logic changes will be issued; blocking operators may resolve.
struct Seal {};

using ControlBody = std::variant<Replicate, Handoff, ExpectKeys, AcceptState, StateAck, Pause, Resume, Paused,
                                 UpdateLogic, ResolvePart, Seal>;

/// Control mailbox ordered by (delivery time, send order). Messages with a
/// future delivery time model state transfers that take virtual time.
class ControlMailbox {
  public:
    void push(ControlBody body, Time deliver_at, std::uint64_t seq);
    std::optional<ControlBody> pop_ready(Time now);
    std::size_t size() const;
    bool has_ready(Time now) const;

  private:
    struct Envelope {
        Time deliver_at;
        std::uint64_t seq;
        std::shared_ptr<ControlBody> body;
        bool operator>(const Envelope& o) const {
            return deliver_at != o.deliver_at ? deliver_at > o.deliver_at : seq > o.seq;
        }
    };
    mutable std::mutex mu_;
    std::priority_queue<Envelope, std::vector<Envelope>, std::greater<>> heap_;
    std::atomic<std::size_t> size_{0};
};

class DataMailbox {
  public:
    void push(DataMessage msg);
    std::optional<DataMessage> pop();
    /// True if the head is a record, false if a marker, nullopt if empty.
    std::optional<bool> front_is_record() const;
    std::size_t size() const { return size_.load(std::memory_order_acquire); }

  private:
    mutable std::mutex mu_;
    std::deque<DataMessage> q_;
    std::atomic<std::size_t> size_{0};
};

/// Shared gauges that workers and upstreams publish and the controller
/// reads as point-in-time snapshots.
struct MetricsBoard {
    MetricsBoard(WorkerId workers, int upstreams);

    WorkerId workers;
    int upstreams;
    std::vector<std::atomic<std::int64_t>> queue;
    std::vector<std::atomic<std::uint64_t>> received;
    std::vector<std::atomic<std::uint64_t>> processed;
    std::vector<std::atomic<std::uint64_t>> state_entries;
    std::vector<std::atomic<std::uint64_t>> partition_input;  // by base owner
    std::atomic<std::uint64_t> emitted{0};
    std::atomic<int> upstreams_ended{0};
    std::atomic<int> workers_finished{0};
    std::atomic<std::uint64_t> progress{0};

    mutable std::mutex keys_mu;
    std::map<Key, std::uint64_t> key_counts;  // records emitted per key

    /// Serialises "upstream emits END" against "controller issues a keyed
    /// move", so markers of an issued move always precede END.
    std::mutex end_gate;

    std::map<Key, std::uint64_t> key_counts_copy() const;
};

/// Message fabric between the controller, upstream workers and workers.
class Transport {
  public:
    virtual ~Transport() = default;
    virtual Time now() const = 0;
    virtual void to_worker(WorkerId w, ControlBody body, Time deliver_at) = 0;
    virtual void to_upstream(int u, ControlBody body, Time deliver_at) = 0;
    virtual void to_controller(ControlBody body, Time deliver_at) = 0;
    virtual void data(WorkerId w, DataMessage msg) = 0;
};

class Router final : public Transport {
  public:
    Router(WorkerId workers, int upstreams, MetricsBoard& board);

    Time now() const override;
    void set_now(Time t) { now_.store(t, std::memory_order_release); }
    void use_wall_clock(std::chrono::microseconds tick);

    void to_worker(WorkerId w, ControlBody body, Time deliver_at) override;
    void to_upstream(int u, ControlBody body, Time deliver_at) override;
    void to_controller(ControlBody body, Time deliver_at) override;
    void data(WorkerId w, DataMessage msg) override;

    ControlMailbox& worker_control(WorkerId w) { return *worker_control_.at(static_cast<std::size_t>(w)); }
    DataMailbox& worker_data(WorkerId w) { return *worker_data_.at(static_cast<std::size_t>(w)); }
    ControlMailbox& upstream_control(int u) { return *upstream_control_.at(static_cast<std::size_t>(u)); }
    ControlMailbox& controller_inbox() { return controller_; }

    /// Control messages not yet consumed, anywhere.
    std::size_t pending_control() const;

  private:
    MetricsBoard& board_;
    std::vector<std::unique_ptr<ControlMailbox>> worker_control_;
    std::vector<std::unique_ptr<DataMailbox>> worker_data_;
    std::vector<std::unique_ptr<ControlMailbox>> upstream_control_;
    ControlMailbox controller_;
    std::atomic<std::uint64_t> seq_{0};
    std::atomic<Time> now_{0};
    bool wall_ = false;
    std::chrono::steady_clock::time_point start_;
    std::chrono::microseconds tick_{1};
};

/// Operator output collector plus per-key order tracking.
class Sink final : public Emitter {
  public:
    Sink(bool capture, std::vector<Key> observed);

    void join_match(WorkerId worker, Key key, Seq probe_seq, std::uint64_t build_id) override;
    void group_result(WorkerId worker, Key key, std::uint64_t count) override;
    void sorted_run(WorkerId worker, const Scope& scope, const SortedRun& run) override;

    /// Called for every probe record an operator processes.
    void observe(Key key, Seq seq);

    std::vector<std::uint64_t> observed_counts() const;

    struct Result {
        std::vector<std::tuple<Key, Seq, std::uint64_t>> join;
        std::map<Key, std::uint64_t> groups;
        std::map<Scope, std::vector<SortedRun::Item>> runs;
        std::uint64_t outputs = 0;
        std::uint64_t inversions = 0;
    };
    Result take();

  private:
    mutable std::mutex mu_;
    bool capture_;
    std::vector<Key> observed_;
    std::vector<std::uint64_t> observed_counts_;
    std::map<Key, Seq> last_seq_;
    Result result_;
};

}  // namespace reshape::detail
