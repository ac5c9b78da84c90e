#pragma once

#include "runtime.hpp"

namespace reshape::detail {

/// Upstream worker: routes records with its copy of the partitioning logic
/// and announces logic changes to every downstream worker with markers.
class Upstream {
  public:
    Upstream(int id, WorkerId workers, PartitionLogic logic, ControlMailbox& control, Transport& transport,
             MetricsBoard& board);

    /// Applies pending control messages. Returns true if any was handled.
    bool drain_control(Time now);
    bool paused() const { return paused_; }
    bool ended() const { return ended_; }
    int id() const { return id_; }
    Epoch epoch() const { return logic_.epoch(); }

    void emit(const Record& record);
    /// Drains control once more, then sends END to every worker.
    void end(Time now);

  private:
    int id_;
    WorkerId workers_;
    PartitionLogic logic_;
    RouteCounters counters_;
    ControlMailbox& control_;
    Transport& transport_;
    MetricsBoard& board_;
    bool paused_ = false;
    bool ended_ = false;
};

}  // namespace reshape::detail
