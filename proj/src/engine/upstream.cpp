#include "upstream.hpp"

#include <spdlog/spdlog.h>

namespace reshape::detail {

Upstream::Upstream(int id, WorkerId workers, PartitionLogic logic, ControlMailbox& control, Transport& transport,
                   MetricsBoard& board)
    : id_(id), workers_(workers), logic_(std::move(logic)), control_(control), transport_(transport), board_(board) {}

bool Upstream::drain_control(Time now) {
    bool any = false;
    while (auto body = control_.pop_ready(now)) {
        any = true;
        if (auto* u = std::get_if<UpdateLogic>(&*body)) {
            if (u->logic->epoch() <= logic_.epoch()) {
                spdlog::debug("upstream {} ignores stale logic epoch {}", id_, u->logic->epoch());
                continue;
            }
            logic_ = *u->logic;
            if (ended_) continue;
            for (WorkerId w = 0; w < workers_; ++w)
                transport_.data(w, {Port::Probe, Marker{MarkerKind::PartitionChange, id_, logic_.epoch()}});
        } else if (std::holds_alternative<Pause>(*body)) {
            paused_ = true;
            transport_.to_controller(Paused{id_}, now);
        } else if (std::holds_alternative<Resume>(*body)) {
            paused_ = false;
        } else {
            throw ProtocolError("upstream " + std::to_string(id_) + ": unexpected control message");
        }
    }
    if (any) board_.progress.fetch_add(1, std::memory_order_relaxed);
    return any;
}

void Upstream::emit(const Record& record) {
    const WorkerId to = route(record, logic_, counters_);
    const WorkerId owner = logic_.base().owner(record.key);
    board_.partition_input[static_cast<std::size_t>(owner)].fetch_add(1, std::memory_order_relaxed);
    {
        std::lock_guard lock(board_.keys_mu);
        ++board_.key_counts[record.key];
    }
    transport_.data(to, {Port::Probe, record});
    board_.emitted.fetch_add(1, std::memory_order_relaxed);
    board_.progress.fetch_add(1, std::memory_order_relaxed);
}

void Upstream::end(Time now) {
    if (ended_) return;
    std::lock_guard gate(board_.end_gate);
    drain_control(now);
    for (WorkerId w = 0; w < workers_; ++w) transport_.data(w, {Port::Probe, Marker{MarkerKind::End, id_, 0}});
    ended_ = true;
    board_.upstreams_ended.fetch_add(1, std::memory_order_release);
}

}  // namespace reshape::detail
