#include "worker.hpp"

#include <algorithm>
#include <cmath>
#include <spdlog/spdlog.h>

namespace reshape::detail {

Worker::Worker(WorkerParams params, std::unique_ptr<Operator> op, PartitionLogic logic, ControlMailbox& control,
               DataMailbox& data, Transport& transport, Sink& sink, MetricsBoard* board)
    : p_(params),
      op_(std::move(op)),
      logic_(std::make_shared<const PartitionLogic>(std::move(logic))),
      control_(control),
      data_(data),
      transport_(transport),
      sink_(sink),
      board_(board),
      marker_epoch_(static_cast<std::size_t>(params.upstreams), 0) {}

bool Worker::step(Time now) {
    if (finished_) return false;
    if (now > last_tick_) {
        const Time elapsed = last_tick_ < 0 ? 1 : now - last_tick_;
        credit_ += p_.service_rate * static_cast<double>(elapsed);
        last_tick_ = now;
    }

    bool progressed = drain_control(now);
    progressed |= try_orders(now);
    while (true) {
        progressed |= drain_control(now);
        progressed |= try_orders(now);
        if (!process_one(now)) break;
        progressed = true;
    }
    // Idle capacity is not banked.
    if (ready_.empty() && data_.size() == 0) credit_ -= std::floor(credit_);
    progressed |= try_orders(now);
    progressed |= try_finish(now);
    publish_gauges();
    if (progressed && board_) board_->progress.fetch_add(1, std::memory_order_relaxed);
    return progressed;
}

bool Worker::drain_control(Time now) {
    // On the wall clock `now` goes stale within a slice; a move announced
    // after it must still be seen before records routed by the new logic.
    now = std::max(now, transport_.now());
    bool any = false;
    while (auto body = control_.pop_ready(now)) {
        on_control(std::move(*body), now);
        any = true;
    }
    return any;
}

void Worker::on_control(ControlBody body, Time now) {
    std::visit(
        [&](auto& m) {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, Replicate>) {
                deferred_replicas_.push_back(m);
            } else if constexpr (std::is_same_v<T, Handoff>) {
                if (!m.drain_first && ends_ == p_.upstreams && !markers_complete(m.epoch))
                    throw ProtocolError("worker " + std::to_string(p_.id) +
                                        ": handoff ordered after END without partition-change markers");
                owed_.push_back({std::move(m), false});
            } else if constexpr (std::is_same_v<T, ExpectKeys>) {
                if (installed_.count(m.id)) return;
                for (Key k : m.keys) awaiting_[k] = m.id;
            } else if constexpr (std::is_same_v<T, AcceptState>) {
                install(m, now);
            } else if constexpr (std::is_same_v<T, UpdateLogic>) {
                if (m.logic->epoch() > logic_->epoch()) logic_ = m.logic;
            } else if constexpr (std::is_same_v<T, ResolvePart>) {
                op_->state() = merge_state(std::move(op_->state()), m.fragment);
                ++parts_;
            } else if constexpr (std::is_same_v<T, Seal>) {
                sealed_ = true;
            } else {
                throw ProtocolError("worker " + std::to_string(p_.id) + ": unexpected control message");
            }
        },
        body);
}

bool Worker::process_one(Time) {
    if (!ready_.empty()) {
        if (credit_ < 1.0) return false;
        Record r = std::move(ready_.front());
        ready_.pop_front();
        credit_ -= 1.0;
        process_probe(r);
        return true;
    }
    const auto head = data_.front_is_record();
    if (!head) return false;
    // Markers cost nothing; records need a full unit of credit.
    if (*head && credit_ < 1.0) return false;
    auto msg = data_.pop();
    if (!msg) return false;
    if (auto* m = std::get_if<Marker>(&msg->item)) {
        on_marker(*m, msg->port);
        return true;
    }
    auto& r = std::get<Record>(msg->item);
    if (msg->port == Port::Build) {
        credit_ -= 1.0;
        op_->build(r, r.seq);
        state_dirty_ = true;
        return true;
    }
    if (auto it = awaiting_.find(r.key); it != awaiting_.end()) {
        buffered_.push_back(std::move(r));
        return true;
    }
    credit_ -= 1.0;
    process_probe(r);
    return true;
}

void Worker::process_probe(const Record& r) {
    op_->process(p_.id, r, sink_);
    sink_.observe(r.key, r.seq);
    if (board_) {
        const auto i = static_cast<std::size_t>(p_.id);
        board_->queue[i].fetch_sub(1, std::memory_order_relaxed);
        board_->processed[i].fetch_add(1, std::memory_order_relaxed);
    }
}

void Worker::on_marker(const Marker& m, Port port) {
    if (port == Port::Build) {
        if (m.kind == MarkerKind::End) ++build_ends_;
        return;
    }
    if (m.origin < 0 || m.origin >= p_.upstreams) throw ProtocolError("marker from unknown upstream");
    auto& e = marker_epoch_[static_cast<std::size_t>(m.origin)];
    if (m.kind == MarkerKind::PartitionChange) {
        e = std::max(e, m.epoch);
        return;
    }
    ++ends_;
    if (ends_ > p_.upstreams) throw ProtocolError("worker " + std::to_string(p_.id) + ": END received twice");
    if (ends_ == p_.upstreams) {
        for (const auto& h : owed_)
            if (!h.sent && !h.order.drain_first && !markers_complete(h.order.epoch))
                throw ProtocolError("worker " + std::to_string(p_.id) +
                                    ": partition-change marker missing at END for epoch " +
                                    std::to_string(h.order.epoch));
    }
}

bool Worker::markers_complete(Epoch e) const {
    return std::all_of(marker_epoch_.begin(), marker_epoch_.end(), [e](Epoch x) { return x >= e; });
}

bool Worker::queue_drained() const { return data_.size() == 0 && ready_.empty() && buffered_.empty(); }

bool Worker::try_orders(Time now) {
    bool any = false;
    if (!deferred_replicas_.empty() && build_ends_ >= p_.build_sources) {
        for (const auto& r : deferred_replicas_) {
            auto fragment = extract_state(op_->state(), op_->state().scopes());
            send_fragment(r.id, r.to, std::move(fragment), true, now);
        }
        deferred_replicas_.clear();
        any = true;
    }
    for (auto& h : owed_) {
        if (h.sent) continue;
        const bool ready = h.order.drain_first ? queue_drained() : markers_complete(h.order.epoch);
        if (!ready) continue;
        std::vector<Scope> scopes;
        for (Key k : h.order.keys) {
            const Scope s = op_->scope_for(k);
            if (op_->state().find(s) && std::find(scopes.begin(), scopes.end(), s) == scopes.end()) scopes.push_back(s);
        }
        auto fragment = extract_state(op_->state(), scopes);
        if (op_->state().mutability() == Mutability::Mutable)
            for (const auto& s : scopes) op_->state().erase(s);
        send_fragment(h.order.id, h.order.to, std::move(fragment), false, now);
        h.sent = true;
        state_dirty_ = true;
        any = true;
    }
    std::erase_if(owed_, [](const OwedHandoff& h) { return h.sent; });
    return any;
}

void Worker::send_fragment(CorrelationId id, WorkerId to, KeyedState fragment, bool replica, Time now) {
    const double cost = p_.beta * static_cast<double>(fragment.entry_count());
    busy_until_ = std::max(busy_until_, static_cast<double>(now)) + cost;
    const auto deliver = static_cast<Time>(std::ceil(busy_until_ - 1e-9));
    spdlog::debug("t={} worker {} -> {}: {} fragment, {} scopes, arrives t={}", now, p_.id, to,
                  replica ? "replica" : "handoff", fragment.size(), deliver);
    transport_.to_worker(to, AcceptState{id, p_.id, std::move(fragment), replica}, deliver);
}

void Worker::install(const AcceptState& msg, Time now) {
    auto& state = op_->state();
    if (msg.replica || state.mutability() == Mutability::Immutable) {
        for (const auto& [scope, value] : msg.fragment.entries())
            if (!state.find(scope)) state.insert(scope, value);
    } else {
        state = merge_state(std::move(state), msg.fragment);
    }
    installed_.insert(msg.id);
    state_dirty_ = true;
    for (auto it = awaiting_.begin(); it != awaiting_.end();)
        it = it->second == msg.id ? awaiting_.erase(it) : std::next(it);
    std::deque<Record> still;
    for (auto& r : buffered_) {
        if (awaiting_.count(r.key))
            still.push_back(std::move(r));
        else
            ready_.push_back(std::move(r));
    }
    buffered_ = std::move(still);
    transport_.to_controller(StateAck{msg.id, p_.id}, now);
}

WorkerId Worker::resolution_target(const Scope& scope) const {
    if (op_->traits().keyed_handoff) return logic_->holder(scope.lo);
    return logic_->base().owner(scope.lo);
}

bool Worker::try_finish(Time now) {
    if (ends_ < p_.upstreams || !sealed_) return false;
    if (!owed_.empty() || !awaiting_.empty() || !deferred_replicas_.empty() || !queue_drained()) return false;

    if (!op_->traits().blocking) {
        op_->finalize(p_.id, sink_);
        finished_ = true;
        return true;
    }
    bool any = false;
    if (!resolve_sent_) {
        std::map<WorkerId, std::vector<Scope>> foreign;
        for (const auto& scope : op_->state().scopes()) {
            const WorkerId t = resolution_target(scope);
            if (t != p_.id) foreign[t].push_back(scope);
        }
        for (WorkerId w = 0; w < p_.workers; ++w) {
            if (w == p_.id) continue;
            KeyedState part(op_->state().mutability(), op_->state().combiner());
            if (auto it = foreign.find(w); it != foreign.end()) {
                part = extract_state(op_->state(), it->second);
                for (const auto& s : it->second) op_->state().erase(s);
            }
            transport_.to_worker(w, ResolvePart{p_.id, std::move(part)}, now);
        }
        resolve_sent_ = true;
        any = true;
    }
    if (parts_ == p_.workers - 1) {
        op_->finalize(p_.id, sink_);
        finished_ = true;
        any = true;
    }
    return any;
}

void Worker::publish_gauges() {
    if (!board_) return;
    // Probe-side growth of mutable state is not tracked; the gauge only feeds
    // the migration cost estimate of replicated build state.
    if (state_dirty_) {
        board_->state_entries[static_cast<std::size_t>(p_.id)].store(op_->state().entry_count(),
                                                                     std::memory_order_relaxed);
        state_dirty_ = false;
    }
    if (finished_) board_->workers_finished.fetch_add(1, std::memory_order_relaxed);
}

}  // namespace reshape::detail
