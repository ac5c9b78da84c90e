#include "runtime.hpp"

#include <algorithm>

namespace reshape::detail {

void ControlMailbox::push(ControlBody body, Time deliver_at, std::uint64_t seq) {
    std::lock_guard lock(mu_);
    heap_.push({deliver_at, seq, std::make_shared<ControlBody>(std::move(body))});
    size_.fetch_add(1, std::memory_order_release);
}

std::optional<ControlBody> ControlMailbox::pop_ready(Time now) {
    if (size_.load(std::memory_order_acquire) == 0) return std::nullopt;
    std::lock_guard lock(mu_);
    if (heap_.empty() || heap_.top().deliver_at > now) return std::nullopt;
    auto body = std::move(*heap_.top().body);
    heap_.pop();
    size_.fetch_sub(1, std::memory_order_release);
    return body;
}

std::size_t ControlMailbox::size() const { return size_.load(std::memory_order_acquire); }

bool ControlMailbox::has_ready(Time now) const {
    if (size() == 0) return false;
    std::lock_guard lock(mu_);
    return !heap_.empty() && heap_.top().deliver_at <= now;
}

void DataMailbox::push(DataMessage msg) {
    std::lock_guard lock(mu_);
    q_.push_back(std::move(msg));
    size_.fetch_add(1, std::memory_order_release);
}

std::optional<DataMessage> DataMailbox::pop() {
    if (size() == 0) return std::nullopt;
    std::lock_guard lock(mu_);
    if (q_.empty()) return std::nullopt;
    auto m = std::move(q_.front());
    q_.pop_front();
    size_.fetch_sub(1, std::memory_order_release);
    return m;
}

std::optional<bool> DataMailbox::front_is_record() const {
    if (size() == 0) return std::nullopt;
    std::lock_guard lock(mu_);
    if (q_.empty()) return std::nullopt;
    return std::holds_alternative<Record>(q_.front().item);
}

MetricsBoard::MetricsBoard(WorkerId n, int u)
    : workers(n),
      upstreams(u),
      queue(static_cast<std::size_t>(n)),
      received(static_cast<std::size_t>(n)),
      processed(static_cast<std::size_t>(n)),
      state_entries(static_cast<std::size_t>(n)),
      partition_input(static_cast<std::size_t>(n)) {}

std::map<Key, std::uint64_t> MetricsBoard::key_counts_copy() const {
    std::lock_guard lock(keys_mu);
    return key_counts;
}

Router::Router(WorkerId workers, int upstreams, MetricsBoard& board) : board_(board) {
    for (WorkerId w = 0; w < workers; ++w) {
        worker_control_.push_back(std::make_unique<ControlMailbox>());
        worker_data_.push_back(std::make_unique<DataMailbox>());
    }
    for (int u = 0; u < upstreams; ++u) upstream_control_.push_back(std::make_unique<ControlMailbox>());
}

Time Router::now() const {
    if (!wall_) return now_.load(std::memory_order_acquire);
    const auto elapsed = std::chrono::steady_clock::now() - start_;
    return static_cast<Time>(std::chrono::duration_cast<std::chrono::microseconds>(elapsed) / tick_);
}

void Router::use_wall_clock(std::chrono::microseconds tick) {
    wall_ = true;
    tick_ = tick;
    start_ = std::chrono::steady_clock::now();
}

void Router::to_worker(WorkerId w, ControlBody body, Time deliver_at) {
    worker_control(w).push(std::move(body), deliver_at, seq_++);
}

void Router::to_upstream(int u, ControlBody body, Time deliver_at) {
    upstream_control(u).push(std::move(body), deliver_at, seq_++);
}

void Router::to_controller(ControlBody body, Time deliver_at) { controller_.push(std::move(body), deliver_at, seq_++); }

void Router::data(WorkerId w, DataMessage msg) {
    const auto i = static_cast<std::size_t>(w);
    if (msg.port == Port::Probe && std::holds_alternative<Record>(msg.item)) {
        board_.received[i].fetch_add(1, std::memory_order_relaxed);
        board_.queue[i].fetch_add(1, std::memory_order_relaxed);
    }
    worker_data(w).push(std::move(msg));
}

std::size_t Router::pending_control() const {
    std::size_t n = controller_.size();
    for (const auto& m : worker_control_) n += m->size();
    for (const auto& m : upstream_control_) n += m->size();
    return n;
}

Sink::Sink(bool capture, std::vector<Key> observed)
    : capture_(capture), observed_(std::move(observed)), observed_counts_(observed_.size(), 0) {}

void Sink::join_match(WorkerId, Key key, Seq probe_seq, std::uint64_t build_id) {
    std::lock_guard lock(mu_);
    ++result_.outputs;
    if (capture_) result_.join.emplace_back(key, probe_seq, build_id);
}

void Sink::group_result(WorkerId worker, Key key, std::uint64_t count) {
    std::lock_guard lock(mu_);
    ++result_.outputs;
    if (!result_.groups.emplace(key, count).second)
        throw ProtocolError("group " + std::to_string(key) + " emitted twice (second time by worker " +
                            std::to_string(worker) + ")");
}

void Sink::sorted_run(WorkerId worker, const Scope& scope, const SortedRun& run) {
    std::lock_guard lock(mu_);
    result_.outputs += run.size();
    if (!capture_) return;
    if (!result_.runs.emplace(scope, run.items()).second)
        throw ProtocolError("range [" + std::to_string(scope.lo) + "," + std::to_string(scope.hi) +
                            "] emitted twice (second time by worker " + std::to_string(worker) + ")");
}

void Sink::observe(Key key, Seq seq) {
    std::lock_guard lock(mu_);
    auto [it, fresh] = last_seq_.try_emplace(key, seq);
    if (!fresh) {
        if (seq < it->second) ++result_.inversions;
        it->second = std::max(it->second, seq);
    }
    for (std::size_t i = 0; i < observed_.size(); ++i)
        if (observed_[i] == key) ++observed_counts_[i];
}

std::vector<std::uint64_t> Sink::observed_counts() const {
    std::lock_guard lock(mu_);
    return observed_counts_;
}

Sink::Result Sink::take() {
    std::lock_guard lock(mu_);
    return std::move(result_);
}

}  // namespace reshape::detail
