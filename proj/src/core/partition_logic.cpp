#include "reshape/partition_logic.hpp"

#include <algorithm>
#include <limits>
#include <set>
#include <string>

namespace reshape {

BasePartitioner BasePartitioner::hash(WorkerId workers) {
    if (workers <= 0) throw ConfigError("hash partitioner needs at least one worker");
    BasePartitioner p;
    p.kind_ = Kind::Hash;
    p.workers_ = workers;
    return p;
}

BasePartitioner BasePartitioner::range(std::vector<KeyRange> ranges) {
    if (ranges.empty()) throw ConfigError("range partitioner needs at least one range");
    std::sort(ranges.begin(), ranges.end(),
              [](const KeyRange& a, const KeyRange& b) { return a.lo < b.lo; });
    WorkerId max_worker = 0;
    for (std::size_t i = 0; i < ranges.size(); ++i) {
        if (ranges[i].lo > ranges[i].hi) throw ConfigError("range with lo > hi");
        if (ranges[i].worker < 0) throw ConfigError("range assigned to a negative worker id");
        if (i > 0 && ranges[i].lo <= ranges[i - 1].hi) throw ConfigError("overlapping key ranges");
        max_worker = std::max(max_worker, ranges[i].worker);
    }
    BasePartitioner p;
    p.kind_ = Kind::Range;
    p.workers_ = max_worker + 1;
    p.ranges_ = std::move(ranges);
    return p;
}

BasePartitioner BasePartitioner::equal_ranges(WorkerId workers, Key key_count) {
    if (workers <= 0 || key_count < workers)
        throw ConfigError("equal_ranges needs 0 < workers <= key_count");
    std::vector<KeyRange> ranges;
    for (WorkerId w = 0; w < workers; ++w) {
        const Key lo = w == 0 ? std::numeric_limits<Key>::min() : key_count * w / workers;
        const Key hi = w + 1 == workers ? std::numeric_limits<Key>::max() : key_count * (w + 1) / workers - 1;
        ranges.push_back({lo, hi, w});
    }
    return range(std::move(ranges));
}

KeyRange BasePartitioner::scope_of(Key key) const {
    if (kind_ == Kind::Hash) return {key, key, owner(key)};
    auto it = std::upper_bound(ranges_.begin(), ranges_.end(), key,
                               [](Key k, const KeyRange& r) { return k < r.lo; });
    if (it == ranges_.begin() || !std::prev(it)->contains(key))
        throw RoutingError("key " + std::to_string(key) + " is not covered by any range");
    return *std::prev(it);
}

WorkerId BasePartitioner::owner(Key key) const {
    if (kind_ == Kind::Hash) {
        if (workers_ <= 0) throw RoutingError("partitioner has no workers");
        auto m = key % workers_;
        return static_cast<WorkerId>(m < 0 ? m + workers_ : m);
    }
    return scope_of(key).worker;
}

WorkerId PartitionLogic::holder(Key key) const {
    if (auto it = sbk_.find(key); it != sbk_.end()) return it->second;
    return base_.owner(key);
}

std::vector<WorkerId> PartitionLogic::destinations(Key key) const {
    WorkerId h = holder(key);
    std::vector<WorkerId> out{h};
    const std::vector<Share>* shares = nullptr;
    if (!sbk_.contains(key)) {
        if (auto it = key_shares_.find(key); it != key_shares_.end())
            shares = &it->second;
        else if (auto jt = owner_shares_.find(h); jt != owner_shares_.end())
            shares = &jt->second;
    }
    if (shares) {
        std::uint32_t redirected = 0;
        for (const auto& s : *shares) {
            if (s.numerator > 0) out.push_back(s.worker);
            redirected += s.numerator;
        }
        if (!shares->empty() && redirected == shares->front().denominator) out.erase(out.begin());
    }
    return out;
}

namespace {

void validate_shares(const PartitionLogic& logic, WorkerId owner, const std::vector<Share>& shares) {
    if (shares.empty()) return;
    const auto d = shares.front().denominator;
    if (d == 0) throw InvalidShareError("share denominator must be positive");
    std::uint64_t sum = 0;
    std::set<WorkerId> seen;
    for (const auto& s : shares) {
        if (s.denominator != d) throw InvalidShareError("denominators differ within one share list");
        if (s.worker < 0 || s.worker >= logic.worker_count())
            throw InvalidShareError("share targets unknown worker " + std::to_string(s.worker));
        if (s.worker == owner) throw InvalidShareError("share targets its own owner");
        if (!seen.insert(s.worker).second) throw InvalidShareError("duplicate helper in share list");
        sum += s.numerator;
    }
    if (sum > d)
        throw InvalidShareError("sum of numerators " + std::to_string(sum) + " exceeds denominator " +
                                std::to_string(d));
}

bool all_zero(const std::vector<Share>& shares) {
    return std::all_of(shares.begin(), shares.end(), [](const Share& s) { return s.numerator == 0; });
}

}  // namespace

PartitionLogic apply_sbk(const PartitionLogic& logic, std::span<const Key> keys, WorkerId to) {
    if (to < 0 || to >= logic.worker_count()) throw ConfigError("SBK target worker out of range");
    PartitionLogic next = logic;
    next.epoch_ = logic.epoch_ + 1;
    if (keys.empty()) return next;
    const WorkerId from = logic.holder(keys.front());
    for (Key k : keys)
        if (logic.holder(k) != from) throw InvalidShareError("SBK keys span multiple owners");
    for (Key k : keys) {
        if (logic.base().owner(k) == to)
            next.sbk_.erase(k);
        else
            next.sbk_[k] = to;
    }
    return next;
}

PartitionLogic apply_sbr(const PartitionLogic& logic, WorkerId owner, std::vector<Share> shares) {
    if (owner < 0 || owner >= logic.worker_count()) throw ConfigError("SBR owner out of range");
    validate_shares(logic, owner, shares);
    PartitionLogic next = logic;
    next.epoch_ = logic.epoch_ + 1;
    if (shares.empty() || all_zero(shares))
        next.owner_shares_.erase(owner);
    else
        next.owner_shares_[owner] = std::move(shares);
    return next;
}

PartitionLogic apply_key_sbr(const PartitionLogic& logic, Key key, std::vector<Share> shares) {
    validate_shares(logic, logic.holder(key), shares);
    PartitionLogic next = logic;
    next.epoch_ = logic.epoch_ + 1;
    if (shares.empty() || all_zero(shares))
        next.key_shares_.erase(key);
    else
        next.key_shares_[key] = std::move(shares);
    return next;
}

PartitionLogic with_epoch(const PartitionLogic& logic, Epoch epoch) {
    PartitionLogic next = logic;
    next.epoch_ = epoch;
    return next;
}

std::uint64_t RouteCounters::next(const PartitionLogic& logic, bool key_slot, Key slot,
                                  std::uint32_t modulus) {
    if (!seen_ || epoch_ != logic.epoch()) {
        counters_.clear();
        epoch_ = logic.epoch();
        seen_ = true;
    }
    auto& c = counters_[{key_slot, slot}];
    const auto value = c;
    c = (c + 1) % modulus;
    return value;
}

namespace {

// Position p in a window of d: the redirected positions are spread evenly and
// the k-th redirected position goes to the helper whose prefix covers k.
WorkerId pick(const std::vector<Share>& shares, WorkerId owner, std::uint64_t p) {
    const std::uint64_t d = shares.front().denominator;
    std::uint64_t total = 0;
    for (const auto& s : shares) total += s.numerator;
    if (total == 0) return owner;
    const std::uint64_t before = p * total / d;
    const std::uint64_t after = (p + 1) * total / d;
    if (after == before) return owner;
    std::uint64_t prefix = 0;
    for (const auto& s : shares) {
        prefix += s.numerator;
        if (before < prefix) return s.worker;
    }
    return owner;
}

}  // namespace

WorkerId route(const Record& record, const PartitionLogic& logic, RouteCounters& counters) {
    const auto& sbk = logic.sbk_overrides();
    if (auto it = sbk.find(record.key); it != sbk.end()) return it->second;

    const WorkerId owner = logic.base().owner(record.key);
    if (auto it = logic.key_shares().find(record.key); it != logic.key_shares().end()) {
        const auto p = counters.next(logic, true, record.key, it->second.front().denominator);
        return pick(it->second, owner, p);
    }
    if (auto it = logic.owner_shares().find(owner); it != logic.owner_shares().end()) {
        const auto p = counters.next(logic, false, owner, it->second.front().denominator);
        return pick(it->second, owner, p);
    }
    return owner;
}

}  // namespace reshape
