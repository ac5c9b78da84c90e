#pragma once

#include <map>
#include <optional>
#include <span>
#include <vector>

#include "reshape/types.hpp"

namespace reshape {

/// Inclusive key range assigned to one worker by a range partitioner.
struct KeyRange {
    Key lo = 0;
    Key hi = 0;
    WorkerId worker = kNoWorker;

    bool contains(Key k) const { return lo <= k && k <= hi; }
    friend bool operator==(const KeyRange&, const KeyRange&) = default;
};

/// Base key->worker mapping before any mitigation.
///
/// The hash variant uses the identity hash (key mod N) so that
/// dictionary-encoded keys land on predictable workers.
class BasePartitioner {
  public:
    enum class Kind { Hash, Range };

    static BasePartitioner hash(WorkerId workers);
    /// Ranges must be pairwise disjoint; gaps are allowed and raise
    /// RoutingError when a key falls into one.
    static BasePartitioner range(std::vector<KeyRange> ranges);
    /// `workers` equal-width ranges over [0, key_count); the last range is
    /// open-ended.
    static BasePartitioner equal_ranges(WorkerId workers, Key key_count);

    Kind kind() const { return kind_; }
    WorkerId worker_count() const { return workers_; }
    const std::vector<KeyRange>& ranges() const { return ranges_; }

    WorkerId owner(Key key) const;
    /// Range containing `key` (range base) or the singleton [key, key].
    KeyRange scope_of(Key key) const;

  private:
    Kind kind_ = Kind::Hash;
    WorkerId workers_ = 0;
    std::vector<KeyRange> ranges_;  // sorted by lo
};

/// Fraction numerator/denominator of an owner's traffic sent to `worker`.
struct Share {
    WorkerId worker = kNoWorker;
    std::uint32_t numerator = 0;
    std::uint32_t denominator = 1;

    friend bool operator==(const Share&, const Share&) = default;
};

/// Routing rules: SBK overrides, then per-key SBR shares, then per-owner SBR
/// shares, then the base partitioner. Values are immutable; every change
/// produces a new logic with a higher epoch.
class PartitionLogic {
  public:
    PartitionLogic() = default;
    explicit PartitionLogic(BasePartitioner base) : base_(std::move(base)) {}

    const BasePartitioner& base() const { return base_; }
    Epoch epoch() const { return epoch_; }
    WorkerId worker_count() const { return base_.worker_count(); }

    const std::map<Key, WorkerId>& sbk_overrides() const { return sbk_; }
    const std::map<WorkerId, std::vector<Share>>& owner_shares() const { return owner_shares_; }
    const std::map<Key, std::vector<Share>>& key_shares() const { return key_shares_; }

    /// Worker that holds the key's scope: the SBK target if overridden, else
    /// the base owner. SBR shares do not change the holder.
    WorkerId holder(Key key) const;

    /// Every worker a record of `key` can be routed to under this logic.
    std::vector<WorkerId> destinations(Key key) const;

  private:
    friend PartitionLogic apply_sbk(const PartitionLogic&, std::span<const Key>, WorkerId);
    friend PartitionLogic apply_sbr(const PartitionLogic&, WorkerId, std::vector<Share>);
    friend PartitionLogic apply_key_sbr(const PartitionLogic&, Key, std::vector<Share>);
    friend PartitionLogic with_epoch(const PartitionLogic&, Epoch);

    BasePartitioner base_;
    Epoch epoch_ = 0;
    std::map<Key, WorkerId> sbk_;
    std::map<WorkerId, std::vector<Share>> owner_shares_;
    std::map<Key, std::vector<Share>> key_shares_;
};

/// Reassign whole keys to `to`. All keys must currently share one holder.
/// Moving a key back to its base owner removes the override.
PartitionLogic apply_sbk(const PartitionLogic& logic, std::span<const Key> keys, WorkerId to);

/// Replace the SBR shares of `owner`'s base partition. An empty list or
/// all-zero numerators restores plain routing for the owner.
PartitionLogic apply_sbr(const PartitionLogic& logic, WorkerId owner, std::vector<Share> shares);

/// Like apply_sbr but scoped to a single key.
PartitionLogic apply_key_sbr(const PartitionLogic& logic, Key key, std::vector<Share> shares);

/// Same rules, explicit epoch. Used by the controller when it batches several
/// modifications into one published version.
PartitionLogic with_epoch(const PartitionLogic& logic, Epoch epoch);

/// Per-upstream modular counters driving deterministic SBR splitting.
/// Counters reset whenever the logic epoch changes.
class RouteCounters {
  public:
    std::uint64_t next(const PartitionLogic& logic, bool key_slot, Key slot, std::uint32_t modulus);

  private:
    Epoch epoch_ = 0;
    bool seen_ = false;
    std::map<std::pair<bool, Key>, std::uint64_t> counters_;
};

/// Destination of `record` under `logic`. Advances `counters` when an SBR
/// rule applies. Throws RoutingError for keys outside a range base.
WorkerId route(const Record& record, const PartitionLogic& logic, RouteCounters& counters);

}  // namespace reshape
