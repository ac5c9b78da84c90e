#pragma once

#include <memory>
#include <string>
#include <vector>

#include "reshape/keyed_state.hpp"
#include "reshape/partition_logic.hpp"
#include "reshape/types.hpp"

namespace reshape {

enum class OperatorKind : std::uint8_t { Join, GroupBy, Sort };

OperatorKind parse_operator(const std::string& name);
std::string to_string(OperatorKind kind);

struct OperatorTraits {
    OperatorKind kind = OperatorKind::Join;
    Mutability mutability = Mutability::Immutable;  // of the mitigated (probe) phase
    bool blocking = false;                          // output waits for END
    Combiner combiner = Combiner::None;
    bool keyed_handoff = true;                      // SBK moves state with markers
};

OperatorTraits traits_of(OperatorKind kind);

enum class Transfer : std::uint8_t { SplitByKeys, SplitByRecords };

/// Plan-time check. SBR on a mutable state scatters it, which is only safe
/// for blocking operators with a combiner. Throws ConfigError otherwise.
void validate_transfer(const OperatorTraits& traits, Transfer transfer);

/// Receives operator output. Implementations must tolerate calls from
/// several workers.
class Emitter {
  public:
    virtual ~Emitter() = default;
    virtual void join_match(WorkerId worker, Key key, Seq probe_seq, std::uint64_t build_id) = 0;
    virtual void group_result(WorkerId worker, Key key, std::uint64_t count) = 0;
    virtual void sorted_run(WorkerId worker, const Scope& scope, const SortedRun& run) = 0;
};

/// Per-worker operator logic over a KeyedState.
class Operator {
  public:
    explicit Operator(OperatorTraits traits)
        : traits_(traits), state_(traits.mutability, traits.combiner) {}
    virtual ~Operator() = default;

    const OperatorTraits& traits() const { return traits_; }
    KeyedState& state() { return state_; }
    const KeyedState& state() const { return state_; }

    /// Scope a record of `key` is stored under.
    virtual Scope scope_for(Key key) const { return Scope::key(key); }

    virtual void build(const Record& record, std::uint64_t build_id);
    virtual void process(WorkerId self, const Record& record, Emitter& out) = 0;
    /// Emits results for the scopes this worker owns.
    virtual void finalize(WorkerId self, Emitter& out) = 0;

  private:
    OperatorTraits traits_;
    KeyedState state_;
};

/// `base` is needed by sort to map keys onto range scopes.
std::unique_ptr<Operator> make_operator(OperatorKind kind, const BasePartitioner& base);

}  // namespace reshape
