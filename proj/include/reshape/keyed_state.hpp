#pragma once

#include <map>
#include <span>
#include <utility>
#include <variant>
#include <vector>

#include "reshape/types.hpp"

namespace reshape {

enum class Mutability : std::uint8_t { Immutable, Mutable };

/// A single key (lo == hi) or an inclusive key range.
struct Scope {
    Key lo = 0;
    Key hi = 0;

    static Scope key(Key k) { return {k, k}; }
    bool is_key() const { return lo == hi; }
    bool contains(Key k) const { return lo <= k && k <= hi; }
    bool overlaps(const Scope& o) const { return lo <= o.hi && o.lo <= hi; }

    friend bool operator==(const Scope&, const Scope&) = default;
    friend auto operator<=>(const Scope&, const Scope&) = default;
};

/// Build-side tuples of one join key, identified by build tuple id.
struct BuildList {
    std::vector<std::uint64_t> ids;
    friend bool operator==(const BuildList&, const BuildList&) = default;
};

struct Count {
    std::uint64_t value = 0;
    friend bool operator==(const Count&, const Count&) = default;
};

/// Records of a key range ordered by (key, seq). Appends are buffered and
/// sorted on demand.
class SortedRun {
  public:
    using Item = std::pair<Key, Seq>;

    SortedRun() = default;
    explicit SortedRun(std::vector<Item> items);

    void add(Key key, Seq seq);
    /// Sorted view of the run.
    const std::vector<Item>& items() const;
    std::size_t size() const { return items_.size(); }

    friend bool operator==(const SortedRun& a, const SortedRun& b) { return a.items() == b.items(); }

  private:
    mutable std::vector<Item> items_;
    mutable bool sorted_ = true;
};

using StateValue = std::variant<BuildList, Count, SortedRun>;

/// How two values for the same scope combine. None means merging
/// overlapping scopes is unsupported.
enum class Combiner : std::uint8_t { None, Append, Sum, SortedMerge };

/// Operator state as scope -> value with pairwise-disjoint scopes.
class KeyedState {
  public:
    KeyedState() = default;
    KeyedState(Mutability mutability, Combiner combiner) : mutability_(mutability), combiner_(combiner) {}

    Mutability mutability() const { return mutability_; }
    Combiner combiner() const { return combiner_; }

    bool empty() const { return entries_.empty(); }
    std::size_t size() const { return entries_.size(); }
    const std::map<Scope, StateValue>& entries() const { return entries_; }
    std::vector<Scope> scopes() const;

    /// Number of elementary state entries (build tuples, counters, sorted
    /// records). Drives the migration cost model.
    std::size_t entry_count() const;

    const StateValue* find(const Scope& scope) const;
    StateValue* find(const Scope& scope);
    /// Scope that contains `key`, if any.
    const Scope* scope_containing(Key key) const;

    /// Inserts a new scope. Throws if it overlaps an existing one.
    StateValue& insert(const Scope& scope, StateValue value);
    /// Existing value for exactly `scope`, or a new one initialised to `init`.
    StateValue& get_or_insert(const Scope& scope, StateValue init);
    void erase(const Scope& scope);

    friend bool operator==(const KeyedState&, const KeyedState&) = default;

  private:
    Mutability mutability_ = Mutability::Mutable;
    Combiner combiner_ = Combiner::None;
    std::map<Scope, StateValue> entries_;
};

/// Copies the listed scopes into a new fragment; the source is unchanged.
/// Every listed scope must exist in `state`.
KeyedState extract_state(const KeyedState& state, std::span<const Scope> scopes);

/// Adds `fragment` into `dst`. Scopes absent in `dst` are inserted; equal
/// scopes are combined with dst's combiner. Partial overlaps, or equal scopes
/// without a combiner, throw UnsupportedMergeError.
KeyedState merge_state(KeyedState dst, const KeyedState& fragment);

/// Combine two values of the same scope.
StateValue combine(Combiner combiner, const StateValue& a, const StateValue& b);

}  // namespace reshape
