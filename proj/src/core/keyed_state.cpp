#include "reshape/keyed_state.hpp"

#include <algorithm>
#include <iterator>
#include <limits>
#include <string>

namespace reshape {

SortedRun::SortedRun(std::vector<Item> items) : items_(std::move(items)), sorted_(false) {}

void SortedRun::add(Key key, Seq seq) {
    if (sorted_ && !items_.empty() && Item{key, seq} < items_.back()) sorted_ = false;
    items_.emplace_back(key, seq);
}

const std::vector<SortedRun::Item>& SortedRun::items() const {
    if (!sorted_) {
        std::sort(items_.begin(), items_.end());
        sorted_ = true;
    }
    return items_;
}

std::vector<Scope> KeyedState::scopes() const {
    std::vector<Scope> out;
    out.reserve(entries_.size());
    for (const auto& [scope, _] : entries_) out.push_back(scope);
    return out;
}

std::size_t KeyedState::entry_count() const {
    std::size_t n = 0;
    for (const auto& [_, value] : entries_) {
        n += std::visit(
            [](const auto& v) -> std::size_t {
                using T = std::decay_t<decltype(v)>;
                if constexpr (std::is_same_v<T, BuildList>)
                    return v.ids.size();
                else if constexpr (std::is_same_v<T, Count>)
                    return 1;
                else
                    return v.size();
            },
            value);
    }
    return n;
}

const StateValue* KeyedState::find(const Scope& scope) const {
    auto it = entries_.find(scope);
    return it == entries_.end() ? nullptr : &it->second;
}

StateValue* KeyedState::find(const Scope& scope) {
    auto it = entries_.find(scope);
    return it == entries_.end() ? nullptr : &it->second;
}

const Scope* KeyedState::scope_containing(Key key) const {
    auto it = entries_.upper_bound(Scope{key, std::numeric_limits<Key>::max()});
    if (it == entries_.begin()) return nullptr;
    --it;
    return it->first.contains(key) ? &it->first : nullptr;
}

namespace {

// Neighbour check is enough because scopes are disjoint and ordered by lo.
bool overlaps_any(const std::map<Scope, StateValue>& entries, const Scope& scope) {
    auto it = entries.lower_bound(Scope{scope.lo, std::numeric_limits<Key>::min()});
    if (it != entries.end() && it->first.overlaps(scope)) return true;
    if (it != entries.begin() && std::prev(it)->first.overlaps(scope)) return true;
    return false;
}

}  // namespace

StateValue& KeyedState::insert(const Scope& scope, StateValue value) {
    if (scope.lo > scope.hi) throw Error("scope with lo > hi");
    if (overlaps_any(entries_, scope))
        throw UnsupportedMergeError("scope [" + std::to_string(scope.lo) + "," + std::to_string(scope.hi) +
                                    "] overlaps an existing scope");
    return entries_.emplace(scope, std::move(value)).first->second;
}

StateValue& KeyedState::get_or_insert(const Scope& scope, StateValue init) {
    if (auto* v = find(scope)) return *v;
    return insert(scope, std::move(init));
}

void KeyedState::erase(const Scope& scope) { entries_.erase(scope); }

KeyedState extract_state(const KeyedState& state, std::span<const Scope> scopes) {
    KeyedState out(state.mutability(), state.combiner());
    for (const auto& scope : scopes) {
        const auto* v = state.find(scope);
        if (!v)
            throw Error("extract of scope [" + std::to_string(scope.lo) + "," + std::to_string(scope.hi) +
                        "] not present in state");
        if (!out.find(scope)) out.insert(scope, *v);
    }
    return out;
}

StateValue combine(Combiner combiner, const StateValue& a, const StateValue& b) {
    if (a.index() != b.index()) throw UnsupportedMergeError("cannot combine values of different kinds");
    switch (combiner) {
        case Combiner::Append: {
            const auto* x = std::get_if<BuildList>(&a);
            if (!x) break;
            const auto& y = std::get<BuildList>(b);
            BuildList out;
            out.ids.reserve(x->ids.size() + y.ids.size());
            std::merge(x->ids.begin(), x->ids.end(), y.ids.begin(), y.ids.end(), std::back_inserter(out.ids));
            return out;
        }
        case Combiner::Sum: {
            const auto* x = std::get_if<Count>(&a);
            if (!x) break;
            return Count{x->value + std::get<Count>(b).value};
        }
        case Combiner::SortedMerge: {
            const auto* x = std::get_if<SortedRun>(&a);
            if (!x) break;
            const auto& xs = x->items();
            const auto& ys = std::get<SortedRun>(b).items();
            std::vector<SortedRun::Item> merged;
            merged.reserve(xs.size() + ys.size());
            std::merge(xs.begin(), xs.end(), ys.begin(), ys.end(), std::back_inserter(merged));
            return SortedRun(std::move(merged));
        }
        case Combiner::None:
            break;
    }
    throw UnsupportedMergeError("no combiner registered for this state value");
}

KeyedState merge_state(KeyedState dst, const KeyedState& fragment) {
    for (const auto& [scope, value] : fragment.entries()) {
        if (auto* existing = dst.find(scope)) {
            *existing = combine(dst.combiner(), *existing, value);
        } else {
            dst.insert(scope, value);
        }
    }
    return dst;
}

}  // namespace reshape
