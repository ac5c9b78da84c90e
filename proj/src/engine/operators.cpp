#include "reshape/operators.hpp"

#include <algorithm>

namespace reshape {

OperatorKind parse_operator(const std::string& name) {
    if (name == "join") return OperatorKind::Join;
    if (name == "groupby" || name == "group-by") return OperatorKind::GroupBy;
    if (name == "sort") return OperatorKind::Sort;
    throw ConfigError("unknown workflow '" + name + "' (expected join, groupby or sort)");
}

std::string to_string(OperatorKind kind) {
    switch (kind) {
        case OperatorKind::Join: return "join";
        case OperatorKind::GroupBy: return "groupby";
        case OperatorKind::Sort: return "sort";
    }
    return "unknown";
}

OperatorTraits traits_of(OperatorKind kind) {
    switch (kind) {
        case OperatorKind::Join: return {kind, Mutability::Immutable, false, Combiner::Append, true};
        case OperatorKind::GroupBy: return {kind, Mutability::Mutable, true, Combiner::Sum, true};
        case OperatorKind::Sort: return {kind, Mutability::Mutable, true, Combiner::SortedMerge, false};
    }
    throw ConfigError("unknown operator kind");
}

void validate_transfer(const OperatorTraits& traits, Transfer transfer) {
    if (traits.mutability == Mutability::Immutable) return;
    const bool can_scatter = traits.blocking && traits.combiner != Combiner::None;
    if (transfer == Transfer::SplitByRecords && !can_scatter)
        throw ConfigError(to_string(traits.kind) +
                          ": split-by-records on a mutable state needs a blocking operator with a combiner");
    if (transfer == Transfer::SplitByKeys && !traits.keyed_handoff && !can_scatter)
        throw ConfigError(to_string(traits.kind) + ": split-by-keys unsupported for this operator");
}

void Operator::build(const Record&, std::uint64_t) {
    throw ConfigError(to_string(traits_.kind) + " has no build input");
}

namespace {

class HashJoin final : public Operator {
  public:
    HashJoin() : Operator(traits_of(OperatorKind::Join)) {}

    void build(const Record& record, std::uint64_t build_id) override {
        auto& v = state().get_or_insert(Scope::key(record.key), BuildList{});
        auto& ids = std::get<BuildList>(v).ids;
        ids.insert(std::upper_bound(ids.begin(), ids.end(), build_id), build_id);
    }

    void process(WorkerId self, const Record& record, Emitter& out) override {
        const auto* v = state().find(Scope::key(record.key));
        if (!v) return;
        for (auto id : std::get<BuildList>(*v).ids) out.join_match(self, record.key, record.seq, id);
    }

    void finalize(WorkerId, Emitter&) override {}
};

class GroupByCount final : public Operator {
  public:
    GroupByCount() : Operator(traits_of(OperatorKind::GroupBy)) {}

    void process(WorkerId, const Record& record, Emitter&) override {
        auto& v = state().get_or_insert(Scope::key(record.key), Count{});
        ++std::get<Count>(v).value;
    }

    void finalize(WorkerId self, Emitter& out) override {
        for (const auto& [scope, v] : state().entries()) out.group_result(self, scope.lo, std::get<Count>(v).value);
    }
};

class RangeSort final : public Operator {
  public:
    explicit RangeSort(BasePartitioner base) : Operator(traits_of(OperatorKind::Sort)), base_(std::move(base)) {}

    Scope scope_for(Key key) const override {
        const auto r = base_.scope_of(key);
        return {r.lo, r.hi};
    }

    void process(WorkerId, const Record& record, Emitter&) override {
        auto& v = state().get_or_insert(scope_for(record.key), SortedRun{});
        std::get<SortedRun>(v).add(record.key, record.seq);
    }

    void finalize(WorkerId self, Emitter& out) override {
        for (const auto& [scope, v] : state().entries()) out.sorted_run(self, scope, std::get<SortedRun>(v));
    }

  private:
    BasePartitioner base_;
};

}  // namespace

std::unique_ptr<Operator> make_operator(OperatorKind kind, const BasePartitioner& base) {
    switch (kind) {
        case OperatorKind::Join: return std::make_unique<HashJoin>();
        case OperatorKind::GroupBy: return std::make_unique<GroupByCount>();
        case OperatorKind::Sort:
            if (base.kind() != BasePartitioner::Kind::Range) throw ConfigError("sort needs a range partitioner");
            return std::make_unique<RangeSort>(base);
    }
    throw ConfigError("unknown operator kind");
}

}  // namespace reshape
