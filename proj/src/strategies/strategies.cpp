#include "reshape/strategies.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>

namespace reshape {

StrategyKind parse_strategy(const std::string& name) {
    std::string n;
    for (char c : name) n += c == '_' ? '-' : static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (n == "none") return StrategyKind::None;
    if (n == "reshape-sbr" || n == "reshape" || n == "sbr") return StrategyKind::ReshapeSbr;
    if (n == "reshape-sbk" || n == "sbk") return StrategyKind::ReshapeSbk;
    if (n == "flux") return StrategyKind::Flux;
    if (n == "flowjoin" || n == "flow-join") return StrategyKind::FlowJoin;
    throw ConfigError("unknown strategy '" + name + "'");
}

std::string to_string(StrategyKind kind) {
    switch (kind) {
        case StrategyKind::None: return "none";
        case StrategyKind::ReshapeSbr: return "reshape-sbr";
        case StrategyKind::ReshapeSbk: return "reshape-sbk";
        case StrategyKind::Flux: return "flux";
        case StrategyKind::FlowJoin: return "flowjoin";
    }
    return "unknown";
}

double StrategyConfig::catch_up_slack() const { return delta >= 0.0 ? delta : std::max(10.0, tau / 10.0); }

void StrategyConfig::validate() const {
    if (!(tau > 0.0)) throw ConfigError("tau must be positive");
    if (!(eta > 0.0)) throw ConfigError("eta must be positive");
    if (dynamic_tau && !(epsilon_lo > 0.0 && epsilon_lo < epsilon_hi))
        throw ConfigError("epsilon range must satisfy 0 < lo < hi");
    if (!(tau_step > 0.0)) throw ConfigError("tau step must be positive");
    if (!(horizon > 0.0)) throw ConfigError("horizon must be positive");
    if (max_helpers < 1) throw ConfigError("max_helpers must be at least 1");
    if (!(share_window >= 1.0)) throw ConfigError("share_window must be at least 1");
    if (kind == StrategyKind::FlowJoin && flowjoin_detect_duration <= 0)
        throw ConfigError("flowjoin requires detect_duration > 0");
    if (!(flowjoin_heavy_factor > 0.0)) throw ConfigError("flowjoin heavy factor must be positive");
    if (!(estimate_noise >= 0.0)) throw ConfigError("estimate_noise must be non-negative");
}

std::vector<Key> flux_mitigate(std::span<const KeyLoad> skewed_keys, double helper_load) {
    double s = 0.0;
    for (const auto& k : skewed_keys) s += k.load;
    const double base_gap = std::abs(s - helper_load);

    if (skewed_keys.size() > 20) {
        auto moved = sbk_balance_keys(skewed_keys, helper_load);
        std::sort(moved.begin(), moved.end());
        return moved;
    }

    const std::size_t n = skewed_keys.size();
    std::uint32_t best_mask = 0;
    double best_gap = base_gap;
    for (std::uint32_t mask = 1; mask < (1u << n); ++mask) {
        double moved = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            if (mask & (1u << i)) moved += skewed_keys[i].load;
        const double gap = std::abs((s - moved) - (helper_load + moved));
        // Strict improvement; among equal gaps keep the smaller key set.
        if (gap < best_gap - 1e-12 ||
            (std::abs(gap - best_gap) <= 1e-12 && best_mask != 0 && std::popcount(mask) < std::popcount(best_mask))) {
            best_gap = gap;
            best_mask = mask;
        }
    }
    std::vector<Key> out;
    for (std::size_t i = 0; i < n; ++i)
        if (best_mask & (1u << i)) out.push_back(skewed_keys[i].key);
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<Key> flowjoin_heavy_hitters(const std::map<Key, std::uint64_t>& counts, double factor) {
    std::uint64_t total = 0;
    std::size_t observed = 0;
    for (const auto& [_, c] : counts) {
        total += c;
        if (c > 0) ++observed;
    }
    std::vector<Key> out;
    if (total == 0 || observed < 2) return out;
    const double fair = 1.0 / static_cast<double>(observed);
    for (const auto& [k, c] : counts)
        if (static_cast<double>(c) / static_cast<double>(total) > factor * fair) out.push_back(k);
    return out;
}

}  // namespace reshape
