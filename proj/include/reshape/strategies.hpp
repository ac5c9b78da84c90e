#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "reshape/controller.hpp"
#include "reshape/types.hpp"

namespace reshape {

enum class StrategyKind : std::uint8_t { None, ReshapeSbr, ReshapeSbk, Flux, FlowJoin };

StrategyKind parse_strategy(const std::string& name);
std::string to_string(StrategyKind kind);

struct StrategyConfig {
    StrategyKind kind = StrategyKind::None;
    double tau = 100.0;
    double eta = 100.0;
    bool dynamic_tau = false;
    double epsilon_lo = 98.0;
    double epsilon_hi = 110.0;
    double tau_step = 50.0;
    int max_tau_adjustments = 3;
    double horizon = 2000.0;      // records the estimator's error is quoted for
    double delta = -1.0;          // catch-up slack; negative means max(10, tau / 10)
    bool first_phase = true;
    bool first_phase_partial = false;  // redirect only S's heaviest key in phase one
    int max_helpers = 1;
    double share_window = 100.0;
    Time flowjoin_detect_duration = 0;
    double flowjoin_heavy_factor = 2.0;
    /// Injected estimation error for analysis runs. With n sample rows the
    /// second phase moves only (1 - min(1, c / sqrt(n))) of the computed
    /// share. 0 disables it.
    double estimate_noise = 0.0;

    double catch_up_slack() const;
    bool reshape() const { return kind == StrategyKind::ReshapeSbr || kind == StrategyKind::ReshapeSbk; }
    /// Throws ConfigError for non-positive parameters.
    void validate() const;
};

/// Flux-style whole-key rebalance. Picks the subset of S's keys minimising
/// |load_S - load_H| after the move. Exact for up to 20 keys, greedy beyond.
/// Returns no keys when no subset improves the gap.
std::vector<Key> flux_mitigate(std::span<const KeyLoad> skewed_keys, double helper_load);

/// Flow-Join-style heavy-hitter detection: keys whose observed share exceeds
/// `factor` times the fair share 1 / (number of observed keys).
std::vector<Key> flowjoin_heavy_hitters(const std::map<Key, std::uint64_t>& counts, double factor);

}  // namespace reshape
