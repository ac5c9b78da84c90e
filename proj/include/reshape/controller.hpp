#pragma once

#include <optional>
#include <set>
#include <span>
#include <utility>
#include <vector>

#include "reshape/partition_logic.hpp"
#include "reshape/types.hpp"

namespace reshape {

/// Point-in-time copy of the operator's workload metrics.
struct MetricsSnapshot {
    Time time = 0;
    std::vector<double> queue;           // unprocessed records per worker
    std::vector<std::uint64_t> received;  // cumulative records received per worker
    std::vector<std::uint64_t> processed;
    std::vector<std::uint64_t> partition_input;  // cumulative records per base owner
    double processing_rate = 0.0;         // operator records per time unit
    std::uint64_t remaining = 0;          // records not yet processed by the operator
    std::uint64_t emitted = 0;            // records emitted upstream so far
    bool input_exhausted = false;
};

enum class Phase : std::uint8_t { Starting, First, Second, Done };

/// Controller-side record of one skewed worker's mitigation.
struct MitigationPlan {
    WorkerId skewed = kNoWorker;
    std::vector<WorkerId> helpers;
    Phase phase = Phase::Starting;
    std::vector<Share> shares;
    double tau_used = 0.0;
    int iteration = 0;
    Time window_start = 0;
};

/// Skew test: L is burdened and the gap to C is at least tau.
bool skew_test(double phi_l, double phi_c, double eta, double tau);

struct Candidate {
    WorkerId id = kNoWorker;
    double workload = 0.0;
};

/// Lowest-workload candidate not already helping another skewed worker;
/// ties go to the lower worker id.
std::optional<WorkerId> select_helper(std::span<const Candidate> candidates, const std::set<WorkerId>& assigned);

/// Inputs for choosing how many helpers to use.
struct HelperSetInput {
    double skewed_fraction = 0.0;                // predicted f_S
    std::vector<double> candidate_fractions;     // f of h1..hc, ordered by increasing workload
    std::vector<double> migration_time;          // M(k) for k = 1..c
    double future_tuples = 0.0;                  // L, records left for the operator
    double rate = 0.0;                           // t, operator records per time unit
    double total_tuples = 0.0;                   // T, total records of the operator
};

/// chi(k) = min(LR_max(k), F(k)) with
///   LR_max(k) = (f_S - mean(f_S, f_h1..f_hk)) * T
///   F(k)      = (L - M(k) * t) * f_S
double helper_set_chi(const HelperSetInput& in, std::size_t k);

/// Size of the helper prefix to use: grows while chi strictly increases.
/// Returns 0 when chi(1) <= 0.
std::size_t select_helper_set(const HelperSetInput& in);

/// Migration is worthwhile only if it finishes before the input runs out.
bool precondition(double migration_time, double time_left);
double estimated_time_left(double remaining_records, double rate);

/// Detection threshold that makes load transfer start at tau once migration
/// completes: tau - (f_S - f_H) * t * M. The result never drops below
/// min(floor_value, tau / 2) so the gap test stays positive.
double compute_tau_prime(double tau, double f_s, double f_h, double rate, double migration_time,
                         double floor_value);

/// First-phase shares: S's whole future input split evenly over the helpers.
std::vector<Share> first_phase_shares(std::span<const WorkerId> helpers);

/// Second-phase SBR shares equalising predicted loads.
///
/// Fractions are shares of the operator's total input; `window` is the
/// number of total-input records the share arithmetic is quantised to.
/// With one helper: d = round(f_S * W), n = floor((f_S - f_H) / 2 * W).
/// With several: each helper gets floor((mean - f_h) * W) units of d.
/// Returns an empty list when nothing should move.
std::vector<Share> second_phase_shares(double f_s, std::span<const WorkerId> helpers,
                                       std::span<const double> helper_fractions, double window);

struct KeyLoad {
    Key key = 0;
    double load = 0.0;
};

/// Greedy split-by-keys balancing: visit keys by decreasing load and move a
/// key to the helper whenever that shrinks |load_S - load_H|.
std::vector<Key> sbk_balance_keys(std::span<const KeyLoad> skewed_keys, double helper_load);

}  // namespace reshape
