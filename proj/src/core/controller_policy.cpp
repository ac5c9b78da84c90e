#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "reshape/controller.hpp"

namespace reshape {

bool skew_test(double phi_l, double phi_c, double eta, double tau) { return phi_l >= eta && phi_l - phi_c >= tau; }

std::optional<WorkerId> select_helper(std::span<const Candidate> candidates, const std::set<WorkerId>& assigned) {
    std::optional<Candidate> best;
    for (const auto& c : candidates) {
        if (assigned.count(c.id)) continue;
        if (!best || c.workload < best->workload || (c.workload == best->workload && c.id < best->id)) best = c;
    }
    if (!best) return std::nullopt;
    return best->id;
}

double helper_set_chi(const HelperSetInput& in, std::size_t k) {
    if (k == 0 || k > in.candidate_fractions.size() || k > in.migration_time.size())
        throw ConfigError("helper_set_chi: k out of range");
    double sum = in.skewed_fraction;
    for (std::size_t i = 0; i < k; ++i) sum += in.candidate_fractions[i];
    const double avg = sum / static_cast<double>(k + 1);
    const double lr_max = (in.skewed_fraction - avg) * in.total_tuples;
    const double future = (in.future_tuples - in.migration_time[k - 1] * in.rate) * in.skewed_fraction;
    return std::min(lr_max, future);
}

std::size_t select_helper_set(const HelperSetInput& in) {
    const std::size_t c = std::min(in.candidate_fractions.size(), in.migration_time.size());
    if (c == 0) return 0;
    double best = helper_set_chi(in, 1);
    if (best <= 0.0) return 0;
    std::size_t k = 1;
    while (k < c) {
        const double next = helper_set_chi(in, k + 1);
        if (!(next > best)) break;
        best = next;
        ++k;
    }
    return k;
}

bool precondition(double migration_time, double time_left) { return migration_time < time_left; }

double estimated_time_left(double remaining_records, double rate) {
    if (rate <= 0.0) return std::numeric_limits<double>::infinity();
    return remaining_records / rate;
}

double compute_tau_prime(double tau, double f_s, double f_h, double rate, double migration_time,
                         double floor_value) {
    const double raw = tau - (f_s - f_h) * rate * migration_time;
    if (raw >= tau) return tau;
    const double lower = std::min(floor_value, tau / 2.0);
    return std::max(raw, lower);
}

std::vector<Share> first_phase_shares(std::span<const WorkerId> helpers) {
    std::vector<Share> out;
    const auto k = static_cast<std::uint32_t>(helpers.size());
    for (WorkerId h : helpers) out.push_back({h, 1, k});
    return out;
}

std::vector<Share> second_phase_shares(double f_s, std::span<const WorkerId> helpers,
                                       std::span<const double> helper_fractions, double window) {
    if (helpers.empty() || helpers.size() != helper_fractions.size()) return {};
    const auto d = static_cast<std::int64_t>(std::llround(f_s * window));
    if (d <= 0) return {};

    std::vector<std::int64_t> n(helpers.size(), 0);
    if (helpers.size() == 1) {
        n[0] = static_cast<std::int64_t>(std::floor((f_s - helper_fractions[0]) / 2.0 * window + 1e-9));
    } else {
        const double mean =
            (f_s + std::accumulate(helper_fractions.begin(), helper_fractions.end(), 0.0)) /
            static_cast<double>(helpers.size() + 1);
        for (std::size_t i = 0; i < helpers.size(); ++i)
            n[i] = static_cast<std::int64_t>(std::floor(std::max(0.0, (mean - helper_fractions[i]) * window) + 1e-9));
    }

    std::vector<Share> out;
    std::int64_t left = d;
    for (std::size_t i = 0; i < helpers.size(); ++i) {
        const auto give = std::clamp<std::int64_t>(n[i], 0, left);
        left -= give;
        out.push_back({helpers[i], static_cast<std::uint32_t>(give), static_cast<std::uint32_t>(d)});
    }
    const bool any = std::any_of(out.begin(), out.end(), [](const Share& s) { return s.numerator > 0; });
    if (!any) return {};
    return out;
}

std::vector<Key> sbk_balance_keys(std::span<const KeyLoad> skewed_keys, double helper_load) {
    std::vector<KeyLoad> keys(skewed_keys.begin(), skewed_keys.end());
    std::stable_sort(keys.begin(), keys.end(), [](const KeyLoad& a, const KeyLoad& b) {
        return a.load > b.load || (a.load == b.load && a.key < b.key);
    });
    double s = 0.0;
    for (const auto& k : keys) s += k.load;
    double h = helper_load;
    std::vector<Key> moved;
    for (const auto& k : keys) {
        if (std::abs((s - k.load) - (h + k.load)) < std::abs(s - h)) {
            s -= k.load;
            h += k.load;
            moved.push_back(k.key);
        }
    }
    return moved;
}

}  // namespace reshape
