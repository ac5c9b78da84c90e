#include "reshape/estimation.hpp"

#include <cmath>
#include <numeric>

namespace reshape {

void WorkloadSample::add(Time time, std::vector<double> deltas) { rows_.push_back({time, std::move(deltas)}); }

WorkloadSample reset_window(Time now) { return WorkloadSample(now); }

double standard_error(std::span<const double> values) {
    const auto n = values.size();
    if (n < 2) throw Error("standard error needs at least two observations");
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(n);
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));
    return sd * std::sqrt(1.0 + 1.0 / static_cast<double>(n));
}

std::optional<Prediction> predict(const WorkloadSample& sample, WorkerId skewed, double horizon) {
    std::vector<const WorkloadSample::Row*> usable;
    for (const auto& row : sample.rows()) {
        const double total = std::accumulate(row.deltas.begin(), row.deltas.end(), 0.0);
        if (total > 0.0) usable.push_back(&row);
    }
    if (usable.size() < 2) return std::nullopt;

    const std::size_t workers = usable.front()->deltas.size();
    if (skewed < 0 || static_cast<std::size_t>(skewed) >= workers) throw Error("predict: skewed worker out of range");

    Prediction p;
    p.horizon = horizon;
    p.fractions.assign(workers, 0.0);
    std::vector<double> scaled;
    scaled.reserve(usable.size());
    for (const auto* row : usable) {
        const double total = std::accumulate(row->deltas.begin(), row->deltas.end(), 0.0);
        for (std::size_t w = 0; w < workers; ++w) p.fractions[w] += row->deltas[w] / total;
        scaled.push_back(row->deltas[static_cast<std::size_t>(skewed)] / total * horizon);
    }
    for (auto& f : p.fractions) f /= static_cast<double>(usable.size());
    p.epsilon = standard_error(scaled);
    return p;
}

double adjust_tau(double phi_s, double phi_h, double tau, double epsilon, double epsilon_lo, double epsilon_hi,
                  double step) {
    const double gap = phi_s - phi_h;
    if (gap >= tau && epsilon > epsilon_hi) return tau + step;
    if (gap < tau && epsilon < epsilon_lo) return gap;
    return tau;
}

}  // namespace reshape
