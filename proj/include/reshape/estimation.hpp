#pragma once

#include <optional>
#include <span>
#include <vector>

#include "reshape/types.hpp"

namespace reshape {

/// Per-snapshot workload deltas collected since the last balance point.
///
/// Each row holds, per worker, how many records of that worker's base
/// partition arrived during one metric period (counted at the partitioner, so
/// redirections do not distort the workers' natural shares).
class WorkloadSample {
  public:
    struct Row {
        Time time = 0;
        std::vector<double> deltas;
    };

    WorkloadSample() = default;
    explicit WorkloadSample(Time window_start) : window_start_(window_start) {}

    Time window_start() const { return window_start_; }
    std::size_t n() const { return rows_.size(); }
    const std::vector<Row>& rows() const { return rows_; }

    void add(Time time, std::vector<double> deltas);

  private:
    Time window_start_ = 0;
    std::vector<Row> rows_;
};

/// Discards the collected rows and starts a new window at `now`.
WorkloadSample reset_window(Time now);

struct Prediction {
    std::vector<double> fractions;  // predicted share of future input per worker
    double epsilon = 0.0;           // standard error, in records per horizon
    double horizon = 0.0;           // records

    double expected(WorkerId w) const { return fractions.at(static_cast<std::size_t>(w)) * horizon; }
};

/// Mean-model standard error: d * sqrt(1 + 1/n), d the sample (n-1)
/// standard deviation of `values`. Requires at least two values.
double standard_error(std::span<const double> values);

/// Mean-model prediction. Each worker's fraction is the mean of its
/// per-row share; epsilon comes from the skewed worker's per-row share scaled
/// to `horizon` records. Returns nullopt when fewer than two usable rows exist.
std::optional<Prediction> predict(const WorkloadSample& sample, WorkerId skewed, double horizon);

/// One step of the dynamic threshold rule.
///
///   gap >= tau and eps > eps_hi  -> tau + step (mitigation still starts now)
///   gap <  tau and eps < eps_lo  -> gap        (start mitigation now)
///   otherwise                    -> tau
double adjust_tau(double phi_s, double phi_h, double tau, double epsilon, double epsilon_lo, double epsilon_hi,
                  double step = 50.0);

}  // namespace reshape
