// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "reshape/controller.hpp"
#include "scenarios.hpp"

using namespace scenarios;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

// --- oracles -----------------------------------------------------------------

std::vector<JoinTuple> join_oracle(const std::vector<Key>& build_keys, int per_key, const std::vector<Record>& probe) {
    std::vector<std::pair<Key, std::uint64_t>> build;
    std::uint64_t id = 0;
    for (Key k : build_keys)
        for (int i = 0; i < per_key; ++i) build.emplace_back(k, id++);
    std::vector<JoinTuple> out;
    for (const auto& r : probe)
        for (const auto& [k, b] : build)
            if (k == r.key) out.push_back({r.key, r.seq, b});
    std::sort(out.begin(), out.end());
    return out;
}

std::map<Key, std::uint64_t> count_oracle(const std::vector<Record>& probe) {
    std::map<Key, std::uint64_t> out;
    for (const auto& r : probe) ++out[r.key];
    return out;
}

std::vector<std::pair<Key, Seq>> sort_oracle(const std::vector<Record>& probe) {
    std::vector<std::pair<Key, Seq>> out;
    for (const auto& r : probe) out.emplace_back(r.key, r.seq);
    std::sort(out.begin(), out.end());
    return out;
}

// --- criteria ----------------------------------------------------------------

Outcome running_example_equalization() {
    const auto run = running_example(StrategyKind::ReshapeSbr);
    const auto r = run.execute();
    std::string share;
    Time second = -1;
    for (const auto& e : r.log) {
        if (e.event != "second-phase") continue;
        second = e.time;
        const auto at = e.detail.find("shares ");
        share = e.detail.substr(at + 7, e.detail.find(' ', at + 7) - at - 7);
        break;
    }
    // Per-tick received units on J4 and J6 once the second phase is in force.
    bool exact = second >= 0;
    int rows = 0;
    for (std::size_t i = 1; i < r.timeline.size(); ++i) {
        const auto& a = r.timeline[i - 1];
        const auto& b = r.timeline[i];
        if (a.time < second + run.engine.metric_period || b.input_exhausted) continue;
        const auto dt = static_cast<std::uint64_t>(b.time - a.time);
        exact &= b.received[4] - a.received[4] == 16 * dt && b.received[6] - a.received[6] == 17 * dt;
        ++rows;
    }
    const auto none = running_example(StrategyKind::None).execute();
    const bool base = none.received[6] * 7 == none.received[4] * 26;
    return {share == "4:9/26" && exact && rows > 10 && base,
            fmt::format("unmitigated J6:J4 = {}:{}, second-phase share {}, J4:J6 per tick 16:17 over {} snapshots: {}",
                        none.received[6], none.received[4], share, rows, exact ? "exact" : "mismatch")};
}

Outcome load_reduction_conservation() {
    const auto base = conservation_instance(StrategyKind::None).execute();
    const auto mit = conservation_instance(StrategyKind::ReshapeSbr).execute();
    const std::vector<WorkerId> helpers{1};
    const double lr = load_reduction(base, mit, 0, helpers);
    const double d_half = (static_cast<double>(base.received[0]) - static_cast<double>(base.received[1])) / 2.0;
    const double window = std::round(5.0 / 6.0 * conservation_instance(StrategyKind::None).strategy.share_window);
    return {base.received[0] == 1000 && base.received[1] == 200 && std::abs(lr - d_half) <= window,
            fmt::format("totals 1000/200, D/2 = {}, measured LR = {} (tolerance d = {})", d_half, lr, window)};
}

Outcome correctness_oracles() {
    const StrategyKind kinds[] = {StrategyKind::None, StrategyKind::ReshapeSbr, StrategyKind::ReshapeSbk,
                                  StrategyKind::Flux, StrategyKind::FlowJoin};
    const OperatorKind ops[] = {OperatorKind::Join, OperatorKind::GroupBy, OperatorKind::Sort};
    int runs = 0, failures = 0, mitigated = 0;
    std::string first_failure;
    for (auto op : ops) {
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            GeneratorSpec g;
            g.kind = GeneratorKind::Zipf;
            g.mode = SamplingMode::Multinomial;
            g.key_count = 64;
            g.total = 10000 + 2500 * seed;
            g.zipf_exponent = 1.1;
            g.seed = seed;
            const auto input = generate(g);
            WorkflowSpec wf;
            wf.op = op;
            wf.workers = 6;
            wf.source_rate = 40;
            wf.service_rates.assign(6, 9.0);
            wf.partitioner = op == OperatorKind::Sort ? BasePartitioner::equal_ranges(6, 64) : BasePartitioner::hash(6);
            for (Key k = 0; k < 64; k += (k % 7 == 3 ? 2 : 1)) wf.build_keys.push_back(k);
            wf.build_tuples_per_key = 1 + static_cast<int>(seed % 3);

            const auto joins = op == OperatorKind::Join ? join_oracle(wf.build_keys, wf.build_tuples_per_key, input)
                                                        : std::vector<JoinTuple>{};
            const auto counts = count_oracle(input);
            const auto sorted = sort_oracle(input);

            for (auto kind : kinds) {
                StrategyConfig s;
                s.kind = kind;
                s.tau = 60;
                s.eta = 60;
                s.flowjoin_detect_duration = 30;
                EngineConfig e;
                e.metric_period = 5;
                e.migration = seed % 2 == 0 ? MigrationMode::PauseResume : MigrationMode::Markers;
                const auto r = run_workflow(wf, input, s, e);
                ++runs;
                if (r.logic_changes > 0) ++mitigated;
                bool ok = std::accumulate(r.received.begin(), r.received.end(), std::uint64_t{0}) == input.size();
                if (op == OperatorKind::Join) ok &= r.join_output == joins;
                if (op == OperatorKind::GroupBy) ok &= r.group_output == counts;
                if (op == OperatorKind::Sort) ok &= r.sort_output == sorted;
                if (!ok) {
                    ++failures;
                    if (first_failure.empty())
                        first_failure = fmt::format(" first failure: {} {} seed {}", to_string(op), to_string(kind), seed);
                }
            }
        }
    }
    return {failures == 0 && mitigated > runs / 2,
            fmt::format("{} runs (5 strategies x 3 operators x 5 seeds), {} with logic changes, {} mismatches{}", runs,
                        mitigated, failures, first_failure)};
}

Outcome sbk_order_preservation() {
    std::mt19937_64 rng(2024);
    std::set<Time> switch_points;
    int clean = 0, switched = 0;
    for (int i = 0; i < 100; ++i) {
        GeneratorSpec g;
        g.kind = GeneratorKind::Zipf;
        g.mode = SamplingMode::Multinomial;
        g.key_count = 24;
        g.total = 6000;
        g.zipf_exponent = std::uniform_real_distribution<double>(0.8, 1.6)(rng);
        g.seed = rng();
        WorkflowSpec wf;
        wf.op = OperatorKind::Join;
        wf.workers = 4;
        wf.upstream_workers = 1 + static_cast<int>(rng() % 3);
        wf.source_rate = std::uniform_real_distribution<double>(15, 40)(rng);
        wf.service_rates.assign(4, std::uniform_real_distribution<double>(4, 9)(rng));
        wf.partitioner = BasePartitioner::hash(4);
        for (Key k = 0; k < 24; ++k) wf.build_keys.push_back(k);
        StrategyConfig s;
        s.kind = StrategyKind::ReshapeSbk;
        s.tau = std::uniform_real_distribution<double>(20, 300)(rng);
        s.eta = s.tau;
        EngineConfig e;
        e.metric_period = 1 + static_cast<Time>(rng() % 10);
        e.initial_delay = static_cast<Time>(rng() % 40);
        const auto r = run_workflow(wf, generate(g), s, e);
        for (const auto& ev : r.log)
            if (ev.event == "first-phase" || ev.event == "second-phase") {
                switch_points.insert(ev.time);
                ++switched;
                break;
            }
        if (r.order_inversions == 0) ++clean;
    }
    // Contrast: the same kind of workload under split-by-records.
    const auto sbr = heavy_hitter_pair(StrategyKind::ReshapeSbr).execute();
    return {clean == 100 && switched >= 90 && switch_points.size() >= 20 && sbr.order_inversions > 0,
            fmt::format("{} of 100 SBK runs with monotone per-key seq ({} mitigated, {} distinct switch times); "
                        "SBR run shows {} inversions",
                        clean, switched, switch_points.size(), sbr.order_inversions)};
}

Outcome representativeness() {
    const auto none = heavy_hitter_pair(StrategyKind::None).execute();
    const auto with = heavy_hitter_pair(StrategyKind::ReshapeSbr).execute();
    const auto no_first = heavy_hitter_pair(StrategyKind::ReshapeSbr, false).execute();
    const double total = 40000;

    Time drain = -1;
    for (const auto& p : none.timeline)
        if (p.input_exhausted && p.queue[1] == 0) {
            drain = p.time;
            break;
        }
    double min_before_drain = 1e9;
    for (const auto& p : observed_ratio_series(none, 4.0))
        if (p.abs_diff && p.time < drain) min_before_drain = std::min(min_before_drain, *p.abs_diff);

    const auto a = first_in_band(with, 4.0, 0.4);
    const auto b = first_in_band(no_first, 4.0, 0.4);
    const double frac = a ? static_cast<double>(processed_at(with, *a)) / total : 1.0;
    return {drain > 0 && min_before_drain >= 2.5 && a && frac < 0.5 && b && *b > *a,
            fmt::format("unmitigated min |diff| before light worker drains (t={}) = {:.2f}; reshape within 0.4 at t={} "
                        "({:.1f}% processed); without first phase at t={}",
                        drain, min_before_drain, a ? *a : -1, 100 * frac, b ? *b : -1)};
}

Outcome dynamic_tau() {
    int fixed_it = 0, dyn_it = 0;
    bool better = true;
    std::string per;
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        const auto f = noisy_pair(false, seed).execute();
        const auto d = noisy_pair(true, seed).execute();
        fixed_it += f.iterations;
        dyn_it += d.iterations;
        const double bf = average_balancing_ratio(f, {0, 1}) / std::max(1, f.iterations);
        const double bd = average_balancing_ratio(d, {0, 1}) / std::max(1, d.iterations);
        better &= bd > bf && 2 * d.iterations <= f.iterations;
        per += fmt::format(" seed {}: {} vs {};", seed, f.iterations, d.iterations);
    }
    return {better, fmt::format("iterations fixed vs dynamic:{} balancing per iteration higher with dynamic: {}", per,
                                better ? "yes" : "no")};
}

Outcome changing_distribution_ratios() {
    const auto reshape = changing_distribution(StrategyKind::ReshapeSbr).execute();
    const auto flowjoin = changing_distribution(StrategyKind::FlowJoin).execute();
    const auto flux = changing_distribution(StrategyKind::Flux).execute();
    const double rr = final_workload_ratio(reshape, 0, 10);
    const double rf = final_workload_ratio(flowjoin, 0, 10);
    const double rx = final_workload_ratio(flux, 0, 10);
    return {rr >= 0.8 && rr <= 1.25 && rf > 1.25 && rx <= 0.1,
            fmt::format("helper/skewed workload: reshape {:.3f}, flowjoin {:.3f}, flux {:.3f}", rr, rf, rx)};
}

std::size_t brute_force_prefix(const HelperSetInput& in) {
    std::size_t best = 0;
    double best_chi = 0.0;
    for (std::size_t k = 1; k <= in.candidate_fractions.size(); ++k) {
        double mean = in.skewed_fraction;
        for (std::size_t i = 0; i < k; ++i) mean += in.candidate_fractions[i];
        mean /= static_cast<double>(k + 1);
        const double lr = (in.skewed_fraction - mean) * in.total_tuples;
        const double f = (in.future_tuples - in.migration_time[k - 1] * in.rate) * in.skewed_fraction;
        const double chi = std::min(lr, f);
        if (chi > best_chi) {
            best_chi = chi;
            best = k;
        }
    }
    return best;
}

Outcome multi_helper_selection() {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int agree = 0;
    for (int i = 0; i < 1000; ++i) {
        HelperSetInput in;
        const auto c = 1 + rng() % 8;
        in.skewed_fraction = 0.2 + 0.6 * u(rng);
        for (std::size_t k = 0; k < c; ++k) in.candidate_fractions.push_back(u(rng) * in.skewed_fraction);
        // Candidates come ordered by increasing workload.
        std::sort(in.candidate_fractions.begin(), in.candidate_fractions.end());
        const double per_helper = 50.0 * u(rng);
        for (std::size_t k = 1; k <= c; ++k) in.migration_time.push_back(per_helper * static_cast<double>(k));
        in.total_tuples = 1000 + 99000 * u(rng);
        in.future_tuples = in.total_tuples * u(rng);
        in.rate = 1 + 99 * u(rng);
        if (select_helper_set(in) == brute_force_prefix(in)) ++agree;
    }
    HelperSetInput fig;
    fig.skewed_fraction = 0.5;
    fig.candidate_fractions = {0.1, 0.1, 0.1};
    fig.migration_time = {25, 50, 75};
    fig.future_tuples = 1000;
    fig.rate = 10;
    fig.total_tuples = 1000;
    const auto k = select_helper_set(fig);
    return {agree == 1000 && k == 2,
            fmt::format("{} of 1000 random instances match the brute-force prefix; worked instance picks {} helpers",
                        agree, k)};
}

Outcome tau_prime_and_precondition() {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int violations = 0;
    for (int i = 0; i < 20000; ++i) {
        const double tau = 10 + 2000 * u(rng);
        const double eta = 10 + 500 * u(rng);
        const double fh = 0.5 * u(rng);
        double fs = fh + (1 - fh) * u(rng);
        double m = 20 * u(rng);
        if (i % 5 == 0) m = 0;
        if (i % 7 == 0) fs = fh;
        const double rate = 1 + 200 * u(rng);
        const double tp = compute_tau_prime(tau, fs, fh, rate, m, eta);
        const bool equal_expected = m == 0 || fs == fh;
        if (tp > tau || (tp == tau) != equal_expected || tp <= 0) ++violations;

        const double remaining = 1e5 * u(rng);
        const double left = estimated_time_left(remaining, rate);
        if (precondition(m, left) != (m < left)) ++violations;
    }
    // Engine level: a migration that cannot finish in time never starts.
    const auto run = [](double beta) {
        GeneratorSpec g;
        g.kind = GeneratorKind::FixedWeights;
        g.mode = SamplingMode::Exact;
        g.key_count = 2;
        g.total = 4000;
        g.weights = {{0, 0.8}, {1, 0.2}};
        WorkflowSpec wf;
        wf.op = OperatorKind::Join;
        wf.workers = 2;
        wf.source_rate = 40;
        wf.service_rates = {10, 10};
        wf.build_keys = {0, 1};
        wf.build_tuples_per_key = 100;
        StrategyConfig s;
        s.kind = StrategyKind::ReshapeSbr;
        EngineConfig e;
        e.beta = beta;
        e.initial_delay = 30;
        return run_workflow(wf, generate(g), s, e);
    };
    const auto blocked = run(10.0);  // M = 1000, beyond the remaining run
    const auto allowed = run(0.01);  // M = 1
    return {violations == 0 && blocked.iterations == 0 && blocked.precondition_skips > 0 && allowed.iterations > 0,
            fmt::format("{} property violations over 20000 cases; expensive migration: {} iterations, {} skips; "
                        "cheap migration: {} iterations",
                        violations, blocked.iterations, blocked.precondition_skips, allowed.iterations)};
}

}  // namespace

int main() {
    spdlog::set_level(spdlog::level::warn);
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
        {"running-example equalization", running_example_equalization},
        {"load-reduction conservation", load_reduction_conservation},
        {"correctness oracles", correctness_oracles},
        {"split-by-keys order preservation", sbk_order_preservation},
        {"representativeness", representativeness},
        {"dynamic threshold", dynamic_tau},
        {"changing distribution", changing_distribution_ratios},
        {"multi-helper selection", multi_helper_selection},
        {"threshold offset and precondition", tau_prime_and_precondition},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        fmt::print("criterion {} {}: {} ({}; {:.1f}s)\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].first,
                   o.detail, secs);
        if (!o.pass) ++failed;
    }
    fmt::print("criterion 10 NOT REPRODUCIBLE: absolute execution-time reductions, metric-collection overhead, "
               "100-200 GB datasets and Flink integration need a cluster; the property checks above stand in.\n");
    return failed == 0 ? 0 : 1;
}
