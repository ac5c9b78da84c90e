#include "controller_actor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

namespace reshape::detail {

namespace {

std::string describe(const std::vector<Share>& shares) {
    if (shares.empty()) return "none";
    std::string out;
    for (const auto& s : shares) {
        if (!out.empty()) out += ' ';
        out += fmt::format("{}:{}/{}", s.worker, s.numerator, s.denominator);
    }
    return out;
}

std::string describe(const std::vector<Key>& keys) {
    std::string out = "{";
    for (std::size_t i = 0; i < keys.size(); ++i) out += (i ? "," : "") + std::to_string(keys[i]);
    return out + "}";
}

}  // namespace

ControllerActor::ControllerActor(ControllerParams params, PartitionLogic initial, ControlMailbox& inbox,
                                 Transport& transport, MetricsBoard& board, Sink& sink)
    : p_(std::move(params)),
      logic_(std::move(initial)),
      inbox_(inbox),
      transport_(transport),
      board_(board),
      sink_(sink),
      tau_(p_.strategy.tau),
      last_input_(static_cast<std::size_t>(p_.workers), 0) {}

bool ControllerActor::waiting() const {
    return std::any_of(plans_.begin(), plans_.end(), [](const Plan& p) { return p.change.has_value(); });
}

MetricsSnapshot ControllerActor::snapshot(Time now) {
    MetricsSnapshot s;
    s.time = now;
    const auto n = static_cast<std::size_t>(p_.workers);
    s.queue.resize(n);
    s.received.resize(n);
    s.processed.resize(n);
    s.partition_input.resize(n);
    std::uint64_t processed = 0;
    for (std::size_t w = 0; w < n; ++w) {
        s.queue[w] = static_cast<double>(std::max<std::int64_t>(0, board_.queue[w].load()));
        s.received[w] = board_.received[w].load();
        s.processed[w] = board_.processed[w].load();
        s.partition_input[w] = board_.partition_input[w].load();
        processed += s.processed[w];
    }
    s.processing_rate = p_.total_rate;
    s.remaining = p_.total_records > processed ? p_.total_records - processed : 0;
    s.emitted = board_.emitted.load();
    s.input_exhausted = board_.upstreams_ended.load() == p_.upstreams;
    return s;
}

std::vector<double> ControllerActor::live_queue() const {
    std::vector<double> q(static_cast<std::size_t>(p_.workers));
    for (std::size_t w = 0; w < q.size(); ++w)
        q[w] = static_cast<double>(std::max<std::int64_t>(0, board_.queue[w].load()));
    return q;
}

void ControllerActor::step(Time now) {
    drain_inbox(now);
    check_timeouts(now);

    if (now % p_.engine.metric_period == 0) {
        const auto s = snapshot(now);
        std::vector<double> deltas(s.partition_input.size());
        for (std::size_t w = 0; w < deltas.size(); ++w) {
            deltas[w] = static_cast<double>(s.partition_input[w] - last_input_[w]);
            last_input_[w] = s.partition_input[w];
        }
        global_sample_.add(now, deltas);
        for (auto& plan : plans_) plan.sample.add(now, deltas);

        TimelinePoint pt;
        pt.time = now;
        for (double q : s.queue) pt.queue.push_back(static_cast<std::uint64_t>(q));
        pt.received = s.received;
        pt.processed = s.processed;
        pt.observed_processed = sink_.observed_counts();
        pt.emitted = s.emitted;
        pt.iterations = iterations_;
        pt.tau = tau_;
        pt.input_exhausted = s.input_exhausted;
        timeline_.push_back(std::move(pt));

        if (!sealed_ && !s.input_exhausted && now >= p_.engine.initial_delay) {
            switch (p_.strategy.kind) {
                case StrategyKind::ReshapeSbr:
                case StrategyKind::ReshapeSbk: decide_reshape(s, now); break;
                case StrategyKind::Flux: decide_flux(s, now); break;
                case StrategyKind::FlowJoin: decide_flowjoin(s, now); break;
                case StrategyKind::None: break;
            }
        }
    }

    if (!sealed_ && p_.engine.phase_poll_period > 0 && now % p_.engine.phase_poll_period == 0 &&
        board_.upstreams_ended.load() < p_.upstreams)
        poll_phases(now);

    if (!sealed_ && board_.upstreams_ended.load() == p_.upstreams && !waiting()) {
        for (auto& plan : plans_) {
            if (plan.m.phase != Phase::Done) {
                plan.m.phase = Phase::Done;
                log(now, &plan, "done", "input exhausted");
            }
        }
        for (WorkerId w = 0; w < p_.workers; ++w) transport_.to_worker(w, Seal{}, now);
        sealed_ = true;
    }
}

void ControllerActor::final_snapshot(Time now) {
    const auto s = snapshot(now);
    TimelinePoint pt;
    pt.time = now;
    for (double q : s.queue) pt.queue.push_back(static_cast<std::uint64_t>(q));
    pt.received = s.received;
    pt.processed = s.processed;
    pt.observed_processed = sink_.observed_counts();
    pt.emitted = s.emitted;
    pt.iterations = iterations_;
    pt.tau = tau_;
    pt.input_exhausted = true;
    if (timeline_.empty() || timeline_.back().time != now) timeline_.push_back(std::move(pt));
}

// ---------------------------------------------------------------------------
// inbox

void ControllerActor::drain_inbox(Time now) {
    while (auto body = inbox_.pop_ready(now)) {
        if (auto* ack = std::get_if<StateAck>(&*body)) {
            auto it = ack_owner_.find(ack->id);
            if (it == ack_owner_.end()) {
                spdlog::debug("t={} controller: ack {} from worker {} for an abandoned transfer", now, ack->id,
                              ack->from);
                continue;
            }
            Plan& plan = *it->second;
            ack_owner_.erase(it);
            plan.change->acks.erase(ack->id);
            if (plan.change->acks.empty() && plan.change->paused == plan.change->paused_needed) complete(plan, now);
        } else if (std::holds_alternative<Paused>(*body)) {
            for (auto& plan : plans_) {
                if (!plan.change || plan.change->paused >= plan.change->paused_needed) continue;
                auto& c = *plan.change;
                if (++c.paused < c.paused_needed) break;
                // Every upstream is paused: the losers can hand off once drained.
                for (const auto& mv : c.moves) {
                    const auto id = next_id_++;
                    transport_.to_worker(mv.from, Handoff{id, mv.keys, mv.to, 0, true}, now);
                    c.acks.insert(id);
                    ack_owner_[id] = &plan;
                }
                if (c.acks.empty()) complete(plan, now);
                break;
            }
        } else {
            throw ProtocolError("controller: unexpected control message");
        }
    }
}

void ControllerActor::complete(Plan& plan, Time now) {
    Change c = std::move(*plan.change);
    plan.change.reset();
    if (c.publish_on_complete) publish(c.mutation, now);
    if (c.resume_on_complete)
        for (int u = 0; u < p_.upstreams; ++u) transport_.to_upstream(u, Resume{}, now);
    for (WorkerId h : c.new_replicas) replicas_.insert({plan.m.skewed, h});
    log(now, &plan, "transfer-complete", c.what);
    if (plan.transient) drop_plan(plan);
}

void ControllerActor::check_timeouts(Time now) {
    for (auto it = plans_.begin(); it != plans_.end();) {
        Plan& plan = *it++;
        if (!plan.change || !plan.change->abort_on_timeout) continue;
        if (now - plan.change->started <= p_.engine.ack_timeout) continue;
        for (auto id : plan.change->acks) ack_owner_.erase(id);
        log(now, &plan, "abort", "state acknowledgement timed out; logic unchanged");
        plan.change.reset();
        plan.aborted = true;
        drop_plan(plan);
    }
}

// ---------------------------------------------------------------------------
// plans

ControllerActor::Plan& ControllerActor::new_plan(WorkerId skewed, std::vector<WorkerId> helpers) {
    Plan& plan = plans_.emplace_back();
    plan.m.skewed = skewed;
    plan.m.helpers = std::move(helpers);
    plan.m.tau_used = tau_;
    plan.summary = summaries_.size();
    summaries_.push_back({skewed, plan.m.helpers, 0});
    return plan;
}

void ControllerActor::drop_plan(Plan& plan) {
    plans_.remove_if([&](const Plan& p) { return &p == &plan; });
}

std::set<WorkerId> ControllerActor::busy_workers() const {
    std::set<WorkerId> out;
    for (const auto& p : plans_) {
        out.insert(p.m.skewed);
        out.insert(p.m.helpers.begin(), p.m.helpers.end());
    }
    return out;
}

std::vector<WorkerId> ControllerActor::helper_pool(WorkerId skewed, const std::set<WorkerId>& busy) const {
    std::vector<WorkerId> out;
    const auto pin = p_.pinned_helpers.find(skewed);
    for (WorkerId w = 0; w < p_.workers; ++w) {
        if (w == skewed || busy.count(w)) continue;
        if (pin != p_.pinned_helpers.end() && std::find(pin->second.begin(), pin->second.end(), w) == pin->second.end())
            continue;
        out.push_back(w);
    }
    return out;
}

std::vector<Key> ControllerActor::keys_of(WorkerId base_owner) const {
    std::vector<Key> out;
    for (const auto& [k, c] : board_.key_counts_copy())
        if (c > 0 && logic_.base().owner(k) == base_owner) out.push_back(k);
    return out;
}

std::map<Key, std::uint64_t> ControllerActor::window_counts(const Plan& plan) const {
    auto now = board_.key_counts_copy();
    for (auto& [k, c] : now) {
        auto it = plan.window_keys.find(k);
        if (it != plan.window_keys.end()) c -= it->second;
    }
    return now;
}

double ControllerActor::migration_cost(WorkerId skewed) const {
    const double entries =
        static_cast<double>(board_.state_entries[static_cast<std::size_t>(skewed)].load(std::memory_order_relaxed));
    const bool immutable = p_.traits.mutability == Mutability::Immutable;
    if (p_.strategy.kind == StrategyKind::ReshapeSbk || p_.strategy.kind == StrategyKind::Flux) {
        if (!p_.traits.keyed_handoff) return 0.0;
        return p_.engine.beta * (immutable ? entries : static_cast<double>(keys_of(skewed).size()));
    }
    return immutable ? p_.engine.beta * entries : 0.0;
}

bool ControllerActor::maybe_adjust_tau(double gap, double phi, const WorkloadSample& sample, WorkerId skewed,
                                       bool passed, Time now) {
    const auto& cfg = p_.strategy;
    if (!cfg.dynamic_tau || tau_adjustments_ >= cfg.max_tau_adjustments) return passed;
    const auto pred = predict(sample, skewed, cfg.horizon);
    if (!pred) return passed;
    const double next =
        adjust_tau(phi, phi - gap, tau_, pred->epsilon, cfg.epsilon_lo, cfg.epsilon_hi, cfg.tau_step);
    if (passed) {
        if (next > tau_) {
            log(now, nullptr, "tau-increase", fmt::format("{} -> {} (eps {:.1f})", tau_, next, pred->epsilon));
            tau_ = next;
            ++tau_adjustments_;
        }
        return true;
    }
    if (next < tau_ && phi >= cfg.eta && gap > cfg.catch_up_slack()) {
        log(now, nullptr, "tau-decrease", fmt::format("{} -> {} (eps {:.1f})", tau_, next, pred->epsilon));
        tau_ = next;
        ++tau_adjustments_;
        return true;
    }
    return false;
}

// ---------------------------------------------------------------------------
// strategies

void ControllerActor::decide_reshape(const MetricsSnapshot& s, Time now) {
    const auto& cfg = p_.strategy;

    // Further iterations of running plans.
    for (auto& plan : plans_) {
        if (plan.m.phase != Phase::Second || plan.change) continue;
        const auto S = static_cast<std::size_t>(plan.m.skewed);
        double worst = 0.0, phi = s.queue[S];
        for (WorkerId h : plan.m.helpers) {
            const double g = s.queue[S] - s.queue[static_cast<std::size_t>(h)];
            if (std::abs(g) > std::abs(worst)) {
                worst = g;
                phi = std::max(s.queue[S], s.queue[static_cast<std::size_t>(h)]);
            }
        }
        const bool passed = std::abs(worst) >= tau_ && phi >= cfg.eta;
        if (maybe_adjust_tau(std::abs(worst), phi, plan.sample, plan.m.skewed, passed, now))
            start_iteration(plan, s, now);
    }

    // New skewed workers.
    auto busy = busy_workers();
    std::vector<WorkerId> order;
    for (WorkerId w = 0; w < p_.workers; ++w)
        if (!busy.count(w)) order.push_back(w);
    std::stable_sort(order.begin(), order.end(), [&](WorkerId a, WorkerId b) {
        return s.queue[static_cast<std::size_t>(a)] > s.queue[static_cast<std::size_t>(b)];
    });

    for (WorkerId L : order) {
        if (busy.count(L)) continue;
        const auto pool = helper_pool(L, busy);
        std::vector<Candidate> cands;
        for (WorkerId w : pool) cands.push_back({w, s.queue[static_cast<std::size_t>(w)]});
        const auto h = select_helper(cands, {});
        if (!h) continue;

        const double phi_l = s.queue[static_cast<std::size_t>(L)];
        const double phi_h = s.queue[static_cast<std::size_t>(*h)];
        const double M = migration_cost(L);
        const auto pred = predict(global_sample_, L, cfg.horizon);
        double tau_eff = tau_;
        if (M > 0.0 && pred) {
            const double fs = pred->fractions[static_cast<std::size_t>(L)];
            const double fh = pred->fractions[static_cast<std::size_t>(*h)];
            if (fs >= fh) tau_eff = compute_tau_prime(tau_, fs, fh, s.processing_rate, M, cfg.eta);
        }
        const bool passed = skew_test(phi_l, phi_h, cfg.eta, tau_eff);
        if (!maybe_adjust_tau(phi_l - phi_h, phi_l, global_sample_, L, passed, now)) continue;

        const double time_left = estimated_time_left(static_cast<double>(s.remaining), s.processing_rate);
        if (!precondition(M, time_left)) {
            ++precondition_skips_;
            log(now, nullptr, "skip",
                fmt::format("worker {}: migration time {:.2f} >= time left {:.2f}", L, M, time_left));
            continue;
        }

        std::vector<WorkerId> helpers{*h};
        if (cfg.max_helpers > 1 && cfg.kind == StrategyKind::ReshapeSbr && pred) {
            std::vector<Candidate> sorted = cands;
            std::stable_sort(sorted.begin(), sorted.end(), [](const Candidate& a, const Candidate& b) {
                return a.workload < b.workload || (a.workload == b.workload && a.id < b.id);
            });
            sorted.resize(std::min<std::size_t>(sorted.size(), static_cast<std::size_t>(cfg.max_helpers)));
            HelperSetInput in;
            in.skewed_fraction = pred->fractions[static_cast<std::size_t>(L)];
            for (std::size_t k = 0; k < sorted.size(); ++k) {
                in.candidate_fractions.push_back(pred->fractions[static_cast<std::size_t>(sorted[k].id)]);
                in.migration_time.push_back(M * static_cast<double>(k + 1));
            }
            in.future_tuples = static_cast<double>(s.remaining);
            in.rate = s.processing_rate;
            in.total_tuples = static_cast<double>(p_.total_records);
            const auto k = select_helper_set(in);
            if (k == 0) {
                log(now, nullptr, "skip", fmt::format("worker {}: no helper set reduces load", L));
                continue;
            }
            helpers.clear();
            for (std::size_t i = 0; i < k; ++i) helpers.push_back(sorted[i].id);
        }

        Plan& plan = new_plan(L, helpers);
        plan.m.tau_used = tau_eff;
        plan.sample = global_sample_;
        busy.insert(L);
        busy.insert(helpers.begin(), helpers.end());
        log(now, &plan, "detect",
            fmt::format("phi_S={} phi_H={} tau'={:.1f} M={:.3f}", phi_l, phi_h, tau_eff, M));
        start_iteration(plan, s, now);
    }
}

void ControllerActor::start_iteration(Plan& plan, const MetricsSnapshot&, Time now) {
    ++plan.m.iteration;
    ++iterations_;
    ++summaries_[plan.summary].iterations;
    plan.m.tau_used = tau_;
    const auto q = live_queue();
    double max_h = 0.0;
    for (WorkerId h : plan.m.helpers) max_h = std::max(max_h, q[static_cast<std::size_t>(h)]);
    plan.forward = q[static_cast<std::size_t>(plan.m.skewed)] >= max_h;
    log(now, &plan, "iteration", plan.forward ? "helper behind" : "helper ahead");
    if (!p_.strategy.first_phase) {
        plan.m.phase = Phase::First;
        begin_second_phase(plan, now);
        return;
    }
    begin_first_phase(plan, now);
}

void ControllerActor::begin_first_phase(Plan& plan, Time now) {
    plan.m.phase = Phase::First;
    const WorkerId S = plan.m.skewed;
    const auto helpers = plan.m.helpers;

    if (p_.strategy.kind == StrategyKind::ReshapeSbr) {
        Change c;
        std::vector<WorkerId> replicate;
        if (plan.forward) {
            auto shares = first_phase_shares(helpers);
            std::optional<Key> partial;
            if (p_.strategy.first_phase_partial) {
                std::uint64_t best = 0;
                for (const auto& [k, n] : window_counts(plan))
                    if (logic_.base().owner(k) == S && n > best) best = n, partial = k;
            }
            if (partial) {
                plan.partial_key = partial;
                const Key k = *partial;
                c.mutation = [k, shares](const PartitionLogic& l) { return apply_key_sbr(l, k, shares); };
                c.what = fmt::format("first phase: key {} -> {}", k, describe(shares));
            } else {
                c.mutation = [S, shares](const PartitionLogic& l) { return apply_sbr(l, S, shares); };
                c.what = "first phase: " + describe(shares);
            }
            plan.m.shares = shares;
            if (p_.traits.mutability == Mutability::Immutable)
                for (WorkerId h : helpers)
                    if (!replicas_.count({S, h})) replicate.push_back(h);
        } else {
            auto partial = plan.partial_key;
            plan.partial_key.reset();
            c.mutation = [S, partial](const PartitionLogic& l) {
                auto next = apply_sbr(l, S, {});
                return partial ? apply_key_sbr(next, *partial, {}) : next;
            };
            c.what = "first phase: helper ahead, redirection stopped";
            plan.m.shares.clear();
        }
        log(now, &plan, "first-phase", c.what);
        issue(plan, std::move(c), {}, replicate, now);
        return;
    }

    // Split by keys: move every key of S's partition to the helper, or back.
    const WorkerId H = helpers.front();
    const WorkerId from = plan.forward ? S : H;
    const WorkerId to = plan.forward ? H : S;
    std::vector<Key> keys;
    for (Key k : keys_of(S))
        if (logic_.holder(k) == from) keys.push_back(k);
    Change c;
    c.mutation = [keys, to](const PartitionLogic& l) { return apply_sbk(l, keys, to); };
    c.what = fmt::format("first phase: keys {} {} -> {}", describe(keys), from, to);
    log(now, &plan, "first-phase", c.what);
    issue(plan, std::move(c), {KeyMove{keys, from, to}}, {}, now);
}

void ControllerActor::begin_second_phase(Plan& plan, Time now) {
    const auto& cfg = p_.strategy;
    const WorkerId S = plan.m.skewed;
    auto pred = predict(plan.sample, S, cfg.horizon);
    std::size_t rows = plan.sample.n();
    if (!pred) {
        pred = predict(global_sample_, S, cfg.horizon);
        rows = global_sample_.n();
    }
    if (!pred) {
        if (!plan.deferral_logged) log(now, &plan, "defer", "fewer than two samples; first phase continues");
        plan.deferral_logged = true;
        return;
    }
    const auto counts = window_counts(plan);
    plan.sample = reset_window(now);
    plan.window_keys = board_.key_counts_copy();
    plan.deferral_logged = false;
    plan.m.window_start = now;
    plan.m.phase = Phase::Second;

    const auto q = live_queue();
    std::string residual;
    for (WorkerId h : plan.m.helpers)
        residual += fmt::format(" {}:{}", h, q[static_cast<std::size_t>(S)] - q[static_cast<std::size_t>(h)]);

    const double fs = pred->fractions[static_cast<std::size_t>(S)];
    std::vector<double> fh;
    for (WorkerId h : plan.m.helpers) fh.push_back(pred->fractions[static_cast<std::size_t>(h)]);

    if (cfg.kind == StrategyKind::ReshapeSbr) {
        auto shares = second_phase_shares(fs, plan.m.helpers, fh, cfg.share_window);
        if (cfg.estimate_noise > 0.0) {
            const double f = std::min(1.0, cfg.estimate_noise / std::sqrt(static_cast<double>(rows)));
            for (auto& sh : shares)
                sh.numerator = static_cast<std::uint32_t>(std::floor(sh.numerator * (1.0 - f)));
        }
        auto partial = plan.partial_key;
        plan.partial_key.reset();
        Change c;
        c.mutation = [S, shares, partial](const PartitionLogic& l) {
            auto next = partial ? apply_key_sbr(l, *partial, {}) : l;
            return apply_sbr(next, S, shares);
        };
        c.what = fmt::format("second phase: f_S={:.4f} shares {} residual gap{}", fs, describe(shares), residual);
        std::vector<WorkerId> replicate;
        if (p_.traits.mutability == Mutability::Immutable)
            for (const auto& sh : shares)
                if (sh.numerator > 0 && !replicas_.count({S, sh.worker})) replicate.push_back(sh.worker);
        plan.m.shares = shares;
        log(now, &plan, "second-phase", c.what);
        issue(plan, std::move(c), {}, replicate, now);
        return;
    }

    const WorkerId H = plan.m.helpers.front();
    double window_total = 0.0;
    for (const auto& [_, n] : counts) window_total += static_cast<double>(n);
    std::vector<KeyLoad> loads;
    const auto keys = keys_of(S);
    for (Key k : keys) {
        const auto it = counts.find(k);
        const double n = it == counts.end() ? 0.0 : static_cast<double>(it->second);
        loads.push_back({k, window_total > 0.0 ? n / window_total : 0.0});
    }
    const auto subset = sbk_balance_keys(loads, fh.front());
    std::vector<Key> to_s, to_h;
    for (Key k : keys) {
        const bool want_h = std::find(subset.begin(), subset.end(), k) != subset.end();
        const WorkerId holder = logic_.holder(k);
        if (want_h && holder == S) to_h.push_back(k);
        if (!want_h && holder == H) to_s.push_back(k);
    }
    Change c;
    c.mutation = [to_s, to_h, S, H](const PartitionLogic& l) {
        auto next = to_s.empty() ? l : apply_sbk(l, to_s, S);
        return to_h.empty() ? next : apply_sbk(next, to_h, H);
    };
    c.what = fmt::format("second phase: helper keeps {}, back to {} {}, to {} {}, residual gap{}", describe(subset),
                         S, describe(to_s), H, describe(to_h), residual);
    log(now, &plan, "second-phase", c.what);
    issue(plan, std::move(c), {KeyMove{to_s, H, S}, KeyMove{to_h, S, H}}, {}, now);
}

void ControllerActor::poll_phases(Time now) {
    const auto q = live_queue();
    const double delta = p_.strategy.catch_up_slack();
    for (auto& plan : plans_) {
        if (plan.m.phase != Phase::First || plan.change) continue;
        const double qs = q[static_cast<std::size_t>(plan.m.skewed)];
        // Without a first phase there is nothing to catch up; this only
        // retries a second phase deferred for lack of samples.
        bool caught_up = true;
        if (!p_.strategy.first_phase) {
            begin_second_phase(plan, now);
            continue;
        }
        for (WorkerId h : plan.m.helpers) {
            const double qh = q[static_cast<std::size_t>(h)];
            if (plan.forward ? qs - qh > delta : qh - qs > delta) caught_up = false;
        }
        if (!caught_up) continue;
        if (!plan.deferral_logged) log(now, &plan, "caught-up");
        begin_second_phase(plan, now);
    }
}

void ControllerActor::decide_flux(const MetricsSnapshot& s, Time now) {
    const auto& cfg = p_.strategy;
    auto busy = busy_workers();
    std::vector<WorkerId> order;
    for (WorkerId w = 0; w < p_.workers; ++w)
        if (!busy.count(w)) order.push_back(w);
    std::stable_sort(order.begin(), order.end(), [&](WorkerId a, WorkerId b) {
        return s.queue[static_cast<std::size_t>(a)] > s.queue[static_cast<std::size_t>(b)];
    });
    const auto counts = board_.key_counts_copy();

    for (WorkerId L : order) {
        if (busy.count(L)) continue;
        std::vector<Candidate> cands;
        for (WorkerId w : helper_pool(L, busy)) cands.push_back({w, s.queue[static_cast<std::size_t>(w)]});
        const auto h = select_helper(cands, {});
        if (!h) continue;
        if (!skew_test(s.queue[static_cast<std::size_t>(L)], s.queue[static_cast<std::size_t>(*h)], cfg.eta, tau_))
            continue;

        std::vector<KeyLoad> held;
        double helper_load = 0.0;
        for (const auto& [k, n] : counts) {
            const WorkerId holder = logic_.holder(k);
            if (holder == L) held.push_back({k, static_cast<double>(n)});
            if (holder == *h) helper_load += static_cast<double>(n);
        }
        const auto keys = flux_mitigate(held, helper_load);
        if (keys.empty()) {
            if (flux_noop_logged_.insert(L).second)
                log(now, nullptr, "skip", fmt::format("worker {}: no key set narrows the gap", L));
            continue;
        }
        const double M = migration_cost(L);
        const double time_left = estimated_time_left(static_cast<double>(s.remaining), s.processing_rate);
        if (!precondition(M, time_left)) {
            ++precondition_skips_;
            log(now, nullptr, "skip", fmt::format("worker {}: migration time {:.2f} >= time left", L, M));
            continue;
        }
        Plan& plan = new_plan(L, {*h});
        plan.transient = true;
        plan.m.phase = Phase::Second;
        ++plan.m.iteration;
        ++iterations_;
        ++summaries_[plan.summary].iterations;
        busy.insert(L);
        busy.insert(*h);
        const WorkerId to = *h;
        Change c;
        c.mutation = [keys, to](const PartitionLogic& l) { return apply_sbk(l, keys, to); };
        c.what = fmt::format("move keys {} {} -> {}", describe(keys), L, to);
        log(now, &plan, "key-move", c.what);
        issue(plan, std::move(c), {KeyMove{keys, L, to}}, {}, now);
        if (!plan.change) drop_plan(plan);
    }
}

void ControllerActor::decide_flowjoin(const MetricsSnapshot& s, Time now) {
    const auto& cfg = p_.strategy;
    if (flowjoin_done_ || now < cfg.flowjoin_detect_duration) return;
    flowjoin_done_ = true;
    const auto heavy = flowjoin_heavy_hitters(board_.key_counts_copy(), cfg.flowjoin_heavy_factor);
    if (heavy.empty()) {
        log(now, nullptr, "skip", "no heavy hitter observed");
        return;
    }
    std::map<WorkerId, std::vector<Key>> by_owner;
    for (Key k : heavy) by_owner[logic_.holder(k)].push_back(k);

    auto busy = busy_workers();
    std::vector<std::pair<Key, WorkerId>> assignments;
    std::vector<std::pair<WorkerId, WorkerId>> replicate;
    Plan* lead = nullptr;
    for (const auto& [S, keys] : by_owner) {
        std::vector<Candidate> cands;
        for (WorkerId w : helper_pool(S, busy)) cands.push_back({w, s.queue[static_cast<std::size_t>(w)]});
        const auto h = select_helper(cands, {});
        if (!h) continue;
        busy.insert(S);
        busy.insert(*h);
        Plan& plan = new_plan(S, {*h});
        plan.m.phase = Phase::Second;
        plan.m.shares = {{*h, 1, 2}};
        ++plan.m.iteration;
        ++iterations_;
        ++summaries_[plan.summary].iterations;
        if (!lead) lead = &plan;
        for (Key k : keys) assignments.emplace_back(k, *h);
        if (p_.traits.mutability == Mutability::Immutable && !replicas_.count({S, *h})) replicate.emplace_back(S, *h);
        log(now, &plan, "heavy-hitters", fmt::format("keys {} split 1/2 with {}", describe(keys), *h));
    }
    if (!lead) return;

    Change c;
    c.mutation = [assignments](const PartitionLogic& l) {
        PartitionLogic next = l;
        for (const auto& [k, h] : assignments) next = apply_key_sbr(next, k, {{h, 1, 2}});
        return next;
    };
    c.what = "static heavy-hitter split";
    if (replicate.empty()) {
        publish(c.mutation, now);
        return;
    }
    c.started = now;
    c.publish_on_complete = true;
    c.abort_on_timeout = true;
    for (const auto& [S, h] : replicate) {
        const auto id = next_id_++;
        transport_.to_worker(S, Replicate{id, h}, now);
        c.acks.insert(id);
        ack_owner_[id] = lead;
        replicas_.insert({S, h});
    }
    lead->change = std::move(c);
}

// ---------------------------------------------------------------------------
// logic changes

void ControllerActor::issue(Plan& plan, Change change, std::vector<KeyMove> moves, std::vector<WorkerId> replicate_to,
                            Time now) {
    change.started = now;
    std::erase_if(moves, [](const KeyMove& m) { return m.keys.empty(); });

    if (!replicate_to.empty()) {
        for (WorkerId h : replicate_to) {
            const auto id = next_id_++;
            transport_.to_worker(plan.m.skewed, Replicate{id, h}, now);
            change.acks.insert(id);
            ack_owner_[id] = &plan;
        }
        change.publish_on_complete = true;
        change.abort_on_timeout = true;
        change.new_replicas = std::move(replicate_to);
        plan.change = std::move(change);
        return;
    }

    if (moves.empty() || !p_.traits.keyed_handoff) {
        publish(change.mutation, now);
        return;
    }

    if (p_.engine.migration == MigrationMode::PauseResume) {
        change.paused_needed = p_.upstreams;
        change.moves = std::move(moves);
        change.publish_on_complete = true;
        change.resume_on_complete = true;
        for (int u = 0; u < p_.upstreams; ++u) transport_.to_upstream(u, Pause{}, now);
        plan.change = std::move(change);
        return;
    }

    std::lock_guard gate(board_.end_gate);
    if (board_.upstreams_ended.load() > 0) {
        log(now, &plan, "abort", "input ended before the key move was issued");
        return;
    }
    const Epoch e = logic_.epoch() + 1;
    for (const auto& mv : moves) {
        const auto id = next_id_++;
        transport_.to_worker(mv.to, ExpectKeys{id, mv.keys}, now);
        transport_.to_worker(mv.from, Handoff{id, mv.keys, mv.to, e, false}, now);
        change.acks.insert(id);
        ack_owner_[id] = &plan;
    }
    publish(change.mutation, now);
    plan.change = std::move(change);
}

void ControllerActor::publish(const Mutation& mutation, Time now) {
    const Epoch next = logic_.epoch() + 1;
    logic_ = with_epoch(mutation(logic_), next);
    auto shared = std::make_shared<const PartitionLogic>(logic_);
    for (int u = 0; u < p_.upstreams; ++u) transport_.to_upstream(u, UpdateLogic{shared}, now);
    for (WorkerId w = 0; w < p_.workers; ++w) transport_.to_worker(w, UpdateLogic{shared}, now);
    ++logic_changes_;
    spdlog::debug("t={} controller publishes logic epoch {}", now, next);
}

void ControllerActor::log(Time now, const Plan* plan, std::string event, std::string detail) {
    IterationRecord r;
    r.time = now;
    if (plan) {
        r.skewed = plan->m.skewed;
        r.helpers = plan->m.helpers;
        r.iteration = plan->m.iteration;
    }
    r.event = std::move(event);
    r.tau = tau_;
    r.detail = std::move(detail);
    spdlog::info("t={} {} S={} {}", r.time, r.event, r.skewed, r.detail);
    log_.push_back(std::move(r));
}

void ControllerActor::fill_report(ExecutionReport& report) const {
    report.timeline = timeline_;
    report.log = log_;
    report.plans = summaries_;
    report.iterations = iterations_;
    report.logic_changes = logic_changes_;
    report.precondition_skips = precondition_skips_;
    report.tau_adjustments = tau_adjustments_;
    report.final_tau = tau_;
}

}  // namespace reshape::detail
