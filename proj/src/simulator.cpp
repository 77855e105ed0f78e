#include "rswitch/simulator.hpp"

#include "rswitch/errors.hpp"
#include "rswitch/parallel.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace rswitch {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::size_t kMaxStepCandidates = 100'000;

std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

RegimeIndex next_regime(RegimeIndex i, int m) { return RegimeIndex{i.value % m + 1}; }

struct PathOutcome {
    double payoff = 0.0;
    bool zeno = false;
};

// Runs one path; fills `record` when non-null.
double run_path(const ProblemSpec& spec, const FeedbackSwitchingStrategy& strategy, const AdversaryControl& adversary,
                double s, const State& x0, RegimeIndex i0, double dt_sim, std::uint64_t stream_seed,
                TrajectoryRecord* record) {
    const double T = spec.horizon;
    const int m = spec.regimes;
    const int d = spec.dimension;
    const int zeno_cap = strategy.zeno_cap(m);
    const long n_steps = std::max(1L, static_cast<long>(std::ceil((T - s) / dt_sim - 1e-9)));
    const double h = (T - s) / static_cast<double>(n_steps);

    std::mt19937_64 engine(stream_seed);
    std::normal_distribution<double> normal(0.0, 1.0);

    State x = x0;
    RegimeIndex i = i0;
    double running = 0.0, switching = 0.0;
    int switch_count = 0;

    std::size_t sched_index = 0;
    std::optional<ScriptedSwitch> pending;
    const bool scripted = strategy.mode() == FeedbackSwitchingStrategy::Mode::Scripted;
    if (scripted && strategy.schedule()) pending = strategy.schedule()(0);

    auto do_switch = [&](double t, RegimeIndex to) {
        if (++switch_count > zeno_cap)
            throw ZenoAbort(fmt::format("switch count exceeded the Zeno cap {} at t = {:.17g}", zeno_cap, t), t);
        const double cost = spec.switch_cost(x, i, to);
        switching += cost;
        if (record) record->switches.push_back({t, i, to, cost});
        i = to;
    };

    auto apply_switches = [&](double t) {
        if (scripted) {
            while (pending && pending->time <= t) {
                if (pending->time >= T) {
                    pending.reset();
                    break;
                }
                const RegimeIndex to = pending->target ? *pending->target : next_regime(i, m);
                if (!spec.valid_regime(to)) throw InvalidArgument("scripted switch targets an invalid regime");
                if (to != i) do_switch(pending->time < s ? t : pending->time, to);
                pending = strategy.schedule()(++sched_index);
            }
            return;
        }
        const SolveResult* sol = strategy.solution();
        if (!sol) return;
        const PolicyField& policy = sol->policy;
        const int layer = policy.grid.nearest_layer(t);
        const std::size_t node = policy.grid.nearest_node(x);
        for (int chain = 0; chain < m - 1; ++chain) {
            const auto target = policy.switch_target(layer, node, i);
            if (!target) break;
            do_switch(t, *target);
        }
    };

    auto push_record = [&](double t, std::size_t u) {
        if (!record) return;
        record->times.push_back(t);
        record->states.push_back(x);
        record->regimes.push_back(i);
        record->controls.push_back(u);
        record->cum_running_cost.push_back(running);
        record->cum_switch_cost.push_back(switching);
    };

    Eigen::VectorXd z(d);
    std::size_t u = 0;
    for (long k = 0; k < n_steps; ++k) {
        const double t_end = k + 1 == n_steps ? T : s + static_cast<double>(k + 1) * h;
        double t = s + static_cast<double>(k) * h;
        while (t < t_end) {
            apply_switches(t);
            u = adversary.control_at(t, x, i);
            if (u >= spec.control_set.size()) throw InvalidArgument("adversary returned an invalid control index");
            push_record(t, u);

            double t_next = t_end;
            if (pending && pending->time > t && pending->time < t_next) t_next = pending->time;
            const double change = adversary.next_change_after(t);
            if (change > t && change < t_next) t_next = change;
            const double dt = t_next - t;

            const Control& cu = spec.control_set[u];
            const Eigen::VectorXd b = spec.drift(x, i, cu);
            const Eigen::MatrixXd sigma = spec.diffusion(x, i, cu);
            running += spec.running_cost(x, i, cu) * dt;
            for (int a = 0; a < d; ++a) z[a] = normal(engine);
            x += b * dt + sigma * z * std::sqrt(dt);
            if (!x.allFinite()) throw NumericalBlowup(fmt::format("state left the reals at t = {:.6g}", t_next), k);
            t = t_next;
        }
    }

    const double terminal = spec.terminal_payoff(x, i);
    push_record(T, u);
    const double payoff = running + terminal - switching;
    if (record) {
        record->running_cost = running;
        record->terminal_payoff = terminal;
        record->switch_cost = switching;
        record->payoff = payoff;
    }
    return payoff;
}

void check_start(const ProblemSpec& spec, double s, const State& x0, RegimeIndex i0, double dt_sim) {
    spec.check_structure();
    if (!(dt_sim > 0.0)) throw InvalidArgument("dt_sim must be positive");
    if (!(s >= 0.0 && s < spec.horizon)) throw InvalidArgument("start time must lie in [0, T)");
    if (x0.size() != spec.dimension || !x0.allFinite()) throw InvalidArgument("initial state must be finite with the problem dimension");
    if (!spec.valid_regime(i0)) throw InvalidArgument("initial regime out of range");
}

}  // namespace

// ---------------------------------------------------------------------------- strategies

FeedbackSwitchingStrategy FeedbackSwitchingStrategy::value_driven(std::shared_ptr<const SolveResult> solution,
                                                                  double tolerance, int zeno_cap) {
    if (!solution) throw InvalidArgument("value-driven strategy needs a solved field");
    FeedbackSwitchingStrategy s;
    s.mode_ = Mode::ValueDriven;
    s.solution_ = std::move(solution);
    s.tolerance_ = tolerance;
    s.zeno_cap_ = zeno_cap;
    return s;
}

FeedbackSwitchingStrategy FeedbackSwitchingStrategy::scripted(SwitchSchedule schedule, int zeno_cap) {
    FeedbackSwitchingStrategy s;
    s.mode_ = Mode::Scripted;
    s.schedule_ = std::move(schedule);
    s.zeno_cap_ = zeno_cap;
    return s;
}

FeedbackSwitchingStrategy FeedbackSwitchingStrategy::scripted(std::vector<ScriptedSwitch> schedule, int zeno_cap) {
    for (std::size_t k = 1; k < schedule.size(); ++k)
        if (schedule[k].time < schedule[k - 1].time) throw InvalidArgument("scripted switch times must be nondecreasing");
    auto list = std::make_shared<const std::vector<ScriptedSwitch>>(std::move(schedule));
    return scripted([list](std::size_t n) -> std::optional<ScriptedSwitch> {
        if (n < list->size()) return (*list)[n];
        return std::nullopt;
    }, zeno_cap);
}

FeedbackSwitchingStrategy FeedbackSwitchingStrategy::never_switch() { return scripted(std::vector<ScriptedSwitch>{}); }

FeedbackSwitchingStrategy step_matching_strategy(const ProblemSpec& spec, const StepControl& control) {
    std::vector<ScriptedSwitch> schedule;
    for (std::size_t k = 0; k < control.controls.size(); ++k) {
        const Control& u = spec.control_set.at(control.controls[k]);
        const int label = static_cast<int>(std::lround(u[0]));
        if (u.size() != 1 || label != u[0] || label < 1 || label > spec.regimes)
            throw InvalidArgument("step matching needs control points that are regime labels");
        schedule.push_back({control.knots[k], RegimeIndex{label}});
    }
    return FeedbackSwitchingStrategy::scripted(std::move(schedule));
}

FeedbackSwitchingStrategy zeno_strategy(int zeno_cap) {
    return FeedbackSwitchingStrategy::scripted(
        [](std::size_t n) -> std::optional<ScriptedSwitch> {
            if (n > 60) return std::nullopt;  // b_n == 1/2 in double precision beyond this
            const double b = (std::ldexp(1.0, static_cast<int>(n) + 1) - 1.0) / std::ldexp(1.0, static_cast<int>(n) + 2);
            return ScriptedSwitch{b, std::nullopt};
        },
        zeno_cap);
}

// ---------------------------------------------------------------------------- adversaries

AdversaryControl AdversaryControl::constant(std::size_t control) {
    AdversaryControl a;
    a.impl_ = control;
    return a;
}

AdversaryControl AdversaryControl::step(StepControl control) {
    if (control.knots.size() != control.controls.size() + 1 || control.controls.empty())
        throw InvalidArgument("step control needs one more knot than control values");
    if (!std::is_sorted(control.knots.begin(), control.knots.end()))
        throw InvalidArgument("step control knots must be nondecreasing");
    AdversaryControl a;
    a.impl_ = std::move(control);
    return a;
}

AdversaryControl AdversaryControl::feedback(FeedbackControlFn fn) {
    if (!fn) throw InvalidArgument("feedback adversary needs a function");
    AdversaryControl a;
    a.impl_ = std::move(fn);
    return a;
}

AdversaryControl::Kind AdversaryControl::kind() const noexcept {
    if (std::holds_alternative<std::size_t>(impl_)) return Kind::Constant;
    if (std::holds_alternative<StepControl>(impl_)) return Kind::Step;
    return Kind::Feedback;
}

std::size_t AdversaryControl::control_at(double t, const State& x, RegimeIndex i) const {
    if (const auto* c = std::get_if<std::size_t>(&impl_)) return *c;
    if (const auto* sc = std::get_if<StepControl>(&impl_)) {
        // Interval k is [knots[k], knots[k+1]); clamp outside.
        const auto it = std::upper_bound(sc->knots.begin(), sc->knots.end(), t);
        std::size_t k = it == sc->knots.begin() ? 0 : static_cast<std::size_t>(it - sc->knots.begin()) - 1;
        return sc->controls[std::min(k, sc->controls.size() - 1)];
    }
    return std::get<FeedbackControlFn>(impl_)(t, x, i);
}

double AdversaryControl::next_change_after(double t) const {
    if (const auto* sc = std::get_if<StepControl>(&impl_)) {
        const auto it = std::upper_bound(sc->knots.begin(), sc->knots.end(), t);
        return it == sc->knots.end() ? kInf : *it;
    }
    return kInf;
}

AdversaryControl best_response_adversary(std::shared_ptr<const PolicyField> policy) {
    if (!policy) throw InvalidArgument("best response needs a policy field");
    auto warnings = std::make_shared<std::atomic<long>>(0);
    AdversaryControl a = AdversaryControl::feedback([policy, warnings](double t, const State& x, RegimeIndex i) {
        bool out_t = false, out_x = false;
        const int k = policy->grid.nearest_layer(t, &out_t);
        const std::size_t node = policy->grid.nearest_node(x, &out_x);
        if (out_t || out_x) warnings->fetch_add(1, std::memory_order_relaxed);
        return policy->adversary_index(k, node, i);
    });
    a.warnings_ = std::move(warnings);
    return a;
}

// ---------------------------------------------------------------------------- simulation

std::uint64_t path_stream_seed(std::uint64_t base_seed, std::uint64_t path_index) {
    return splitmix64(splitmix64(base_seed) ^ splitmix64(path_index + 0x632be59bd9b4e019ULL));
}

TrajectoryRecord simulate_path(const ProblemSpec& spec, const FeedbackSwitchingStrategy& strategy,
                               const AdversaryControl& adversary, double s, const State& x0, RegimeIndex i0,
                               double dt_sim, std::uint64_t seed) {
    check_start(spec, s, x0, i0, dt_sim);
    TrajectoryRecord record;
    run_path(spec, strategy, adversary, s, x0, i0, dt_sim, path_stream_seed(seed, 0), &record);
    return record;
}

std::string McEstimate::line() const {
    return fmt::format("mean={:.17g} stderr={:.17g} n={} seed={}", mean, stderr_, paths, seed);
}

McEstimate estimate_J(const ProblemSpec& spec, const FeedbackSwitchingStrategy& strategy,
                      const AdversaryControl& adversary, double s, const State& x0, RegimeIndex i0, double dt_sim,
                      long n_paths, std::uint64_t seed, unsigned threads) {
    check_start(spec, s, x0, i0, dt_sim);
    if (n_paths < 1) throw InvalidArgument("need at least one path");
    std::vector<double> payoff(static_cast<std::size_t>(n_paths), 0.0);
    std::vector<char> zeno(static_cast<std::size_t>(n_paths), 0);
    parallel_for(static_cast<std::size_t>(n_paths), threads, [&](std::size_t p) {
        try {
            payoff[p] = run_path(spec, strategy, adversary, s, x0, i0, dt_sim, path_stream_seed(seed, p), nullptr);
        } catch (const ZenoAbort&) {
            zeno[p] = 1;
        }
    });

    McEstimate est;
    est.seed = seed;
    // Sums are taken relative to the first completed payoff, so constant payoffs come out exact.
    std::optional<double> shift;
    double sum = 0.0;
    for (std::size_t p = 0; p < payoff.size(); ++p) {
        if (zeno[p]) {
            ++est.failures;
            continue;
        }
        if (!shift) shift = payoff[p];
        sum += payoff[p] - *shift;
        ++est.paths;
    }
    if (est.paths == 0) throw EstimationFailure(fmt::format("all {} paths were Zeno-aborted", n_paths));
    est.mean = *shift + sum / static_cast<double>(est.paths);
    if (est.paths > 1) {
        double ss = 0.0;
        for (std::size_t p = 0; p < payoff.size(); ++p)
            if (!zeno[p]) ss += (payoff[p] - est.mean) * (payoff[p] - est.mean);
        est.stderr_ = std::sqrt(ss / static_cast<double>(est.paths - 1)) / std::sqrt(static_cast<double>(est.paths));
    }
    return est;
}

std::vector<double> uniform_knots(double s, double horizon, int count) {
    if (count < 1 || !(s < horizon)) throw InvalidArgument("need count >= 1 and s < T");
    std::vector<double> knots(static_cast<std::size_t>(count));
    for (int k = 0; k < count; ++k) knots[k] = s + (horizon - s) * k / count;
    return knots;
}

WorstCase worst_case_over_step_controls(const ProblemSpec& spec, const StrategyFactory& strategy,
                                        const std::vector<double>& knot_grid, double s, const State& x0,
                                        RegimeIndex i0, const McParams& mc) {
    spec.check_structure();
    if (knot_grid.empty() || knot_grid.front() != s) throw InvalidArgument("knot grid must start at s");
    for (std::size_t k = 1; k < knot_grid.size(); ++k)
        if (!(knot_grid[k] > knot_grid[k - 1])) throw InvalidArgument("knot grid must be increasing");
    if (!(knot_grid.back() < spec.horizon)) throw InvalidArgument("knot grid must stay below T");

    const std::size_t n_u = spec.control_set.size();
    const std::size_t intervals = knot_grid.size();
    std::size_t combos = 1;
    for (std::size_t k = 0; k < intervals; ++k) {
        if (combos > kMaxStepCandidates / n_u)
            throw ConfigurationError(fmt::format("{}^{} step controls exceed the enumeration guard {}", n_u, intervals, kMaxStepCandidates));
        combos *= n_u;
    }

    StepControl candidate;
    candidate.knots = knot_grid;
    candidate.knots.push_back(spec.horizon);
    candidate.controls.assign(intervals, 0);

    WorstCase worst;
    worst.candidates = combos;
    for (std::size_t c = 0; c < combos; ++c) {
        std::size_t rest = c;
        for (std::size_t k = intervals; k-- > 0;) {
            candidate.controls[k] = rest % n_u;
            rest /= n_u;
        }
        const McEstimate est = estimate_J(spec, strategy(candidate), AdversaryControl::step(candidate), s, x0, i0,
                                          mc.dt_sim, mc.paths, mc.seed, mc.threads);
        if (c == 0 || est.mean < worst.estimate.mean) {
            worst.estimate = est;
            worst.control = candidate;
        }
    }
    return worst;
}

WorstCase worst_case_over_step_controls(const ProblemSpec& spec, const FeedbackSwitchingStrategy& strategy,
                                        const std::vector<double>& knot_grid, double s, const State& x0,
                                        RegimeIndex i0, const McParams& mc) {
    return worst_case_over_step_controls(spec, [&strategy](const StepControl&) { return strategy; }, knot_grid, s, x0, i0, mc);
}

// ---------------------------------------------------------------------------- consistency checks

double dpp_check(const ProblemSpec& spec, const Grid& grid, const ValueField& field, int k_mid, const SolverOptions& options) {
    if (k_mid < 1 || k_mid > grid.time_steps()) throw InvalidArgument("k_mid must lie in [1, nt]");
    if (static_cast<int>(field.layers.size()) != grid.time_steps() + 1) throw InvalidArgument("field does not match the grid");
    const SolveResult rerun = solve_from(spec, grid, field.layers[k_mid], k_mid, options);
    return (rerun.values.layers[0] - field.layers[0]).cwiseAbs().maxCoeff();
}

SandwichReport sandwich_check(const ProblemSpec& spec, const ValueField& field, const FeedbackSwitchingStrategy& strategy,
                              double s, const State& x0, RegimeIndex i0, const McParams& mc, int knots, double allowance) {
    SandwichReport report;
    const WorstCase worst = worst_case_over_step_controls(spec, strategy, uniform_knots(s, spec.horizon, knots), s, x0, i0, mc);
    report.lower_proxy = worst.estimate;
    report.worst_control = worst.control;
    report.grid_value = field.interpolate(field.grid.nearest_layer(s), x0, i0);
    report.tolerance = 3.0 * worst.estimate.stderr_ + allowance;
    report.pass = report.lower_proxy.mean <= report.grid_value + report.tolerance;
    return report;
}

}  // namespace rswitch
