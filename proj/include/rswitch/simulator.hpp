#pragma once

#include "rswitch/hjb.hpp"

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace rswitch {

/// One entry of a scripted switching schedule. An empty target means "next regime",
/// i -> i mod m + 1 (the alternation 3 - i when m = 2).
struct ScriptedSwitch {
    double time = 0.0;
    std::optional<RegimeIndex> target;
};

/// n-th scheduled switch, or nullopt once the schedule is exhausted. Schedules may be infinite.
using SwitchSchedule = std::function<std::optional<ScriptedSwitch>(std::size_t n)>;

/// Runtime form of a switching strategy alpha = (tau_n, iota_n). Decisions read only the
/// observed (t, X, I) history.
class FeedbackSwitchingStrategy {
public:
    enum class Mode { ValueDriven, Scripted };

    /// Switches wherever the solved policy recorded SWITCH_TO at the nearest node.
    static FeedbackSwitchingStrategy value_driven(std::shared_ptr<const SolveResult> solution, double tolerance = 1e-9,
                                                  int zeno_cap = 0);
    static FeedbackSwitchingStrategy scripted(SwitchSchedule schedule, int zeno_cap = 0);
    static FeedbackSwitchingStrategy scripted(std::vector<ScriptedSwitch> schedule, int zeno_cap = 0);
    static FeedbackSwitchingStrategy never_switch();

    Mode mode() const noexcept { return mode_; }
    /// Explicit cap or 10 m.
    int zeno_cap(int regimes) const noexcept { return zeno_cap_ > 0 ? zeno_cap_ : 10 * regimes; }
    double tolerance() const noexcept { return tolerance_; }
    const SolveResult* solution() const noexcept { return solution_.get(); }
    const SwitchSchedule& schedule() const noexcept { return schedule_; }

private:
    Mode mode_ = Mode::Scripted;
    std::shared_ptr<const SolveResult> solution_;
    SwitchSchedule schedule_;
    double tolerance_ = 1e-9;
    int zeno_cap_ = 0;
};

/// Piecewise-constant open-loop control: controls[k] (index into the control set) on [knots[k], knots[k+1]).
struct StepControl {
    std::vector<double> knots;
    std::vector<std::size_t> controls;
};

using FeedbackControlFn = std::function<std::size_t(double t, const State& x, RegimeIndex i)>;

/// Nature's control. Queries receive the regime after any switch at the current instant.
class AdversaryControl {
public:
    enum class Kind { Constant, Step, Feedback };

    static AdversaryControl constant(std::size_t control);
    static AdversaryControl step(StepControl control);
    static AdversaryControl feedback(FeedbackControlFn fn);

    Kind kind() const noexcept;
    std::size_t control_at(double t, const State& x, RegimeIndex i) const;
    /// Next instant after t where a STEP control changes value (+infinity otherwise).
    double next_change_after(double t) const;
    /// Out-of-grid lookups clamped by a best-response adversary.
    long clamp_warnings() const noexcept { return warnings_ ? warnings_->load() : 0; }

private:
    friend AdversaryControl best_response_adversary(std::shared_ptr<const PolicyField> policy);

    std::variant<std::size_t, StepControl, FeedbackControlFn> impl_;
    std::shared_ptr<std::atomic<long>> warnings_;
};

/// Feedback adversary replaying the stored argmin at the nearest (time, node).
AdversaryControl best_response_adversary(std::shared_ptr<const PolicyField> policy);

struct SwitchEvent {
    double time = 0.0;
    RegimeIndex from;
    RegimeIndex to;
    double cost = 0.0;
};

/// One simulated path. Entry k describes time times[k]: the state, the regime in force
/// after any switch at that instant, the control used until the next entry, and the
/// cumulative costs. The final entry is T with I_T = I_{T-}.
struct TrajectoryRecord {
    std::vector<double> times;
    std::vector<State> states;
    std::vector<RegimeIndex> regimes;
    std::vector<std::size_t> controls;
    std::vector<double> cum_running_cost;
    std::vector<double> cum_switch_cost;
    std::vector<SwitchEvent> switches;

    double running_cost = 0.0;
    double terminal_payoff = 0.0;
    double switch_cost = 0.0;
    double payoff = 0.0;  ///< realized J = running + terminal - switching

    double recomputed_payoff() const noexcept { return running_cost + terminal_payoff - switch_cost; }
};

/// Seed of the RNG stream owned by path `path_index`.
std::uint64_t path_stream_seed(std::uint64_t base_seed, std::uint64_t path_index);

TrajectoryRecord simulate_path(const ProblemSpec& spec, const FeedbackSwitchingStrategy& strategy,
                               const AdversaryControl& adversary, double s, const State& x0, RegimeIndex i0,
                               double dt_sim, std::uint64_t seed);

struct McEstimate {
    double mean = 0.0;
    double stderr_ = 0.0;
    long paths = 0;     ///< paths that reached T
    long failures = 0;  ///< Zeno-aborted paths
    std::uint64_t seed = 0;

    /// "mean=<v> stderr=<v> n=<paths> seed=<seed>" with 17 significant digits.
    std::string line() const;
};

struct McParams {
    double dt_sim = 1.0 / 256.0;
    long paths = 1000;
    std::uint64_t seed = 20240601;
    unsigned threads = 1;
};

McEstimate estimate_J(const ProblemSpec& spec, const FeedbackSwitchingStrategy& strategy,
                      const AdversaryControl& adversary, double s, const State& x0, RegimeIndex i0, double dt_sim,
                      long n_paths, std::uint64_t seed, unsigned threads = 1);

struct WorstCase {
    McEstimate estimate;
    StepControl control;
    std::size_t candidates = 0;
};

/// Strategy that may observe the adversary's step control (non-anticipating).
using StrategyFactory = std::function<FeedbackSwitchingStrategy(const StepControl&)>;

/// Exhaustive search over deterministic step controls on `knot_grid` (interval start
/// times, first = s; T is appended). Every candidate uses the same random streams.
WorstCase worst_case_over_step_controls(const ProblemSpec& spec, const FeedbackSwitchingStrategy& strategy,
                                        const std::vector<double>& knot_grid, double s, const State& x0,
                                        RegimeIndex i0, const McParams& mc);
WorstCase worst_case_over_step_controls(const ProblemSpec& spec, const StrategyFactory& strategy,
                                        const std::vector<double>& knot_grid, double s, const State& x0,
                                        RegimeIndex i0, const McParams& mc);

/// Evenly spaced interval starts on [s, T).
std::vector<double> uniform_knots(double s, double horizon, int count);

/// Switch to the adversary's value at each knot, which keeps the two-regime example still.
/// Requires control points that are regime labels.
FeedbackSwitchingStrategy step_matching_strategy(const ProblemSpec& spec, const StepControl& control);

/// Alternating switches at b_n = (2^{n+1} - 1) / 2^{n+2}, accumulating at 1/2.
FeedbackSwitchingStrategy zeno_strategy(int zeno_cap = 0);

/// Re-solves on [0, t_{k_mid}] from layer k_mid of `field`; returns max |.| deviation from layer 0.
double dpp_check(const ProblemSpec& spec, const Grid& grid, const ValueField& field, int k_mid,
                 const SolverOptions& options = {});

struct SandwichReport {
    McEstimate lower_proxy;
    StepControl worst_control;
    double grid_value = 0.0;
    double tolerance = 0.0;
    bool pass = false;
};

/// Lower proxy (worst case over step controls for `strategy`) against the grid value at
/// (s, x0, i0); passes when proxy <= grid value + 3 stderr + allowance.
SandwichReport sandwich_check(const ProblemSpec& spec, const ValueField& field, const FeedbackSwitchingStrategy& strategy,
                              double s, const State& x0, RegimeIndex i0, const McParams& mc, int knots = 4,
                              double allowance = 2e-2);

}  // namespace rswitch
