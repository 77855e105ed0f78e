#pragma once

#include <Eigen/Dense>

#include <compare>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace rswitch {

/// 1-based regime label in 1..m.
struct RegimeIndex {
    int value = 1;

    constexpr auto operator<=>(const RegimeIndex&) const = default;
    /// 0-based slot for array storage.
    constexpr int slot() const noexcept { return value - 1; }
    static constexpr RegimeIndex from_slot(int slot) noexcept { return RegimeIndex{slot + 1}; }
};

using State = Eigen::VectorXd;
using Control = Eigen::VectorXd;

using DriftFn = std::function<Eigen::VectorXd(const State&, RegimeIndex, const Control&)>;
using DiffusionFn = std::function<Eigen::MatrixXd(const State&, RegimeIndex, const Control&)>;
using RunningCostFn = std::function<double(const State&, RegimeIndex, const Control&)>;
using TerminalPayoffFn = std::function<double(const State&, RegimeIndex)>;
using SwitchCostFn = std::function<double(const State&, RegimeIndex, RegimeIndex)>;

/// Data of the robust switching game: the switcher picks regimes, nature picks controls
/// from a finite list. Coefficients are black-box callables.
struct ProblemSpec {
    std::string name;
    int dimension = 1;
    double horizon = 1.0;
    int regimes = 1;
    std::vector<Control> control_set;

    DriftFn drift;
    DiffusionFn diffusion;
    RunningCostFn running_cost;
    TerminalPayoffFn terminal_payoff;
    SwitchCostFn switch_cost;

    /// Declared polynomial growth exponent p >= 1 of f, g, c; may be raised by sampling.
    double growth_exponent = 1.0;
    /// Set for instances that deliberately break the no-free-loop property.
    bool h3_violating = false;

    bool valid_regime(RegimeIndex i) const noexcept { return i.value >= 1 && i.value <= regimes; }

    /// Throws InvalidArgument when the structural fields are inconsistent
    /// (non-positive sizes, missing callables, empty or mis-sized control set).
    void check_structure() const;
};

/// Control point with a single coordinate.
Control scalar_control(double u);

enum class Assumption { H1, H2_nonnegative_cost, H2_polynomial_growth, H2_terminal_consistency, H3 };

std::string to_string(Assumption a);

struct AssumptionEntry {
    Assumption assumption = Assumption::H1;
    bool pass = true;
    std::string detail;
    /// Sample where the first violation was seen.
    std::optional<State> witness_point;
    /// Zero-cost regime cycle (first label repeated at the end), H3 only.
    std::vector<RegimeIndex> witness_cycle;
};

struct ValidationReport {
    std::vector<AssumptionEntry> entries;

    // Sampled constants feeding growth_envelope.
    double lipschitz = 0.0;        ///< max finite-difference ratio of b and sigma (L1)
    double linear_growth = 0.0;    ///< M1: max (|b| + ||sigma||) / (1 + |x|)
    double poly_growth = 0.0;      ///< M2: max (|g| + |f| + |c|) / (1 + |x|^p)
    double growth_exponent = 1.0;  ///< p used for M2
    double fitted_exponent = 0.0;  ///< log-log slope of |g|+|f|+|c| on samples with |x| >= 1
    double max_terminal_ratio = 0.0;  ///< max |g| / (1 + |x|^q) with q = max(4, p)
    std::vector<State> samples;

    const AssumptionEntry& entry(Assumption a) const;
    bool all_pass() const;
    /// Failed entries, excluding an H3 failure on a spec flagged h3_violating.
    std::vector<Assumption> unexpected_failures(const ProblemSpec& spec) const;
};

struct NoFreeLoopResult {
    bool pass = true;
    std::vector<RegimeIndex> witness;
};

/// No-free-loop test on one cost matrix (entry (i,j) = c(x, i+1, j+1)). A loop of
/// nonnegative costs has zero total iff each edge is zero, so this is cycle detection
/// on the zero-cost off-diagonal edges. The witness is a shortest such cycle, lowest
/// lexicographic among the shortest, written with its first label repeated.
NoFreeLoopResult no_free_loop(const Eigen::MatrixXd& cost_matrix);

/// Cost matrix of the spec at x.
Eigen::MatrixXd cost_matrix_at(const ProblemSpec& spec, const State& x);

ValidationReport validate_spec(const ProblemSpec& spec, const std::vector<State>& sample_points);

/// Constants of the polynomial envelope v(s,x) = -C e^{lambda (T-s)} (1 + |x|^q).
struct GrowthBounds {
    double L1 = 0.0;
    double M1 = 0.0;
    double M2 = 0.0;
    double p = 1.0;
    double q = 4.0;
    double C = 1.0;
    double lambda = 0.0;
    double M_h = 0.0;
    double C_bar = 0.0;

    /// Envelope value at time s (horizon T) and state x.
    double envelope(double s, double horizon, const State& x) const;
    /// C (1 + |x|^p): the polynomial growth bound of the value.
    double growth_bound(const State& x) const;
};

GrowthBounds growth_envelope(const ProblemSpec& spec, const ValidationReport& report);

/// Evenly spaced tensor samples over a box, `per_dim` points per coordinate.
std::vector<State> box_samples(const Eigen::VectorXd& lower, const Eigen::VectorXd& upper, int per_dim);

}  // namespace rswitch
