#pragma once

#include "rswitch/problem_model.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace rswitch {

/// Tensor grid on a truncated box with uniform time steps on [0, T].
/// Flat node indices are lexicographic in the multi-index (first coordinate slowest).
class Grid {
public:
    Grid() = default;
    Grid(Eigen::VectorXd lower, Eigen::VectorXd upper, std::vector<int> points, int time_steps, double horizon);

    int dimension() const noexcept { return static_cast<int>(lower_.size()); }
    const Eigen::VectorXd& lower() const noexcept { return lower_; }
    const Eigen::VectorXd& upper() const noexcept { return upper_; }
    const Eigen::VectorXd& spacing() const noexcept { return dx_; }
    const std::vector<int>& points() const noexcept { return points_; }
    int time_steps() const noexcept { return nt_; }
    double horizon() const noexcept { return horizon_; }
    double dt() const noexcept { return dt_; }
    double time(int k) const noexcept { return k == nt_ ? horizon_ : k * dt_; }
    /// Same mesh and time step restricted to layers 0..steps.
    Grid truncated(int steps) const;

    std::size_t node_count() const noexcept { return node_count_; }
    std::size_t stride(int dim) const noexcept { return strides_[dim]; }
    std::vector<int> multi_index(std::size_t node) const;
    std::size_t flat_index(const std::vector<int>& idx) const;
    int coordinate_index(std::size_t node, int dim) const noexcept {
        return static_cast<int>((node / strides_[dim]) % static_cast<std::size_t>(points_[dim]));
    }
    State point(std::size_t node) const;
    /// True when every coordinate index lies in [1, n-2].
    bool interior(std::size_t node) const noexcept;
    /// Interior node closest to `node` (coordinates clamped to [1, n-2]).
    std::size_t clamp_to_interior(std::size_t node) const;
    /// Nearest node to x (ties to the lower index, out-of-box queries clamped).
    std::size_t nearest_node(const State& x, bool* clamped = nullptr) const;
    /// Nearest time layer to t (ties to the lower index, clamped to [0, nt]).
    int nearest_layer(double t, bool* clamped = nullptr) const;
    /// Node at the domain center (exists because point counts are odd).
    std::size_t center_node() const;

private:
    Eigen::VectorXd lower_, upper_, dx_;
    std::vector<int> points_;
    std::vector<std::size_t> strides_;
    std::size_t node_count_ = 0;
    int nt_ = 1;
    double horizon_ = 1.0;
    double dt_ = 1.0;
};

struct GridOptions {
    double cfl_epsilon = 1e-12;
    long max_time_steps = 20'000'000;
};

/// Builds a grid whose time step satisfies the explicit-scheme bound
/// dt <= dx^2 / (d max||sigma sigma^T|| + dx max|b| + eps), coefficient maxima taken over all nodes.
Grid build_grid(const ProblemSpec& spec, const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                const std::vector<int>& points, int nt_hint, const GridOptions& options = {});
Grid build_grid(const ProblemSpec& spec, double lower, double upper, int points, int nt_hint,
                const GridOptions& options = {});

/// Largest dt the CFL bound admits on `grid`'s spatial mesh (infinity when nothing moves).
double cfl_time_step_bound(const ProblemSpec& spec, const Grid& grid, const GridOptions& options = {});

/// Coefficients b, sigma sigma^T, f at every (node, regime, control) and c at every node.
/// The data is time independent, so one table serves a whole solve.
class CoefficientTable {
public:
    CoefficientTable(const ProblemSpec& spec, const Grid& grid);

    int regimes() const noexcept { return m_; }
    std::size_t controls() const noexcept { return n_u_; }
    const double* drift(std::size_t node, int regime_slot, std::size_t u) const noexcept {
        return &b_[slot(node, regime_slot, u) * d_];
    }
    const double* covariance(std::size_t node, int regime_slot, std::size_t u) const noexcept {
        return &a_[slot(node, regime_slot, u) * d_ * d_];
    }
    double running(std::size_t node, int regime_slot, std::size_t u) const noexcept { return f_[slot(node, regime_slot, u)]; }
    double cost(std::size_t node, int from_slot, int to_slot) const noexcept {
        return c_[(node * m_ + from_slot) * m_ + to_slot];
    }
    double max_covariance_norm() const noexcept { return max_a_; }
    double max_drift_l1() const noexcept { return max_b_; }

private:
    std::size_t slot(std::size_t node, int i, std::size_t u) const noexcept { return (node * m_ + i) * n_u_ + u; }

    int d_, m_;
    std::size_t n_u_;
    std::vector<double> b_, a_, f_, c_;
    double max_a_ = 0.0, max_b_ = 0.0;
};

/// Discrete L^{i,u}phi at an interior node from raw coefficients: upwind first
/// differences in the sign of each drift component, central second differences, and the
/// directional 7-point stencil for mixed derivatives.
double apply_stencil(const Grid& grid, const double* phi, std::size_t node, const double* drift, const double* covariance);

/// Discrete generator L^{i,u} applied to a spatial slice at an interior node.
double generator_apply(const ProblemSpec& spec, const Grid& grid, const Eigen::Ref<const Eigen::VectorXd>& slice,
                       std::size_t node, RegimeIndex i, std::size_t control);

struct HamiltonianValue {
    double value = 0.0;
    std::size_t argmin = 0;  ///< index into spec.control_set
};

/// min over the control list of L^{i,u}phi + f(x,i,u); first control wins ties.
HamiltonianValue hamiltonian(const ProblemSpec& spec, const Grid& grid, std::size_t node, RegimeIndex i,
                             const Eigen::Ref<const Eigen::VectorXd>& slice);

struct ObstacleValue {
    double value = 0.0;  ///< -infinity when m = 1
    std::optional<RegimeIndex> target;
};

/// max_{j != i} [values(j) - c(x,i,j)], lowest j on ties.
ObstacleValue switch_obstacle(const Eigen::Ref<const Eigen::VectorXd>& values_at_node, const State& x, RegimeIndex i,
                              const ProblemSpec& spec);

enum class FieldLabel { V, V_hat, V_FS, U_FS, Envelope };

std::string to_string(FieldLabel label);

/// Values on (time layer, node, regime). layers[k] is node_count x regimes.
struct ValueField {
    Grid grid;
    FieldLabel label = FieldLabel::V;
    std::vector<Eigen::MatrixXd> layers;

    int regimes() const noexcept { return layers.empty() ? 0 : static_cast<int>(layers.front().cols()); }
    double value(int k, std::size_t node, RegimeIndex i) const { return layers[k](static_cast<Eigen::Index>(node), i.slot()); }
    /// Linear interpolation in space on layer k (multilinear for d > 1), clamped to the box.
    double interpolate(int k, const State& x, RegimeIndex i) const;
};

/// Per-node switching decision and nature's minimizing control.
struct PolicyField {
    Grid grid;
    std::vector<Control> control_set;
    /// targets[k](node, i): 0 for STAY, otherwise the regime label switched to.
    std::vector<Eigen::MatrixXi> targets;
    /// argmin[k](node, i): index into control_set.
    std::vector<Eigen::MatrixXi> argmin;

    std::optional<RegimeIndex> switch_target(int k, std::size_t node, RegimeIndex i) const {
        const int t = targets[k](static_cast<Eigen::Index>(node), i.slot());
        return t == 0 ? std::nullopt : std::optional<RegimeIndex>(RegimeIndex{t});
    }
    std::size_t adversary_index(int k, std::size_t node, RegimeIndex i) const {
        return static_cast<std::size_t>(argmin[k](static_cast<Eigen::Index>(node), i.slot()));
    }
};

struct SolverOptions {
    double obstacle_tolerance = 1e-9;
    /// Complementarity tolerance; non-positive means obstacle_tolerance / dt.
    double complementarity_tolerance = 0.0;
    /// Sweep regimes in decreasing order during obstacle projection.
    bool reverse_sweep = false;
    /// Changing-sweep cap for specs flagged H3-violating; non-positive means 4 m.
    int h3_violating_sweep_cap = 0;
    unsigned threads = 1;

    double complementarity_tol(double dt) const {
        return complementarity_tolerance > 0.0 ? complementarity_tolerance : obstacle_tolerance / dt;
    }
};

struct StepOutput {
    Eigen::MatrixXd layer;
    Eigen::MatrixXi targets;
    Eigen::MatrixXi argmin;
    long sweep_cap_hits = 0;
};

/// Explicit monotone backward step with switching-obstacle projection.
class BackwardScheme {
public:
    BackwardScheme(const ProblemSpec& spec, const Grid& grid, SolverOptions options = {});

    StepOutput step(const Eigen::MatrixXd& next) const;
    /// Policy attached to the terminal layer: STAY everywhere, argmin of the Hamiltonian.
    StepOutput terminal_policy(const Eigen::MatrixXd& terminal) const;
    Eigen::MatrixXd terminal_layer() const;

    const CoefficientTable& coefficients() const noexcept { return table_; }
    const Grid& grid() const noexcept { return grid_; }
    const SolverOptions& options() const noexcept { return options_; }

    /// Hamiltonian at an interior node from the cached coefficients.
    HamiltonianValue hamiltonian_at(const double* slice, std::size_t node, int regime_slot) const;
    /// Continuation values W = next + dt H on interior nodes, linear extrapolation on the boundary.
    void continuation(const Eigen::MatrixXd& next, Eigen::MatrixXd& w, Eigen::MatrixXi& argmin) const;

private:
    const ProblemSpec& spec_;
    Grid grid_;
    SolverOptions options_;
    CoefficientTable table_;
};

/// Overwrites boundary nodes of each column with linear extrapolation from the two
/// nearest nodes inward, one dimension at a time.
void extrapolate_boundary(const Grid& grid, Eigen::MatrixXd& values);

StepOutput step_backward(const ProblemSpec& spec, const Grid& grid, const Eigen::MatrixXd& next,
                         const SolverOptions& options = {});

struct SolveResult {
    ValueField values;
    PolicyField policy;
    long sweep_cap_hits = 0;
};

SolveResult solve(const ProblemSpec& spec, const Grid& grid, const SolverOptions& options = {});

/// Marches `steps` layers backward from `terminal`, which is placed at layer `steps`.
/// The returned field has layers 0..steps on the same spatial mesh and time step.
SolveResult solve_from(const ProblemSpec& spec, const Grid& grid, const Eigen::MatrixXd& terminal, int steps,
                       const SolverOptions& options = {});

struct ResidualStats {
    double max = 0.0;
    double mean = 0.0;
    int max_layer = 0;
    std::size_t max_node = 0;
    int max_regime = 1;
    /// min over terminal-layer nodes of V_i - max_{j!=i}[V_j - c] (+inf when m = 1).
    double terminal_obstacle_min = 0.0;
    double tolerance = 0.0;
    bool within_tolerance() const noexcept { return max <= tolerance; }
};

/// |min(PDE residual, obstacle residual)| over interior nodes of layers 0..nt-1,
/// using the same discrete operators as the scheme.
ResidualStats residual_check(const ValueField& field, const ProblemSpec& spec, const SolverOptions& options = {});

struct FieldInvariants {
    double terminal_max_error = 0.0;
    double max_obstacle_violation = 0.0;  ///< max over interior nodes of layers 0..nt-1 of (obstacle - V)_+
    bool all_finite = true;
};

FieldInvariants check_field_invariants(const ValueField& field, const ProblemSpec& spec);

}  // namespace rswitch
