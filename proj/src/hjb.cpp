#include "rswitch/hjb.hpp"

#include "rswitch/errors.hpp"
#include "rswitch/parallel.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>

namespace rswitch {

// ---------------------------------------------------------------------------- Grid

Grid::Grid(Eigen::VectorXd lower, Eigen::VectorXd upper, std::vector<int> points, int time_steps, double horizon)
    : lower_(std::move(lower)), upper_(std::move(upper)), points_(std::move(points)), nt_(time_steps), horizon_(horizon) {
    const auto d = lower_.size();
    if (d == 0 || upper_.size() != d || static_cast<Eigen::Index>(points_.size()) != d)
        throw InvalidArgument("grid bounds and point counts must share the dimension");
    if (time_steps < 1) throw InvalidArgument("grid needs at least one time step");
    if (!(horizon > 0.0) || !std::isfinite(horizon)) throw InvalidArgument("grid horizon must be positive");
    dx_.resize(d);
    strides_.assign(d, 1);
    for (Eigen::Index k = 0; k < d; ++k) {
        if (!std::isfinite(lower_[k]) || !std::isfinite(upper_[k]) || !(lower_[k] < upper_[k]))
            throw InvalidArgument("grid bounds must be finite and strictly ordered");
        if (points_[k] < 3 || points_[k] % 2 == 0) throw InvalidArgument("points per dimension must be odd and >= 3");
        dx_[k] = (upper_[k] - lower_[k]) / (points_[k] - 1);
    }
    for (Eigen::Index k = d - 2; k >= 0; --k) strides_[k] = strides_[k + 1] * static_cast<std::size_t>(points_[k + 1]);
    node_count_ = strides_[0] * static_cast<std::size_t>(points_[0]);
    dt_ = horizon_ / nt_;
}

Grid Grid::truncated(int steps) const {
    if (steps < 1 || steps > nt_) throw InvalidArgument("truncated grid needs 1 <= steps <= nt");
    Grid g = *this;
    g.nt_ = steps;
    g.horizon_ = steps == nt_ ? horizon_ : steps * dt_;
    return g;
}

std::vector<int> Grid::multi_index(std::size_t node) const {
    std::vector<int> idx(points_.size());
    for (int k = 0; k < dimension(); ++k) idx[k] = coordinate_index(node, k);
    return idx;
}

std::size_t Grid::flat_index(const std::vector<int>& idx) const {
    std::size_t flat = 0;
    for (int k = 0; k < dimension(); ++k) flat += strides_[k] * static_cast<std::size_t>(idx[k]);
    return flat;
}

State Grid::point(std::size_t node) const {
    State x(dimension());
    for (int k = 0; k < dimension(); ++k)
        x[k] = lower_[k] + (upper_[k] - lower_[k]) * coordinate_index(node, k) / (points_[k] - 1);
    return x;
}

bool Grid::interior(std::size_t node) const noexcept {
    for (int k = 0; k < dimension(); ++k) {
        const int c = coordinate_index(node, k);
        if (c == 0 || c == points_[k] - 1) return false;
    }
    return true;
}

std::size_t Grid::clamp_to_interior(std::size_t node) const {
    auto idx = multi_index(node);
    for (int k = 0; k < dimension(); ++k) idx[k] = std::clamp(idx[k], 1, points_[k] - 2);
    return flat_index(idx);
}

std::size_t Grid::nearest_node(const State& x, bool* clamped) const {
    if (x.size() != dimension()) throw InvalidArgument("query point dimension mismatch");
    std::vector<int> idx(points_.size());
    bool out = false;
    for (int k = 0; k < dimension(); ++k) {
        const double r = (x[k] - lower_[k]) / dx_[k];
        long c = static_cast<long>(std::ceil(r - 0.5));
        if (c < 0 || c > points_[k] - 1) out = true;
        idx[k] = static_cast<int>(std::clamp<long>(c, 0, points_[k] - 1));
    }
    if (clamped) *clamped = out;
    return flat_index(idx);
}

int Grid::nearest_layer(double t, bool* clamped) const {
    const long c = static_cast<long>(std::ceil(t / dt_ - 0.5));
    if (clamped) *clamped = c < 0 || c > nt_;
    return static_cast<int>(std::clamp<long>(c, 0, nt_));
}

std::size_t Grid::center_node() const {
    std::vector<int> idx(points_.size());
    for (int k = 0; k < dimension(); ++k) idx[k] = (points_[k] - 1) / 2;
    return flat_index(idx);
}

// ---------------------------------------------------------------------------- coefficients

CoefficientTable::CoefficientTable(const ProblemSpec& spec, const Grid& grid)
    : d_(spec.dimension), m_(spec.regimes), n_u_(spec.control_set.size()) {
    spec.check_structure();
    if (grid.dimension() != spec.dimension) throw InvalidArgument("grid and problem dimensions differ");
    const std::size_t n = grid.node_count();
    const std::size_t slots = n * m_ * n_u_;
    b_.resize(slots * d_);
    a_.resize(slots * d_ * d_);
    f_.resize(slots);
    c_.resize(n * m_ * m_);
    for (std::size_t node = 0; node < n; ++node) {
        const State x = grid.point(node);
        for (int i = 0; i < m_; ++i) {
            const RegimeIndex ri = RegimeIndex::from_slot(i);
            for (std::size_t u = 0; u < n_u_; ++u) {
                const Control& cu = spec.control_set[u];
                const Eigen::VectorXd b = spec.drift(x, ri, cu);
                const Eigen::MatrixXd s = spec.diffusion(x, ri, cu);
                if (b.size() != d_ || s.rows() != d_ || s.cols() != d_)
                    throw InvalidArgument("drift/diffusion returned a wrongly sized result");
                const Eigen::MatrixXd a = s * s.transpose();
                const std::size_t k = slot(node, i, u);
                Eigen::Map<Eigen::VectorXd>(&b_[k * d_], d_) = b;
                Eigen::Map<Eigen::MatrixXd>(&a_[k * d_ * d_], d_, d_) = a;
                f_[k] = spec.running_cost(x, ri, cu);
                max_a_ = std::max(max_a_, a.norm());
                max_b_ = std::max(max_b_, b.lpNorm<1>());
            }
            for (int j = 0; j < m_; ++j) c_[(node * m_ + i) * m_ + j] = spec.switch_cost(x, ri, RegimeIndex::from_slot(j));
        }
    }
}

double apply_stencil(const Grid& grid, const double* phi, std::size_t node, const double* drift, const double* covariance) {
    const int d = grid.dimension();
    const auto& dx = grid.spacing();
    const double p0 = phi[node];
    double out = 0.0;
    for (int k = 0; k < d; ++k) {
        const std::size_t s = grid.stride(k);
        const double h = dx[k];
        const double up = phi[node + s], dn = phi[node - s];
        const double b = drift[k];
        if (b > 0.0)
            out += b * (up - p0) / h;
        else if (b < 0.0)
            out += b * (p0 - dn) / h;
        const double akk = covariance[k * d + k];
        if (akk != 0.0) out += 0.5 * akk * (up - 2.0 * p0 + dn) / (h * h);
    }
    for (int k = 0; k < d; ++k) {
        for (int l = k + 1; l < d; ++l) {
            const double akl = covariance[l * d + k];
            if (akl == 0.0) continue;
            const std::size_t sk = grid.stride(k), sl = grid.stride(l);
            const double axis = phi[node + sk] + phi[node - sk] + phi[node + sl] + phi[node - sl];
            double mixed;
            if (akl > 0.0)
                mixed = (2.0 * p0 + phi[node + sk + sl] + phi[node - sk - sl] - axis);
            else
                mixed = (axis - 2.0 * p0 - phi[node + sk - sl] - phi[node - sk + sl]);
            out += akl * mixed / (2.0 * dx[k] * dx[l]);
        }
    }
    return out;
}

double cfl_time_step_bound(const ProblemSpec& spec, const Grid& grid, const GridOptions& options) {
    const CoefficientTable table(spec, grid);
    const double h = grid.spacing().minCoeff();
    const double denom = grid.dimension() * table.max_covariance_norm() + h * table.max_drift_l1() + options.cfl_epsilon;
    if (!(denom > 0.0)) return std::numeric_limits<double>::infinity();
    return h * h / denom;
}

Grid build_grid(const ProblemSpec& spec, const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                const std::vector<int>& points, int nt_hint, const GridOptions& options) {
    spec.check_structure();
    if (nt_hint < 1) throw InvalidArgument("nt_hint must be >= 1");
    if (lower.size() != spec.dimension) throw InvalidArgument("grid bounds must match the problem dimension");
    const Grid mesh(lower, upper, points, 1, spec.horizon);
    const CoefficientTable table(spec, mesh);

    // Mixed derivatives are monotone only for diagonally dominant covariance.
    const int d = spec.dimension;
    if (d > 1) {
        const auto& dx = mesh.spacing();
        for (std::size_t node = 0; node < mesh.node_count(); ++node)
            for (int i = 0; i < spec.regimes; ++i)
                for (std::size_t u = 0; u < table.controls(); ++u) {
                    const double* a = table.covariance(node, i, u);
                    for (int k = 0; k < d; ++k) {
                        double off = 0.0;
                        for (int l = 0; l < d; ++l)
                            if (l != k) off += std::abs(a[l * d + k]) / (dx[k] * dx[l]);
                        if (a[k * d + k] / (dx[k] * dx[k]) < off - 1e-12)
                            throw ConfigurationError("covariance is not diagonally dominant on this mesh; the scheme would not be monotone");
                    }
                }
    }

    const double h = mesh.spacing().minCoeff();
    const double denom = d * table.max_covariance_norm() + h * table.max_drift_l1() + options.cfl_epsilon;
    const double bound = h * h / denom;
    long nt = nt_hint;
    if (spec.horizon / nt > bound) {
        const double need = std::ceil(spec.horizon / bound);
        if (!(need <= static_cast<double>(options.max_time_steps)))
            throw ConfigurationError(fmt::format("CFL bound dt <= {:.3e} needs more than {} time steps", bound, options.max_time_steps));
        nt = std::max<long>(nt, static_cast<long>(need));
        while (spec.horizon / nt > bound) ++nt;
    }
    if (nt > options.max_time_steps)
        throw ConfigurationError(fmt::format("time step count {} exceeds the ceiling {}", nt, options.max_time_steps));
    return Grid(lower, upper, points, static_cast<int>(nt), spec.horizon);
}

Grid build_grid(const ProblemSpec& spec, double lower, double upper, int points, int nt_hint, const GridOptions& options) {
    if (spec.dimension != 1) throw InvalidArgument("scalar bounds need a one-dimensional problem");
    Eigen::VectorXd lo(1), hi(1);
    lo[0] = lower;
    hi[0] = upper;
    return build_grid(spec, lo, hi, std::vector<int>{points}, nt_hint, options);
}

// ---------------------------------------------------------------------------- pointwise operators

double generator_apply(const ProblemSpec& spec, const Grid& grid, const Eigen::Ref<const Eigen::VectorXd>& slice,
                       std::size_t node, RegimeIndex i, std::size_t control) {
    if (node >= grid.node_count() || !grid.interior(node))
        throw OutOfDomain(fmt::format("node {} is not an interior grid node", node));
    if (!spec.valid_regime(i)) throw InvalidArgument("regime out of range");
    if (control >= spec.control_set.size()) throw InvalidArgument("control index out of range");
    if (static_cast<std::size_t>(slice.size()) != grid.node_count()) throw InvalidArgument("slice size must equal node count");
    const State x = grid.point(node);
    const Eigen::VectorXd b = spec.drift(x, i, spec.control_set[control]);
    const Eigen::MatrixXd s = spec.diffusion(x, i, spec.control_set[control]);
    const Eigen::MatrixXd a = s * s.transpose();
    const Eigen::VectorXd phi = slice;
    return apply_stencil(grid, phi.data(), node, b.data(), a.data());
}

HamiltonianValue hamiltonian(const ProblemSpec& spec, const Grid& grid, std::size_t node, RegimeIndex i,
                             const Eigen::Ref<const Eigen::VectorXd>& slice) {
    HamiltonianValue best{std::numeric_limits<double>::infinity(), 0};
    const State x = grid.point(node);
    for (std::size_t u = 0; u < spec.control_set.size(); ++u) {
        const double v = generator_apply(spec, grid, slice, node, i, u) + spec.running_cost(x, i, spec.control_set[u]);
        if (v < best.value) best = {v, u};
    }
    return best;
}

ObstacleValue switch_obstacle(const Eigen::Ref<const Eigen::VectorXd>& values_at_node, const State& x, RegimeIndex i,
                              const ProblemSpec& spec) {
    if (values_at_node.size() != spec.regimes) throw InvalidArgument("need one value per regime");
    ObstacleValue out{-std::numeric_limits<double>::infinity(), std::nullopt};
    for (int j = 0; j < spec.regimes; ++j) {
        if (j == i.slot()) continue;
        const RegimeIndex rj = RegimeIndex::from_slot(j);
        const double cand = values_at_node[j] - spec.switch_cost(x, i, rj);
        if (!out.target || cand > out.value) out = {cand, rj};
    }
    return out;
}

std::string to_string(FieldLabel label) {
    switch (label) {
        case FieldLabel::V: return "V";
        case FieldLabel::V_hat: return "V_hat";
        case FieldLabel::V_FS: return "V_FS";
        case FieldLabel::U_FS: return "U_FS";
        case FieldLabel::Envelope: return "envelope";
    }
    return "?";
}

double ValueField::interpolate(int k, const State& x, RegimeIndex i) const {
    const int d = grid.dimension();
    if (x.size() != d) throw InvalidArgument("query point dimension mismatch");
    std::vector<int> base(d);
    std::vector<double> w(d);
    for (int a = 0; a < d; ++a) {
        const int n = grid.points()[a];
        const double r = std::clamp((x[a] - grid.lower()[a]) / grid.spacing()[a], 0.0, static_cast<double>(n - 1));
        base[a] = std::min(static_cast<int>(std::floor(r)), n - 2);
        w[a] = r - base[a];
    }
    double out = 0.0;
    for (int corner = 0; corner < (1 << d); ++corner) {
        double weight = 1.0;
        std::vector<int> idx = base;
        for (int a = 0; a < d; ++a) {
            const bool hi = (corner >> a) & 1;
            idx[a] += hi;
            weight *= hi ? w[a] : 1.0 - w[a];
        }
        if (weight != 0.0) out += weight * value(k, grid.flat_index(idx), i);
    }
    return out;
}

// ---------------------------------------------------------------------------- scheme

void extrapolate_boundary(const Grid& grid, Eigen::MatrixXd& values) {
    const std::size_t n_nodes = grid.node_count();
    for (int k = 0; k < grid.dimension(); ++k) {
        const int n = grid.points()[k];
        const std::size_t s = grid.stride(k);
        for (std::size_t node = 0; node < n_nodes; ++node) {
            const int c = grid.coordinate_index(node, k);
            if (c != 0 && c != n - 1) continue;
            const bool low = c == 0;
            const std::size_t near = low ? node + s : node - s;
            const std::size_t far = low ? node + 2 * s : node - 2 * s;
            for (Eigen::Index col = 0; col < values.cols(); ++col) {
                const auto r_near = static_cast<Eigen::Index>(near), r_far = static_cast<Eigen::Index>(far);
                values(static_cast<Eigen::Index>(node), col) =
                    n >= 4 ? 2.0 * values(r_near, col) - values(r_far, col) : values(r_near, col);
            }
        }
    }
}

BackwardScheme::BackwardScheme(const ProblemSpec& spec, const Grid& grid, SolverOptions options)
    : spec_(spec), grid_(grid), options_(options), table_(spec, grid) {}

HamiltonianValue BackwardScheme::hamiltonian_at(const double* slice, std::size_t node, int regime_slot) const {
    HamiltonianValue best{std::numeric_limits<double>::infinity(), 0};
    for (std::size_t u = 0; u < table_.controls(); ++u) {
        const double v = apply_stencil(grid_, slice, node, table_.drift(node, regime_slot, u),
                                       table_.covariance(node, regime_slot, u)) +
                         table_.running(node, regime_slot, u);
        if (v < best.value) best = {v, u};
    }
    return best;
}

void BackwardScheme::continuation(const Eigen::MatrixXd& next, Eigen::MatrixXd& w, Eigen::MatrixXi& argmin) const {
    const int m = spec_.regimes;
    const std::size_t n = grid_.node_count();
    const double dt = grid_.dt();
    w = next;
    argmin.setZero(static_cast<Eigen::Index>(n), m);
    parallel_for(n, options_.threads, [&](std::size_t node) {
        if (!grid_.interior(node)) return;
        const auto r = static_cast<Eigen::Index>(node);
        for (int i = 0; i < m; ++i) {
            const HamiltonianValue h = hamiltonian_at(next.col(i).data(), node, i);
            w(r, i) = next(r, i) + dt * h.value;
            argmin(r, i) = static_cast<int>(h.argmin);
        }
    });
    extrapolate_boundary(grid_, w);
    for (std::size_t node = 0; node < n; ++node) {
        if (grid_.interior(node)) continue;
        argmin.row(static_cast<Eigen::Index>(node)) = argmin.row(static_cast<Eigen::Index>(grid_.clamp_to_interior(node)));
    }
}

StepOutput BackwardScheme::step(const Eigen::MatrixXd& next) const {
    const int m = spec_.regimes;
    const std::size_t n = grid_.node_count();
    StepOutput out;
    Eigen::MatrixXd w;
    continuation(next, w, out.argmin);
    out.layer = w;
    out.targets.setZero(static_cast<Eigen::Index>(n), m);
    if (m == 1) return out;

    const int cap = spec_.h3_violating ? (options_.h3_violating_sweep_cap > 0 ? options_.h3_violating_sweep_cap : 4 * m) : m - 1;
    const double tol = options_.obstacle_tolerance;
    std::vector<long> hits(n, 0);

    parallel_for(n, options_.threads, [&](std::size_t node) {
        const auto r = static_cast<Eigen::Index>(node);
        int changing = 0;
        while (true) {
            bool changed = false;
            for (int s = 0; s < m; ++s) {
                const int i = options_.reverse_sweep ? m - 1 - s : s;
                double best = -std::numeric_limits<double>::infinity();
                for (int j = 0; j < m; ++j) {
                    if (j == i) continue;
                    best = std::max(best, out.layer(r, j) - table_.cost(node, i, j));
                }
                if (best > out.layer(r, i)) {
                    out.layer(r, i) = best;
                    changed = true;
                }
            }
            if (!changed) break;
            if (++changing > cap) {
                if (!spec_.h3_violating)
                    throw H3Violation(fmt::format("obstacle projection did not settle after {} sweeps at node {}", cap, node));
                ++hits[node];
                break;
            }
        }
        for (int i = 0; i < m; ++i) {
            if (!(out.layer(r, i) > w(r, i) + tol)) continue;
            int target = -1;
            double best = -std::numeric_limits<double>::infinity();
            for (int j = 0; j < m; ++j) {
                if (j == i) continue;
                const double cand = out.layer(r, j) - table_.cost(node, i, j);
                if (target < 0 || cand > best) best = cand, target = j;
            }
            out.targets(r, i) = target + 1;
        }
    });
    for (long h : hits) out.sweep_cap_hits += h;
    return out;
}

Eigen::MatrixXd BackwardScheme::terminal_layer() const {
    const std::size_t n = grid_.node_count();
    Eigen::MatrixXd g(static_cast<Eigen::Index>(n), spec_.regimes);
    for (std::size_t node = 0; node < n; ++node) {
        const State x = grid_.point(node);
        for (int i = 0; i < spec_.regimes; ++i) g(static_cast<Eigen::Index>(node), i) = spec_.terminal_payoff(x, RegimeIndex::from_slot(i));
    }
    return g;
}

StepOutput BackwardScheme::terminal_policy(const Eigen::MatrixXd& terminal) const {
    StepOutput out;
    Eigen::MatrixXd w;
    continuation(terminal, w, out.argmin);
    out.layer = terminal;
    out.targets.setZero(terminal.rows(), terminal.cols());
    return out;
}

StepOutput step_backward(const ProblemSpec& spec, const Grid& grid, const Eigen::MatrixXd& next, const SolverOptions& options) {
    if (next.rows() != static_cast<Eigen::Index>(grid.node_count()) || next.cols() != spec.regimes)
        throw InvalidArgument("layer shape must be node_count x regimes");
    if (!next.allFinite()) throw InvalidArgument("layer must be finite");
    return BackwardScheme(spec, grid, options).step(next);
}

namespace {

SolveResult march(const BackwardScheme& scheme, const Grid& grid, const Eigen::MatrixXd& terminal, int steps,
                  const std::vector<Control>& controls) {
    SolveResult result;
    result.values.grid = grid;
    result.values.label = FieldLabel::V;
    result.values.layers.resize(steps + 1);
    result.policy.grid = grid;
    result.policy.control_set = controls;
    result.policy.targets.resize(steps + 1);
    result.policy.argmin.resize(steps + 1);

    StepOutput top = scheme.terminal_policy(terminal);
    result.values.layers[steps] = std::move(top.layer);
    result.policy.targets[steps] = std::move(top.targets);
    result.policy.argmin[steps] = std::move(top.argmin);
    for (int k = steps - 1; k >= 0; --k) {
        StepOutput out = scheme.step(result.values.layers[k + 1]);
        if (!out.layer.allFinite())
            throw NumericalBlowup(fmt::format("non-finite value produced at time step {} (t = {:.6g})", k, grid.time(k)), k);
        result.sweep_cap_hits += out.sweep_cap_hits;
        result.values.layers[k] = std::move(out.layer);
        result.policy.targets[k] = std::move(out.targets);
        result.policy.argmin[k] = std::move(out.argmin);
    }
    return result;
}

}  // namespace

SolveResult solve(const ProblemSpec& spec, const Grid& grid, const SolverOptions& options) {
    const BackwardScheme scheme(spec, grid, options);
    return march(scheme, grid, scheme.terminal_layer(), grid.time_steps(), spec.control_set);
}

SolveResult solve_from(const ProblemSpec& spec, const Grid& grid, const Eigen::MatrixXd& terminal, int steps,
                       const SolverOptions& options) {
    const Grid sub = grid.truncated(steps);
    if (terminal.rows() != static_cast<Eigen::Index>(grid.node_count()) || terminal.cols() != spec.regimes)
        throw InvalidArgument("terminal layer shape must be node_count x regimes");
    const BackwardScheme scheme(spec, sub, options);
    return march(scheme, sub, terminal, steps, spec.control_set);
}

// ---------------------------------------------------------------------------- diagnostics

ResidualStats residual_check(const ValueField& field, const ProblemSpec& spec, const SolverOptions& options) {
    const Grid& grid = field.grid;
    const BackwardScheme scheme(spec, grid, options);
    const auto& table = scheme.coefficients();
    const int m = spec.regimes;
    const int nt = grid.time_steps();
    const double dt = grid.dt();
    if (static_cast<int>(field.layers.size()) != nt + 1 || field.regimes() != m)
        throw InvalidArgument("field does not match the grid/problem");

    auto obstacle_residual = [&](const Eigen::MatrixXd& layer, std::size_t node, int i) {
        double best = -std::numeric_limits<double>::infinity();
        for (int j = 0; j < m; ++j)
            if (j != i) best = std::max(best, layer(static_cast<Eigen::Index>(node), j) - table.cost(node, i, j));
        return layer(static_cast<Eigen::Index>(node), i) - best;
    };

    ResidualStats stats;
    stats.tolerance = options.complementarity_tol(dt);
    double sum = 0.0;
    long count = 0;
    for (int k = 0; k < nt; ++k) {
        const Eigen::MatrixXd& cur = field.layers[k];
        const Eigen::MatrixXd& next = field.layers[k + 1];
        for (std::size_t node = 0; node < grid.node_count(); ++node) {
            if (!grid.interior(node)) continue;
            const auto r = static_cast<Eigen::Index>(node);
            for (int i = 0; i < m; ++i) {
                const double pde = (cur(r, i) - next(r, i)) / dt - scheme.hamiltonian_at(next.col(i).data(), node, i).value;
                const double res = std::abs(std::min(pde, obstacle_residual(cur, node, i)));
                sum += res;
                ++count;
                if (res > stats.max || count == 1) {
                    stats.max = res;
                    stats.max_layer = k;
                    stats.max_node = node;
                    stats.max_regime = i + 1;
                }
            }
        }
    }
    stats.mean = count ? sum / count : 0.0;

    stats.terminal_obstacle_min = std::numeric_limits<double>::infinity();
    for (std::size_t node = 0; node < grid.node_count(); ++node)
        for (int i = 0; i < m; ++i)
            stats.terminal_obstacle_min = std::min(stats.terminal_obstacle_min, obstacle_residual(field.layers[nt], node, i));
    return stats;
}

FieldInvariants check_field_invariants(const ValueField& field, const ProblemSpec& spec) {
    FieldInvariants inv;
    const Grid& grid = field.grid;
    const int m = spec.regimes;
    const int nt = grid.time_steps();
    for (const auto& layer : field.layers) inv.all_finite = inv.all_finite && layer.allFinite();
    for (std::size_t node = 0; node < grid.node_count(); ++node) {
        const State x = grid.point(node);
        for (int i = 0; i < m; ++i)
            inv.terminal_max_error = std::max(inv.terminal_max_error,
                std::abs(field.value(nt, node, RegimeIndex::from_slot(i)) - spec.terminal_payoff(x, RegimeIndex::from_slot(i))));
    }
    if (m > 1) {
        const CoefficientTable table(spec, grid);
        // The terminal layer is g itself and is judged by terminal consistency instead.
        for (int k = 0; k < nt; ++k)
            for (std::size_t node = 0; node < grid.node_count(); ++node) {
                if (!grid.interior(node)) continue;
                const Eigen::MatrixXd& layer = field.layers[static_cast<std::size_t>(k)];
                const auto r = static_cast<Eigen::Index>(node);
                for (int i = 0; i < m; ++i)
                    for (int j = 0; j < m; ++j)
                        if (j != i)
                            inv.max_obstacle_violation = std::max(inv.max_obstacle_violation, layer(r, j) - table.cost(node, i, j) - layer(r, i));
            }
    }
    return inv;
}

}  // namespace rswitch
