#include "rswitch/game.hpp"

#include "rswitch/errors.hpp"
#include "rswitch/parallel.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <limits>

namespace rswitch {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Game Hamiltonian from a matrix of payoffs indexed (regime, control).
double combine(const Eigen::MatrixXd& payoff, GameSide side) {
    if (side == GameSide::Lower) return payoff.rowwise().minCoeff().maxCoeff();
    return payoff.colwise().maxCoeff().minCoeff();
}

double isaacs_at(const CoefficientTable& table, const Grid& grid, const double* slice, std::size_t node, GameSide side) {
    Eigen::MatrixXd payoff(table.regimes(), static_cast<Eigen::Index>(table.controls()));
    for (int i = 0; i < table.regimes(); ++i)
        for (std::size_t u = 0; u < table.controls(); ++u)
            payoff(i, static_cast<Eigen::Index>(u)) =
                apply_stencil(grid, slice, node, table.drift(node, i, u), table.covariance(node, i, u)) + table.running(node, i, u);
    return combine(payoff, side);
}

double isaacs_pointwise(const ProblemSpec& spec, const Grid& grid, std::size_t node,
                        const Eigen::Ref<const Eigen::VectorXd>& slice, GameSide side) {
    if (static_cast<std::size_t>(slice.size()) != grid.node_count()) throw InvalidArgument("slice size must equal node count");
    Eigen::MatrixXd payoff(spec.regimes, static_cast<Eigen::Index>(spec.control_set.size()));
    const State x = grid.point(node);
    for (int i = 0; i < spec.regimes; ++i) {
        const RegimeIndex ri = RegimeIndex::from_slot(i);
        for (std::size_t u = 0; u < spec.control_set.size(); ++u)
            payoff(i, static_cast<Eigen::Index>(u)) =
                generator_apply(spec, grid, slice, node, ri, u) + spec.running_cost(x, ri, spec.control_set[u]);
    }
    return combine(payoff, side);
}

}  // namespace

double lower_isaacs_hamiltonian(const ProblemSpec& spec, const Grid& grid, std::size_t node,
                                const Eigen::Ref<const Eigen::VectorXd>& slice) {
    return isaacs_pointwise(spec, grid, node, slice, GameSide::Lower);
}

double upper_isaacs_hamiltonian(const ProblemSpec& spec, const Grid& grid, std::size_t node,
                                const Eigen::Ref<const Eigen::VectorXd>& slice) {
    return isaacs_pointwise(spec, grid, node, slice, GameSide::Upper);
}

ValueField solve_isaacs(const ProblemSpec& spec, const Grid& grid, GameSide side, const SolverOptions& options) {
    const CoefficientTable table(spec, grid);
    const std::size_t n = grid.node_count();
    const int nt = grid.time_steps();
    const double dt = grid.dt();

    ValueField field;
    field.grid = grid;
    field.label = side == GameSide::Lower ? FieldLabel::V_FS : FieldLabel::U_FS;
    field.layers.resize(nt + 1);

    Eigen::MatrixXd terminal(static_cast<Eigen::Index>(n), 1);
    for (std::size_t node = 0; node < n; ++node) {
        const State x = grid.point(node);
        double g = -kInf;
        for (int i = 0; i < spec.regimes; ++i) g = std::max(g, spec.terminal_payoff(x, RegimeIndex::from_slot(i)));
        terminal(static_cast<Eigen::Index>(node), 0) = g;
    }
    field.layers[nt] = std::move(terminal);

    for (int k = nt - 1; k >= 0; --k) {
        const Eigen::MatrixXd& next = field.layers[k + 1];
        Eigen::MatrixXd cur = next;
        parallel_for(n, options.threads, [&](std::size_t node) {
            if (!grid.interior(node)) return;
            const auto r = static_cast<Eigen::Index>(node);
            cur(r, 0) = next(r, 0) + dt * isaacs_at(table, grid, next.data(), node, side);
        });
        extrapolate_boundary(grid, cur);
        if (!cur.allFinite())
            throw NumericalBlowup(fmt::format("non-finite game value at time step {} (t = {:.6g})", k, grid.time(k)), k);
        field.layers[k] = std::move(cur);
    }
    return field;
}

IsaacsReport isaacs_check(const ProblemSpec& spec, const std::vector<Eigen::VectorXd>& p_samples, const State& x_ref,
                          double tolerance) {
    spec.check_structure();
    if (p_samples.empty()) throw InvalidArgument("isaacs_check needs gradient samples");
    if (x_ref.size() != spec.dimension) throw InvalidArgument("reference point dimension mismatch");

    const int m = spec.regimes;
    const auto n_u = static_cast<Eigen::Index>(spec.control_set.size());
    std::vector<Eigen::VectorXd> drift;
    Eigen::MatrixXd running(m, n_u);
    for (int i = 0; i < m; ++i)
        for (Eigen::Index u = 0; u < n_u; ++u) {
            drift.push_back(spec.drift(x_ref, RegimeIndex::from_slot(i), spec.control_set[u]));
            running(i, u) = spec.running_cost(x_ref, RegimeIndex::from_slot(i), spec.control_set[u]);
        }

    IsaacsReport report;
    report.tolerance = tolerance;
    for (const auto& p : p_samples) {
        if (p.size() != spec.dimension) throw InvalidArgument("gradient sample dimension mismatch");
        Eigen::MatrixXd payoff(m, n_u);
        for (int i = 0; i < m; ++i)
            for (Eigen::Index u = 0; u < n_u; ++u) payoff(i, u) = drift[i * n_u + u].dot(p) + running(i, u);
        IsaacsSample s{p, combine(payoff, GameSide::Lower), combine(payoff, GameSide::Upper), 0.0};
        s.gap = s.upper - s.lower;
        report.max_gap = std::max(report.max_gap, s.gap);
        report.holds = report.holds && s.gap <= tolerance;
        report.samples.push_back(std::move(s));
    }
    return report;
}

IsaacsReport isaacs_check(const ProblemSpec& spec, const std::vector<double>& p_samples, double tolerance) {
    if (spec.dimension != 1) throw InvalidArgument("scalar gradient samples need a one-dimensional problem");
    std::vector<Eigen::VectorXd> ps;
    for (double p : p_samples) ps.push_back(Eigen::VectorXd::Constant(1, p));
    return isaacs_check(spec, ps, State::Zero(1), tolerance);
}

}  // namespace rswitch
