#pragma once

#include "rswitch/hjb.hpp"

#include <Eigen/Dense>

#include <vector>

namespace rswitch {

/// Which order the two players commit in. LOWER: max over regimes of min over controls;
/// UPPER: min over controls of max over regimes.
enum class GameSide { Lower, Upper };

/// Discrete max_i min_u [L^{i,u}w + f] at an interior node of a single (regime-free) slice.
double lower_isaacs_hamiltonian(const ProblemSpec& spec, const Grid& grid, std::size_t node,
                                const Eigen::Ref<const Eigen::VectorXd>& slice);
/// Discrete min_u max_i [L^{i,u}w + f].
double upper_isaacs_hamiltonian(const ProblemSpec& spec, const Grid& grid, std::size_t node,
                                const Eigen::Ref<const Eigen::VectorXd>& slice);

/// Backward explicit solve of the first-order game equation with w(T,x) = max_i g(x,i).
/// The result has one regime column and is labelled V_FS (lower) or U_FS (upper).
ValueField solve_isaacs(const ProblemSpec& spec, const Grid& grid, GameSide side, const SolverOptions& options = {});

struct IsaacsSample {
    Eigen::VectorXd p;
    double lower = 0.0;
    double upper = 0.0;
    double gap = 0.0;
};

struct IsaacsReport {
    std::vector<IsaacsSample> samples;
    double max_gap = 0.0;
    double tolerance = 1e-9;
    bool holds = true;
};

/// Evaluates H-(p) = max_i min_u [b(x,i,u).p + f] and H+(p) = min_u max_i [...] at x_ref
/// for each gradient sample. The Isaacs condition holds iff no gap exceeds the tolerance.
IsaacsReport isaacs_check(const ProblemSpec& spec, const std::vector<Eigen::VectorXd>& p_samples,
                          const State& x_ref, double tolerance = 1e-9);
/// Scalar gradients in one dimension, evaluated at x = 0.
IsaacsReport isaacs_check(const ProblemSpec& spec, const std::vector<double>& p_samples, double tolerance = 1e-9);

}  // namespace rswitch
