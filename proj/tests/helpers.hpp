#pragma once

#include "rswitch/problem_model.hpp"

#include <Eigen/Dense>

#include <vector>

namespace testing {

/// Frozen-state spec: b = sigma = 0, constant cost matrix, f(x,i,u) = rates[i-1] + u, g(x,i) = x + offsets[i-1].
inline rswitch::ProblemSpec frozen_spec(const Eigen::MatrixXd& cost, std::vector<double> offsets = {},
                                        std::vector<double> rates = {}, std::vector<double> controls = {0.0}) {
    using namespace rswitch;
    const int m = static_cast<int>(cost.rows());
    if (offsets.empty()) offsets.assign(m, 0.0);
    if (rates.empty()) rates.assign(m, 0.0);
    ProblemSpec s;
    s.name = "frozen";
    s.dimension = 1;
    s.horizon = 1.0;
    s.regimes = m;
    for (double u : controls) s.control_set.push_back(scalar_control(u));
    s.drift = [](const State& x, RegimeIndex, const Control&) { return Eigen::VectorXd::Zero(x.size()).eval(); };
    s.diffusion = [](const State& x, RegimeIndex, const Control&) { return Eigen::MatrixXd::Zero(x.size(), x.size()).eval(); };
    s.running_cost = [rates](const State&, RegimeIndex i, const Control& u) { return rates[i.slot()] + u[0]; };
    s.terminal_payoff = [offsets](const State& x, RegimeIndex i) { return x[0] + offsets[i.slot()]; };
    s.switch_cost = [cost](const State&, RegimeIndex i, RegimeIndex j) { return cost(i.slot(), j.slot()); };
    return s;
}

inline Eigen::MatrixXd uniform_cost(int m, double c) {
    Eigen::MatrixXd cm = Eigen::MatrixXd::Constant(m, m, c);
    cm.diagonal().setZero();
    return cm;
}

}  // namespace testing
