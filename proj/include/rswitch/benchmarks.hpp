#pragma once

#include "rswitch/simulator.hpp"

#include <Eigen/Dense>

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace rswitch {

using AnalyticValueFn = std::function<double(double s, const State& x, RegimeIndex i)>;

struct DefaultGrid {
    Eigen::VectorXd lower;
    Eigen::VectorXd upper;
    std::vector<int> points;
    int nt_hint = 1;
};

/// Which standing assumptions the instance is built to satisfy.
struct AssumptionProfile {
    bool h1 = true;
    bool h2 = true;
    bool h3 = true;
};

struct Benchmark {
    std::string name;
    std::string description;
    ProblemSpec spec;
    DefaultGrid grid;
    /// Closed-form robust value V, when known.
    std::optional<AnalyticValueFn> value;
    /// Closed-form value of the game where the switcher observes nature's control, when known.
    std::optional<AnalyticValueFn> upper_value;
    /// How the reference value is obtained ("closed form", "enumeration", ...).
    std::string reference;
    /// Short text of the closed form at s = 0 (e.g. "x-T").
    std::string formula;
    /// Max |V_num - V| allowed at t = 0 on [interior_lower, interior_upper].
    double tolerance = 1e-2;
    Eigen::VectorXd interior_lower;
    Eigen::VectorXd interior_upper;
    AssumptionProfile expected;
    /// Strategy attached to pathological instances.
    std::optional<FeedbackSwitchingStrategy> strategy;

    /// Default initial state: the center of the default domain.
    State default_x0() const { return (grid.lower + grid.upper) / 2.0; }
    Grid build_default_grid() const;
};

const std::vector<std::string>& benchmark_names();

/// Throws NotFound listing the registered names.
Benchmark get_benchmark(const std::string& name);

/// Throws Unsupported when the benchmark has no closed form.
double analytic_value(const Benchmark& benchmark, double s, const State& x, RegimeIndex i);
double analytic_upper_value(const Benchmark& benchmark, double s, const State& x, RegimeIndex i);

/// Builds an instance from a key-value YAML file naming a registered family plus parameters:
///   family: timed_switch
///   horizon: 2.0
///   switch_cost: 0.2          # scalar or m x m matrix
///   controls: [1, 2]          # scalar control points
///   domain: [-1, 1]
///   nx: 21
///   nt: 1000
///   regimes: 3                # no_dynamics, timed_switch
///   sigma: 0.5                # pure_diffusion_quadratic
///   rates: [0, 1]             # timed_switch running reward per regime
///   offsets: [0, 0.05]        # no_dynamics terminal offsets g(x,i) = x + offsets[i]
Benchmark load_config(const std::string& path);
Benchmark parse_config(const std::string& yaml_text);

/// Registry names and metadata as YAML.
std::string registry_dump();

}  // namespace rswitch
