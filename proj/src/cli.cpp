#include "rswitch/cli.hpp"

#include "rswitch/benchmarks.hpp"
#include "rswitch/errors.hpp"
#include "rswitch/game.hpp"
#include "rswitch/io.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace rswitch::cli {

namespace {

namespace fs = std::filesystem;

struct GridOverrides {
    int nx = 0;
    int nt = 0;
    std::string bounds;
};

struct McOptions {
    long paths = 1000;
    double dt = 1.0 / 256.0;
    std::uint64_t seed = 20240601;
};

struct StartOptions {
    std::vector<double> x0;
    int i0 = 1;
    double s = 0.0;
};

struct RunConfig {
    std::string target;
    GridOverrides grid;
    McOptions mc;
    StartOptions start;
    std::string out_dir;
    unsigned threads = 1;

    std::string strategy;
    std::string adversary = "best";
    bool trajectory = false;
    std::string p_range;
    double tolerance = 0.0;
    double residual_tolerance = 0.0;
};

std::vector<double> split_reals(const std::string& text, char sep) {
    std::vector<double> v;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, sep)) {
        try {
            std::size_t used = 0;
            v.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw InvalidArgument(fmt::format("cannot read '{}' as a number", item));
        }
    }
    return v;
}

Benchmark load_target(const std::string& target) {
    const auto& names = benchmark_names();
    if (std::find(names.begin(), names.end(), target) != names.end()) return get_benchmark(target);
    if (fs::is_regular_file(target)) return load_config(target);
    return get_benchmark(target);  // throws NotFound with the registered names
}

void apply_overrides(Benchmark& b, const GridOverrides& g) {
    if (g.nx > 0) std::fill(b.grid.points.begin(), b.grid.points.end(), g.nx);
    if (g.nt > 0) b.grid.nt_hint = g.nt;
    if (!g.bounds.empty()) {
        const auto v = split_reals(g.bounds, ',');
        if (v.size() != 2 || !(v[0] < v[1])) throw InvalidArgument("--bounds expects lower,upper with lower < upper");
        const double quarter = (v[1] - v[0]) / 8.0;
        b.grid.lower.setConstant(v[0]);
        b.grid.upper.setConstant(v[1]);
        b.interior_lower = b.interior_lower.cwiseMax(v[0] + quarter);
        b.interior_upper = b.interior_upper.cwiseMin(v[1] - quarter);
    }
}

State start_state(const Benchmark& b, const StartOptions& s) {
    if (s.x0.empty()) return b.default_x0();
    if (static_cast<int>(s.x0.size()) != b.spec.dimension) throw InvalidArgument("--x0 has the wrong dimension");
    return Eigen::Map<const Eigen::VectorXd>(s.x0.data(), static_cast<Eigen::Index>(s.x0.size()));
}

fs::path output_dir(const RunConfig& cfg) {
    fs::path dir = cfg.out_dir;
    if (dir.empty()) {
        const char* env = std::getenv(kOutDirEnv);
        dir = env && *env ? env : "rswitch_out";
    }
    fs::create_directories(dir);
    return dir;
}

// Max |V_num(0,x,i) - reference(0,x,i)| over grid nodes in the interior box.
double interior_error(const ValueField& field, const Benchmark& b, const AnalyticValueFn& reference, int columns) {
    const Grid& g = field.grid;
    double err = 0.0;
    for (std::size_t node = 0; node < g.node_count(); ++node) {
        const State x = g.point(node);
        const double eps = 1e-12;
        if (((x - b.interior_lower).array() < -eps).any() || ((x - b.interior_upper).array() > eps).any()) continue;
        for (int slot = 0; slot < columns; ++slot) {
            const double ref = reference(0.0, x, RegimeIndex::from_slot(slot));
            err = std::max(err, std::abs(field.layers[0](static_cast<Eigen::Index>(node), slot) - ref));
        }
    }
    return err;
}

SolverOptions solver_options(const RunConfig& cfg) {
    SolverOptions o;
    o.threads = cfg.threads;
    if (cfg.residual_tolerance > 0.0) o.complementarity_tolerance = cfg.residual_tolerance;
    return o;
}

std::size_t match_control(const ProblemSpec& spec, double u) {
    for (std::size_t k = 0; k < spec.control_set.size(); ++k)
        if (spec.control_set[k][0] == u) return k;
    throw InvalidArgument(fmt::format("{} is not a control point of '{}'", u, spec.name));
}

StepControl read_step_file(const ProblemSpec& spec, const std::string& path, double s) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument(fmt::format("cannot read step control file '{}'", path));
    StepControl sc;
    double t = 0.0, u = 0.0;
    while (in >> t >> u) {
        sc.knots.push_back(t);
        sc.controls.push_back(match_control(spec, u));
    }
    if (!in.eof()) throw InvalidArgument(fmt::format("step control file '{}' must hold 'time control' pairs", path));
    if (sc.controls.empty() || sc.knots.front() > s) throw InvalidArgument("step control must start at or before s");
    sc.knots.push_back(spec.horizon);
    return sc;
}

// ------------------------------------------------------------------------ subcommands

int cmd_list(std::ostream& out) {
    out << registry_dump();
    return 0;
}

int cmd_solve(const RunConfig& cfg, std::ostream& out) {
    Benchmark b = load_target(cfg.target);
    apply_overrides(b, cfg.grid);
    const SolverOptions opts = solver_options(cfg);
    const Grid grid = b.build_default_grid();
    const SolveResult r = solve(b.spec, grid, opts);
    const ResidualStats rs = residual_check(r.values, b.spec, opts);
    const FieldInvariants inv = check_field_invariants(r.values, b.spec);

    const fs::path file = output_dir(cfg) / (b.name + "_value.csv");
    std::ofstream csv(file);
    write_field_csv(csv, r.values, &r.policy);
    if (!csv) throw Error(fmt::format("failed writing '{}'", file.string()));

    fmt::print(out, "benchmark        {}\n", b.name);
    fmt::print(out, "grid             nx={} nt={} dt={:.6g} bounds=[{}, {}]\n", grid.points()[0], grid.time_steps(),
               grid.dt(), grid.lower()[0], grid.upper()[0]);
    fmt::print(out, "residual max     {:.6e} (tolerance {:.6e}, layer {}, node {}, regime {})\n", rs.max, rs.tolerance,
               rs.max_layer, rs.max_node, rs.max_regime);
    fmt::print(out, "residual mean    {:.6e}\n", rs.mean);
    fmt::print(out, "terminal error   {:.6e}\n", inv.terminal_max_error);
    fmt::print(out, "obstacle gap     {:.6e}\n", inv.max_obstacle_violation);
    fmt::print(out, "sweep cap hits   {}\n", r.sweep_cap_hits);
    fmt::print(out, "csv              {}\n", file.string());
    return rs.within_tolerance() && inv.all_finite ? 0 : 1;
}

int cmd_simulate(const RunConfig& cfg, std::ostream& out) {
    Benchmark b = load_target(cfg.target);
    apply_overrides(b, cfg.grid);
    const State x0 = start_state(b, cfg.start);
    const RegimeIndex i0{cfg.start.i0};

    std::shared_ptr<const SolveResult> solution;
    auto solved = [&] {
        if (!solution) solution = std::make_shared<const SolveResult>(solve(b.spec, b.build_default_grid(), solver_options(cfg)));
        return solution;
    };

    std::string strategy_name = cfg.strategy;
    if (strategy_name.empty()) strategy_name = b.strategy ? "scripted:attached" : "value";
    std::optional<FeedbackSwitchingStrategy> strategy;
    if (strategy_name == "value") strategy = FeedbackSwitchingStrategy::value_driven(solved());
    else if (strategy_name == "never") strategy = FeedbackSwitchingStrategy::never_switch();
    else if (strategy_name == "scripted:zeno") strategy = zeno_strategy();
    else if (strategy_name == "scripted:attached" && b.strategy) strategy = *b.strategy;
    else throw InvalidArgument(fmt::format("unknown strategy '{}'", strategy_name));

    std::optional<AdversaryControl> adversary;
    const std::string& adv = cfg.adversary;
    if (adv == "best") {
        auto sol = solved();
        adversary = best_response_adversary(std::shared_ptr<const PolicyField>(sol, &sol->policy));
    } else if (adv.rfind("constant:", 0) == 0) {
        const auto v = split_reals(adv.substr(9), ',');
        if (v.size() != 1) throw InvalidArgument("constant adversary expects one control value");
        adversary = AdversaryControl::constant(match_control(b.spec, v[0]));
    } else if (adv.rfind("step:", 0) == 0) {
        adversary = AdversaryControl::step(read_step_file(b.spec, adv.substr(5), cfg.start.s));
    } else {
        throw InvalidArgument(fmt::format("unknown adversary '{}'", adv));
    }

    if (cfg.trajectory) {
        const fs::path file = output_dir(cfg) / (b.name + "_trajectory.csv");
        const TrajectoryRecord rec = simulate_path(b.spec, *strategy, *adversary, cfg.start.s, x0, i0, cfg.mc.dt, cfg.mc.seed);
        std::ofstream csv(file);
        write_trajectory_csv(csv, rec, b.spec);
        fmt::print(out, "trajectory {}\n", file.string());
    }
    const McEstimate est = estimate_J(b.spec, *strategy, *adversary, cfg.start.s, x0, i0, cfg.mc.dt, cfg.mc.paths,
                                      cfg.mc.seed, cfg.threads);
    out << est.line() << '\n';
    if (est.failures > 0) fmt::print(out, "zeno-aborted paths {}\n", est.failures);
    if (adversary->clamp_warnings() > 0) fmt::print(out, "adversary lookups clamped to the grid {}\n", adversary->clamp_warnings());
    return 0;
}

int cmd_check_assumptions(const RunConfig& cfg, std::ostream& out) {
    Benchmark b = load_target(cfg.target);
    apply_overrides(b, cfg.grid);
    const ValidationReport report = validate_spec(b.spec, box_samples(b.grid.lower, b.grid.upper, 41));
    fmt::print(out, "{:<10} {:<6} {}\n", "assumption", "status", "detail");
    for (const auto& e : report.entries) {
        fmt::print(out, "{:<10} {:<6} {}\n", to_string(e.assumption), e.pass ? "PASS" : "FAIL", e.detail);
    }
    fmt::print(out, "constants  L1={:.6g} M1={:.6g} M2={:.6g} p={:.6g} fitted_p={:.6g}\n", report.lipschitz,
               report.linear_growth, report.poly_growth, report.growth_exponent, report.fitted_exponent);
    const auto unexpected = report.unexpected_failures(b.spec);
    if (b.spec.h3_violating) out << "note       instance is flagged as breaking H3; that failure is expected\n";
    if (!unexpected.empty()) {
        std::string list;
        for (auto a : unexpected) list += (list.empty() ? "" : ", ") + to_string(a);
        fmt::print(out, "unexpected failures: {}\n", list);
        return 1;
    }
    return 0;
}

int cmd_isaacs(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    Benchmark b = load_target(cfg.target);
    if (b.spec.dimension != 1) throw Unsupported("isaacs subcommand samples scalar gradients only");
    std::vector<double> ps = {-2.0, -1.0, -0.5, 0.5, 1.0, 2.0};
    if (!cfg.p_range.empty()) {
        const auto v = split_reals(cfg.p_range, ',');
        if (v.size() != 3 || v[2] < 1 || v[2] != std::floor(v[2]) || !(v[0] <= v[1]))
            throw InvalidArgument("--p-range expects lower,upper,count");
        const int n = static_cast<int>(v[2]);
        ps.clear();
        for (int k = 0; k < n; ++k) ps.push_back(n == 1 ? v[0] : v[0] + (v[1] - v[0]) * k / (n - 1));
    }
    std::vector<Eigen::VectorXd> samples;
    for (double p : ps) samples.push_back(Eigen::VectorXd::Constant(1, p));
    const IsaacsReport report = isaacs_check(b.spec, samples, b.default_x0());
    const fs::path file = output_dir(cfg) / (b.name + "_isaacs.csv");
    std::ofstream csv(file);
    write_isaacs_csv(csv, report);
    write_isaacs_csv(out, report);
    fmt::print(err, "isaacs condition {} (max gap {:.6g}), csv {}\n", report.holds ? "holds" : "fails", report.max_gap,
               file.string());
    return 0;
}

struct CheckRow {
    std::string name;
    double value;
    std::string relation;
    double threshold;
    bool pass;
};

int cmd_verify(const RunConfig& cfg, std::ostream& out) {
    Benchmark b = load_target(cfg.target);
    apply_overrides(b, cfg.grid);
    const double tol = cfg.tolerance > 0.0 ? cfg.tolerance : b.tolerance;
    const SolverOptions opts = solver_options(cfg);
    const Grid grid = b.build_default_grid();
    std::vector<CheckRow> rows;
    auto le = [&](std::string name, double v, double t) { rows.push_back({std::move(name), v, "<=", t, v <= t}); };
    auto ge = [&](std::string name, double v, double t) { rows.push_back({std::move(name), v, ">=", t, v >= t}); };

    auto solution = std::make_shared<const SolveResult>(solve(b.spec, grid, opts));
    const ValueField& V = solution->values;
    const FieldInvariants inv = check_field_invariants(V, b.spec);
    rows.push_back({"solve: all values finite", inv.all_finite ? 1.0 : 0.0, "==", 1.0, inv.all_finite});
    le("terminal layer vs g: max err", inv.terminal_max_error, 0.0);
    le("obstacle V_i >= max_j (V_j - c): max gap", inv.max_obstacle_violation, opts.obstacle_tolerance);

    if (b.value) le(fmt::format("V(0,.,.) vs {}: max err", b.formula), interior_error(V, b, *b.value, V.regimes()), tol);
    if (b.upper_value && b.value) {
        const ValueField lower = solve_isaacs(b.spec, grid, GameSide::Lower, opts);
        const ValueField upper = solve_isaacs(b.spec, grid, GameSide::Upper, opts);
        le("lower game (0,.) vs closed form: max err", interior_error(lower, b, *b.value, 1), tol);
        le("upper game (0,.) vs closed form: max err", interior_error(upper, b, *b.upper_value, 1), tol);
        double gap = std::numeric_limits<double>::infinity(), ref_gap = gap;
        for (std::size_t node = 0; node < grid.node_count(); ++node) {
            if (!grid.interior(node)) continue;
            const State x = grid.point(node);
            gap = std::min(gap, upper.layers[0](static_cast<Eigen::Index>(node), 0) - V.layers[0].row(static_cast<Eigen::Index>(node)).maxCoeff());
            ref_gap = std::min(ref_gap, (*b.upper_value)(0.0, x, RegimeIndex{1}) - (*b.value)(0.0, x, RegimeIndex{1}));
        }
        ge("upper minus lower value at t=0: min", gap, ref_gap - 2.0 * tol);
    }

    const ResidualStats rs = residual_check(V, b.spec, opts);
    le("complementarity residual: max", rs.max, rs.tolerance);

    const int k_mid = std::max(1, grid.time_steps() / 2);
    le(fmt::format("dpp re-solve from layer {}: max deviation", k_mid), dpp_check(b.spec, grid, V, k_mid, opts), 0.0);

    McParams mc;
    mc.dt_sim = cfg.mc.dt;
    mc.paths = cfg.mc.paths;
    mc.seed = cfg.mc.seed;
    mc.threads = cfg.threads;
    const State x0 = start_state(b, cfg.start);
    const RegimeIndex i0{cfg.start.i0};
    const SandwichReport sw =
        sandwich_check(b.spec, V, FeedbackSwitchingStrategy::value_driven(solution), cfg.start.s, x0, i0, mc);
    le("worst step control vs grid value: excess", sw.lower_proxy.mean - sw.grid_value, sw.tolerance);

    if (b.strategy) {
        double abort_time = std::numeric_limits<double>::infinity();
        try {
            simulate_path(b.spec, *b.strategy, AdversaryControl::constant(0), 0.0, x0, i0, mc.dt_sim, mc.seed);
        } catch (const ZenoAbort& e) {
            abort_time = e.time();
        }
        rows.push_back({"attached strategy: zeno abort time", abort_time, "<", 0.5, abort_time < 0.5});
    }

    const ValidationReport report = validate_spec(b.spec, box_samples(b.grid.lower, b.grid.upper, 41));
    const bool h1 = report.entry(Assumption::H1).pass;
    const bool h2 = report.entry(Assumption::H2_nonnegative_cost).pass && report.entry(Assumption::H2_polynomial_growth).pass &&
                    report.entry(Assumption::H2_terminal_consistency).pass;
    const bool h3 = report.entry(Assumption::H3).pass;
    const bool profile = h1 == b.expected.h1 && h2 == b.expected.h2 && h3 == b.expected.h3;
    rows.push_back({"assumption profile matches registry", profile ? 1.0 : 0.0, "==", 1.0, profile});

    fmt::print(out, "verify {} (nx={} nt={} dt={:.6g})\n", b.name, grid.points()[0], grid.time_steps(), grid.dt());
    bool all = true;
    for (const auto& r : rows) {
        fmt::print(out, "  {:<46} {:>14.6e} {:>2} {:<12.4e} {}\n", r.name, r.value, r.relation, r.threshold,
                   r.pass ? "PASS" : "FAIL");
        all = all && r.pass;
    }
    fmt::print(out, "{}\n", all ? "all checks passed" : "some checks FAILED");
    return all ? 0 : 1;
}

void add_grid_flags(CLI::App* sub, RunConfig& cfg) {
    sub->add_option("--nx", cfg.grid.nx, "grid points per dimension (odd)");
    sub->add_option("--nt", cfg.grid.nt, "minimum number of time steps");
    sub->add_option("--bounds", cfg.grid.bounds, "domain bounds lower,upper");
}

void add_mc_flags(CLI::App* sub, RunConfig& cfg) {
    sub->add_option("--paths", cfg.mc.paths, "Monte Carlo paths")->check(CLI::PositiveNumber);
    sub->add_option("--seed", cfg.mc.seed, "base RNG seed");
    sub->add_option("--dt", cfg.mc.dt, "simulation time step")->check(CLI::PositiveNumber);
    sub->add_option("--x0", cfg.start.x0, "initial state (default: domain center)");
    sub->add_option("--i0", cfg.start.i0, "initial regime")->check(CLI::PositiveNumber);
    sub->add_option("--s", cfg.start.s, "initial time");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Robust optimal switching: HJB solver, simulator and checks", "rswitch"};
    RunConfig cfg;
    app.add_option("--threads", cfg.threads, "worker threads")->check(CLI::PositiveNumber);
    app.require_subcommand(1);
    app.fallthrough();

    auto* solve_cmd = app.add_subcommand("solve", "solve the HJB system and write the value+policy CSV");
    solve_cmd->add_option("bench", cfg.target, "benchmark name or config file")->required();
    add_grid_flags(solve_cmd, cfg);
    solve_cmd->add_option("--out", cfg.out_dir, "output directory");
    solve_cmd->add_option("--residual-tol", cfg.residual_tolerance, "complementarity residual tolerance");

    auto* sim_cmd = app.add_subcommand("simulate", "Monte Carlo estimate of the payoff");
    sim_cmd->add_option("bench", cfg.target, "benchmark name or config file")->required();
    sim_cmd->add_option("--strategy", cfg.strategy, "value | never | scripted:zeno | scripted:attached");
    sim_cmd->add_option("--adversary", cfg.adversary, "best | constant:<u> | step:<file>");
    sim_cmd->add_flag("--trajectory", cfg.trajectory, "write the first path as CSV");
    sim_cmd->add_option("--out", cfg.out_dir, "output directory");
    add_mc_flags(sim_cmd, cfg);
    add_grid_flags(sim_cmd, cfg);

    auto* verify_cmd = app.add_subcommand("verify", "solve and run the consistency checks");
    verify_cmd->add_option("bench", cfg.target, "benchmark name or config file")->required();
    add_grid_flags(verify_cmd, cfg);
    add_mc_flags(verify_cmd, cfg);
    verify_cmd->add_option("--tol", cfg.tolerance, "closed-form comparison tolerance");
    verify_cmd->add_option("--residual-tol", cfg.residual_tolerance, "complementarity residual tolerance");

    auto* assume_cmd = app.add_subcommand("check-assumptions", "sample the standing assumptions");
    assume_cmd->add_option("bench", cfg.target, "benchmark name or config file")->required();
    add_grid_flags(assume_cmd, cfg);

    auto* isaacs_cmd = app.add_subcommand("isaacs", "compare lower and upper Hamiltonians");
    isaacs_cmd->add_option("bench", cfg.target, "benchmark name or config file")->required();
    isaacs_cmd->add_option("--p-range", cfg.p_range, "gradient samples lower,upper,count");
    isaacs_cmd->add_option("--out", cfg.out_dir, "output directory");

    auto* list_cmd = app.add_subcommand("list", "dump the benchmark registry");

    // Verify keeps Monte Carlo light unless asked otherwise.
    verify_cmd->preparse_callback([&cfg](std::size_t) {
        cfg.mc.paths = 400;
        cfg.mc.dt = 1.0 / 64.0;
    });

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n" << app.help();
        return 2;
    }

    try {
        if (*list_cmd) return cmd_list(out);
        if (*solve_cmd) return cmd_solve(cfg, out);
        if (*sim_cmd) return cmd_simulate(cfg, out);
        if (*verify_cmd) return cmd_verify(cfg, out);
        if (*assume_cmd) return cmd_check_assumptions(cfg, out);
        if (*isaacs_cmd) return cmd_isaacs(cfg, out, err);
    } catch (const InvalidArgument& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const ConfigurationError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const NotFound& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "failure: " << e.what() << "\n";
        return 1;
    }
    return 2;
}

int run(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return run(args, std::cout, std::cerr);
}

}  // namespace rswitch::cli
