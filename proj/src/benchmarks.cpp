#include "rswitch/benchmarks.hpp"

#include "rswitch/errors.hpp"

#include <fmt/format.h>
#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace rswitch {

namespace {

struct FamilyParams {
    double horizon = 1.0;
    std::optional<double> cost_scalar;
    std::optional<Eigen::MatrixXd> cost_matrix;
    std::optional<std::vector<double>> controls;
    std::optional<std::pair<double, double>> domain;
    std::optional<int> nx;
    std::optional<int> nt;
    std::optional<int> regimes;
    std::optional<double> sigma;
    std::optional<std::vector<double>> rates;
    std::optional<std::vector<double>> offsets;
};

Eigen::VectorXd vec1(double v) { return Eigen::VectorXd::Constant(1, v); }

Eigen::MatrixXd cost_from(const FamilyParams& p, int m, double default_cost) {
    if (p.cost_matrix) {
        if (p.cost_matrix->rows() != m || p.cost_matrix->cols() != m)
            throw ConfigurationError(fmt::format("switch_cost matrix must be {}x{}", m, m));
        return *p.cost_matrix;
    }
    const double c = p.cost_scalar.value_or(default_cost);
    Eigen::MatrixXd cm = Eigen::MatrixXd::Constant(m, m, c);
    cm.diagonal().setZero();
    return cm;
}

// Off-diagonal value when every off-diagonal entry is equal.
std::optional<double> uniform_cost(const Eigen::MatrixXd& c) {
    std::optional<double> v;
    for (Eigen::Index a = 0; a < c.rows(); ++a)
        for (Eigen::Index b = 0; b < c.cols(); ++b) {
            if (a == b) continue;
            if (v && *v != c(a, b)) return std::nullopt;
            v = c(a, b);
        }
    return v;
}

std::vector<Control> controls_from(const std::vector<double>& pts) {
    if (pts.empty()) throw ConfigurationError("control set must not be empty");
    std::vector<Control> out;
    for (double u : pts) out.push_back(scalar_control(u));
    return out;
}

void set_box(Benchmark& b, const FamilyParams& p, double lo, double hi, int nx, int nt, double interior_fraction) {
    if (p.domain) std::tie(lo, hi) = *p.domain;
    if (!(lo < hi)) throw ConfigurationError("domain must satisfy lower < upper");
    b.grid.lower = vec1(lo);
    b.grid.upper = vec1(hi);
    b.grid.points = {p.nx.value_or(nx)};
    b.grid.nt_hint = p.nt.value_or(nt);
    const double mid = (lo + hi) / 2.0, half = (hi - lo) / 2.0;
    b.interior_lower = vec1(mid - interior_fraction * half);
    b.interior_upper = vec1(mid + interior_fraction * half);
}

void set_costs(ProblemSpec& spec, const Eigen::MatrixXd& cm) {
    spec.switch_cost = [cm](const State&, RegimeIndex i, RegimeIndex j) { return cm(i.slot(), j.slot()); };
}

auto zero_diffusion() {
    return [](const State& x, RegimeIndex, const Control&) { return Eigen::MatrixXd::Zero(x.size(), x.size()).eval(); };
}

// Two regimes, nature picks u in {1,2}, drift -|i - u|: nature drags X down at unit speed
// unless it matches the regime. With zero costs the switcher can churn for free.
Benchmark make_ek(const FamilyParams& p) {
    if (p.regimes && *p.regimes != 2) throw ConfigurationError("ek_example has exactly two regimes");
    Benchmark b;
    b.name = "ek_example";
    b.description = "two regimes, nature's drift -|i-u|, zero switching cost";
    ProblemSpec& s = b.spec;
    s.name = b.name;
    s.dimension = 1;
    s.horizon = p.horizon;
    s.regimes = 2;
    const std::vector<double> pts = p.controls.value_or(std::vector<double>{1.0, 2.0});
    s.control_set = controls_from(pts);
    s.drift = [](const State&, RegimeIndex i, const Control& u) { return vec1(-std::abs(i.value - u[0])); };
    s.diffusion = zero_diffusion();
    s.running_cost = [](const State&, RegimeIndex, const Control&) { return 0.0; };
    s.terminal_payoff = [](const State& x, RegimeIndex) { return x[0]; };
    const Eigen::MatrixXd cm = cost_from(p, 2, 0.0);
    set_costs(s, cm);
    s.growth_exponent = 1.0;
    s.h3_violating = !no_free_loop(cm).pass;
    b.expected.h3 = !s.h3_violating;

    if (pts == std::vector<double>{1.0, 2.0}) {
        const double T = s.horizon;
        b.value = [T](double t, const State& x, RegimeIndex) { return x[0] - (T - t); };
        if (cm.isZero(0.0)) b.upper_value = [](double, const State& x, RegimeIndex) { return x[0]; };
        b.reference = "closed form";
        b.formula = "x-T";
    }
    set_box(b, p, -2.0, 2.0, 401, 400, 0.75);
    b.tolerance = 2e-2;
    return b;
}

Benchmark make_no_dynamics(const FamilyParams& p) {
    const int m = p.regimes.value_or(p.offsets ? static_cast<int>(p.offsets->size()) : 2);
    if (m < 1) throw ConfigurationError("regimes must be positive");
    std::vector<double> off(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) off[i] = 0.05 * i;
    if (p.offsets) {
        if (static_cast<int>(p.offsets->size()) != m) throw ConfigurationError("offsets must list one value per regime");
        off = *p.offsets;
    }
    Benchmark b;
    b.name = "no_dynamics";
    b.description = "frozen state, terminal payoff x + offset_i, positive switching cost";
    ProblemSpec& s = b.spec;
    s.name = b.name;
    s.dimension = 1;
    s.horizon = p.horizon;
    s.regimes = m;
    s.control_set = controls_from(p.controls.value_or(std::vector<double>{0.0}));
    s.drift = [](const State& x, RegimeIndex, const Control&) { return Eigen::VectorXd::Zero(x.size()).eval(); };
    s.diffusion = zero_diffusion();
    s.running_cost = [](const State&, RegimeIndex, const Control&) { return 0.0; };
    s.terminal_payoff = [off](const State& x, RegimeIndex i) { return x[0] + off[i.slot()]; };
    const Eigen::MatrixXd cm = cost_from(p, m, 0.1);
    set_costs(s, cm);
    s.h3_violating = m > 1 && !no_free_loop(cm).pass;
    b.expected.h3 = !s.h3_violating;

    bool consistent = true;
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j)
            if (i != j && off[i] < off[j] - cm(i, j)) consistent = false;
    b.expected.h2 = consistent;
    if (consistent) {
        b.value = [off](double, const State& x, RegimeIndex i) { return x[0] + off[i.slot()]; };
        b.reference = "closed form";
        b.formula = "g";
    }
    set_box(b, p, -1.0, 1.0, 21, 10, 0.9);
    b.tolerance = 1e-10;
    return b;
}

Benchmark make_pure_diffusion(const FamilyParams& p) {
    if (p.regimes && *p.regimes != 1) throw ConfigurationError("pure_diffusion_quadratic has one regime");
    const double sigma = p.sigma.value_or(1.0);
    Benchmark b;
    b.name = "pure_diffusion_quadratic";
    b.description = "Brownian motion with terminal payoff x^2";
    ProblemSpec& s = b.spec;
    s.name = b.name;
    s.dimension = 1;
    s.horizon = p.horizon;
    s.regimes = 1;
    s.control_set = controls_from(p.controls.value_or(std::vector<double>{0.0}));
    s.drift = [](const State& x, RegimeIndex, const Control&) { return Eigen::VectorXd::Zero(x.size()).eval(); };
    s.diffusion = [sigma](const State&, RegimeIndex, const Control&) { return Eigen::MatrixXd::Constant(1, 1, sigma); };
    s.running_cost = [](const State&, RegimeIndex, const Control&) { return 0.0; };
    s.terminal_payoff = [](const State& x, RegimeIndex) { return x[0] * x[0]; };
    set_costs(s, cost_from(p, 1, 0.0));
    s.growth_exponent = 2.0;
    const double T = s.horizon;
    b.value = [T, sigma](double t, const State& x, RegimeIndex) { return x[0] * x[0] + sigma * sigma * (T - t); };
    b.reference = "Ito identity";
    b.formula = "x^2+sigma^2 T";
    set_box(b, p, -6.0, 6.0, 241, 400, 0.5);
    b.tolerance = 1e-2;
    return b;
}

// Regime i earns running reward rates[i]; switching costs c. With a uniform cost one
// immediate switch to the best rate is optimal or no switch at all.
Benchmark make_timed_switch(const FamilyParams& p) {
    const int m = p.regimes.value_or(p.rates ? static_cast<int>(p.rates->size()) : 2);
    if (m < 1) throw ConfigurationError("regimes must be positive");
    std::vector<double> rate(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) rate[i] = i;
    if (p.rates) {
        if (static_cast<int>(p.rates->size()) != m) throw ConfigurationError("rates must list one value per regime");
        rate = *p.rates;
    }
    Benchmark b;
    b.name = "timed_switch";
    b.description = "frozen state, regime 2 earns rate 1, switching costs 0.1";
    ProblemSpec& s = b.spec;
    s.name = b.name;
    s.dimension = 1;
    s.horizon = p.horizon;
    s.regimes = m;
    s.control_set = controls_from(p.controls.value_or(std::vector<double>{0.0}));
    s.drift = [](const State& x, RegimeIndex, const Control&) { return Eigen::VectorXd::Zero(x.size()).eval(); };
    s.diffusion = zero_diffusion();
    s.running_cost = [rate](const State&, RegimeIndex i, const Control&) { return rate[i.slot()]; };
    s.terminal_payoff = [](const State&, RegimeIndex) { return 0.0; };
    const Eigen::MatrixXd cm = cost_from(p, m, 0.1);
    set_costs(s, cm);
    s.h3_violating = m > 1 && !no_free_loop(cm).pass;
    b.expected.h3 = !s.h3_violating;

    if (const auto c = m > 1 ? uniform_cost(cm) : std::optional<double>(0.0); c && *c >= 0.0) {
        const double T = s.horizon, cost = *c;
        b.value = [T, cost, rate](double t, const State&, RegimeIndex i) {
            const double tau = T - t;
            double v = rate[i.slot()] * tau;
            for (std::size_t j = 0; j < rate.size(); ++j)
                if (static_cast<int>(j) != i.slot()) v = std::max(v, rate[j] * tau - cost);
            return v;
        };
        b.reference = "enumeration of switch times";
        b.formula = "max(r_i T, r_j T - c)";
    }
    set_box(b, p, -1.0, 1.0, 21, 1000, 0.8);
    b.tolerance = 1e-2;
    return b;
}

Benchmark make_zeno(const FamilyParams& p) {
    Benchmark b = make_ek(p);
    b.name = "zeno_pathology";
    b.spec.name = b.name;
    b.description = "ek_example dynamics with switches accumulating at t = 1/2";
    b.strategy = zeno_strategy();
    return b;
}

using Builder = Benchmark (*)(const FamilyParams&);

const std::vector<std::pair<std::string, Builder>>& families() {
    static const std::vector<std::pair<std::string, Builder>> list = {
        {"ek_example", &make_ek},
        {"no_dynamics", &make_no_dynamics},
        {"pure_diffusion_quadratic", &make_pure_diffusion},
        {"timed_switch", &make_timed_switch},
        {"zeno_pathology", &make_zeno},
    };
    return list;
}

Builder find_family(const std::string& name) {
    for (const auto& [n, f] : families())
        if (n == name) return f;
    std::string known;
    for (const auto& n : benchmark_names()) known += (known.empty() ? "" : ", ") + n;
    throw NotFound(fmt::format("unknown benchmark '{}' (registered: {})", name, known));
}

std::vector<double> read_list(const YAML::Node& node, const char* key) {
    if (!node.IsSequence()) throw ConfigurationError(fmt::format("'{}' must be a list", key));
    return node.as<std::vector<double>>();
}

}  // namespace

Grid Benchmark::build_default_grid() const { return build_grid(spec, grid.lower, grid.upper, grid.points, grid.nt_hint); }

const std::vector<std::string>& benchmark_names() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> n;
        for (const auto& f : families()) n.push_back(f.first);
        return n;
    }();
    return names;
}

Benchmark get_benchmark(const std::string& name) { return find_family(name)(FamilyParams{}); }

double analytic_value(const Benchmark& benchmark, double s, const State& x, RegimeIndex i) {
    if (!benchmark.value) throw Unsupported(fmt::format("benchmark '{}' has no closed-form value", benchmark.name));
    return (*benchmark.value)(s, x, i);
}

double analytic_upper_value(const Benchmark& benchmark, double s, const State& x, RegimeIndex i) {
    if (!benchmark.upper_value)
        throw Unsupported(fmt::format("benchmark '{}' has no closed-form upper value", benchmark.name));
    return (*benchmark.upper_value)(s, x, i);
}

Benchmark parse_config(const std::string& yaml_text) {
    static const std::set<std::string> allowed = {"family", "horizon", "switch_cost", "controls", "domain", "nx",
                                                  "nt", "regimes", "sigma", "rates", "offsets"};
    try {
        const YAML::Node root = YAML::Load(yaml_text);
        if (!root.IsMap()) throw ConfigurationError("configuration must be a key-value map");
        for (const auto& kv : root) {
            const auto key = kv.first.as<std::string>();
            if (!allowed.count(key)) throw ConfigurationError(fmt::format("unknown configuration key '{}'", key));
        }
        if (!root["family"]) throw ConfigurationError("configuration must name a family");
        FamilyParams p;
        if (root["horizon"]) p.horizon = root["horizon"].as<double>();
        if (!(p.horizon > 0.0) || !std::isfinite(p.horizon)) throw ConfigurationError("horizon must be positive");
        if (const auto c = root["switch_cost"]) {
            if (c.IsScalar()) {
                p.cost_scalar = c.as<double>();
            } else {
                const auto rows = c.as<std::vector<std::vector<double>>>();
                Eigen::MatrixXd cm(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.size()));
                for (std::size_t r = 0; r < rows.size(); ++r) {
                    if (rows[r].size() != rows.size()) throw ConfigurationError("switch_cost matrix must be square");
                    for (std::size_t k = 0; k < rows.size(); ++k) cm(r, k) = rows[r][k];
                }
                p.cost_matrix = cm;
            }
        }
        if (root["controls"]) p.controls = read_list(root["controls"], "controls");
        if (root["domain"]) {
            const auto d = read_list(root["domain"], "domain");
            if (d.size() != 2) throw ConfigurationError("domain must be [lower, upper]");
            p.domain = std::make_pair(d[0], d[1]);
        }
        if (root["nx"]) p.nx = root["nx"].as<int>();
        if (root["nt"]) p.nt = root["nt"].as<int>();
        if (root["regimes"]) p.regimes = root["regimes"].as<int>();
        if (root["sigma"]) p.sigma = root["sigma"].as<double>();
        if (root["rates"]) p.rates = read_list(root["rates"], "rates");
        if (root["offsets"]) p.offsets = read_list(root["offsets"], "offsets");
        Benchmark b = find_family(root["family"].as<std::string>())(p);
        b.spec.check_structure();
        return b;
    } catch (const YAML::Exception& e) {
        throw ConfigurationError(fmt::format("malformed configuration: {}", e.what()));
    }
}

Benchmark load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigurationError(fmt::format("cannot read configuration '{}'", path));
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string registry_dump() {
    YAML::Emitter out;
    out << YAML::BeginSeq;
    for (const auto& name : benchmark_names()) {
        const Benchmark b = get_benchmark(name);
        out << YAML::BeginMap;
        out << YAML::Key << "name" << YAML::Value << b.name;
        out << YAML::Key << "description" << YAML::Value << b.description;
        out << YAML::Key << "dimension" << YAML::Value << b.spec.dimension;
        out << YAML::Key << "regimes" << YAML::Value << b.spec.regimes;
        out << YAML::Key << "controls" << YAML::Value << YAML::Flow << YAML::BeginSeq;
        for (const auto& u : b.spec.control_set) out << u[0];
        out << YAML::EndSeq;
        out << YAML::Key << "horizon" << YAML::Value << b.spec.horizon;
        out << YAML::Key << "domain" << YAML::Value << YAML::Flow << YAML::BeginSeq << b.grid.lower[0] << b.grid.upper[0]
            << YAML::EndSeq;
        out << YAML::Key << "nx" << YAML::Value << b.grid.points[0];
        out << YAML::Key << "nt_hint" << YAML::Value << b.grid.nt_hint;
        out << YAML::Key << "analytic_value" << YAML::Value << (b.value ? b.reference : std::string("none"));
        if (b.value) out << YAML::Key << "formula" << YAML::Value << b.formula;
        out << YAML::Key << "analytic_upper_value" << YAML::Value << static_cast<bool>(b.upper_value);
        out << YAML::Key << "tolerance" << YAML::Value << b.tolerance;
        out << YAML::Key << "expected" << YAML::Value << YAML::Flow << YAML::BeginMap << YAML::Key << "H1" << YAML::Value
            << b.expected.h1 << YAML::Key << "H2" << YAML::Value << b.expected.h2 << YAML::Key << "H3" << YAML::Value
            << b.expected.h3 << YAML::EndMap;
        out << YAML::Key << "attached_strategy" << YAML::Value << (b.strategy ? "zeno" : "none");
        out << YAML::EndMap;
    }
    out << YAML::EndSeq;
    return std::string(out.c_str()) + "\n";
}

}  // namespace rswitch
