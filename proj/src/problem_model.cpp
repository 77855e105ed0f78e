#include "rswitch/problem_model.hpp"

#include "rswitch/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

namespace rswitch {

namespace {

constexpr double kConsistencySlack = 1e-12;
constexpr double kMaxGrowthExponent = 8.0;
constexpr std::size_t kMaxLipschitzSamples = 256;

std::string format_point(const State& x) {
    std::string out = "(";
    for (Eigen::Index k = 0; k < x.size(); ++k) {
        if (k) out += ", ";
        out += fmt::format("{:.6g}", x[k]);
    }
    return out + ")";
}

std::string format_cycle(const std::vector<RegimeIndex>& cycle) {
    std::string out = "[";
    for (std::size_t k = 0; k < cycle.size(); ++k) {
        if (k) out += ",";
        out += std::to_string(cycle[k].value);
    }
    return out + "]";
}

// Shortest cycle through `start` on the zero-cost edges. BFS with ascending neighbour
// order makes the first parent found the lexicographically smallest shortest path.
std::vector<int> shortest_zero_cycle_from(const Eigen::MatrixXd& c, int start) {
    const int m = static_cast<int>(c.rows());
    std::vector<int> parent(m, -1);
    std::vector<bool> seen(m, false);
    std::deque<int> queue{start};
    seen[start] = true;
    while (!queue.empty()) {
        const int v = queue.front();
        queue.pop_front();
        for (int w = 0; w < m; ++w) {
            if (w == v || c(v, w) != 0.0) continue;
            if (w == start) {
                std::vector<int> path{start};
                for (int node = v; node != start; node = parent[node]) path.push_back(node);
                std::reverse(path.begin() + 1, path.end());
                path.push_back(start);
                return path;
            }
            if (!seen[w]) {
                seen[w] = true;
                parent[w] = v;
                queue.push_back(w);
            }
        }
    }
    return {};
}

}  // namespace

void ProblemSpec::check_structure() const {
    if (dimension < 1) throw InvalidArgument("dimension must be positive");
    if (!(horizon > 0.0) || !std::isfinite(horizon)) throw InvalidArgument("horizon must be positive and finite");
    if (regimes < 1) throw InvalidArgument("regime count must be positive");
    if (control_set.empty()) throw InvalidArgument("control set must be nonempty");
    const auto cdim = control_set.front().size();
    for (const auto& u : control_set)
        if (u.size() != cdim || cdim == 0) throw InvalidArgument("control points must share a positive dimension");
    if (!drift || !diffusion || !running_cost || !terminal_payoff || !switch_cost)
        throw InvalidArgument("problem '" + name + "' is missing a coefficient function");
    if (growth_exponent < 1.0) throw InvalidArgument("growth exponent must be >= 1");
}

Control scalar_control(double u) {
    Control c(1);
    c[0] = u;
    return c;
}

std::string to_string(Assumption a) {
    switch (a) {
        case Assumption::H1: return "H1";
        case Assumption::H2_nonnegative_cost: return "H2(ii)";
        case Assumption::H2_polynomial_growth: return "H2(iii)";
        case Assumption::H2_terminal_consistency: return "H2(iv)";
        case Assumption::H3: return "H3";
    }
    return "?";
}

const AssumptionEntry& ValidationReport::entry(Assumption a) const {
    for (const auto& e : entries)
        if (e.assumption == a) return e;
    throw NotFound("report has no entry for " + to_string(a));
}

bool ValidationReport::all_pass() const {
    return std::all_of(entries.begin(), entries.end(), [](const auto& e) { return e.pass; });
}

std::vector<Assumption> ValidationReport::unexpected_failures(const ProblemSpec& spec) const {
    std::vector<Assumption> out;
    for (const auto& e : entries) {
        if (e.pass) continue;
        if (e.assumption == Assumption::H3 && spec.h3_violating) continue;
        out.push_back(e.assumption);
    }
    return out;
}

NoFreeLoopResult no_free_loop(const Eigen::MatrixXd& cost_matrix) {
    if (cost_matrix.rows() != cost_matrix.cols() || cost_matrix.rows() == 0)
        throw InvalidArgument("cost matrix must be square and nonempty");
    const int m = static_cast<int>(cost_matrix.rows());
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < m; ++j) {
            const double c = cost_matrix(i, j);
            if (!(c >= 0.0)) throw InvalidArgument(fmt::format("negative or NaN switching cost c({},{}) = {}", i + 1, j + 1, c));
            if (i == j && c != 0.0) throw InvalidArgument(fmt::format("nonzero diagonal cost c({0},{0}) = {1}", i + 1, c));
        }
    }

    std::vector<int> best;
    for (int start = 0; start < m; ++start) {
        auto cycle = shortest_zero_cycle_from(cost_matrix, start);
        if (!cycle.empty() && (best.empty() || cycle.size() < best.size())) best = std::move(cycle);
    }
    NoFreeLoopResult result;
    result.pass = best.empty();
    for (int v : best) result.witness.push_back(RegimeIndex::from_slot(v));
    return result;
}

Eigen::MatrixXd cost_matrix_at(const ProblemSpec& spec, const State& x) {
    Eigen::MatrixXd c(spec.regimes, spec.regimes);
    for (int i = 0; i < spec.regimes; ++i)
        for (int j = 0; j < spec.regimes; ++j)
            c(i, j) = spec.switch_cost(x, RegimeIndex::from_slot(i), RegimeIndex::from_slot(j));
    return c;
}

ValidationReport validate_spec(const ProblemSpec& spec, const std::vector<State>& sample_points) {
    spec.check_structure();
    if (sample_points.empty()) throw InvalidArgument("validate_spec needs at least one sample point");
    for (const auto& x : sample_points)
        if (x.size() != spec.dimension) throw InvalidArgument("sample point dimension mismatch");

    const int m = spec.regimes;
    const auto& controls = spec.control_set;
    const std::size_t n_u = controls.size();

    ValidationReport report;
    report.samples = sample_points;

    // H1: Lipschitz ratio over sample pairs and linear growth.
    {
        std::vector<std::size_t> picked;
        const std::size_t n = sample_points.size();
        const std::size_t stride = std::max<std::size_t>(1, (n + kMaxLipschitzSamples - 1) / kMaxLipschitzSamples);
        for (std::size_t k = 0; k < n; k += stride) picked.push_back(k);

        // Coefficients per picked sample, per (regime, control).
        std::vector<std::vector<Eigen::VectorXd>> b(picked.size());
        std::vector<std::vector<Eigen::MatrixXd>> s(picked.size());
        AssumptionEntry h1;
        h1.assumption = Assumption::H1;
        double lip = 0.0, lin = 0.0;
        for (std::size_t a = 0; a < picked.size(); ++a) {
            const State& x = sample_points[picked[a]];
            for (int i = 0; i < m; ++i) {
                for (std::size_t u = 0; u < n_u; ++u) {
                    b[a].push_back(spec.drift(x, RegimeIndex::from_slot(i), controls[u]));
                    s[a].push_back(spec.diffusion(x, RegimeIndex::from_slot(i), controls[u]));
                    const double g = (b[a].back().norm() + s[a].back().norm()) / (1.0 + x.norm());
                    if (!std::isfinite(g) && h1.pass) {
                        h1.pass = false;
                        h1.witness_point = x;
                    }
                    lin = std::max(lin, g);
                }
            }
        }
        for (std::size_t a = 0; a < picked.size(); ++a) {
            for (std::size_t c = a + 1; c < picked.size(); ++c) {
                const double dist = (sample_points[picked[a]] - sample_points[picked[c]]).norm();
                if (dist <= 0.0) continue;
                for (std::size_t k = 0; k < b[a].size(); ++k) {
                    const double r = ((b[a][k] - b[c][k]).norm() + (s[a][k] - s[c][k]).norm()) / dist;
                    if (!std::isfinite(r) && h1.pass) {
                        h1.pass = false;
                        h1.witness_point = sample_points[picked[a]];
                    }
                    lip = std::max(lip, r);
                }
            }
        }
        report.lipschitz = lip;
        report.linear_growth = lin;
        h1.detail = fmt::format("L1 ~ {:.6g}, M1 ~ {:.6g}", lip, lin);
        report.entries.push_back(std::move(h1));
    }

    // Pointwise cost data.
    std::vector<Eigen::MatrixXd> costs;
    costs.reserve(sample_points.size());
    for (const auto& x : sample_points) costs.push_back(cost_matrix_at(spec, x));

    // H2(ii): c >= 0.
    {
        AssumptionEntry e;
        e.assumption = Assumption::H2_nonnegative_cost;
        for (std::size_t k = 0; k < sample_points.size() && e.pass; ++k) {
            if (!(costs[k].array() >= 0.0).all()) {
                e.pass = false;
                e.witness_point = sample_points[k];
                e.detail = "negative switching cost at " + format_point(sample_points[k]);
            }
        }
        if (e.pass) e.detail = "c >= 0 at all samples";
        report.entries.push_back(std::move(e));
    }

    // H2(iii): polynomial growth of f, g, c.
    {
        AssumptionEntry e;
        e.assumption = Assumption::H2_polynomial_growth;
        std::vector<double> h(sample_points.size());
        for (std::size_t k = 0; k < sample_points.size(); ++k) {
            const State& x = sample_points[k];
            double gmax = 0.0, fmax = 0.0;
            for (int i = 0; i < m; ++i) {
                const RegimeIndex ri = RegimeIndex::from_slot(i);
                gmax = std::max(gmax, std::abs(spec.terminal_payoff(x, ri)));
                for (const auto& u : controls) fmax = std::max(fmax, std::abs(spec.running_cost(x, ri, u)));
            }
            h[k] = gmax + fmax + costs[k].cwiseAbs().maxCoeff();
        }

        // Least-squares slope of log h against log |x| over the far samples.
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        int cnt = 0;
        double rmin = std::numeric_limits<double>::infinity(), rmax = 0.0;
        for (std::size_t k = 0; k < sample_points.size(); ++k) {
            const double r = sample_points[k].norm();
            if (r < 1.0 || !(h[k] > 0.0) || !std::isfinite(h[k])) continue;
            const double lx = std::log(r), ly = std::log(h[k]);
            sx += lx, sy += ly, sxx += lx * lx, sxy += lx * ly;
            ++cnt;
            rmin = std::min(rmin, r);
            rmax = std::max(rmax, r);
        }
        double slope = 0.0;
        if (cnt >= 2 && rmax > rmin * (1.0 + 1e-9)) {
            const double den = cnt * sxx - sx * sx;
            if (den > 0.0) slope = (cnt * sxy - sx * sy) / den;
        }
        report.fitted_exponent = slope;
        double p = spec.growth_exponent;
        if (std::isfinite(slope)) p = std::max(p, std::ceil(slope - 0.05));
        report.growth_exponent = p;

        double m2 = 0.0;
        for (std::size_t k = 0; k < sample_points.size(); ++k) {
            const double ratio = h[k] / (1.0 + std::pow(sample_points[k].norm(), p));
            if (!std::isfinite(ratio)) {
                m2 = std::numeric_limits<double>::infinity();
                if (e.pass) e.witness_point = sample_points[k];
                e.pass = false;
            } else {
                m2 = std::max(m2, ratio);
            }
        }
        if (!std::isfinite(slope) || p > kMaxGrowthExponent) e.pass = false;
        report.poly_growth = m2;
        e.detail = fmt::format("p = {:.6g} (fitted slope {:.4g}), M2 ~ {:.6g}", p, slope, m2);
        report.entries.push_back(std::move(e));

        const double q = std::max(4.0, p);
        double ratio = 0.0;
        for (const auto& x : sample_points)
            for (int i = 0; i < m; ++i)
                ratio = std::max(ratio, std::abs(spec.terminal_payoff(x, RegimeIndex::from_slot(i))) / (1.0 + std::pow(x.norm(), q)));
        report.max_terminal_ratio = ratio;
    }

    // H2(iv): g(x,i) >= max_{j != i} [g(x,j) - c(x,i,j)].
    {
        AssumptionEntry e;
        e.assumption = Assumption::H2_terminal_consistency;
        for (std::size_t k = 0; k < sample_points.size() && e.pass; ++k) {
            const State& x = sample_points[k];
            for (int i = 0; i < m && e.pass; ++i) {
                const double gi = spec.terminal_payoff(x, RegimeIndex::from_slot(i));
                for (int j = 0; j < m; ++j) {
                    if (j == i) continue;
                    const double gj = spec.terminal_payoff(x, RegimeIndex::from_slot(j));
                    if (gi < gj - costs[k](i, j) - kConsistencySlack) {
                        e.pass = false;
                        e.witness_point = x;
                        e.detail = fmt::format("g(x,{}) < g(x,{}) - c at {}", i + 1, j + 1, format_point(x));
                        break;
                    }
                }
            }
        }
        if (e.pass) e.detail = "terminal payoff dominates switched payoff at all samples";
        report.entries.push_back(std::move(e));
    }

    // H3: zero diagonal and no zero-cost loop, pointwise.
    {
        AssumptionEntry e;
        e.assumption = Assumption::H3;
        for (std::size_t k = 0; k < sample_points.size() && e.pass; ++k) {
            const Eigen::MatrixXd& c = costs[k];
            if (c.diagonal().cwiseAbs().maxCoeff() != 0.0) {
                e.pass = false;
                e.witness_point = sample_points[k];
                e.detail = "c(x,i,i) != 0 at " + format_point(sample_points[k]);
                break;
            }
            if (!(c.array() >= 0.0).all()) {
                e.pass = false;
                e.witness_point = sample_points[k];
                e.detail = "cost matrix has negative entries at " + format_point(sample_points[k]);
                break;
            }
            auto loop = no_free_loop(c);
            if (!loop.pass) {
                e.pass = false;
                e.witness_point = sample_points[k];
                e.witness_cycle = loop.witness;
                e.detail = "zero-cost loop " + format_cycle(loop.witness) + " at " + format_point(sample_points[k]);
            }
        }
        if (e.pass) e.detail = "no zero-cost loop at any sample";
        report.entries.push_back(std::move(e));
    }

    return report;
}

double GrowthBounds::envelope(double s, double horizon, const State& x) const {
    return -C * std::exp(lambda * (horizon - s)) * (1.0 + std::pow(x.norm(), q));
}

double GrowthBounds::growth_bound(const State& x) const { return C * (1.0 + std::pow(x.norm(), p)); }

GrowthBounds growth_envelope(const ProblemSpec& spec, const ValidationReport& report) {
    const bool finite = std::isfinite(report.lipschitz) && std::isfinite(report.linear_growth) &&
                        std::isfinite(report.poly_growth) && std::isfinite(report.max_terminal_ratio);
    if (!finite) throw EstimationFailure("sampled growth ratios are not finite");
    if (!(report.growth_exponent <= kMaxGrowthExponent))
        throw EstimationFailure(fmt::format("sampled growth exponent {:.4g} diverges (cap {})", report.growth_exponent, kMaxGrowthExponent));

    GrowthBounds gb;
    gb.L1 = report.lipschitz;
    gb.M1 = report.linear_growth;
    gb.M2 = report.poly_growth;
    gb.p = report.growth_exponent;
    gb.q = std::max(4.0, gb.p);
    gb.C = std::max(1.0, report.max_terminal_ratio);
    gb.M_h = gb.q * (gb.q - 1.0);
    // Each term of the Ito expansion of the envelope is dominated by a multiple of (1 + |x|^q):
    // 1+|x|^p <= 2(1+|x|^q), |x|^{q-1}(1+|x|) <= 2(1+|x|^q), |x|^{q-2}(1+|x|)^2 <= 4(1+|x|^q).
    gb.C_bar = 2.0 * gb.M2 + 2.0 * gb.C * gb.M_h * gb.M1 + 2.0 * gb.C * gb.M_h * gb.M1 * gb.M1;
    gb.lambda = gb.C_bar / gb.C;

    for (const auto& x : report.samples) {
        for (int i = 0; i < spec.regimes; ++i) {
            if (gb.envelope(spec.horizon, spec.horizon, x) > spec.terminal_payoff(x, RegimeIndex::from_slot(i)))
                throw EstimationFailure("envelope exceeds the terminal payoff at " + format_point(x));
        }
    }
    return gb;
}

std::vector<State> box_samples(const Eigen::VectorXd& lower, const Eigen::VectorXd& upper, int per_dim) {
    if (lower.size() != upper.size() || lower.size() == 0) throw InvalidArgument("box bounds dimension mismatch");
    if (per_dim < 1) throw InvalidArgument("need at least one sample per dimension");
    const Eigen::Index d = lower.size();
    std::size_t total = 1;
    for (Eigen::Index k = 0; k < d; ++k) total *= static_cast<std::size_t>(per_dim);
    std::vector<State> out;
    out.reserve(total);
    for (std::size_t flat = 0; flat < total; ++flat) {
        State x(d);
        std::size_t rest = flat;
        for (Eigen::Index k = d - 1; k >= 0; --k) {
            const auto idx = static_cast<double>(rest % per_dim);
            rest /= per_dim;
            x[k] = per_dim == 1 ? 0.5 * (lower[k] + upper[k])
                                : lower[k] + (upper[k] - lower[k]) * idx / (per_dim - 1);
        }
        out.push_back(std::move(x));
    }
    return out;
}

}  // namespace rswitch
