#include "rswitch/io.hpp"

#include <fmt/format.h>

#include <ostream>

namespace rswitch {

namespace {

std::string join_point(const Eigen::VectorXd& v) {
    std::string s;
    for (Eigen::Index k = 0; k < v.size(); ++k) s += (k ? ";" : "") + format_real(v[k]);
    return s;
}

std::string coordinate_header(int d) {
    std::string s;
    for (int k = 1; k <= d; ++k) s += fmt::format("x_{},", k);
    return s;
}

}  // namespace

std::string format_real(double v) { return fmt::format("{:.17g}", v); }

void write_field_csv(std::ostream& out, const ValueField& field, const PolicyField* policy) {
    const Grid& g = field.grid;
    const int d = g.dimension();
    out << "t," << coordinate_header(d) << "regime,value,action,switch_target,adversary_control\n";
    for (std::size_t k = 0; k < field.layers.size(); ++k) {
        const std::string t = format_real(g.time(static_cast<int>(k)));
        for (std::size_t node = 0; node < g.node_count(); ++node) {
            const State x = g.point(node);
            std::string prefix = t + ",";
            for (int a = 0; a < d; ++a) prefix += format_real(x[a]) + ",";
            for (int slot = 0; slot < field.regimes(); ++slot) {
                const double v = field.layers[k](static_cast<Eigen::Index>(node), slot);
                if (!policy) {
                    out << prefix << "0," << format_real(v) << ",,,\n";
                    continue;
                }
                const RegimeIndex i = RegimeIndex::from_slot(slot);
                const auto target = policy->switch_target(static_cast<int>(k), node, i);
                const std::size_t u = policy->adversary_index(static_cast<int>(k), node, i);
                out << prefix << i.value << ',' << format_real(v) << ',' << (target ? "SWITCH_TO" : "STAY") << ','
                    << (target ? target->value : 0) << ',' << join_point(policy->control_set[u]) << '\n';
            }
        }
    }
}

void write_isaacs_csv(std::ostream& out, const IsaacsReport& report) {
    out << "p,lower,upper,gap\n";
    for (const auto& s : report.samples)
        out << join_point(s.p) << ',' << format_real(s.lower) << ',' << format_real(s.upper) << ',' << format_real(s.gap)
            << '\n';
}

void write_trajectory_csv(std::ostream& out, const TrajectoryRecord& record, const ProblemSpec& spec) {
    out << "t," << coordinate_header(spec.dimension) << "regime,control,cum_running_cost,cum_switch_cost\n";
    for (std::size_t k = 0; k < record.times.size(); ++k) {
        out << format_real(record.times[k]) << ',';
        for (Eigen::Index a = 0; a < record.states[k].size(); ++a) out << format_real(record.states[k][a]) << ',';
        out << record.regimes[k].value << ',' << join_point(spec.control_set[record.controls[k]]) << ','
            << format_real(record.cum_running_cost[k]) << ',' << format_real(record.cum_switch_cost[k]) << '\n';
    }
}

}  // namespace rswitch
