#pragma once

#include "rswitch/game.hpp"
#include "rswitch/simulator.hpp"

#include <iosfwd>
#include <string>

namespace rswitch {

/// Shortest round-trip-safe text for a double ('.' separator, 17 significant digits).
std::string format_real(double v);

/// Columns t, x_1..x_d, regime, value, action, switch_target, adversary_control.
/// Rows are time-major, then node, then regime. Without a policy (game fields) the
/// regime column is 0 and the policy columns are empty.
void write_field_csv(std::ostream& out, const ValueField& field, const PolicyField* policy = nullptr);

/// Columns p, lower, upper, gap (p coordinates joined by ';' when d > 1).
void write_isaacs_csv(std::ostream& out, const IsaacsReport& report);

/// Columns t, x_1..x_d, regime, control, cum_running_cost, cum_switch_cost.
void write_trajectory_csv(std::ostream& out, const TrajectoryRecord& record, const ProblemSpec& spec);

}  // namespace rswitch
