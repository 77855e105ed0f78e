#include "property_checks.hpp"

#include <doctest.h>

namespace {

void require(const props::Result& r) {
    INFO(r.detail);
    CHECK(r.pass);
}

}  // namespace

TEST_CASE("discrete comparison" * doctest::timeout(5.0)) { require(props::discrete_comparison()); }

TEST_CASE("constant-shift equivariance" * doctest::timeout(5.0)) { require(props::shift_equivariance()); }

TEST_CASE("obstacle and complementarity on solved fields" * doctest::timeout(5.0)) { require(props::obstacle_and_complementarity()); }

TEST_CASE("terminal exactness" * doctest::timeout(5.0)) { require(props::terminal_exactness()); }

TEST_CASE("sweep-order invariance" * doctest::timeout(5.0)) { require(props::sweep_order_invariance()); }

TEST_CASE("growth bound and envelope sandwich" * doctest::timeout(5.0)) { require(props::growth_sandwich()); }

TEST_CASE("dynamic programming check is exact" * doctest::timeout(5.0)) { require(props::dpp_zero()); }

TEST_CASE("Zeno abort before one half" * doctest::timeout(5.0)) { require(props::zeno_abort()); }

TEST_CASE("no_free_loop verdicts" * doctest::timeout(5.0)) { require(props::no_free_loop_verdicts()); }

TEST_CASE("per-path cost identity" * doctest::timeout(5.0)) { require(props::cost_identity()); }
