#include "helpers.hpp"
#include "oracles.hpp"

#include "rswitch/benchmarks.hpp"
#include "rswitch/errors.hpp"

#include <doctest.h>

#include <random>

using namespace rswitch;

namespace {

std::vector<int> labels(const std::vector<RegimeIndex>& w) {
    std::vector<int> out;
    for (auto r : w) out.push_back(r.value);
    return out;
}

}  // namespace

TEST_CASE("regime index slots round trip") {
    for (int v = 1; v <= 5; ++v) CHECK(RegimeIndex::from_slot(RegimeIndex{v}.slot()).value == v);
    CHECK(RegimeIndex{1} < RegimeIndex{2});
}

TEST_CASE("check_structure rejects malformed specs") {
    ProblemSpec s = get_benchmark("ek_example").spec;
    CHECK_NOTHROW(s.check_structure());
    ProblemSpec bad = s;
    bad.control_set.clear();
    CHECK_THROWS_AS(bad.check_structure(), InvalidArgument);
    bad = s;
    bad.drift = nullptr;
    CHECK_THROWS_AS(bad.check_structure(), InvalidArgument);
    bad = s;
    bad.regimes = 0;
    CHECK_THROWS_AS(bad.check_structure(), InvalidArgument);
    bad = s;
    bad.horizon = -1.0;
    CHECK_THROWS_AS(bad.check_structure(), InvalidArgument);
}

TEST_CASE("no_free_loop on the listed matrices") {
    Eigen::MatrixXd c2(2, 2);
    c2 << 0, 1, 1, 0;
    CHECK(no_free_loop(c2).pass);

    const auto zero = no_free_loop(Eigen::MatrixXd::Zero(2, 2));
    CHECK_FALSE(zero.pass);
    CHECK(labels(zero.witness) == std::vector<int>{1, 2, 1});

    Eigen::MatrixXd c3(3, 3);
    c3 << 0, 0, 1,
          1, 0, 0,
          0, 1, 0;
    const auto tri = no_free_loop(c3);
    CHECK_FALSE(tri.pass);
    CHECK(labels(tri.witness) == std::vector<int>{1, 2, 3, 1});
}

TEST_CASE("no_free_loop agrees with exhaustive cycle search") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 400; ++trial) {
        const int m = 2 + trial % 4;
        Eigen::MatrixXd c(m, m);
        std::bernoulli_distribution zero(0.3);
        for (int a = 0; a < m; ++a)
            for (int b = 0; b < m; ++b) c(a, b) = a == b ? 0.0 : (zero(rng) ? 0.0 : 0.5);
        const auto got = no_free_loop(c);
        auto cycles = oracle::zero_cost_cycles(c);
        REQUIRE(got.pass == cycles.empty());
        if (cycles.empty()) continue;
        std::sort(cycles.begin(), cycles.end(), [](const auto& x, const auto& y) {
            return x.size() != y.size() ? x.size() < y.size() : x < y;
        });
        CHECK(labels(got.witness) == cycles.front());
    }
}

TEST_CASE("no_free_loop rejects invalid matrices") {
    Eigen::MatrixXd neg(2, 2);
    neg << 0, -1, 1, 0;
    CHECK_THROWS_AS(no_free_loop(neg), InvalidArgument);
    Eigen::MatrixXd diag(2, 2);
    diag << 1, 1, 1, 0;
    CHECK_THROWS_AS(no_free_loop(diag), InvalidArgument);
    CHECK_THROWS_AS(no_free_loop(Eigen::MatrixXd::Zero(2, 3)), InvalidArgument);
    Eigen::MatrixXd nan = Eigen::MatrixXd::Ones(2, 2);
    nan(0, 0) = 0;
    nan(1, 1) = 0;
    nan(0, 1) = std::nan("");
    CHECK_THROWS_AS(no_free_loop(nan), InvalidArgument);
    CHECK(no_free_loop(Eigen::MatrixXd::Zero(1, 1)).pass);
}

TEST_CASE("validate_spec on the two-regime zero-cost example") {
    const Benchmark b = get_benchmark("ek_example");
    const auto report = validate_spec(b.spec, box_samples(b.grid.lower, b.grid.upper, 21));
    const auto& h3 = report.entry(Assumption::H3);
    CHECK_FALSE(h3.pass);
    CHECK(labels(h3.witness_cycle) == std::vector<int>{1, 2, 1});
    REQUIRE(h3.witness_point.has_value());
    CHECK(report.lipschitz == 0.0);
    CHECK(report.entry(Assumption::H1).pass);
    CHECK(report.entry(Assumption::H2_nonnegative_cost).pass);
    CHECK(report.entry(Assumption::H2_terminal_consistency).pass);
    CHECK_FALSE(report.all_pass());
    CHECK(report.unexpected_failures(b.spec).empty());

    ProblemSpec unflagged = b.spec;
    unflagged.h3_violating = false;
    CHECK(report.unexpected_failures(unflagged) == std::vector<Assumption>{Assumption::H3});
}

TEST_CASE("validate_spec with unit switching costs passes every cost entry") {
    const ProblemSpec s = testing::frozen_spec(testing::uniform_cost(3, 1.0));
    const auto report = validate_spec(s, box_samples(Eigen::VectorXd::Constant(1, -2), Eigen::VectorXd::Constant(1, 2), 9));
    CHECK(report.entry(Assumption::H2_nonnegative_cost).pass);
    CHECK(report.entry(Assumption::H2_terminal_consistency).pass);
    CHECK(report.entry(Assumption::H3).pass);
    CHECK(report.all_pass());
}

TEST_CASE("validate_spec flags negative costs and terminal inconsistency") {
    Eigen::MatrixXd c = testing::uniform_cost(2, 0.1);
    const auto samples = box_samples(Eigen::VectorXd::Constant(1, -1), Eigen::VectorXd::Constant(1, 1), 5);

    const ProblemSpec inconsistent = testing::frozen_spec(c, {0.0, 0.5});
    const auto r1 = validate_spec(inconsistent, samples);
    CHECK_FALSE(r1.entry(Assumption::H2_terminal_consistency).pass);
    CHECK(r1.entry(Assumption::H2_terminal_consistency).witness_point.has_value());

    c(0, 1) = -0.1;
    const auto r2 = validate_spec(testing::frozen_spec(c), samples);
    CHECK_FALSE(r2.entry(Assumption::H2_nonnegative_cost).pass);
    CHECK_FALSE(r2.entry(Assumption::H3).pass);

    CHECK_THROWS_AS(validate_spec(inconsistent, {}), InvalidArgument);
}

TEST_CASE("growth exponent is fitted from the samples") {
    ProblemSpec s = get_benchmark("pure_diffusion_quadratic").spec;
    s.growth_exponent = 1.0;  // declared too low on purpose
    const auto report = validate_spec(s, box_samples(Eigen::VectorXd::Constant(1, -6), Eigen::VectorXd::Constant(1, 6), 61));
    CHECK(report.growth_exponent == doctest::Approx(2.0));
    CHECK(report.entry(Assumption::H2_polynomial_growth).pass);
}

TEST_CASE("growth envelope constants") {
    SUBCASE("quadratic payoff uses q = 4") {
        const Benchmark b = get_benchmark("pure_diffusion_quadratic");
        const auto report = validate_spec(b.spec, box_samples(b.grid.lower, b.grid.upper, 41));
        const GrowthBounds gb = growth_envelope(b.spec, report);
        CHECK(gb.p == doctest::Approx(2.0));
        CHECK(gb.q == 4.0);
        CHECK(gb.M_h == 12.0);
        CHECK(gb.lambda == doctest::Approx(gb.C_bar / gb.C));
    }
    SUBCASE("envelope lies below the closed-form value of the two-regime example") {
        const Benchmark b = get_benchmark("ek_example");
        const auto samples = box_samples(b.grid.lower, b.grid.upper, 41);
        const GrowthBounds gb = growth_envelope(b.spec, validate_spec(b.spec, samples));
        CHECK(gb.C >= 1.0);
        CHECK(gb.q == 4.0);
        for (double s : {0.0, 0.25, 0.5, 1.0})
            for (const auto& x : samples) {
                CHECK(gb.envelope(s, 1.0, x) <= analytic_value(b, s, x, RegimeIndex{1}));
                CHECK(std::abs(analytic_value(b, s, x, RegimeIndex{1})) <= -gb.envelope(s, 1.0, x));
                CHECK(std::abs(b.spec.terminal_payoff(x, RegimeIndex{1})) <= gb.growth_bound(x));
            }
        CHECK(gb.envelope(0.0, 1.0, State::Zero(1)) == doctest::Approx(-gb.C * std::exp(gb.lambda)));
    }
    SUBCASE("vanishing payoffs give a nonpositive envelope") {
        ProblemSpec s = testing::frozen_spec(Eigen::MatrixXd::Zero(1, 1));
        s.terminal_payoff = [](const State&, RegimeIndex) { return 0.0; };
        const auto samples = box_samples(Eigen::VectorXd::Constant(1, -3), Eigen::VectorXd::Constant(1, 3), 13);
        const GrowthBounds gb = growth_envelope(s, validate_spec(s, samples));
        for (const auto& x : samples) CHECK(gb.envelope(0.0, 1.0, x) <= 0.0);
    }
}

TEST_CASE("growth envelope refuses runaway growth") {
    ProblemSpec s = testing::frozen_spec(Eigen::MatrixXd::Zero(1, 1));
    s.terminal_payoff = [](const State& x, RegimeIndex) { return std::exp(x[0] * x[0]); };
    const auto samples = box_samples(Eigen::VectorXd::Constant(1, -6), Eigen::VectorXd::Constant(1, 6), 61);
    CHECK_THROWS_AS(growth_envelope(s, validate_spec(s, samples)), EstimationFailure);
}

TEST_CASE("box samples cover the corners") {
    const auto pts = box_samples(Eigen::Vector2d(-1, 0), Eigen::Vector2d(1, 2), 3);
    REQUIRE(pts.size() == 9);
    CHECK(pts.front().isApprox(Eigen::Vector2d(-1, 0)));
    CHECK(pts.back().isApprox(Eigen::Vector2d(1, 2)));
    CHECK_THROWS_AS(box_samples(Eigen::Vector2d(0, 0), Eigen::VectorXd::Zero(1), 2), InvalidArgument);
}
