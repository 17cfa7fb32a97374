#include <catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "support.hpp"

using namespace gridflow;
using namespace gridflow::testing;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

PowerFlowOptions tight() {
    PowerFlowOptions o;
    o.tolerance = 1e-12;
    return o;
}

}  // namespace

TEST_CASE("sin sigma") {
    CHECK(sin_sigma(0.0, 0.0) == 1.0);
    CHECK(sin_sigma(0.0, -0.3) == 1.0);
    CHECK_THAT(sin_sigma(1.0, 1.0), WithinAbs(1.0 / std::sqrt(2.0), 1e-15));
    CHECK_THAT(sin_sigma(3.0, 4.0), WithinAbs(0.8, 1e-15));
}

TEST_CASE("reactive cost examples") {
    SECTION("pure reactive source is the plain quadratic") {
        CostCurve c{0.082, 2.25, 150.0, 0.0};
        for (double q : {-0.5, 0.0, 0.3, 0.75}) CHECK_THAT(reactive_cost(c, q), WithinAbs(0.082 * q * q + 2.25 * q + 150.0, 1e-12));
    }
    SECTION("zero output leaves the constant") {
        CHECK(reactive_cost(CostCurve{1.0, 2.0, 7.0, 0.8}, 0.0) == 7.0);
    }
    SECTION("P = Q = 1 with a = 1") {
        CHECK_THAT(reactive_cost(CostCurve{1.0, 0.0, 0.0, 1.0}, 1.0), WithinAbs(0.5, 1e-15));
    }
    SECTION("sum over sources") {
        std::vector<CostTerm> terms{{CostCurve{1, 0, 1, 0}, 1.0}, {CostCurve{0, 2, 3, 0}, 0.5}};
        CHECK_THAT(reactive_cost(terms), WithinAbs(2.0 + 4.0, 1e-15));
    }
}

TEST_CASE("reactive cost is monotone for non-negative output") {
    CostCurve c{0.055, 1.25, 140.0, 0.0};
    double prev = reactive_cost(c, 0.0);
    for (int k = 1; k <= 100; ++k) {
        double now = reactive_cost(c, 0.01 * k);
        CHECK(now >= prev);
        prev = now;
    }
}

TEST_CASE("cost derivative matches differences") {
    for (double p : {0.0, 0.4, 1.3}) {
        CostCurve c{0.7, 1.1, 3.0, p};
        for (double q : {-0.8, -0.2, 0.3, 0.9}) {
            const double h = 1e-6;
            const double fd = (reactive_cost(c, q + h) - reactive_cost(c, q - h)) / (2 * h);
            CHECK_THAT(reactive_cost_derivative(c, q), WithinAbs(fd, 1e-6));
        }
    }
    CHECK(reactive_cost_derivative(CostCurve{0.5, 2.0, 1.0, 0.0}, 0.3) == 2 * 0.5 * 0.3 + 2.0);
}

TEST_CASE("weighted combination") {
    auto a = combine(Weights{1, 1, 1}, 0.1869, 0.0061, 0.0769);
    CHECK_THAT(a.f, WithinAbs(0.2699, 1e-12));
    auto zero = combine(Weights{0, 0, 0}, 0.3, 0.2, 0.1);
    CHECK(zero.f == 0.0);
    auto loss_only = combine(Weights{1, 0, 0}, 0.3, 0.2, 0.1);
    CHECK(loss_only.f == 0.3);
    auto w = combine(Weights{2, 3, 0.5}, 0.3, 0.2, 0.1);
    CHECK(w.f == w.loss_term + w.dev_term + w.cost_term);
    CHECK(w.c_q == 0.1);
}

TEST_CASE("voltage deviation") {
    auto net = ieee9();
    DeviationTargets targets(net);
    CHECK(targets.bus.size() == 6);
    Eigen::VectorXd v = Eigen::VectorXd::Ones(9);
    CHECK(voltage_deviation(v, targets) == 0.0);
    v(static_cast<Eigen::Index>(net.index_of(BusId{7}))) = 1.1;
    CHECK_THAT(voltage_deviation(v, targets), WithinAbs(0.01, 1e-15));
}

TEST_CASE("objective breakdown on solved states") {
    auto net = ieee9();
    auto y = build_admittance(net);
    for (const auto& q : sample_controls(net, 10, 3)) {
        auto e = evaluate(net, y, q);
        CHECK(e.objective.f == e.objective.loss_term + e.objective.dev_term + e.objective.cost_term);
        CHECK(e.objective.p_loss >= 0.0);
        CHECK(e.objective.loss_term == net.weights.loss * e.objective.p_loss);
    }
    auto flat = zero_load9();
    for (auto& b : flat.buses) b.v_init = 1.0;
    for (auto& br : flat.branches) br.b_charging = 0.0;
    auto e = evaluate(flat, build_admittance(flat), std::vector<double>(5, 0.0));
    CHECK_THAT(e.objective.p_loss, WithinAbs(0.0, 1e-12));
}

TEST_CASE("exact gradient matches the finite-difference oracle") {
    auto net = ieee9();
    auto y = build_admittance(net);
    auto samples = sample_controls(net, 24, 2024);
    samples.push_back(std::vector<double>(5, 0.0));
    for (const auto& q : samples) {
        auto e = evaluate(net, y, q, nullptr, tight());
        auto g = gradients(net, y, e.pf, q, GradientMode::Exact);
        for (std::size_t s = 0; s < q.size(); ++s) {
            const double fd = fd_gradient(s, net, y, q, 1e-4, tight());
            CAPTURE(s, q, g[s], fd);
            CHECK(std::abs(g[s] - fd) <= std::max(0.05 * std::abs(fd), 1e-4));
        }
    }
}

TEST_CASE("finite differences are step-robust") {
    auto net = ieee9();
    auto y = build_admittance(net);
    std::vector<double> q(5, 0.0);
    for (std::size_t s = 0; s < q.size(); ++s) {
        CHECK_THAT(fd_gradient(s, net, y, q, 1e-4, tight()), WithinAbs(fd_gradient(s, net, y, q, 1e-5, tight()), 1e-3));
    }
}

TEST_CASE("central difference is exact on quadratics") {
    auto f = [](std::span<const double> q) { return q[0] * q[0]; };
    std::vector<double> q{0.37};
    CHECK_THAT(central_difference(f, q, 0, 1e-3, -1.0, 1.0), WithinAbs(0.74, 1e-12));
    std::vector<double> edge{1.0};
    CHECK_THAT(central_difference(f, edge, 0, 1e-3, -1.0, 1.0), WithinAbs(2.0, 2e-3));
}

TEST_CASE("zero weights give a zero gradient") {
    auto net = ieee9();
    net.weights = Weights{0, 0, 0};
    auto y = build_admittance(net);
    std::vector<double> q{0.1, 0.2, -0.1, 0.0, 0.3};
    auto e = evaluate(net, y, q);
    for (double g : gradients(net, y, e.pf, q, GradientMode::Exact)) CHECK(g == 0.0);
    CHECK(fd_gradient(0, net, y, q, 1e-4) == 0.0);
}

TEST_CASE("cost-only weights reduce to the cost derivative") {
    auto net = ieee9();
    net.weights = Weights{0, 0, 1};
    auto y = build_admittance(net);
    std::vector<double> q{0.1, 0.2, -0.1, 0.0, 0.3};
    auto e = evaluate(net, y, q);
    auto g = gradients(net, y, e.pf, q, GradientMode::Exact);
    for (std::size_t s = 0; s < q.size(); ++s) {
        const auto& src = net.sources[s];
        CHECK_THAT(g[s], WithinAbs(2 * src.a_p * q[s] + src.b_p, 1e-12));
    }
}

TEST_CASE("modes agree on a zero-angle state") {
    auto net = zero_load9();
    for (auto& b : net.buses) b.v_init = 1.0;
    for (auto& br : net.branches) br.b_charging = 0.0;
    auto y = build_admittance(net);
    std::vector<double> q(5, 0.0);
    auto e = evaluate(net, y, q);
    REQUIRE(e.pf.delta.cwiseAbs().maxCoeff() < 1e-12);
    auto exact = gradients(net, y, e.pf, q, GradientMode::Exact);
    auto approx = gradients(net, y, e.pf, q, GradientMode::AngleApprox);
    for (std::size_t s = 0; s < q.size(); ++s) CHECK_THAT(exact[s], WithinAbs(approx[s], 1e-12));

    // Synthetic flat state on the loaded network.
    auto loaded = ieee9();
    auto yl = build_admittance(loaded);
    PowerFlowSolution flat;
    flat.v = Eigen::VectorXd::LinSpaced(9, 0.97, 1.04);
    flat.delta = Eigen::VectorXd::Zero(9);
    std::vector<double> ql{0.1, -0.2, 0.3, 0.0, 0.1};
    auto ge = gradients(loaded, yl, flat, ql, GradientMode::Exact);
    auto ga = gradients(loaded, yl, flat, ql, GradientMode::AngleApprox);
    for (std::size_t s = 0; s < ql.size(); ++s) CHECK(ge[s] == ga[s]);
}

TEST_CASE("approximate gradient differs on the loaded case") {
    auto net = ieee9();
    auto y = build_admittance(net);
    std::vector<double> q(5, 0.0);
    auto e = evaluate(net, y, q);
    auto exact = gradients(net, y, e.pf, q, GradientMode::Exact);
    auto approx = gradients(net, y, e.pf, q, GradientMode::AngleApprox);
    double diff = 0.0;
    for (std::size_t s = 0; s < q.size(); ++s) diff = std::max(diff, std::abs(exact[s] - approx[s]));
    CHECK(diff > 1e-4);
}

TEST_CASE("local gradient form") {
    auto net = ieee9();
    auto y = build_admittance(net);
    std::vector<double> q(5, 0.0);
    auto e = evaluate(net, y, q);
    auto local = gradients(net, y, e.pf, q, GradientMode::Exact, GradientForm::Local);
    for (double g : local) CHECK(std::isfinite(g));

    SECTION("vanishing denominator names the bus") {
        PowerFlowSolution s = e.pf;
        const auto i = static_cast<Eigen::Index>(net.index_of(BusId{7}));
        // Q_G - Q_D - V^2 B_ii = 0 at bus 7.
        const double b = y.b(i, i);
        s.v(i) = std::sqrt(-0.65 / b);
        CHECK_THROWS_WITH(local_gradient(2, net, y, s, q, GradientMode::Exact),
                          ContainsSubstring("singular voltage sensitivity at bus 7"));
    }
}

TEST_CASE("single gradient accessor") {
    auto net = ieee9();
    auto y = build_admittance(net);
    std::vector<double> q{0.1, 0.0, 0.0, 0.2, 0.0};
    auto e = evaluate(net, y, q);
    auto all = gradients(net, y, e.pf, q, GradientMode::AngleApprox);
    CHECK(gradient(3, net, y, e.pf, q, GradientMode::AngleApprox) == all[3]);
}
