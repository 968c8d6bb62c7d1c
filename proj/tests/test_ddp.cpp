#include <doctest.h>

#include "rsmpc/ddp.hpp"
#include "rsmpc/oracle.hpp"
#include "test_helpers.hpp"

using namespace rsmpc;

namespace {

struct ScalarPendulum : EulerModel {
    ScalarPendulum() : EulerModel(1, 1, 1, 0.05) {}
    Vec f_cont(const Vec& x, const Vec& u) const override {
        return Vec::Constant(1, u[0] - std::sin(x[0]));
    }
    Vec measurement(const Vec& x) const override { return x; }
};

OCProblem pendulum_problem(int horizon) {
    auto model = std::make_shared<ScalarPendulum>();
    auto cost = std::make_shared<testing::LqrCost>(
        4.0 * Mat::Identity(1, 1), 0.1 * Mat::Identity(1, 1), 4.0 * Mat::Identity(1, 1));
    return OCProblem(model, cost, horizon);
}

}  // namespace

TEST_CASE("scalar LQR with H = 1 matches the hand Riccati solution") {
    // A = B = Q = R = Qf = 1: K0 = 1/2, P0 = 3/2, u0* = -x0/2.
    const Mat I = Mat::Identity(1, 1);
    auto model = std::make_shared<testing::LinearModel>(I, I, I);
    auto cost = std::make_shared<testing::LqrCost>(I, I, I);
    OCProblem ocp(model, cost, 1);

    DDPSolution sol = DDPSolver().solve(ocp, Vec::Constant(1, 1.0));
    CHECK(sol.converged);
    CHECK(sol.iterations == 1);
    CHECK(sol.controls[0][0] == doctest::Approx(-0.5).epsilon(1e-9));
    CHECK(sol.value_expansions[0].V_xx(0, 0) == doctest::Approx(1.5).epsilon(1e-8));
    CHECK(sol.value_expansions[1].V_xx(0, 0) == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("LQR instances converge in one counted iteration to the Riccati optimum") {
    RandomStream rng(101);
    for (int rep = 0; rep < 10; ++rep) {
        const int n = 2 + static_cast<int>(rng.uniform(0.0, 3.0));
        const int m = 1 + static_cast<int>(rng.uniform(0.0, 2.0));
        const int H = 5 + static_cast<int>(rng.uniform(0.0, 15.0));
        auto inst = testing::random_lqr(rng, n, m);
        OCProblem ocp(inst.model, inst.cost, H);
        const auto ric = oracle::riccati_lqr(inst.A, inst.B, inst.Qc, inst.Rc, inst.Qf, H);

        DDPSolution sol = DDPSolver().solve(ocp, inst.x0);
        REQUIRE(sol.converged);
        CHECK(sol.iterations == 1);
        // optimal controls and value Hessians agree with the Riccati recursion
        Vec x = inst.x0;
        for (int k = 0; k < H; ++k) {
            const Vec u_star = -ric.gains[k] * x;
            CHECK((sol.controls[k] - u_star).lpNorm<Eigen::Infinity>() < 1e-8);
            CHECK((sol.value_expansions[k].V_xx - ric.P[k]).lpNorm<Eigen::Infinity>() < 1e-7);
            // v_x = P_k x_k along the optimum
            CHECK((sol.value_expansions[k].v_x - ric.P[k] * sol.states[k])
                      .lpNorm<Eigen::Infinity>() < 1e-7);
            x = inst.A * x + inst.B * u_star;
        }
    }
}

TEST_CASE("backward pass gains vanish under extreme regularization") {
    RandomStream rng(17);
    auto inst = testing::random_lqr(rng, 3, 2);
    OCProblem ocp(inst.model, inst.cost, 10);
    std::vector<Vec> us(10, Vec::Zero(2));
    std::vector<Vec> xs;
    xs.push_back(inst.x0);
    for (int k = 0; k < 10; ++k) xs.push_back(inst.model->step(xs.back(), us[k]));

    const auto bp = backward_pass(ocp, xs, us, 1e12);
    REQUIRE(bp.ok);
    for (int k = 0; k < 10; ++k) {
        CHECK(bp.k_ff[k].norm() < 1e-9);
        CHECK(bp.K_fb[k].norm() < 1e-9);
    }
}

TEST_CASE("forward pass with step 0 is rejected, step 1 reproduces the update") {
    RandomStream rng(23);
    auto inst = testing::random_lqr(rng, 2, 1);
    OCProblem ocp(inst.model, inst.cost, 5);
    std::vector<Vec> us(5, Vec::Zero(1));
    std::vector<Vec> xs;
    xs.push_back(inst.x0);
    for (int k = 0; k < 5; ++k) xs.push_back(inst.model->step(xs.back(), us[k]));
    const auto bp = backward_pass(ocp, xs, us, 1e-9);
    REQUIRE(bp.ok);

    CHECK_THROWS_AS(forward_pass(ocp, xs, us, bp, 0.0), std::invalid_argument);
    const auto fp = forward_pass(ocp, xs, us, bp, 1.0);
    REQUIRE(fp.has_value());
    // LQR: a unit step achieves exactly the predicted decrease
    const double expected = -(bp.d1 + 0.5 * bp.d2);
    const double cost0 = ocp.total_cost(inst.x0, us);
    CHECK(cost0 - fp->cost == doctest::Approx(expected).epsilon(1e-9));
}

TEST_CASE("pendulum swing converges with a small gradient") {
    OCProblem ocp = pendulum_problem(40);
    const Vec x0 = Vec::Constant(1, 1.2);
    DDPSolution sol = DDPSolver().solve(ocp, x0);
    CHECK(sol.converged);
    CHECK(sol.cost < ocp.total_cost(x0, std::vector<Vec>(40, Vec::Zero(1))));
    const auto bp = backward_pass(ocp, sol.states, sol.controls, 1e-9);
    REQUIRE(bp.ok);
    double gnorm = 0.0;
    for (const Vec& kf : bp.k_ff) gnorm = std::max(gnorm, kf.lpNorm<Eigen::Infinity>());
    CHECK(gnorm < 1e-5);
}

TEST_CASE("value expansion gradient matches finite differences of the solved cost") {
    OCProblem ocp = pendulum_problem(30);
    const double h = 1e-4;
    DDPSolver solver;
    const Vec x0 = Vec::Constant(1, 0.8);
    DDPSolution sol = solver.solve(ocp, x0);
    REQUIRE(sol.converged);
    const double vp = solver.solve(ocp, Vec::Constant(1, 0.8 + h)).cost;
    const double vm = solver.solve(ocp, Vec::Constant(1, 0.8 - h)).cost;
    CHECK(sol.value_expansions[0].v_x[0] ==
          doctest::Approx((vp - vm) / (2.0 * h)).epsilon(1e-3));
}

TEST_CASE("warm starting reduces iterations on a shifted problem") {
    OCProblem ocp = pendulum_problem(40);
    DDPSolver solver;
    DDPSolution cold = solver.solve(ocp, Vec::Constant(1, 1.2));
    const Vec x1 = cold.states[1];
    DDPSolution warm = solver.solve(ocp, x1, shift_warm_start(cold.controls));
    DDPSolution cold2 = solver.solve(ocp, x1);
    CHECK(warm.converged);
    CHECK(warm.iterations <= cold2.iterations);
    CHECK(warm.cost == doctest::Approx(cold2.cost).epsilon(1e-6));
}

TEST_CASE("diverged warm start falls back to a cold solve") {
    const Mat I = Mat::Identity(1, 1);
    auto model = std::make_shared<testing::LinearModel>(1.5 * I, I, I);
    auto cost = std::make_shared<testing::LqrCost>(I, I, I);
    OCProblem ocp(model, cost, 40);
    std::vector<Vec> bad(40, Vec::Constant(1, 1e308));  // overflows within two steps
    DDPSolution warm = DDPSolver().solve(ocp, Vec::Constant(1, 1.0), bad);
    DDPSolution cold = DDPSolver().solve(ocp, Vec::Constant(1, 1.0));
    CHECK(warm.cost == doctest::Approx(cold.cost).epsilon(1e-12));
}

TEST_CASE("concave control cost raises SolverFailure at the regularization cap") {
    struct ConcaveCost : CostModel {
        double stage(double, const Vec& x, const Vec& u) const override {
            return 0.5 * x.squaredNorm() - 0.5 * u.squaredNorm();
        }
        double terminal(double, const Vec& x) const override { return 0.5 * x.squaredNorm(); }
    };
    const Mat I = Mat::Identity(1, 1);
    auto model = std::make_shared<testing::LinearModel>(I, I, I);
    OCProblem ocp(model, std::make_shared<ConcaveCost>(), 3);
    DDPOptions opts;
    opts.reg_init = opts.reg_max = 1e-9;  // no headroom to regularize
    CHECK_THROWS_AS(DDPSolver(opts).solve(ocp, Vec::Constant(1, 1.0)), SolverFailure);
}

TEST_CASE("shift_warm_start drops the head and repeats the tail") {
    std::vector<Vec> us = {Vec::Constant(1, 1.0), Vec::Constant(1, 2.0),
                           Vec::Constant(1, 3.0)};
    const auto s1 = shift_warm_start(us);
    CHECK(s1[0][0] == 2.0);
    CHECK(s1[1][0] == 3.0);
    CHECK(s1[2][0] == 3.0);
    const auto s2 = shift_warm_start(us, 2);
    CHECK(s2[0][0] == 3.0);
    CHECK(s2[2][0] == 3.0);
}

TEST_CASE("value_at_node bounds") {
    const Mat I = Mat::Identity(1, 1);
    auto model = std::make_shared<testing::LinearModel>(I, I, I);
    auto cost = std::make_shared<testing::LqrCost>(I, I, I);
    DDPSolution sol = DDPSolver().solve(OCProblem(model, cost, 4), Vec::Constant(1, 0.5));
    CHECK_NOTHROW(value_at_node(sol, 4));
    CHECK_THROWS_AS(value_at_node(sol, 5), std::out_of_range);
    CHECK_THROWS_AS(value_at_node(sol, -1), std::out_of_range);
}
