#include <doctest.h>

#include "rsmpc/loop.hpp"
#include "test_helpers.hpp"

using namespace rsmpc;

namespace {

struct LoopFixture {
    std::shared_ptr<testing::LinearModel> model;
    std::shared_ptr<testing::LqrCost> cost;
    NoiseSpec noise{0.01 * Mat::Identity(1, 1), 0.01 * Mat::Identity(1, 1),
                    0.1 * Mat::Identity(1, 1)};
    PlantHooks hooks;
    LoopConfig cfg;

    LoopFixture() {
        const Mat I = Mat::Identity(1, 1);
        model = std::make_shared<testing::LinearModel>(0.9 * I, I, I, 0.1);
        cost = std::make_shared<testing::LqrCost>(I, 0.1 * I, I);
        hooks.truth_step = [m = model](const Vec& x, const Vec& u, double) {
            return m->step(x, u);
        };
        hooks.truth_measure = [m = model](const Vec& x) { return m->measure(x); };
        hooks.Q_true = 1e-4 * I;
        hooks.R_true = 1e-4 * I;
        hooks.x0_true = Vec::Constant(1, 1.0);
        cfg.steps = 30;
        cfg.seed = 7;
        cfg.reference = [](int) { return Vec::Zero(1); };
        cfg.tracked = [](const Vec& x) { return x; };
    }

    OCProblem ocp() const { return OCProblem(model, cost, 10); }
};

bool logs_identical(const TrajectoryLog& a, const TrajectoryLog& b) {
    if (a.rows.size() != b.rows.size()) return false;
    for (size_t i = 0; i < a.rows.size(); ++i) {
        if ((a.rows[i].x_true - b.rows[i].x_true).lpNorm<Eigen::Infinity>() != 0.0) return false;
        if ((a.rows[i].x_est - b.rows[i].x_est).lpNorm<Eigen::Infinity>() != 0.0) return false;
        if ((a.rows[i].u - b.rows[i].u).lpNorm<Eigen::Infinity>() != 0.0) return false;
        if (a.rows[i].stage_cost != b.rows[i].stage_cost) return false;
    }
    return true;
}

}  // namespace

TEST_CASE("closed loop regulates toward the origin") {
    LoopFixture f;
    const auto log = run_closed_loop(f.hooks, f.model, f.noise, EstimatorKind::Ekf, f.ocp(),
                                     RiskConfig{}, DisturbanceScript{}, f.cfg);
    REQUIRE(static_cast<int>(log.rows.size()) == f.cfg.steps + 1);
    CHECK(std::abs(log.rows.back().x_true[0]) < 0.1);
    CHECK(std::abs(log.rows.back().x_est[0] - log.rows.back().x_true[0]) < 0.05);
    CHECK(log.min_cov_eig > 0.0);
}

TEST_CASE("mu = 0 risk-sensitive loop reproduces the EKF loop bitwise") {
    LoopFixture f;
    const auto ekf = run_closed_loop(f.hooks, f.model, f.noise, EstimatorKind::Ekf, f.ocp(),
                                     RiskConfig{0.0, 1e-9}, DisturbanceScript{}, f.cfg);
    const auto rs = run_closed_loop(f.hooks, f.model, f.noise, EstimatorKind::RsEkf, f.ocp(),
                                    RiskConfig{0.0, 1e-9}, DisturbanceScript{}, f.cfg);
    CHECK(logs_identical(ekf, rs));
}

TEST_CASE("runs are bitwise deterministic for a fixed seed") {
    LoopFixture f;
    const auto a = run_closed_loop(f.hooks, f.model, f.noise, EstimatorKind::RsEkf, f.ocp(),
                                   RiskConfig{0.05, 1e-9}, DisturbanceScript{}, f.cfg);
    const auto b = run_closed_loop(f.hooks, f.model, f.noise, EstimatorKind::RsEkf, f.ocp(),
                                   RiskConfig{0.05, 1e-9}, DisturbanceScript{}, f.cfg);
    CHECK(logs_identical(a, b));
    f.cfg.seed = 8;
    const auto c = run_closed_loop(f.hooks, f.model, f.noise, EstimatorKind::RsEkf, f.ocp(),
                                   RiskConfig{0.05, 1e-9}, DisturbanceScript{}, f.cfg);
    CHECK_FALSE(logs_identical(a, c));
}

TEST_CASE("a wrong prior offset shows up in the first estimate and decays") {
    LoopFixture f;
    DisturbanceScript script;
    script.events.push_back({0.0, 0.1, DisturbanceKind::PriorOffset, Vec::Constant(1, 5.0)});
    const auto log = run_closed_loop(f.hooks, f.model, f.noise, EstimatorKind::Ekf, f.ocp(),
                                     RiskConfig{}, script, f.cfg);
    CHECK(log.rows[0].x_est[0] == doctest::Approx(6.0));
    // measurements pull the estimate back to the truth
    CHECK(std::abs(log.rows.back().x_est[0] - log.rows.back().x_true[0]) < 0.05);
}

TEST_CASE("mpc_every > 1 replans on schedule and still stabilizes") {
    LoopFixture f;
    f.cfg.mpc_every = 3;
    const auto log = run_closed_loop(f.hooks, f.model, f.noise, EstimatorKind::Ekf, f.ocp(),
                                     RiskConfig{}, DisturbanceScript{}, f.cfg);
    CHECK(std::abs(log.rows.back().x_true[0]) < 0.1);
}

TEST_CASE("summarize recomputes mse and average cost from the rows") {
    TrajectoryLog log;
    for (int t = 0; t < 2; ++t) {
        LogRow row;
        row.t = t;
        row.x_true = Vec::Constant(1, 0.1 * (t + 1));
        row.stage_cost = 2.0 * (t + 1);
        log.rows.push_back(row);
    }
    const auto [mse, avg] = summarize(
        log, [](int) { return Vec::Zero(1); }, [](const Vec& x) { return x; });
    CHECK(mse == doctest::Approx((0.01 + 0.04) / 2.0).epsilon(1e-14));
    CHECK(avg == doctest::Approx(3.0).epsilon(1e-14));
}

TEST_CASE("disturbance scripts are validated against the run length") {
    DisturbanceScript script;
    script.events.push_back({1.0, 0.5, DisturbanceKind::ExternalForce, Vec::Ones(1)});
    CHECK_THROWS_AS(script.validate(10.0), std::invalid_argument);
    script.events[0] = {0.5, 20.0, DisturbanceKind::ExternalForce, Vec::Ones(1)};
    CHECK_THROWS_AS(script.validate(10.0), std::invalid_argument);
    script.events[0] = {0.5, 1.5, DisturbanceKind::ExternalForce, Vec::Ones(1)};
    CHECK_NOTHROW(script.validate(10.0));
    CHECK(script.active(DisturbanceKind::ExternalForce, 1.0).has_value());
    CHECK_FALSE(script.active(DisturbanceKind::ExternalForce, 1.5).has_value());
    CHECK_FALSE(script.active(DisturbanceKind::MassChange, 1.0).has_value());
}

TEST_CASE("risk-sensitive loop differs from the EKF loop when mu > 0") {
    LoopFixture f;
    const auto ekf = run_closed_loop(f.hooks, f.model, f.noise, EstimatorKind::Ekf, f.ocp(),
                                     RiskConfig{0.3, 1e-9}, DisturbanceScript{}, f.cfg);
    const auto rs = run_closed_loop(f.hooks, f.model, f.noise, EstimatorKind::RsEkf, f.ocp(),
                                    RiskConfig{0.3, 1e-9}, DisturbanceScript{}, f.cfg);
    CHECK_FALSE(logs_identical(ekf, rs));
}
