#include "rsmpc/benchmarks.hpp"

#include <algorithm>
#include <cmath>

#include "rsmpc/random.hpp"

namespace rsmpc {
namespace bench {

// ---------------------------------------------------------------------------
// Quadrotor
// ---------------------------------------------------------------------------

QuadrotorModel::QuadrotorModel(const QuadrotorParams& p)
    : EulerModel(7, 2, 3, p.dt), p_(p) {}

Vec QuadrotorModel::f_cont(const Vec& x, const Vec& u) const {
    // the dynamics are undefined for non-positive mass; a transient estimate
    // below the floor is evaluated at the floor
    const double th = x[2], m = std::max(x[6], p_.m_floor);
    const double thrust = u[0] + u[1];
    Vec dx(7);
    dx[0] = x[3];
    dx[1] = x[4];
    dx[2] = x[5];
    dx[3] = -thrust * std::sin(th) / m;
    dx[4] = thrust * std::cos(th) / m - p_.g;
    dx[5] = (u[0] - u[1]) / m;  // lever arm r = d cancels against the m d inertia scale
    dx[6] = 0.0;            // unknown mass is a random walk
    return dx;
}

Mat QuadrotorModel::A_cont(const Vec& x, const Vec& u) const {
    const double th = x[2], m = std::max(x[6], p_.m_floor);
    const double thrust = u[0] + u[1];
    Mat A = Mat::Zero(7, 7);
    A(0, 3) = A(1, 4) = A(2, 5) = 1.0;
    A(3, 2) = -thrust * std::cos(th) / m;
    A(3, 6) = thrust * std::sin(th) / (m * m);
    A(4, 2) = -thrust * std::sin(th) / m;
    A(4, 6) = -thrust * std::cos(th) / (m * m);
    A(5, 6) = -(u[0] - u[1]) / (m * m);
    return A;
}

Mat QuadrotorModel::B_cont(const Vec& x, const Vec& u) const {
    (void)u;
    const double th = x[2], m = std::max(x[6], p_.m_floor);
    Mat B = Mat::Zero(7, 2);
    B(3, 0) = B(3, 1) = -std::sin(th) / m;
    B(4, 0) = B(4, 1) = std::cos(th) / m;
    B(5, 0) = 1.0 / m;
    B(5, 1) = -1.0 / m;
    return B;
}

Vec QuadrotorModel::measurement(const Vec& x) const { return x.head(3); }

Mat QuadrotorModel::meas_jacobian(const Vec& x) const {
    (void)x;
    Mat H = Mat::Zero(3, 7);
    H.leftCols(3).setIdentity();
    return H;
}

QuadrotorCost::QuadrotorCost(double g, std::function<Eigen::Vector2d(double)> target,
                             QuadrotorWeights w, double m_floor)
    : g_(g), target_(std::move(target)), w_(w), m_floor_(m_floor) {}

double QuadrotorCost::stage(double t, const Vec& x, const Vec& u) const {
    const Eigen::Vector2d p_des = target_(t);
    const double ubar = std::max(x[6], m_floor_) * g_ / 2.0;  // hover thrust
    double c = w_.a1 * ((x[0] - p_des[0]) * (x[0] - p_des[0]) +
                        (x[1] - p_des[1]) * (x[1] - p_des[1]));
    c += w_.a2 * x[2] * x[2];
    c += w_.a3 * (x[3] * x[3] + x[4] * x[4] + x[5] * x[5]);
    c += w_.a4 * ((u[0] - ubar) * (u[0] - ubar) + (u[1] - ubar) * (u[1] - ubar));
    return c;
}

double QuadrotorCost::terminal(double t, const Vec& x) const {
    const Eigen::Vector2d p_des = target_(t);
    double c = w_.a1 * ((x[0] - p_des[0]) * (x[0] - p_des[0]) +
                        (x[1] - p_des[1]) * (x[1] - p_des[1]));
    c += w_.a2 * x[2] * x[2];
    c += w_.a3 * (x[3] * x[3] + x[4] * x[4] + x[5] * x[5]);
    return c;
}

CostExpansion QuadrotorCost::expand_stage(double t, const Vec& x, const Vec& u) const {
    const Eigen::Vector2d p_des = target_(t);
    const double ubar = std::max(x[6], m_floor_) * g_ / 2.0;
    CostExpansion e;
    e.l = stage(t, x, u);
    e.l_x = Vec::Zero(7);
    e.l_u = Vec::Zero(2);
    e.l_xx = Mat::Zero(7, 7);
    e.l_uu = Mat::Zero(2, 2);
    e.l_ux = Mat::Zero(2, 7);

    e.l_x[0] = 2.0 * w_.a1 * (x[0] - p_des[0]);
    e.l_x[1] = 2.0 * w_.a1 * (x[1] - p_des[1]);
    e.l_x[2] = 2.0 * w_.a2 * x[2];
    for (int i = 3; i < 6; ++i) e.l_x[i] = 2.0 * w_.a3 * x[i];
    e.l_xx(0, 0) = e.l_xx(1, 1) = 2.0 * w_.a1;
    e.l_xx(2, 2) = 2.0 * w_.a2;
    for (int i = 3; i < 6; ++i) e.l_xx(i, i) = 2.0 * w_.a3;

    // control regularization: residual r = u - ubar(x), d ubar / d m = g/2
    const Eigen::Vector2d r(u[0] - ubar, u[1] - ubar);
    const double dm = x[6] > m_floor_ ? -g_ / 2.0 : 0.0;  // d r_i / d m
    e.l_u = 2.0 * w_.a4 * r;
    e.l_x[6] += 2.0 * w_.a4 * dm * (r[0] + r[1]);
    e.l_uu = 2.0 * w_.a4 * Mat::Identity(2, 2);
    e.l_ux(0, 6) = 2.0 * w_.a4 * dm;
    e.l_ux(1, 6) = 2.0 * w_.a4 * dm;
    e.l_xx(6, 6) += 2.0 * w_.a4 * dm * dm * 2.0;
    return e;
}

CostExpansion QuadrotorCost::expand_terminal(double t, const Vec& x) const {
    const Eigen::Vector2d p_des = target_(t);
    CostExpansion e;
    e.l = terminal(t, x);
    e.l_x = Vec::Zero(7);
    e.l_xx = Mat::Zero(7, 7);
    e.l_x[0] = 2.0 * w_.a1 * (x[0] - p_des[0]);
    e.l_x[1] = 2.0 * w_.a1 * (x[1] - p_des[1]);
    e.l_x[2] = 2.0 * w_.a2 * x[2];
    for (int i = 3; i < 6; ++i) e.l_x[i] = 2.0 * w_.a3 * x[i];
    e.l_xx(0, 0) = e.l_xx(1, 1) = 2.0 * w_.a1;
    e.l_xx(2, 2) = 2.0 * w_.a2;
    for (int i = 3; i < 6; ++i) e.l_xx(i, i) = 2.0 * w_.a3;
    return e;
}

namespace {

std::function<Eigen::Vector2d(double)> quadrotor_reference(const QuadrotorScenario& scn) {
    const double t_ramp = scn.t_ramp;
    return [t_ramp](double t) {
        return Eigen::Vector2d(std::min(std::max(t, 0.0) / t_ramp, 1.0), 0.0);
    };
}

}  // namespace

BenchmarkProblem make_quadrotor(const QuadrotorParams& p, double mu,
                                const QuadrotorScenario& scn) {
    auto model = std::make_shared<QuadrotorModel>(p);
    auto cost = std::make_shared<QuadrotorCost>(p.g, quadrotor_reference(scn),
                                                QuadrotorWeights{}, p.m_floor);

    Mat Q = 1e-4 * Mat::Identity(7, 7);
    Q(6, 6) = 2.0;  // load-change uncertainty
    const Mat R = 1e-4 * Mat::Identity(3, 3);
    const Mat P0 = 1e-4 * Mat::Identity(7, 7);

    // integral-style discretization with the reference solver's 1/2 ||r||^2
    // activation; the stationary cost has no distinguished terminal term, so
    // the terminal is weighted like a stage
    auto ocp_cost = std::make_shared<StageScaledCost>(cost, p.cost_gauge * p.dt, true);
    return BenchmarkProblem{model, cost, OCProblem(model, ocp_cost, 20),
                            NoiseSpec(Q, R, P0), RiskConfig{mu, 1e-9}};
}

ClosedLoopSetup make_quadrotor_setup(const BenchmarkProblem& prob, const QuadrotorParams& p,
                                     const QuadrotorScenario& scn, std::uint64_t seed) {
    ClosedLoopSetup s;

    const double run_length = scn.steps * p.dt;
    if (scn.with_load && scn.t_add < run_length) {
        DisturbanceEvent e;
        e.start = scn.t_add;
        e.end = std::min(scn.t_drop, run_length);  // short runs truncate the event
        e.kind = DisturbanceKind::MassChange;
        e.magnitude = Vec::Constant(1, p.load);
        s.script.events.push_back(e);
        if (scn.t_add == 0.0) {
            // load carried from the start but unknown a priori: the filter's
            // prior mass stays at the bare vehicle mass
            DisturbanceEvent prior;
            prior.start = 0.0;
            prior.end = p.dt;
            prior.kind = DisturbanceKind::PriorOffset;
            prior.magnitude = Vec::Zero(7);
            prior.magnitude[6] = -p.load;
            s.script.events.push_back(prior);
        }
    }

    auto model = std::static_pointer_cast<QuadrotorModel>(prob.filter_model);
    const DisturbanceScript script = s.script;
    const double m0 = p.m;
    const double u_max = p.u_max;
    s.hooks.actuation = [u_max](const Vec& u) {
        // rotors only produce thrust in [0, u_max]
        return Vec(u.cwiseMax(0.0).cwiseMin(u_max));
    };
    s.hooks.truth_step = [model, script, m0](const Vec& x, const Vec& u, double t) {
        Vec xn = model->step(x, u);
        const auto load = script.active(DisturbanceKind::MassChange, t + model->dt());
        xn[6] = m0 + (load ? (*load)[0] : 0.0);  // true mass is scripted, not dynamic
        return xn;
    };
    s.hooks.truth_measure = [model](const Vec& x) { return model->measure(x); };
    // The truth integrates exactly (the filter's Q, in particular the large
    // mass term, models load changes rather than actual process noise); the
    // sensors are cleaner than the filter's conservative R. Measurement noise
    // provides the per-seed variation.
    s.hooks.Q_true = Mat::Zero(7, 7);
    s.hooks.R_true = 0.01 * prob.noise.R;
    Vec x0 = Vec::Zero(7);
    x0[6] = m0 + (script.active(DisturbanceKind::MassChange, 0.0) ? p.load : 0.0);
    s.hooks.x0_true = x0;

    s.loop.steps = scn.steps;
    s.loop.seed = seed;
    s.loop.mpc_every = 1;
    auto ref = quadrotor_reference(scn);
    const double dt = p.dt;
    s.loop.reference = [ref, dt](int t) { return Vec(ref(t * dt)); };
    s.loop.tracked = [](const Vec& x) { return Vec(x.head(2)); };
    return s;
}

ComparisonReport run_quadrotor_study(std::uint64_t seed, const QuadrotorScenario& scn,
                                     const QuadrotorParams& p) {
    BenchmarkProblem prob = make_quadrotor(p, scn.mu, scn);
    ClosedLoopSetup s = make_quadrotor_setup(prob, p, scn, seed);

    ComparisonReport rep;
    const TrajectoryLog ekf =
        run_closed_loop(s.hooks, prob.filter_model, prob.noise, EstimatorKind::Ekf, prob.ocp,
                        prob.risk, s.script, s.loop);
    const TrajectoryLog rs =
        run_closed_loop(s.hooks, prob.filter_model, prob.noise, EstimatorKind::RsEkf, prob.ocp,
                        prob.risk, s.script, s.loop);
    rep.mse_ekf = ekf.mse;
    rep.cost_ekf = ekf.avg_cost;
    rep.mse_rs = rs.mse;
    rep.cost_rs = rs.avg_cost;
    rep.min_cov_eig = std::min(ekf.min_cov_eig, rs.min_cov_eig);
    return rep;
}

// ---------------------------------------------------------------------------
// Two-link arm
// ---------------------------------------------------------------------------

TwoLinkModel::TwoLinkModel(const TwoLinkParams& p, double dt)
    : EulerModel(4, 2, 4, dt), p_(p) {}

Eigen::Matrix2d TwoLinkModel::mass_matrix(const Eigen::Vector2d& q) const {
    const double c2 = std::cos(q[1]);
    const double a = (p_.m1 + p_.m2) * p_.l1 * p_.l1;
    const double b = p_.m2 * p_.l2 * p_.l2;
    const double c = p_.m2 * p_.l1 * p_.l2 * c2;
    Eigen::Matrix2d M;
    M << a + b + 2.0 * c, b + c, b + c, b;
    return M;
}

Eigen::Vector2d TwoLinkModel::gravity(const Eigen::Vector2d& q) const {
    const double g1 = (p_.m1 + p_.m2) * p_.g * p_.l1 * std::cos(q[0]) +
                      p_.m2 * p_.g * p_.l2 * std::cos(q[0] + q[1]);
    const double g2 = p_.m2 * p_.g * p_.l2 * std::cos(q[0] + q[1]);
    return {g1, g2};
}

Eigen::Matrix2d TwoLinkModel::gravity_jacobian(const Eigen::Vector2d& q) const {
    const double s1 = std::sin(q[0]);
    const double s12 = std::sin(q[0] + q[1]);
    const double a = -(p_.m1 + p_.m2) * p_.g * p_.l1 * s1;
    const double b = -p_.m2 * p_.g * p_.l2 * s12;
    Eigen::Matrix2d J;
    J << a + b, b, b, b;
    return J;
}

Eigen::Vector2d TwoLinkModel::fk(const Eigen::Vector2d& q) const {
    return {p_.l1 * std::cos(q[0]) + p_.l2 * std::cos(q[0] + q[1]),
            p_.l1 * std::sin(q[0]) + p_.l2 * std::sin(q[0] + q[1])};
}

Eigen::Matrix2d TwoLinkModel::fk_jacobian(const Eigen::Vector2d& q) const {
    const double s1 = std::sin(q[0]), c1 = std::cos(q[0]);
    const double s12 = std::sin(q[0] + q[1]), c12 = std::cos(q[0] + q[1]);
    Eigen::Matrix2d J;
    J << -p_.l1 * s1 - p_.l2 * s12, -p_.l2 * s12, p_.l1 * c1 + p_.l2 * c12, p_.l2 * c12;
    return J;
}

double TwoLinkModel::energy(const Vec& x) const {
    const Eigen::Vector2d q = x.head(2), qd = x.tail(2);
    const double ke = 0.5 * qd.dot(mass_matrix(q) * qd);
    const double y1 = p_.l1 * std::sin(q[0]);
    const double y2 = y1 + p_.l2 * std::sin(q[0] + q[1]);
    return ke + p_.g * (p_.m1 * y1 + p_.m2 * y2);
}

Vec TwoLinkModel::f_cont(const Vec& x, const Vec& u) const {
    const Eigen::Vector2d q = x.head(2), qd = x.tail(2);
    const double h = -p_.m2 * p_.l1 * p_.l2 * std::sin(q[1]);
    Eigen::Matrix2d C;
    C << h * qd[1], h * (qd[0] + qd[1]), -h * qd[0], 0.0;
    const Eigen::Vector2d qdd =
        mass_matrix(q).ldlt().solve(Eigen::Vector2d(u) - C * qd - gravity(q));
    Vec dx(4);
    dx << qd[0], qd[1], qdd[0], qdd[1];
    return dx;
}

Vec TwoLinkModel::measurement(const Vec& x) const { return x; }

Mat TwoLinkModel::meas_jacobian(const Vec& x) const {
    (void)x;
    return Mat::Identity(4, 4);
}

TwoLinkCost::TwoLinkCost(std::shared_ptr<const TwoLinkModel> model, Vec x_ref,
                         std::function<Eigen::Vector2d(double)> target, TwoLinkWeights w)
    : model_(std::move(model)), x_ref_(std::move(x_ref)), target_(std::move(target)), w_(w) {}

double TwoLinkCost::stage(double t, const Vec& x, const Vec& u) const {
    const Eigen::Vector2d q = x.head(2);
    const Eigen::Vector2d ru = Eigen::Vector2d(u) - model_->gravity(q);
    const Eigen::Vector2d rp = target_(t) - model_->fk(q);
    return w_.wx * (x - x_ref_).squaredNorm() + w_.wu * ru.squaredNorm() +
           w_.wp * rp.squaredNorm();
}

double TwoLinkCost::terminal(double t, const Vec& x) const {
    const Eigen::Vector2d rp = target_(t) - model_->fk(x.head(2));
    return w_.wp * rp.squaredNorm() + w_.wx * (x - x_ref_).squaredNorm();
}

CostExpansion TwoLinkCost::expand_stage(double t, const Vec& x, const Vec& u) const {
    const Eigen::Vector2d q = x.head(2);
    const Eigen::Vector2d ru = Eigen::Vector2d(u) - model_->gravity(q);
    const Eigen::Vector2d rp = target_(t) - model_->fk(q);

    // residual Jacobians wrt the state (velocity columns are zero)
    Mat Ju = Mat::Zero(2, 4);  // d ru / d x
    Ju.leftCols(2) = -model_->gravity_jacobian(q);
    Mat Jp = Mat::Zero(2, 4);  // d rp / d x
    Jp.leftCols(2) = -model_->fk_jacobian(q);

    CostExpansion e;
    e.l = stage(t, x, u);
    e.l_x = 2.0 * w_.wx * (x - x_ref_) + 2.0 * w_.wu * Ju.transpose() * ru +
            2.0 * w_.wp * Jp.transpose() * rp;
    e.l_u = 2.0 * w_.wu * ru;
    // Gauss-Newton: residual curvature dropped
    e.l_xx = 2.0 * w_.wx * Mat::Identity(4, 4) + 2.0 * w_.wu * Ju.transpose() * Ju +
             2.0 * w_.wp * Jp.transpose() * Jp;
    e.l_uu = 2.0 * w_.wu * Mat::Identity(2, 2);
    e.l_ux = 2.0 * w_.wu * Ju;
    return e;
}

CostExpansion TwoLinkCost::expand_terminal(double t, const Vec& x) const {
    const Eigen::Vector2d q = x.head(2);
    const Eigen::Vector2d rp = target_(t) - model_->fk(q);
    Mat Jp = Mat::Zero(2, 4);
    Jp.leftCols(2) = -model_->fk_jacobian(q);

    CostExpansion e;
    e.l = terminal(t, x);
    e.l_x = 2.0 * w_.wx * (x - x_ref_) + 2.0 * w_.wp * Jp.transpose() * rp;
    e.l_xx = 2.0 * w_.wx * Mat::Identity(4, 4) + 2.0 * w_.wp * Jp.transpose() * Jp;
    return e;
}

namespace {

std::function<Eigen::Vector2d(double)> circle_reference(const TwoLinkModel& model,
                                                        const ArmScenario& scn) {
    const Eigen::Vector2d p0 = model.fk(scn.q0.head(2));
    const Eigen::Vector2d center = p0 - Eigen::Vector2d(scn.circle_radius, 0.0);
    const double r = scn.circle_radius;
    const double omega = 2.0 * M_PI / scn.circle_period;
    return [center, r, omega](double t) {
        return Eigen::Vector2d(center + r * Eigen::Vector2d(std::cos(omega * t),
                                                            std::sin(omega * t)));
    };
}

}  // namespace

BenchmarkProblem make_twolink(const TwoLinkParams& p, double mu, const ArmScenario& scn) {
    auto filter_model = std::make_shared<TwoLinkModel>(p, p.dt_plant);
    auto ocp_model = std::make_shared<TwoLinkModel>(p, p.dt_ocp);

    Vec x_ref = Vec::Zero(4);
    x_ref.head(2) = scn.q0.head(2);
    auto cost = std::make_shared<TwoLinkCost>(ocp_model, x_ref,
                                              circle_reference(*ocp_model, scn));

    const Mat Q = 1e-1 * Mat::Identity(4, 4);  // large Q models unexpected pushes
    const Mat R = 1e-6 * Mat::Identity(4, 4);
    const Mat P0 = 1e-6 * Mat::Identity(4, 4);

    auto ocp_cost = std::make_shared<StageScaledCost>(cost, p.dt_ocp);
    return BenchmarkProblem{filter_model, cost, OCProblem(ocp_model, ocp_cost, 20),
                            NoiseSpec(Q, R, P0), RiskConfig{mu, 1e-9}};
}

ClosedLoopSetup make_twolink_setup(const BenchmarkProblem& prob, const TwoLinkParams& p,
                                   const ArmScenario& scn, double push_onset,
                                   double push_angle, std::uint64_t seed) {
    ClosedLoopSetup s;
    if (push_onset < scn.run_length) {
        DisturbanceEvent e;
        e.start = push_onset;
        e.end = std::min(push_onset + scn.push_duration, scn.run_length);
        e.kind = DisturbanceKind::ExternalForce;
        e.magnitude = scn.push_norm * Vec(Eigen::Vector2d(std::cos(push_angle),
                                                          std::sin(push_angle)));
        s.script.events.push_back(e);
    }

    auto model = std::static_pointer_cast<TwoLinkModel>(prob.filter_model);
    const DisturbanceScript script = s.script;
    s.hooks.truth_step = [model, script](const Vec& x, const Vec& u, double t) {
        Vec u_eff = u;
        if (auto f = script.active(DisturbanceKind::ExternalForce, t)) {
            const Eigen::Vector2d tau_ext =
                model->fk_jacobian(x.head(2)).transpose() * Eigen::Vector2d(*f);
            u_eff += Vec(tau_ext);  // end-effector push mapped to joint torques
        }
        return model->step(x, u_eff);
    };
    s.hooks.truth_measure = [model](const Vec& x) { return model->measure(x); };
    s.hooks.Q_true = 1e-8 * Mat::Identity(4, 4);
    s.hooks.R_true = prob.noise.R;
    Vec x0 = Vec::Zero(4);
    x0.head(2) = scn.q0.head(2);
    s.hooks.x0_true = x0;

    s.loop.steps = static_cast<int>(std::lround(scn.run_length / p.dt_plant));
    s.loop.seed = seed;
    s.loop.mpc_every = 1;
    auto ref = circle_reference(*model, scn);
    const double dt = p.dt_plant;
    s.loop.reference = [ref, dt](int t) { return Vec(ref(t * dt)); };
    s.loop.tracked = [model](const Vec& x) { return Vec(model->fk(x.head(2))); };
    return s;
}

PushTrialResult run_push_trial(std::uint64_t seed, const ArmScenario& scn,
                               const TwoLinkParams& p) {
    // push timing/direction from a stream separate from the simulation noise
    RandomStream push_rng(seed ^ 0x9e3779b97f4a7c15ull);
    const double onset = push_rng.uniform(scn.push_onset_min, scn.push_onset_max);
    const double angle = push_rng.uniform(0.0, 2.0 * M_PI);

    BenchmarkProblem prob = make_twolink(p, scn.mu, scn);
    ClosedLoopSetup s = make_twolink_setup(prob, p, scn, onset, angle, seed);

    const TrajectoryLog ekf =
        run_closed_loop(s.hooks, prob.filter_model, prob.noise, EstimatorKind::Ekf, prob.ocp,
                        prob.risk, s.script, s.loop);
    const TrajectoryLog rs =
        run_closed_loop(s.hooks, prob.filter_model, prob.noise, EstimatorKind::RsEkf, prob.ocp,
                        prob.risk, s.script, s.loop);

    PushTrialResult res;
    res.onset = onset;
    res.cost_ekf = ekf.avg_cost;
    res.cost_rs = rs.avg_cost;
    res.min_cov_eig = std::min(ekf.min_cov_eig, rs.min_cov_eig);

    const int onset_step = static_cast<int>(std::lround(onset / p.dt_plant));
    const int curve_len =
        static_cast<int>(std::lround((scn.run_length - scn.push_onset_max) / p.dt_plant));
    auto window_err = [&](const TrajectoryLog& log, std::vector<double>& curve) {
        double se = 0.0;
        int n = 0;
        for (int t = onset_step; t < static_cast<int>(log.rows.size()); ++t) {
            const Vec err = s.loop.tracked(log.rows[t].x_true) - s.loop.reference(t);
            const double e2 = err.squaredNorm();
            se += e2;
            ++n;
            if (t - onset_step < curve_len) curve.push_back(e2);
        }
        return se / std::max(n, 1);
    };
    res.mse_ekf = window_err(ekf, res.err_ekf);
    res.mse_rs = window_err(rs, res.err_rs);
    return res;
}

namespace {

double percentile(std::vector<double> v, double p) {
    std::sort(v.begin(), v.end());
    const double idx = p * (v.size() - 1);
    const auto lo = static_cast<std::size_t>(idx);
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (idx - lo) * (v[hi] - v[lo]);
}

}  // namespace

PushStudyReport run_pushrecovery_study(int trials, std::uint64_t seed,
                                       const ArmScenario& scn, const TwoLinkParams& p) {
    if (trials < 1) throw std::invalid_argument("trials must be >= 1");
    PushStudyReport rep;
    rep.trials.reserve(trials);
    for (int i = 0; i < trials; ++i) rep.trials.push_back(run_push_trial(seed + i, scn, p));

    std::size_t curve_len = std::numeric_limits<std::size_t>::max();
    for (const auto& t : rep.trials)
        curve_len = std::min({curve_len, t.err_ekf.size(), t.err_rs.size()});

    for (std::size_t k = 0; k < curve_len; ++k) {
        std::vector<double> ce, cr;
        for (const auto& t : rep.trials) {
            ce.push_back(t.err_ekf[k]);
            cr.push_back(t.err_rs[k]);
        }
        rep.median_ekf.push_back(percentile(ce, 0.5));
        rep.q25_ekf.push_back(percentile(ce, 0.25));
        rep.q75_ekf.push_back(percentile(ce, 0.75));
        rep.median_rs.push_back(percentile(cr, 0.5));
        rep.q25_rs.push_back(percentile(cr, 0.25));
        rep.q75_rs.push_back(percentile(cr, 0.75));
    }

    std::vector<double> me, mr;
    double ce = 0.0, cr = 0.0;
    for (const auto& t : rep.trials) {
        me.push_back(t.mse_ekf);
        mr.push_back(t.mse_rs);
        ce += t.cost_ekf;
        cr += t.cost_rs;
    }
    rep.median_mse_ekf = percentile(me, 0.5);
    rep.median_mse_rs = percentile(mr, 0.5);
    rep.mean_cost_ekf = ce / trials;
    rep.mean_cost_rs = cr / trials;
    return rep;
}

// ---------------------------------------------------------------------------
// Centroidal model
// ---------------------------------------------------------------------------

namespace {

Mat skew(const Eigen::Vector3d& v) {
    Mat S = Mat::Zero(3, 3);
    S(0, 1) = -v[2];
    S(0, 2) = v[1];
    S(1, 0) = v[2];
    S(1, 2) = -v[0];
    S(2, 0) = -v[1];
    S(2, 1) = v[0];
    return S;
}

}  // namespace

CentroidalModel::CentroidalModel(const CentroidalParams& p, double dt)
    : EulerModel(15, 12, 9, dt), p_(p) {}

Vec CentroidalModel::f_cont(const Vec& x, const Vec& u) const {
    const Eigen::Vector3d c = x.segment<3>(0);
    const Eigen::Vector3d l = x.segment<3>(3);
    const Eigen::Vector3d F_ext = x.segment<3>(9);
    const Eigen::Vector3d tau_ext = x.segment<3>(12);

    Eigen::Vector3d ldot(0.0, 0.0, -p_.m * p_.g);
    Eigen::Vector3d kdot = tau_ext;
    for (int i = 0; i < 4; ++i) {
        const Eigen::Vector3d Fi = u.segment<3>(3 * i);
        ldot += Fi;
        kdot += (p_.contacts[i] - c).cross(Fi);
    }
    ldot += F_ext;

    Vec dx = Vec::Zero(15);
    dx.segment<3>(0) = l / p_.m;
    dx.segment<3>(3) = ldot;
    dx.segment<3>(6) = kdot;
    // external wrench is a random walk: zero drift
    return dx;
}

Mat CentroidalModel::A_cont(const Vec& x, const Vec& u) const {
    (void)x;
    Mat A = Mat::Zero(15, 15);
    A.block<3, 3>(0, 3) = Mat::Identity(3, 3) / p_.m;
    A.block<3, 3>(3, 9) = Mat::Identity(3, 3);
    Mat dk_dc = Mat::Zero(3, 3);
    for (int i = 0; i < 4; ++i) dk_dc += skew(Eigen::Vector3d(u.segment<3>(3 * i)));
    A.block<3, 3>(6, 0) = dk_dc;
    A.block<3, 3>(6, 12) = Mat::Identity(3, 3);
    return A;
}

Mat CentroidalModel::B_cont(const Vec& x, const Vec& u) const {
    (void)u;
    const Eigen::Vector3d c = x.segment<3>(0);
    Mat B = Mat::Zero(15, 12);
    for (int i = 0; i < 4; ++i) {
        B.block<3, 3>(3, 3 * i) = Mat::Identity(3, 3);
        B.block<3, 3>(6, 3 * i) = skew(Eigen::Vector3d(p_.contacts[i] - c));
    }
    return B;
}

Vec CentroidalModel::measurement(const Vec& x) const { return x.head(9); }

Mat CentroidalModel::meas_jacobian(const Vec& x) const {
    (void)x;
    Mat H = Mat::Zero(9, 15);
    H.leftCols(9).setIdentity();
    return H;
}

double force_barrier(double u, double lo, double hi) {
    if (u < lo) return (u - lo) * (u - lo);
    if (u > hi) return (u - hi) * (u - hi);
    return 0.0;
}

namespace {

void barrier_grad_hess(double u, double lo, double hi, double& g, double& h) {
    if (u < lo) {
        g = 2.0 * (u - lo);
        h = 2.0;
    } else if (u > hi) {
        g = 2.0 * (u - hi);
        h = 2.0;
    } else {
        g = h = 0.0;
    }
}

}  // namespace

CentroidalCost::CentroidalCost(const CentroidalParams& p, Vec x_star, Vec u_star)
    : p_(p), x_star_(std::move(x_star)), u_star_(std::move(u_star)) {
    hx_diag_ = Vec::Zero(15);
    hx_diag_.head(3).setConstant(1e2);
    hx_diag_.segment(3, 6).setConstant(10.0);
    hu_diag_ = Vec::Zero(12);
    for (int i = 0; i < 4; ++i) {
        hu_diag_[3 * i] = 1e-4;
        hu_diag_[3 * i + 1] = 1e-4;
        hu_diag_[3 * i + 2] = p.fz_reg;
    }
}

double CentroidalCost::stage(double t, const Vec& x, const Vec& u) const {
    (void)t;
    const Vec dx = x - x_star_;
    const Vec du = u - u_star_;
    double c = dx.dot(hx_diag_.asDiagonal() * dx) + du.dot(hu_diag_.asDiagonal() * du);
    for (int i = 0; i < 4; ++i)
        c += p_.barrier_weight * force_barrier(u[3 * i + 2], p_.force_lo, p_.force_hi);
    return c;
}

double CentroidalCost::terminal(double t, const Vec& x) const {
    (void)t;
    const Vec dx = x - x_star_;
    return dx.dot(hx_diag_.asDiagonal() * dx);
}

CostExpansion CentroidalCost::expand_stage(double t, const Vec& x, const Vec& u) const {
    CostExpansion e;
    e.l = stage(t, x, u);
    e.l_x = 2.0 * hx_diag_.asDiagonal() * (x - x_star_);
    e.l_u = 2.0 * hu_diag_.asDiagonal() * (u - u_star_);
    e.l_xx = Mat((2.0 * hx_diag_).asDiagonal());
    e.l_uu = Mat((2.0 * hu_diag_).asDiagonal());
    e.l_ux = Mat::Zero(12, 15);
    for (int i = 0; i < 4; ++i) {
        double g, h;
        barrier_grad_hess(u[3 * i + 2], p_.force_lo, p_.force_hi, g, h);
        e.l_u[3 * i + 2] += p_.barrier_weight * g;
        e.l_uu(3 * i + 2, 3 * i + 2) += p_.barrier_weight * h;
    }
    return e;
}

CostExpansion CentroidalCost::expand_terminal(double t, const Vec& x) const {
    CostExpansion e;
    e.l = terminal(t, x);
    e.l_x = 2.0 * hx_diag_.asDiagonal() * (x - x_star_);
    e.l_xx = Mat((2.0 * hx_diag_).asDiagonal());
    return e;
}

Vec centroidal_stand_state(const CentroidalParams& p) {
    Vec x = Vec::Zero(15);
    x[2] = p.z0;
    return x;
}

Vec centroidal_stand_control(const CentroidalParams& p) {
    Vec u = Vec::Zero(12);
    for (int i = 0; i < 4; ++i) u[3 * i + 2] = p.m * p.g / 4.0;
    return u;
}

BenchmarkProblem make_centroidal(const CentroidalParams& p, double mu) {
    auto filter_model = std::make_shared<CentroidalModel>(p, p.dt_filter);
    auto ocp_model = std::make_shared<CentroidalModel>(p, p.dt_ocp);
    auto cost = std::make_shared<CentroidalCost>(p, centroidal_stand_state(p),
                                                 centroidal_stand_control(p));

    Vec q_diag(15);
    q_diag.head(6).setConstant(1e-3);
    q_diag.segment(6, 3).setConstant(1e-4);
    q_diag.segment(9, 3).setConstant(1e-1);
    q_diag.tail(3).setConstant(1e-2);
    Vec r_diag(9);
    r_diag.head(3).setConstant(1e-4);
    r_diag.segment(3, 3).setConstant(1e-2);
    r_diag.tail(3).setConstant(1e-4);

    const Mat Q = q_diag.asDiagonal();
    const Mat R = r_diag.asDiagonal();

    auto integral_cost = std::make_shared<StageScaledCost>(cost, p.dt_ocp);
    auto ocp_cost = std::make_shared<StageScaledCost>(integral_cost, p.cost_gauge, true);
    return BenchmarkProblem{filter_model, cost, OCProblem(ocp_model, ocp_cost, p.horizon),
                            NoiseSpec(Q, R, Q), RiskConfig{mu, 1e-9}};
}

ClosedLoopSetup make_centroidal_setup(const BenchmarkProblem& prob, const CentroidalParams& p,
                                      double prior_offset_z, int steps, std::uint64_t seed) {
    ClosedLoopSetup s;
    if (prior_offset_z != 0.0) {
        DisturbanceEvent e;
        e.start = 0.0;
        e.end = p.dt_filter;
        e.kind = DisturbanceKind::PriorOffset;
        e.magnitude = Vec::Zero(15);
        e.magnitude[11] = prior_offset_z;  // vertical external force prior
        s.script.events.push_back(e);
    }

    auto model = std::static_pointer_cast<CentroidalModel>(prob.filter_model);
    s.hooks.truth_step = [model](const Vec& x, const Vec& u, double t) {
        (void)t;
        Vec xn = model->step(x, u);
        xn.tail(6).setZero();  // no true external wrench in this study
        return xn;
    };
    s.hooks.truth_measure = [model](const Vec& x) { return model->measure(x); };
    // The truth integrates exactly; the motion-capture-grade sensors are far
    // cleaner than the filter's conservative R. Measurement noise provides
    // the per-seed variation.
    s.hooks.Q_true = Mat::Zero(15, 15);
    s.hooks.R_true = 0.01 * prob.noise.R;
    s.hooks.x0_true = centroidal_stand_state(p);

    s.loop.steps = steps;
    s.loop.seed = seed;
    s.loop.mpc_every =
        std::max(1, static_cast<int>(std::lround(p.dt_ocp / p.dt_filter)));
    const Vec c_star = centroidal_stand_state(p).head(3);
    s.loop.reference = [c_star](int) { return c_star; };
    s.loop.tracked = [](const Vec& x) { return Vec(x.head(3)); };
    return s;
}

ComparisonReport run_wrongprior_study(double prior_offset_z, std::uint64_t seed,
                                      const CentroidalParams& p, double mu, int steps) {
    BenchmarkProblem prob = make_centroidal(p, mu);
    ClosedLoopSetup s = make_centroidal_setup(prob, p, prior_offset_z, steps, seed);

    ComparisonReport rep;
    const TrajectoryLog ekf =
        run_closed_loop(s.hooks, prob.filter_model, prob.noise, EstimatorKind::Ekf, prob.ocp,
                        prob.risk, s.script, s.loop);
    const TrajectoryLog rs =
        run_closed_loop(s.hooks, prob.filter_model, prob.noise, EstimatorKind::RsEkf, prob.ocp,
                        prob.risk, s.script, s.loop);
    rep.mse_ekf = ekf.mse;
    rep.cost_ekf = ekf.avg_cost;
    rep.mse_rs = rs.mse;
    rep.cost_rs = rs.avg_cost;
    rep.min_cov_eig = std::min(ekf.min_cov_eig, rs.min_cov_eig);
    return rep;
}

}  // namespace bench
}  // namespace rsmpc
