#include "rsmpc/loop.hpp"

#include <cmath>

#include "rsmpc/random.hpp"

namespace rsmpc {

void DisturbanceScript::validate(double run_length) const {
    for (const auto& e : events) {
        if (!(e.start >= 0.0 && e.start < e.end && e.end <= run_length))
            throw std::invalid_argument("disturbance event outside [0, run length]");
        if (!all_finite(e.magnitude))
            throw std::invalid_argument("disturbance magnitude not finite");
    }
}

std::optional<Vec> DisturbanceScript::active(DisturbanceKind kind, double t) const {
    for (const auto& e : events)
        if (e.kind == kind && t >= e.start && t < e.end) return e.magnitude;
    return std::nullopt;
}

DDPSolution first_step_bootstrap(const DDPSolver& solver, OCProblem& ocp, const Vec& x0) {
    ocp.set_start_time(0.0);
    return solver.solve(ocp, x0);
}

TrajectoryLog run_closed_loop(const PlantHooks& plant,
                              std::shared_ptr<const SystemModel> filter_model,
                              const NoiseSpec& noise, EstimatorKind kind, OCProblem ocp,
                              const RiskConfig& risk, const DisturbanceScript& script,
                              const LoopConfig& cfg, const DDPOptions& ddp_opts) {
    const double dt = filter_model->dt();
    const int H = ocp.horizon();
    script.validate(cfg.steps * dt);

    RandomStream rng(cfg.seed);
    DDPSolver solver(ddp_opts);

    // Prior mean is truth plus any scripted prior offset.
    Vec x0_prior = plant.x0_true;
    for (const auto& e : script.events)
        if (e.kind == DisturbanceKind::PriorOffset && e.start == 0.0) x0_prior += e.magnitude;

    GaussianBelief belief{x0_prior, noise.P0};

    TrajectoryLog log;
    log.rows.reserve(cfg.steps + 1);

    DDPSolution sol = first_step_bootstrap(solver, ocp, belief.mean);
    int last_plan = 0;
    ValueQuadratic vq_next = value_at_node(sol, std::min(1, H));

    Vec x_true = plant.x0_true;
    Vec u = sol.controls[0];

    auto push_row = [&](int t, const Vec& y, int iters, bool conv, bool failed) {
        LogRow row;
        row.t = t;
        row.x_true = x_true;
        row.y = y;
        row.x_est = belief.mean;
        row.cov_diag = belief.cov.diagonal();
        row.u = u;
        row.stage_cost = ocp.cost().stage(t * dt, x_true, u);
        row.ddp_iters = iters;
        row.ddp_converged = conv;
        row.solver_failed = failed;
        log.rows.push_back(std::move(row));
    };

    push_row(0, plant.truth_measure(x_true), sol.iterations, sol.converged, false);

    for (int t = 1; t <= cfg.steps; ++t) {
        // plant advance over [t-1, t], then noisy measurement
        const Vec u_act = plant.actuation ? plant.actuation(u) : u;
        const Vec w = rng.sample(plant.Q_true);
        x_true = plant.truth_step(x_true, u_act, (t - 1) * dt) + w;
        const Vec y = plant.truth_measure(x_true) + rng.sample(plant.R_true);

        // filter
        const Prediction pred = predict(belief, *filter_model, u_act, noise.Q);
        if (kind == EstimatorKind::RsEkf) {
            const ValueQuadratic vq = reanchor_value(vq_next, pred.x_pred);
            belief = update_rs(pred, *filter_model, y, noise.R, risk, vq);
        } else {
            belief = update_ekf(pred, *filter_model, y, noise.R).belief;
        }
        Eigen::SelfAdjointEigenSolver<Mat> es(belief.cov);
        log.min_cov_eig = std::min(log.min_cov_eig, es.eigenvalues().minCoeff());

        // replan (every mpc_every-th step), warm-started by shifting. Elapsed
        // filter steps are converted to OCP stages when the rates differ.
        const int per_stage = std::max(
            1, static_cast<int>(std::lround(ocp.model().dt() / dt)));
        bool failed = false;
        if (t - last_plan >= cfg.mpc_every) {
            ocp.set_start_time(t * dt);
            const auto warm = shift_warm_start(sol.controls, (t - last_plan) / per_stage);
            try {
                sol = solver.solve(ocp, belief.mean, warm);
                last_plan = t;
                vq_next = value_at_node(sol, std::min(1, H));
            } catch (const SolverFailure&) {
                failed = true;  // keep the previous plan, log and continue
            }
        }
        u = sol.controls[std::min((t - last_plan) / per_stage, H - 1)];
        push_row(t, y, sol.iterations, sol.converged, failed);
    }

    const auto [mse, avg_cost] = summarize(log, cfg.reference, cfg.tracked);
    log.mse = mse;
    log.avg_cost = avg_cost;
    return log;
}

std::pair<double, double> summarize(const TrajectoryLog& log,
                                    const std::function<Vec(int)>& reference,
                                    const std::function<Vec(const Vec&)>& tracked) {
    if (log.rows.empty()) return {0.0, 0.0};
    double se = 0.0, cost = 0.0;
    for (const auto& row : log.rows) {
        const Vec err = tracked(row.x_true) - reference(row.t);
        se += err.squaredNorm();
        cost += row.stage_cost;
    }
    const double n = static_cast<double>(log.rows.size());
    return {se / n, cost / n};
}

}  // namespace rsmpc
