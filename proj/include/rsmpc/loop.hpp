#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <memory>

#include "rsmpc/ddp.hpp"
#include "rsmpc/filters.hpp"
#include "rsmpc/models.hpp"

namespace rsmpc {

enum class EstimatorKind { Ekf, RsEkf };

enum class DisturbanceKind { MassChange, ExternalForce, PriorOffset };

struct DisturbanceEvent {
    double start = 0.0;  // seconds
    double end = 0.0;
    DisturbanceKind kind = DisturbanceKind::ExternalForce;
    Vec magnitude;
};

struct DisturbanceScript {
    std::vector<DisturbanceEvent> events;

    void validate(double run_length) const;

    /// Magnitude of the first active event of `kind` at time t, if any.
    std::optional<Vec> active(DisturbanceKind kind, double t) const;
};

struct LogRow {
    int t = 0;
    Vec x_true;
    Vec y;
    Vec x_est;
    Vec cov_diag;
    Vec u;
    double stage_cost = 0.0;
    int ddp_iters = 0;
    bool ddp_converged = false;
    bool solver_failed = false;
};

struct TrajectoryLog {
    std::vector<LogRow> rows;
    double mse = 0.0;       // tracked quantities vs reference
    double avg_cost = 0.0;  // mean incurred stage cost
    double min_cov_eig = std::numeric_limits<double>::infinity();  // over all posteriors
};

/// The simulated plant: truth dynamics (which may differ from the filter's
/// model), truth measurement, and the noise actually injected.
struct PlantHooks {
    std::function<Vec(const Vec& x, const Vec& u, double t)> truth_step;
    std::function<Vec(const Vec& x)> truth_measure;
    /// Optional actuator map (e.g. thrust saturation). Applied to the
    /// commanded control before both the plant step and the filter predict,
    /// so the filter sees the control that was actually delivered.
    std::function<Vec(const Vec& u)> actuation;
    Mat Q_true;  // process noise injected into the plant (may be singular)
    Mat R_true;
    Vec x0_true;
};

struct LoopConfig {
    int steps = 0;
    std::uint64_t seed = 0;
    int mpc_every = 1;  // replan every n-th filter step
    std::function<Vec(int t)> reference;        // reference of the tracked quantities
    std::function<Vec(const Vec& x)> tracked;   // tracked quantities of the true state
};

/// Initial solve from the prior mean; its node-1 expansion seeds the first
/// risk-sensitive update.
DDPSolution first_step_bootstrap(const DDPSolver& solver, OCProblem& ocp, const Vec& x0);

/// Closed-loop output-feedback MPC. Per step: plant advance with noise and
/// scripted disturbances, noisy measurement, filter predict/update (the
/// RS variant consumes the node-1 value expansion of the previous solve,
/// re-anchored), DDP replan, first control applied. Deterministic given the
/// seed.
TrajectoryLog run_closed_loop(const PlantHooks& plant,
                              std::shared_ptr<const SystemModel> filter_model,
                              const NoiseSpec& noise, EstimatorKind kind, OCProblem ocp,
                              const RiskConfig& risk, const DisturbanceScript& script,
                              const LoopConfig& cfg,
                              const DDPOptions& ddp_opts = {});

/// Recompute (mse, avg_cost) from the raw rows.
std::pair<double, double> summarize(const TrajectoryLog& log,
                                    const std::function<Vec(int)>& reference,
                                    const std::function<Vec(const Vec&)>& tracked);

}  // namespace rsmpc
