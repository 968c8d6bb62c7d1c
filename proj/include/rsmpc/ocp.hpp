#pragma once

#include <memory>
#include <vector>

#include "rsmpc/models.hpp"

namespace rsmpc {

/// Second-order expansion of a stage (or terminal) cost. For terminal
/// costs the u-blocks are empty.
struct CostExpansion {
    double l = 0.0;
    Vec l_x;
    Vec l_u;
    Mat l_xx;
    Mat l_uu;
    Mat l_ux;
};

/// Stage/terminal cost with analytic (or finite-difference) expansions.
/// Costs may depend on absolute time t (seconds) so a receding-horizon
/// caller can track time-varying references.
class CostModel {
public:
    virtual ~CostModel() = default;

    virtual double stage(double t, const Vec& x, const Vec& u) const = 0;
    virtual double terminal(double t, const Vec& x) const = 0;

    /// Defaults to central finite differences of stage().
    virtual CostExpansion expand_stage(double t, const Vec& x, const Vec& u) const;
    virtual CostExpansion expand_terminal(double t, const Vec& x) const;
};

/// Multiplies the stage cost (and its expansion) by a constant, typically dt
/// for an integral-style discretization. The terminal cost passes through
/// unless scale_terminal is set.
class StageScaledCost : public CostModel {
public:
    StageScaledCost(std::shared_ptr<const CostModel> inner, double scale,
                    bool scale_terminal = false);

    double stage(double t, const Vec& x, const Vec& u) const override;
    double terminal(double t, const Vec& x) const override;
    CostExpansion expand_stage(double t, const Vec& x, const Vec& u) const override;
    CostExpansion expand_terminal(double t, const Vec& x) const override;

private:
    std::shared_ptr<const CostModel> inner_;
    double scale_;
    bool scale_terminal_;
};

class RolloutDiverged : public std::runtime_error {
public:
    explicit RolloutDiverged(const std::string& what) : std::runtime_error(what) {}
};

/// Finite-horizon optimal control problem: dynamics + stage costs + terminal
/// cost over `horizon` stages. `start_time` anchors stage k at
/// start_time + k * model->dt() for time-varying references.
class OCProblem {
public:
    OCProblem(std::shared_ptr<const SystemModel> model, std::shared_ptr<const CostModel> cost,
              int horizon);

    const SystemModel& model() const { return *model_; }
    const CostModel& cost() const { return *cost_; }
    int horizon() const { return horizon_; }

    double start_time() const { return start_time_; }
    void set_start_time(double t) { start_time_ = t; }

    double stage_time(int k) const { return start_time_ + k * model_->dt(); }

    double stage_cost(int k, const Vec& x, const Vec& u) const;
    double terminal_cost(const Vec& x) const;

    CostExpansion expand_stage(int k, const Vec& x, const Vec& u) const;
    CostExpansion expand_terminal(const Vec& x) const;

    /// Rolls out the dynamics from x0 under `controls` and sums all costs.
    double total_cost(const Vec& x0, const std::vector<Vec>& controls) const;

private:
    std::shared_ptr<const SystemModel> model_;
    std::shared_ptr<const CostModel> cost_;
    int horizon_;
    double start_time_ = 0.0;
};

}  // namespace rsmpc
