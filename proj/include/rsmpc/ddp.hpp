#pragma once

#include <optional>
#include <vector>

#include "rsmpc/ocp.hpp"

namespace rsmpc {

/// Quadratic model of the value function around `anchor`:
/// V(x) ~ V(anchor) + v_x'(x - anchor) + 1/2 (x - anchor)' V_xx (x - anchor).
struct ValueQuadratic {
    Vec anchor;
    Vec v_x;
    Mat V_xx;
};

class SolverFailure : public std::runtime_error {
public:
    explicit SolverFailure(const std::string& what) : std::runtime_error(what) {}
};

struct DDPOptions {
    int max_iters = 100;
    double tol_cost = 1e-9;
    double tol_grad = 1e-9;   // max feedforward norm at convergence
    double reg_init = 1e-9;
    double reg_min = 1e-9;
    double reg_max = 1e9;
    double armijo = 1e-4;
    int max_linesearch = 10;
};

struct DDPSolution {
    std::vector<Vec> controls;                 // length H
    std::vector<Vec> states;                   // length H+1, consistent rollout
    std::vector<ValueQuadratic> value_expansions;  // length H+1
    double cost = 0.0;
    int iterations = 0;
    bool converged = false;
};

struct BackwardPassResult {
    std::vector<Vec> k_ff;      // feedforward, length H
    std::vector<Mat> K_fb;      // feedback, length H
    std::vector<ValueQuadratic> value_expansions;  // length H+1
    double d1 = 0.0;  // sum k' Q_u
    double d2 = 0.0;  // sum k' Q_uu k
    bool ok = false;  // false when Q_uu + reg I is not PD at some stage
};

struct ForwardPassResult {
    std::vector<Vec> states;
    std::vector<Vec> controls;
    double cost = 0.0;
};

/// Riccati-like sweep along the nominal trajectory. `reg` is a
/// Levenberg-Marquardt term added to Q_uu.
BackwardPassResult backward_pass(const OCProblem& ocp, const std::vector<Vec>& states,
                                 const std::vector<Vec>& controls, double reg);

/// Rollout with u = u_nom + step * k_ff + K_fb (x - x_nom). Returns nullopt
/// when the rollout leaves the finite domain.
std::optional<ForwardPassResult> forward_pass(const OCProblem& ocp,
                                              const std::vector<Vec>& states,
                                              const std::vector<Vec>& controls,
                                              const BackwardPassResult& bp, double step);

/// iLQR: Gauss-Newton DDP without dynamics second derivatives.
class DDPSolver {
public:
    explicit DDPSolver(DDPOptions opts = {}) : opts_(opts) {}

    DDPSolution solve(const OCProblem& ocp, const Vec& x0,
                      const std::optional<std::vector<Vec>>& warm_start = std::nullopt) const;

    const DDPOptions& options() const { return opts_; }

private:
    DDPOptions opts_;
};

const ValueQuadratic& value_at_node(const DDPSolution& sol, int k);

/// Shift a control sequence one step for receding-horizon warm starting
/// (last control repeated).
std::vector<Vec> shift_warm_start(const std::vector<Vec>& controls, int shift = 1);

}  // namespace rsmpc
