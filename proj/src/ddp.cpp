#include "rsmpc/ddp.hpp"

#include <cmath>

namespace rsmpc {

namespace {

std::vector<Vec> rollout(const OCProblem& ocp, const Vec& x0, const std::vector<Vec>& controls) {
    std::vector<Vec> states;
    states.reserve(ocp.horizon() + 1);
    states.push_back(x0);
    for (int k = 0; k < ocp.horizon(); ++k) {
        Vec xn = ocp.model().step(states.back(), controls[k]);
        if (!all_finite(xn)) throw RolloutDiverged("rollout diverged");
        states.push_back(std::move(xn));
    }
    return states;
}

double trajectory_cost(const OCProblem& ocp, const std::vector<Vec>& states,
                       const std::vector<Vec>& controls) {
    double c = 0.0;
    for (int k = 0; k < ocp.horizon(); ++k) c += ocp.stage_cost(k, states[k], controls[k]);
    c += ocp.terminal_cost(states.back());
    return c;
}

}  // namespace

BackwardPassResult backward_pass(const OCProblem& ocp, const std::vector<Vec>& states,
                                 const std::vector<Vec>& controls, double reg) {
    const int H = ocp.horizon();
    const int nu = ocp.model().control_dim();
    BackwardPassResult res;
    res.k_ff.resize(H);
    res.K_fb.resize(H);
    res.value_expansions.resize(H + 1);

    CostExpansion term = ocp.expand_terminal(states[H]);
    Vec Vx = term.l_x;
    Mat Vxx = symmetrize(term.l_xx);
    res.value_expansions[H] = {states[H], Vx, Vxx};

    for (int k = H - 1; k >= 0; --k) {
        const CostExpansion e = ocp.expand_stage(k, states[k], controls[k]);
        const Mat fx = ocp.model().dyn_jacobian(states[k], controls[k]);
        const Mat fu = ocp.model().ctrl_jacobian(states[k], controls[k]);

        const Vec Qx = e.l_x + fx.transpose() * Vx;
        const Vec Qu = e.l_u + fu.transpose() * Vx;
        const Mat Qxx = e.l_xx + fx.transpose() * Vxx * fx;
        const Mat Quu = symmetrize(e.l_uu + fu.transpose() * Vxx * fu);
        const Mat Qux = e.l_ux + fu.transpose() * Vxx * fx;

        Eigen::LLT<Mat> llt(Quu + reg * Mat::Identity(nu, nu));
        if (llt.info() != Eigen::Success) return res;  // ok stays false: caller raises reg

        res.k_ff[k] = -llt.solve(Qu);
        res.K_fb[k] = -llt.solve(Qux);

        res.d1 += res.k_ff[k].dot(Qu);
        res.d2 += res.k_ff[k].dot(Quu * res.k_ff[k]);

        const Mat& K = res.K_fb[k];
        const Vec& kf = res.k_ff[k];
        Vx = Qx + K.transpose() * Quu * kf + K.transpose() * Qu + Qux.transpose() * kf;
        Vxx = symmetrize(Qxx + K.transpose() * Quu * K + K.transpose() * Qux +
                         Qux.transpose() * K);
        res.value_expansions[k] = {states[k], Vx, Vxx};
    }
    res.ok = true;
    return res;
}

std::optional<ForwardPassResult> forward_pass(const OCProblem& ocp,
                                              const std::vector<Vec>& states,
                                              const std::vector<Vec>& controls,
                                              const BackwardPassResult& bp, double step) {
    if (!(step > 0.0 && step <= 1.0)) throw std::invalid_argument("forward_pass: step in (0,1]");
    const int H = ocp.horizon();
    ForwardPassResult fp;
    fp.states.reserve(H + 1);
    fp.controls.reserve(H);
    fp.states.push_back(states[0]);
    for (int k = 0; k < H; ++k) {
        const Vec& x = fp.states.back();
        Vec u = controls[k] + step * bp.k_ff[k] + bp.K_fb[k] * (x - states[k]);
        if (!all_finite(u)) return std::nullopt;
        fp.cost += ocp.stage_cost(k, x, u);
        Vec xn = ocp.model().step(x, u);
        if (!all_finite(xn) || !std::isfinite(fp.cost)) return std::nullopt;
        fp.controls.push_back(std::move(u));
        fp.states.push_back(std::move(xn));
    }
    fp.cost += ocp.terminal_cost(fp.states.back());
    if (!std::isfinite(fp.cost)) return std::nullopt;
    return fp;
}

DDPSolution DDPSolver::solve(const OCProblem& ocp, const Vec& x0,
                             const std::optional<std::vector<Vec>>& warm_start) const {
    const int H = ocp.horizon();
    const int nu = ocp.model().control_dim();
    if (warm_start && static_cast<int>(warm_start->size()) != H)
        throw std::invalid_argument("warm start length must equal horizon");

    DDPSolution sol;
    sol.controls = warm_start ? *warm_start : std::vector<Vec>(H, Vec::Zero(nu));
    try {
        sol.states = rollout(ocp, x0, sol.controls);
    } catch (const RolloutDiverged&) {
        if (!warm_start) throw;
        sol.controls.assign(H, Vec::Zero(nu));  // diverged warm start: retry cold
        sol.states = rollout(ocp, x0, sol.controls);
    }
    sol.cost = trajectory_cost(ocp, sol.states, sol.controls);

    double reg = opts_.reg_init;
    bool stop_after_refresh = false;

    for (int iter = 0; iter < opts_.max_iters; ++iter) {
        BackwardPassResult bp = backward_pass(ocp, sol.states, sol.controls, reg);
        while (!bp.ok) {
            if (reg >= opts_.reg_max)
                throw SolverFailure("backward pass: Q_uu not PD at maximum regularization");
            reg = std::min(reg * 10.0, opts_.reg_max);
            bp = backward_pass(ocp, sol.states, sol.controls, reg);
        }
        sol.value_expansions = bp.value_expansions;

        if (stop_after_refresh) {
            sol.converged = true;
            break;
        }

        double gnorm = 0.0;
        for (const Vec& kf : bp.k_ff) gnorm = std::max(gnorm, kf.lpNorm<Eigen::Infinity>());
        const double expected_full = -(bp.d1 + 0.5 * bp.d2);
        if (gnorm < opts_.tol_grad || expected_full < opts_.tol_cost) {
            sol.converged = true;
            break;
        }

        bool accepted = false;
        double step = 1.0;
        for (int ls = 0; ls < opts_.max_linesearch; ++ls, step *= 0.5) {
            auto fp = forward_pass(ocp, sol.states, sol.controls, bp, step);
            if (!fp) continue;
            const double decrease = sol.cost - fp->cost;
            const double expected = -(step * bp.d1 + 0.5 * step * step * bp.d2);
            const bool accept = expected > 0.0 ? decrease >= opts_.armijo * expected
                                               : decrease > 0.0;
            if (!accept) continue;
            sol.states = std::move(fp->states);
            sol.controls = std::move(fp->controls);
            const double improvement = sol.cost - fp->cost;
            sol.cost = fp->cost;
            sol.iterations += 1;
            reg = std::max(reg / 5.0, opts_.reg_min);
            if (improvement < opts_.tol_cost) stop_after_refresh = true;
            accepted = true;
            break;
        }
        if (!accepted) {
            if (reg >= opts_.reg_max) break;  // best iterate, converged=false
            reg = std::min(reg * 10.0, opts_.reg_max);
        }
    }
    if (stop_after_refresh && !sol.converged) {
        // max_iters hit right after an accepted step: refresh expansions once
        BackwardPassResult bp = backward_pass(ocp, sol.states, sol.controls, reg);
        if (bp.ok) sol.value_expansions = bp.value_expansions;
        sol.converged = true;
    }
    return sol;
}

const ValueQuadratic& value_at_node(const DDPSolution& sol, int k) {
    if (k < 0 || k >= static_cast<int>(sol.value_expansions.size()))
        throw std::out_of_range("value_at_node: index out of range");
    return sol.value_expansions[k];
}

std::vector<Vec> shift_warm_start(const std::vector<Vec>& controls, int shift) {
    std::vector<Vec> out;
    const int H = static_cast<int>(controls.size());
    out.reserve(H);
    for (int k = 0; k < H; ++k) out.push_back(controls[std::min(k + shift, H - 1)]);
    return out;
}

}  // namespace rsmpc
