#include "rsmpc/ocp.hpp"

#include <cmath>

namespace rsmpc {

namespace {

// Gradient/Hessian of a scalar function by central differences.
template <typename F>
void fd_grad_hess(const F& f, const Vec& z, Vec& grad, Mat& hess, double eps = 1e-5) {
    const int n = static_cast<int>(z.size());
    grad.resize(n);
    hess.resize(n, n);
    auto h = [&](int i) { return eps * std::max(1.0, std::abs(z[i])); };
    const double f0 = f(z);
    for (int i = 0; i < n; ++i) {
        Vec zp = z, zm = z;
        zp[i] += h(i);
        zm[i] -= h(i);
        grad[i] = (f(zp) - f(zm)) / (2.0 * h(i));
        hess(i, i) = (f(zp) - 2.0 * f0 + f(zm)) / (h(i) * h(i));
    }
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            Vec zpp = z, zpm = z, zmp = z, zmm = z;
            zpp[i] += h(i); zpp[j] += h(j);
            zpm[i] += h(i); zpm[j] -= h(j);
            zmp[i] -= h(i); zmp[j] += h(j);
            zmm[i] -= h(i); zmm[j] -= h(j);
            hess(i, j) = hess(j, i) = (f(zpp) - f(zpm) - f(zmp) + f(zmm)) / (4.0 * h(i) * h(j));
        }
}

}  // namespace

CostExpansion CostModel::expand_stage(double t, const Vec& x, const Vec& u) const {
    const int nx = static_cast<int>(x.size());
    const int nu = static_cast<int>(u.size());
    Vec z(nx + nu);
    z << x, u;
    auto f = [&](const Vec& zi) { return stage(t, zi.head(nx), zi.tail(nu)); };
    Vec grad;
    Mat hess;
    fd_grad_hess(f, z, grad, hess);
    CostExpansion e;
    e.l = stage(t, x, u);
    e.l_x = grad.head(nx);
    e.l_u = grad.tail(nu);
    e.l_xx = symmetrize(hess.topLeftCorner(nx, nx));
    e.l_uu = symmetrize(hess.bottomRightCorner(nu, nu));
    e.l_ux = hess.bottomLeftCorner(nu, nx);
    return e;
}

CostExpansion CostModel::expand_terminal(double t, const Vec& x) const {
    auto f = [&](const Vec& xi) { return terminal(t, xi); };
    CostExpansion e;
    e.l = terminal(t, x);
    fd_grad_hess(f, x, e.l_x, e.l_xx);
    e.l_xx = symmetrize(e.l_xx);
    return e;
}

StageScaledCost::StageScaledCost(std::shared_ptr<const CostModel> inner, double scale,
                                 bool scale_terminal)
    : inner_(std::move(inner)), scale_(scale), scale_terminal_(scale_terminal) {
    if (!(scale > 0.0)) throw std::invalid_argument("stage cost scale must be > 0");
}

double StageScaledCost::stage(double t, const Vec& x, const Vec& u) const {
    return scale_ * inner_->stage(t, x, u);
}

double StageScaledCost::terminal(double t, const Vec& x) const {
    return (scale_terminal_ ? scale_ : 1.0) * inner_->terminal(t, x);
}

CostExpansion StageScaledCost::expand_stage(double t, const Vec& x, const Vec& u) const {
    CostExpansion e = inner_->expand_stage(t, x, u);
    e.l *= scale_;
    e.l_x *= scale_;
    e.l_u *= scale_;
    e.l_xx *= scale_;
    e.l_uu *= scale_;
    e.l_ux *= scale_;
    return e;
}

CostExpansion StageScaledCost::expand_terminal(double t, const Vec& x) const {
    CostExpansion e = inner_->expand_terminal(t, x);
    if (scale_terminal_) {
        e.l *= scale_;
        e.l_x *= scale_;
        e.l_xx *= scale_;
    }
    return e;
}

OCProblem::OCProblem(std::shared_ptr<const SystemModel> model,
                     std::shared_ptr<const CostModel> cost, int horizon)
    : model_(std::move(model)), cost_(std::move(cost)), horizon_(horizon) {
    if (horizon_ < 1) throw std::invalid_argument("horizon must be >= 1");
}

double OCProblem::stage_cost(int k, const Vec& x, const Vec& u) const {
    if (k < 0 || k >= horizon_) throw std::out_of_range("stage index out of range");
    return cost_->stage(stage_time(k), x, u);
}

double OCProblem::terminal_cost(const Vec& x) const {
    return cost_->terminal(stage_time(horizon_), x);
}

CostExpansion OCProblem::expand_stage(int k, const Vec& x, const Vec& u) const {
    if (k < 0 || k >= horizon_) throw std::out_of_range("stage index out of range");
    return cost_->expand_stage(stage_time(k), x, u);
}

CostExpansion OCProblem::expand_terminal(const Vec& x) const {
    return cost_->expand_terminal(stage_time(horizon_), x);
}

double OCProblem::total_cost(const Vec& x0, const std::vector<Vec>& controls) const {
    if (static_cast<int>(controls.size()) != horizon_)
        throw std::invalid_argument("total_cost: controls length must equal horizon");
    Vec x = x0;
    double c = 0.0;
    for (int k = 0; k < horizon_; ++k) {
        c += stage_cost(k, x, controls[k]);
        x = model_->step(x, controls[k]);
        if (!all_finite(x) || !std::isfinite(c)) throw RolloutDiverged("total_cost: rollout diverged");
    }
    c += terminal_cost(x);
    if (!std::isfinite(c)) throw RolloutDiverged("total_cost: non-finite terminal cost");
    return c;
}

}  // namespace rsmpc
