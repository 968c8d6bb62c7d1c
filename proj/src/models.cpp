#include "rsmpc/models.hpp"

#include <cmath>

namespace rsmpc {

SystemModel::SystemModel(int state_dim, int control_dim, int meas_dim, double dt)
    : state_dim_(state_dim), control_dim_(control_dim), meas_dim_(meas_dim), dt_(dt) {
    if (state_dim < 1 || control_dim < 1 || meas_dim < 1)
        throw ModelError("model dimensions must be >= 1");
    if (!(dt > 0.0)) throw ModelError("dt must be > 0");
}

Vec SystemModel::step(const Vec& x, const Vec& u) const {
    if (x.size() != state_dim_ || u.size() != control_dim_)
        throw ModelError("step: dimension mismatch");
    if (!all_finite(x) || !all_finite(u)) throw ModelError("step: non-finite input");
    return dynamics(x, u);
}

Vec SystemModel::measure(const Vec& x) const {
    if (x.size() != state_dim_) throw ModelError("measure: dimension mismatch");
    if (!all_finite(x)) throw ModelError("measure: non-finite input");
    return measurement(x);
}

Mat SystemModel::dyn_jacobian(const Vec& x, const Vec& u) const {
    return fd_dyn_jacobian(x, u);
}

Mat SystemModel::ctrl_jacobian(const Vec& x, const Vec& u) const {
    return fd_ctrl_jacobian(x, u);
}

Mat SystemModel::meas_jacobian(const Vec& x) const { return fd_meas_jacobian(x); }

namespace {

// Central differences with a per-coordinate step eps * max(1, |x_i|).
template <typename F>
Mat central_diff(const F& f, const Vec& x, int out_dim, double eps = 1e-6) {
    Mat J(out_dim, x.size());
    for (int i = 0; i < x.size(); ++i) {
        const double h = eps * std::max(1.0, std::abs(x[i]));
        Vec xp = x, xm = x;
        xp[i] += h;
        xm[i] -= h;
        J.col(i) = (f(xp) - f(xm)) / (2.0 * h);
    }
    return J;
}

}  // namespace

Mat SystemModel::fd_dyn_jacobian(const Vec& x, const Vec& u) const {
    return central_diff([&](const Vec& xi) { return dynamics(xi, u); }, x, state_dim_);
}

Mat SystemModel::fd_ctrl_jacobian(const Vec& x, const Vec& u) const {
    return central_diff([&](const Vec& ui) { return dynamics(x, ui); }, u, state_dim_);
}

Mat SystemModel::fd_meas_jacobian(const Vec& x) const {
    return central_diff([&](const Vec& xi) { return measurement(xi); }, x, meas_dim_);
}

Vec EulerModel::dynamics(const Vec& x, const Vec& u) const {
    return x + dt() * f_cont(x, u);
}

Mat EulerModel::dyn_jacobian(const Vec& x, const Vec& u) const {
    const Mat A = A_cont(x, u);
    if (A.size() == 0) return fd_dyn_jacobian(x, u);
    return Mat::Identity(state_dim(), state_dim()) + dt() * A;
}

Mat EulerModel::ctrl_jacobian(const Vec& x, const Vec& u) const {
    const Mat B = B_cont(x, u);
    if (B.size() == 0) return fd_ctrl_jacobian(x, u);
    return dt() * B;
}

NoiseSpec::NoiseSpec(Mat q, Mat r, Mat p0) : Q(std::move(q)), R(std::move(r)), P0(std::move(p0)) {
    auto check_spd = [](const Mat& m, const char* name) {
        if (m.rows() != m.cols()) throw ModelError(std::string(name) + " must be square");
        if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-10 * (1.0 + m.cwiseAbs().maxCoeff()))
            throw ModelError(std::string(name) + " must be symmetric");
        Eigen::LLT<Mat> llt(symmetrize(m));
        if (llt.info() != Eigen::Success)
            throw ModelError(std::string(name) + " must be positive definite");
    };
    check_spd(Q, "Q");
    check_spd(R, "R");
    check_spd(P0, "P0");
}

double JacobianReport::max_rel_err() const {
    return std::max(max_rel_err_dyn, std::max(max_rel_err_ctrl, max_rel_err_meas));
}

namespace {

double rel_err_matrix(const Mat& a, const Mat& b, int& worst_row, int& worst_col) {
    double worst = 0.0;
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < a.cols(); ++j) {
            const double denom = std::max(1.0, std::max(std::abs(a(i, j)), std::abs(b(i, j))));
            const double err = std::abs(a(i, j) - b(i, j)) / denom;
            if (err > worst) {
                worst = err;
                worst_row = i;
                worst_col = j;
            }
        }
    return worst;
}

}  // namespace

JacobianReport check_jacobians(const SystemModel& model, const Vec& x, const Vec& u,
                               double eps_fd) {
    JacobianReport rep;
    const Mat F = model.dyn_jacobian(x, u);
    const Mat B = model.ctrl_jacobian(x, u);
    const Mat H = model.meas_jacobian(x);

    auto fd_state = central_diff([&](const Vec& xi) { return model.step(xi, u); }, x,
                                 model.state_dim(), eps_fd);
    auto fd_ctrl = central_diff([&](const Vec& ui) { return model.step(x, ui); }, u,
                                model.state_dim(), eps_fd);
    auto fd_meas = central_diff([&](const Vec& xi) { return model.measure(xi); }, x,
                                model.meas_dim(), eps_fd);

    rep.max_rel_err_dyn = rel_err_matrix(F, fd_state, rep.worst_dyn_row, rep.worst_dyn_col);
    int r = -1, c = -1;
    rep.max_rel_err_ctrl = rel_err_matrix(B, fd_ctrl, r, c);
    rep.max_rel_err_meas = rel_err_matrix(H, fd_meas, rep.worst_meas_row, rep.worst_meas_col);
    return rep;
}

}  // namespace rsmpc
