#include "rsmpc/oracle.hpp"

#include <cmath>

#include "rsmpc/random.hpp"

namespace rsmpc {
namespace oracle {

namespace {

// Joint objective over z = (a, b), a = x_{t-1} - prior mean, b = x_t - x_pred:
//   J(z) = 1/2 z' S z + g' z + const,
// with
//   S_aa = -(P0^-1 + F' Q^-1 F),  S_ab = F' Q^-1,
//   S_bb = -(Q^-1 + H' R^-1 H) + mu V_xx,
//   g_a = 0,  g_b = H' R^-1 innovation + mu v_x.
void build_joint(const RsInstance& inst, Mat& S, Vec& g) {
    const int n = static_cast<int>(inst.prior.mean.size());
    const Mat P0inv = inst.prior.cov.inverse();
    const Mat Qinv = inst.Q.inverse();
    const Mat Rinv = inst.R.inverse();

    S.setZero(2 * n, 2 * n);
    S.topLeftCorner(n, n) = -(P0inv + inst.F.transpose() * Qinv * inst.F);
    S.topRightCorner(n, n) = inst.F.transpose() * Qinv;
    S.bottomLeftCorner(n, n) = S.topRightCorner(n, n).transpose();
    S.bottomRightCorner(n, n) = -(Qinv + inst.H.transpose() * Rinv * inst.H) +
                                inst.mu * symmetrize(inst.vq.V_xx);
    S = symmetrize(S);

    g.setZero(2 * n);
    g.tail(n) = inst.H.transpose() * Rinv * inst.innovation + inst.mu * inst.vq.v_x;
}

}  // namespace

std::pair<Vec, Vec> argmax_joint(const RsInstance& inst) {
    const int n = static_cast<int>(inst.prior.mean.size());
    Mat S;
    Vec g;
    build_joint(inst, S, g);

    Eigen::SelfAdjointEigenSolver<Mat> es(S);
    if (es.eigenvalues().maxCoeff() >= 0.0)
        throw IllPosed("argmax_joint: joint objective is not strictly concave");

    const Vec z = -S.ldlt().solve(g);
    return {inst.prior.mean + z.head(n), inst.x_pred + z.tail(n)};
}

double verify_appendix_reduction(const RsInstance& inst) {
    const int n = static_cast<int>(inst.prior.mean.size());
    const Mat P0inv = inst.prior.cov.inverse();
    const Mat Qinv = inst.Q.inverse();
    const Mat Rinv = inst.R.inverse();

    // Reduced single-block route: marginalize x_{t-1}, then maximize over
    // b = x_t - x_pred with the posterior-information form.
    const Mat Pbar = symmetrize(inst.Q + inst.F * inst.prior.cov * inst.F.transpose());
    const Mat Pt = symmetrize(
        (inst.H.transpose() * Rinv * inst.H + Pbar.inverse()).inverse());
    const Vec shift_ekf = Pt * inst.H.transpose() * Rinv * inst.innovation;

    const Mat M = symmetrize(Pt.inverse() - inst.mu * symmetrize(inst.vq.V_xx));
    const Vec b = M.ldlt().solve(Pt.inverse() * shift_ekf + inst.mu * inst.vq.v_x);

    // Back-substitution for the eliminated block: a = (P0^-1 + F'Q^-1 F)^-1 F'Q^-1 b.
    const Mat Qtilde = P0inv + inst.F.transpose() * Qinv * inst.F;
    const Vec a = Qtilde.ldlt().solve(inst.F.transpose() * (Qinv * b));

    const auto [x_prev, x_t] = argmax_joint(inst);
    const double dev_prev = (inst.prior.mean + a - x_prev).lpNorm<Eigen::Infinity>();
    const double dev_t = (inst.x_pred + b - x_t).lpNorm<Eigen::Infinity>();
    return std::max(dev_prev, dev_t);
}

RsInstance random_admissible_instance(std::uint64_t seed, int n, int ny) {
    RandomStream rng(seed);
    auto random_spd = [&](int dim, double jitter) {
        Mat G(dim, dim);
        for (int i = 0; i < dim; ++i)
            for (int j = 0; j < dim; ++j) G(i, j) = rng.gaussian();
        return Mat(symmetrize(G * G.transpose()) + jitter * Mat::Identity(dim, dim));
    };
    auto random_mat = [&](int r, int c) {
        Mat M(r, c);
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < c; ++j) M(i, j) = rng.gaussian();
        return M;
    };

    RsInstance inst;
    inst.prior.mean = rng.gaussian_vec(n);
    inst.prior.cov = random_spd(n, 0.1);
    inst.F = 0.5 * random_mat(n, n);
    inst.H = random_mat(ny, n);
    inst.Q = random_spd(n, 0.1);
    inst.R = random_spd(ny, 0.1);
    inst.x_pred = rng.gaussian_vec(n);
    inst.innovation = rng.gaussian_vec(ny);

    Mat V = symmetrize(random_mat(n, n));
    inst.vq.anchor = inst.x_pred;
    inst.vq.v_x = rng.gaussian_vec(n);
    inst.vq.V_xx = V;

    // Keep mu safely below the well-posedness limit:
    // mu ||V|| ||P_t|| <= 1/2 guarantees P_t^-1 - mu V_xx stays PD.
    const Mat Pbar = symmetrize(inst.Q + inst.F * inst.prior.cov * inst.F.transpose());
    const Mat Pt = symmetrize(
        (inst.H.transpose() * inst.R.inverse() * inst.H + Pbar.inverse()).inverse());
    const double vnorm = V.operatorNorm();
    const double pnorm = Pt.operatorNorm();
    inst.mu = 0.5 / std::max(vnorm * pnorm, 1e-9) * rng.uniform(0.2, 1.0);
    return inst;
}

RiccatiSolution riccati_lqr(const Mat& A, const Mat& B, const Mat& Qc, const Mat& Rc,
                            const Mat& Qf, int horizon) {
    RiccatiSolution sol;
    sol.gains.resize(horizon);
    sol.P.resize(horizon + 1);
    sol.P[horizon] = symmetrize(Qf);
    for (int k = horizon - 1; k >= 0; --k) {
        const Mat& Pn = sol.P[k + 1];
        const Mat G = Rc + B.transpose() * Pn * B;
        sol.gains[k] = G.ldlt().solve(B.transpose() * Pn * A);
        sol.P[k] = symmetrize(Qc + A.transpose() * Pn * A -
                              A.transpose() * Pn * B * sol.gains[k]);
    }
    return sol;
}

}  // namespace oracle
}  // namespace rsmpc
