#include "rsmpc/filters.hpp"

#include <cmath>

namespace rsmpc {

Prediction predict(const GaussianBelief& belief, const SystemModel& model, const Vec& u,
                   const Mat& Q) {
    const Mat F = model.dyn_jacobian(belief.mean, u);
    Prediction pred;
    pred.x_pred = model.step(belief.mean, u);
    pred.P_pred = symmetrize(Q + F * belief.cov * F.transpose());
    if (!all_finite(pred.x_pred) || !pred.P_pred.allFinite())
        throw FilterError("predict: non-finite propagation");
    return pred;
}

EkfUpdate update_ekf(const Prediction& pred, const SystemModel& model, const Vec& y,
                     const Mat& R) {
    const Mat H = model.meas_jacobian(pred.x_pred);
    const Mat S = symmetrize(R + H * pred.P_pred * H.transpose());
    Eigen::LLT<Mat> llt(S);
    if (llt.info() != Eigen::Success)
        throw FilterError("update_ekf: innovation covariance not PD");

    const Mat K = llt.solve(H * pred.P_pred).transpose();
    const Vec innovation = y - model.measure(pred.x_pred);

    const int n = model.state_dim();
    const Mat IKH = Mat::Identity(n, n) - K * H;
    Eigen::SelfAdjointEigenSolver<Mat> es(pred.P_pred);
    const double cond = es.eigenvalues().maxCoeff() /
                        std::max(es.eigenvalues().minCoeff(), 1e-300);
    Mat P;
    if (cond > 1e8) {
        // Joseph form for poorly conditioned predictions
        P = IKH * pred.P_pred * IKH.transpose() + K * R * K.transpose();
    } else {
        P = IKH * pred.P_pred;
    }

    EkfUpdate out;
    out.innovation_shift = K * innovation;
    out.belief.mean = pred.x_pred + out.innovation_shift;
    out.belief.cov = symmetrize(P);
    if (!all_finite(out.belief.mean) || !out.belief.cov.allFinite())
        throw FilterError("update_ekf: non-finite update");
    return out;
}

ValueQuadratic reanchor_value(const ValueQuadratic& vq, const Vec& new_anchor) {
    ValueQuadratic out;
    out.anchor = new_anchor;
    out.v_x = vq.v_x + vq.V_xx * (new_anchor - vq.anchor);
    out.V_xx = vq.V_xx;
    return out;
}

GaussianBelief update_rs(const Prediction& pred, const SystemModel& model, const Vec& y,
                         const Mat& R, const RiskConfig& risk, const ValueQuadratic& vq) {
    if (risk.mu < 0.0) throw std::invalid_argument("update_rs: mu must be >= 0");
    const double anchor_err = (vq.anchor - pred.x_pred).norm();
    if (anchor_err > 1e-9 * (1.0 + pred.x_pred.norm()))
        throw std::invalid_argument("update_rs: value expansion not anchored at prediction");

    EkfUpdate ekf = update_ekf(pred, model, y, R);
    if (risk.mu == 0.0) return ekf.belief;  // exact EKF reduction

    const int n = model.state_dim();
    const Mat& P = ekf.belief.cov;

    // Well-posedness on the symmetric form P^-1 - mu V_xx.
    Eigen::LLT<Mat> lltP(P);
    if (lltP.info() != Eigen::Success) throw FilterError("update_rs: posterior cov not PD");
    const Mat Pinv = lltP.solve(Mat::Identity(n, n));
    Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize(Pinv - risk.mu * symmetrize(vq.V_xx)));
    const double min_eig = es.eigenvalues().minCoeff();
    if (min_eig < risk.pd_margin) throw RiskLimitExceeded(min_eig, risk.pd_margin);

    const Mat M = Mat::Identity(n, n) - risk.mu * P * vq.V_xx;
    const Vec rhs = ekf.innovation_shift + risk.mu * P * vq.v_x;
    const Vec shift = Eigen::PartialPivLU<Mat>(M).solve(rhs);

    GaussianBelief out;
    out.mean = pred.x_pred + shift;
    out.cov = P;
    if (!all_finite(out.mean)) throw FilterError("update_rs: non-finite estimate");
    return out;
}

}  // namespace rsmpc
