#pragma once

#include "rsmpc/ddp.hpp"
#include "rsmpc/models.hpp"

namespace rsmpc {

struct GaussianBelief {
    Vec mean;
    Mat cov;
};

struct Prediction {
    Vec x_pred;
    Mat P_pred;
};

struct RiskConfig {
    double mu = 0.0;        // risk-sensitivity parameter, >= 0
    double pd_margin = 1e-9;  // minimum eigenvalue margin of P^-1 - mu V_xx
};

/// mu is past the well-posedness limit: P^-1 - mu V_xx has an eigenvalue
/// below pd_margin.
class RiskLimitExceeded : public std::runtime_error {
public:
    RiskLimitExceeded(double min_eig, double margin)
        : std::runtime_error("risk limit exceeded: min eig of P^-1 - mu V_xx = " +
                             std::to_string(min_eig) + " < margin " + std::to_string(margin)),
          min_eig(min_eig) {}
    double min_eig;
};

class FilterError : public std::runtime_error {
public:
    explicit FilterError(const std::string& what) : std::runtime_error(what) {}
};

/// Propagate belief through the dynamics: x_pred = f(x, u),
/// P_pred = Q + F P F'.
Prediction predict(const GaussianBelief& belief, const SystemModel& model, const Vec& u,
                   const Mat& Q);

struct EkfUpdate {
    GaussianBelief belief;
    Vec innovation_shift;  // K (y - h(x_pred))
};

/// Standard EKF measurement update. The innovation shift is returned
/// separately for the risk-sensitive variant.
EkfUpdate update_ekf(const Prediction& pred, const SystemModel& model, const Vec& y,
                     const Mat& R);

/// Move a value expansion to a new anchor; exact for quadratics.
ValueQuadratic reanchor_value(const ValueQuadratic& vq, const Vec& new_anchor);

/// Risk-sensitive update: the EKF posterior mean is biased along the value
/// function, x = x_pred + (I - mu P V_xx)^-1 (shift + mu P v_x). The
/// covariance is the EKF posterior covariance. `vq` must be anchored at
/// pred.x_pred (see reanchor_value).
GaussianBelief update_rs(const Prediction& pred, const SystemModel& model, const Vec& y,
                         const Mat& R, const RiskConfig& risk, const ValueQuadratic& vq);

}  // namespace rsmpc
