#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace rsmpc {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Thrown when an input contains NaN/Inf or has the wrong dimension.
class ModelError : public std::domain_error {
public:
    explicit ModelError(const std::string& what) : std::domain_error(what) {}
};

inline bool all_finite(const Vec& v) { return v.allFinite(); }
inline Mat symmetrize(const Mat& m) { return 0.5 * (m + m.transpose()); }

/// Discrete-time system with a measurement map.
///
/// Subclasses provide the discrete dynamics and measurement; Jacobians
/// default to central finite differences and can be overridden with
/// analytic expressions.
class SystemModel {
public:
    SystemModel(int state_dim, int control_dim, int meas_dim, double dt);
    virtual ~SystemModel() = default;

    int state_dim() const { return state_dim_; }
    int control_dim() const { return control_dim_; }
    int meas_dim() const { return meas_dim_; }
    double dt() const { return dt_; }

    /// One discrete step. Validates dimensions and finiteness.
    Vec step(const Vec& x, const Vec& u) const;

    /// Noise-free measurement h(x).
    Vec measure(const Vec& x) const;

    /// d step / d x. Central finite differences unless overridden.
    virtual Mat dyn_jacobian(const Vec& x, const Vec& u) const;

    /// d step / d u.
    virtual Mat ctrl_jacobian(const Vec& x, const Vec& u) const;

    /// d h / d x.
    virtual Mat meas_jacobian(const Vec& x) const;

protected:
    virtual Vec dynamics(const Vec& x, const Vec& u) const = 0;
    virtual Vec measurement(const Vec& x) const = 0;

    Mat fd_dyn_jacobian(const Vec& x, const Vec& u) const;
    Mat fd_ctrl_jacobian(const Vec& x, const Vec& u) const;
    Mat fd_meas_jacobian(const Vec& x) const;

private:
    int state_dim_;
    int control_dim_;
    int meas_dim_;
    double dt_;
};

/// Continuous dynamics integrated with one explicit Euler step of length dt.
class EulerModel : public SystemModel {
public:
    using SystemModel::SystemModel;

    Mat dyn_jacobian(const Vec& x, const Vec& u) const override;
    Mat ctrl_jacobian(const Vec& x, const Vec& u) const override;

protected:
    Vec dynamics(const Vec& x, const Vec& u) const override;

    virtual Vec f_cont(const Vec& x, const Vec& u) const = 0;
    /// Continuous d f / d x; empty matrix means "use finite differences".
    virtual Mat A_cont(const Vec& x, const Vec& u) const { (void)x; (void)u; return Mat(); }
    virtual Mat B_cont(const Vec& x, const Vec& u) const { (void)x; (void)u; return Mat(); }
};

/// Process/measurement/prior covariances. SPD is checked by Cholesky at
/// construction.
struct NoiseSpec {
    Mat Q;
    Mat R;
    Mat P0;

    NoiseSpec(Mat q, Mat r, Mat p0);
};

/// Result of comparing analytic Jacobians against finite differences.
struct JacobianReport {
    double max_rel_err_dyn = 0.0;
    double max_rel_err_ctrl = 0.0;
    double max_rel_err_meas = 0.0;
    int worst_dyn_row = -1, worst_dyn_col = -1;
    int worst_meas_row = -1, worst_meas_col = -1;

    double max_rel_err() const;
    bool passes(double tol) const { return max_rel_err() < tol; }
};

JacobianReport check_jacobians(const SystemModel& model, const Vec& x, const Vec& u,
                               double eps_fd = 1e-6);

}  // namespace rsmpc
