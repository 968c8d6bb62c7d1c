#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "rsmpc/ddp.hpp"
#include "rsmpc/filters.hpp"

namespace rsmpc {
namespace oracle {

/// One linearized risk-sensitive estimation step: the quadratic max-problem
/// in (x_{t-1}, x_t) around the prior mean and the prediction. Everything a
/// dense reference solver needs, with no dependence on the filter code.
struct RsInstance {
    GaussianBelief prior;  // mean x_{t-1}, cov P_{t-1}
    Mat F;                 // dynamics Jacobian at the prior
    Mat H;                 // measurement Jacobian at the prediction
    Mat Q;
    Mat R;
    Vec x_pred;            // f(prior mean, u)
    Vec innovation;        // y - h(x_pred)
    double mu = 0.0;
    ValueQuadratic vq;     // anchored at x_pred
};

class IllPosed : public std::runtime_error {
public:
    explicit IllPosed(const std::string& what) : std::runtime_error(what) {}
};

/// Exact maximizer of the joint quadratic objective over (x_{t-1}, x_t) by
/// one dense symmetric solve. Throws IllPosed when the objective is not
/// strictly concave.
std::pair<Vec, Vec> argmax_joint(const RsInstance& inst);

/// Evaluates the two-step reduced form (eliminate x_{t-1}, then maximize the
/// single-block objective) and returns the max deviation from argmax_joint
/// over both blocks.
double verify_appendix_reduction(const RsInstance& inst);

/// Draws an instance whose objective is guaranteed strictly concave
/// (mu below the well-posedness limit).
RsInstance random_admissible_instance(std::uint64_t seed, int n, int ny);

struct RiccatiSolution {
    std::vector<Mat> gains;  // length H, u = -K x
    std::vector<Mat> P;      // length H+1, V_k(x) = 1/2 x' P_k x
};

/// Backward Riccati recursion for cost 1/2 x'Qc x + 1/2 u'Rc u with
/// terminal 1/2 x'Qf x. Exact reference for DDP on LQR instances.
RiccatiSolution riccati_lqr(const Mat& A, const Mat& B, const Mat& Qc, const Mat& Rc,
                            const Mat& Qf, int horizon);

}  // namespace oracle
}  // namespace rsmpc
