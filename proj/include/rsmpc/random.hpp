#pragma once

#include <cstdint>
#include <random>

#include "rsmpc/models.hpp"

namespace rsmpc {

/// Seeded Gaussian stream with a fully specified draw sequence
/// (Box-Muller on mt19937_64), so runs are reproducible bit-for-bit.
class RandomStream {
public:
    explicit RandomStream(std::uint64_t seed) : gen_(seed) {}

    double uniform() {  // [0, 1)
        return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    double gaussian() {
        // one normal per two uniforms; the sine partner is discarded
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    Vec gaussian_vec(int n) {
        Vec v(n);
        for (int i = 0; i < n; ++i) v[i] = gaussian();
        return v;
    }

    /// Sample from N(0, cov). Eigendecomposition-based square root so
    /// singular (PSD) covariances are valid, e.g. noise-free coordinates.
    Vec sample(const Mat& cov) {
        const int n = static_cast<int>(cov.rows());
        Eigen::SelfAdjointEigenSolver<Mat> es(cov);
        Vec s = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
        return es.eigenvectors() * s.asDiagonal() * gaussian_vec(n);
    }

private:
    std::mt19937_64 gen_;
};

}  // namespace rsmpc
