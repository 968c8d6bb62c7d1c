#include <doctest.h>

#include "rsmpc/filters.hpp"
#include "test_helpers.hpp"

using namespace rsmpc;

namespace {

std::shared_ptr<testing::LinearModel> scalar_model(double a = 1.0, double h = 1.0) {
    return std::make_shared<testing::LinearModel>(a * Mat::Identity(1, 1), Mat::Identity(1, 1),
                                                  h * Mat::Identity(1, 1));
}

ValueQuadratic zero_value(const Vec& anchor) {
    const int n = static_cast<int>(anchor.size());
    return {anchor, Vec::Zero(n), Mat::Zero(n, n)};
}

}  // namespace

TEST_CASE("scalar predict: P_pred = Q + F P F'") {
    auto model = scalar_model(2.0);
    GaussianBelief b{Vec::Constant(1, 1.0), 0.5 * Mat::Identity(1, 1)};
    const Prediction pred = predict(b, *model, Vec::Constant(1, 0.25), Mat::Identity(1, 1));
    CHECK(pred.x_pred[0] == doctest::Approx(2.25));    // 2 * 1 + 0.25
    CHECK(pred.P_pred(0, 0) == doctest::Approx(3.0));  // 1 + 4 * 0.5
}

TEST_CASE("scalar EKF update hand values") {
    // P_pred = 1, R = 1, H = 1, innovation = 2: K = 1/2, shift = 1, P = 1/2.
    auto model = scalar_model();
    Prediction pred{Vec::Constant(1, 3.0), Mat::Identity(1, 1)};
    const EkfUpdate up = update_ekf(pred, *model, Vec::Constant(1, 5.0), Mat::Identity(1, 1));
    CHECK(up.innovation_shift[0] == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(up.belief.mean[0] == doctest::Approx(4.0).epsilon(1e-14));
    CHECK(up.belief.cov(0, 0) == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("EKF posterior matches the information form on random instances") {
    RandomStream rng(31);
    for (int rep = 0; rep < 50; ++rep) {
        const int n = 3, ny = 2;
        auto spd = [&](int d) {
            Mat G(d, d);
            for (int i = 0; i < d; ++i)
                for (int j = 0; j < d; ++j) G(i, j) = rng.gaussian();
            return Mat(symmetrize(G * G.transpose()) + 0.1 * Mat::Identity(d, d));
        };
        Mat H(ny, n);
        for (int i = 0; i < ny; ++i)
            for (int j = 0; j < n; ++j) H(i, j) = rng.gaussian();
        auto model = std::make_shared<testing::LinearModel>(Mat::Identity(n, n),
                                                            Mat::Identity(n, 1), H);
        const Mat Ppred = spd(n);
        const Mat R = spd(ny);
        Prediction pred{rng.gaussian_vec(n), Ppred};
        const Vec y = rng.gaussian_vec(ny);
        const EkfUpdate up = update_ekf(pred, *model, y, R);

        const Mat Pinfo = (H.transpose() * R.inverse() * H + Ppred.inverse()).inverse();
        const Vec shift = Pinfo * H.transpose() * R.inverse() * (y - H * pred.x_pred);
        CHECK((up.belief.cov - Pinfo).lpNorm<Eigen::Infinity>() < 1e-10);
        CHECK((up.innovation_shift - shift).lpNorm<Eigen::Infinity>() < 1e-10);
    }
}

TEST_CASE("ill-conditioned prediction keeps the posterior symmetric PSD") {
    auto model = std::make_shared<testing::LinearModel>(Mat::Identity(2, 2),
                                                        Mat::Identity(2, 1),
                                                        Mat::Identity(2, 2));
    Mat Ppred = Mat::Zero(2, 2);
    Ppred(0, 0) = 1.0;
    Ppred(1, 1) = 1e-12;  // cond 1e12: Joseph-form branch
    Prediction pred{Vec::Zero(2), Ppred};
    const EkfUpdate up = update_ekf(pred, *model, Vec::Ones(2), Mat::Identity(2, 2));
    CHECK((up.belief.cov - up.belief.cov.transpose()).norm() == 0.0);
    Eigen::SelfAdjointEigenSolver<Mat> es(up.belief.cov);
    CHECK(es.eigenvalues().minCoeff() > 0.0);
}

TEST_CASE("update_rs with mu = 0 is bitwise the EKF update") {
    RandomStream rng(37);
    auto model = scalar_model();
    for (int rep = 0; rep < 100; ++rep) {
        Prediction pred{rng.gaussian_vec(1),
                        Mat::Constant(1, 1, 0.1 + std::abs(rng.gaussian()))};
        const Vec y = rng.gaussian_vec(1);
        const Mat R = Mat::Constant(1, 1, 0.5);
        ValueQuadratic vq{pred.x_pred, rng.gaussian_vec(1), Mat::Constant(1, 1, rng.gaussian())};
        const EkfUpdate ekf = update_ekf(pred, *model, y, R);
        const GaussianBelief rs = update_rs(pred, *model, y, R, RiskConfig{0.0, 1e-9}, vq);
        CHECK(rs.mean[0] == ekf.belief.mean[0]);  // exact bitwise reduction
        CHECK(rs.cov(0, 0) == ekf.belief.cov(0, 0));
    }
}

TEST_CASE("risk bias moves the estimate along P v_x when V_xx = 0") {
    auto model = scalar_model();
    Prediction pred{Vec::Zero(1), Mat::Identity(1, 1)};
    const Vec y = Vec::Zero(1);
    const Mat R = Mat::Identity(1, 1);
    ValueQuadratic vq = zero_value(pred.x_pred);
    vq.v_x = Vec::Constant(1, 2.0);
    const double mu = 0.1;
    const GaussianBelief rs = update_rs(pred, *model, y, R, RiskConfig{mu, 1e-9}, vq);
    const EkfUpdate ekf = update_ekf(pred, *model, y, R);
    // V_xx = 0: x_rs - x_ekf = mu P v_x exactly
    CHECK(rs.mean[0] - ekf.belief.mean[0] ==
          doctest::Approx(mu * ekf.belief.cov(0, 0) * vq.v_x[0]).epsilon(1e-14));
}

TEST_CASE("spec scalar instance: shift 1/6 at mu = 1/4") {
    // P0 = Q = R = 1, F = H = 1, zero innovation, v_x = 1, V_xx = 0:
    // P_pred = 2, P = 2/3, shift = mu P v_x = 1/6.
    auto model = scalar_model();
    GaussianBelief prior{Vec::Zero(1), Mat::Identity(1, 1)};
    const Prediction pred = predict(prior, *model, Vec::Zero(1), Mat::Identity(1, 1));
    CHECK(pred.P_pred(0, 0) == doctest::Approx(2.0));
    ValueQuadratic vq = zero_value(pred.x_pred);
    vq.v_x = Vec::Ones(1);
    const GaussianBelief rs =
        update_rs(pred, *model, pred.x_pred, Mat::Identity(1, 1), RiskConfig{0.25, 1e-9}, vq);
    CHECK(rs.cov(0, 0) == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
    CHECK(rs.mean[0] - pred.x_pred[0] == doctest::Approx(1.0 / 6.0).epsilon(1e-14));
}

TEST_CASE("reanchor_value is exact for quadratics") {
    RandomStream rng(41);
    ValueQuadratic vq;
    vq.anchor = rng.gaussian_vec(3);
    vq.v_x = rng.gaussian_vec(3);
    Mat G(3, 3);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) G(i, j) = rng.gaussian();
    vq.V_xx = symmetrize(G + G.transpose());
    const Vec b = rng.gaussian_vec(3);
    const ValueQuadratic moved = reanchor_value(vq, b);

    auto eval = [](const ValueQuadratic& q, const Vec& x) {
        const Vec d = x - q.anchor;
        return q.v_x.dot(d) + 0.5 * d.dot(q.V_xx * d);
    };
    for (int rep = 0; rep < 5; ++rep) {
        const Vec x = rng.gaussian_vec(3);
        // they differ by the constant V(b) - V(a); gradients agree everywhere
        const Vec g_orig = vq.v_x + vq.V_xx * (x - vq.anchor);
        const Vec g_moved = moved.v_x + moved.V_xx * (x - moved.anchor);
        CHECK((g_orig - g_moved).lpNorm<Eigen::Infinity>() < 1e-12);
        const double offset = eval(vq, x) - eval(moved, x);
        const double expect_offset = eval(vq, b);
        CHECK(offset == doctest::Approx(expect_offset).epsilon(1e-10));
    }
}

TEST_CASE("update_rs rejects a mis-anchored value expansion") {
    auto model = scalar_model();
    Prediction pred{Vec::Constant(1, 1.0), Mat::Identity(1, 1)};
    ValueQuadratic vq = zero_value(Vec::Constant(1, 1.5));
    CHECK_THROWS_AS(update_rs(pred, *model, Vec::Zero(1), Mat::Identity(1, 1),
                              RiskConfig{0.1, 1e-9}, vq),
                    std::invalid_argument);
}

TEST_CASE("RiskLimitExceeded fires exactly at the well-posedness boundary") {
    // P = 1 built from P_pred = 2, H = 1, R = 2; V_xx = 1, mu = 1:
    // P^-1 - mu V_xx = 0, below any positive margin.
    auto model = scalar_model();
    Prediction pred{Vec::Zero(1), 2.0 * Mat::Identity(1, 1)};
    const Mat R = 2.0 * Mat::Identity(1, 1);
    {
        const EkfUpdate ekf = update_ekf(pred, *model, Vec::Zero(1), R);
        REQUIRE(ekf.belief.cov(0, 0) == doctest::Approx(1.0).epsilon(1e-14));
    }
    ValueQuadratic vq = zero_value(pred.x_pred);
    vq.V_xx = Mat::Identity(1, 1);
    CHECK_THROWS_AS(update_rs(pred, *model, Vec::Zero(1), R, RiskConfig{1.0, 1e-9}, vq),
                    RiskLimitExceeded);
    // just inside the limit: no throw
    CHECK_NOTHROW(update_rs(pred, *model, Vec::Zero(1), R, RiskConfig{0.9, 1e-9}, vq));
}

TEST_CASE("negative mu is rejected") {
    auto model = scalar_model();
    Prediction pred{Vec::Zero(1), Mat::Identity(1, 1)};
    CHECK_THROWS_AS(update_rs(pred, *model, Vec::Zero(1), Mat::Identity(1, 1),
                              RiskConfig{-0.5, 1e-9}, zero_value(pred.x_pred)),
                    std::invalid_argument);
}
