#include <cstdio>
#include <iostream>

#include <CLI11.hpp>

#include "rsmpc/harness.hpp"
#include "rsmpc/oracle.hpp"

namespace {

int cmd_verify() {
    using namespace rsmpc;
    int failures = 0;
    auto report = [&](const char* name, bool ok, double value) {
        std::printf("%-44s %s (%.3e)\n", name, ok ? "ok" : "FAIL", value);
        if (!ok) ++failures;
    };

    double worst_marginal = 0.0, worst_reduction = 0.0;
    for (int i = 0; i < 100; ++i) {
        const int n = 2 + i % 5;
        const int ny = 1 + i % n;
        const auto inst = oracle::random_admissible_instance(1000 + i, n, ny);
        worst_reduction = std::max(worst_reduction, oracle::verify_appendix_reduction(inst));

        auto model_dummy = [&]() {  // wrap the instance for update_rs
            struct LinearModel : SystemModel {
                Mat F, H;
                Vec bias;
                LinearModel(const Mat& f, const Mat& h, const Vec& b)
                    : SystemModel(static_cast<int>(f.rows()), 1, static_cast<int>(h.rows()),
                                  1.0),
                      F(f), H(h), bias(b) {}
                Vec dynamics(const Vec& x, const Vec& u) const override {
                    return F * x + bias + Vec::Zero(F.rows()) * u[0];
                }
                Vec measurement(const Vec& x) const override { return H * x; }
                Mat dyn_jacobian(const Vec&, const Vec&) const override { return F; }
                Mat meas_jacobian(const Vec&) const override { return H; }
            };
            return LinearModel(inst.F, inst.H, inst.x_pred - inst.F * inst.prior.mean);
        }();
        const Prediction pred{inst.x_pred,
                              symmetrize(inst.Q + inst.F * inst.prior.cov * inst.F.transpose())};
        const Vec y = model_dummy.measure(inst.x_pred) + inst.innovation;
        const GaussianBelief rs = update_rs(pred, model_dummy, y, inst.R,
                                            RiskConfig{inst.mu, 1e-12}, inst.vq);
        const auto [xp, xt] = oracle::argmax_joint(inst);
        worst_marginal = std::max(worst_marginal, (rs.mean - xt).lpNorm<Eigen::Infinity>());
    }
    report("update_rs vs joint-argmax oracle", worst_marginal < 1e-8, worst_marginal);
    report("two-step reduction vs joint argmax", worst_reduction < 1e-10, worst_reduction);
    return failures == 0 ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"rsmpc: risk-sensitive output-feedback MPC experiments"};
    app.require_subcommand(1);

    auto* run = app.add_subcommand("run", "run a study from a config/preset");
    std::string config_path, preset, estimator, out_dir;
    double mu = -2.0, prior_offset = std::numeric_limits<double>::quiet_NaN();
    int trials = -1, jobs = -1, steps = -1;
    long long seed = -1;
    run->add_option("--config", config_path, "JSON config file");
    run->add_option("--preset", preset, "quadrotor-load | arm-push | centroidal-prior");
    run->add_option("--estimator", estimator, "ekf | rs-ekf | both");
    run->add_option("--mu", mu, "risk-sensitivity parameter");
    run->add_option("--trials", trials, "number of trials");
    run->add_option("--steps", steps, "steps per run");
    run->add_option("--seed", seed, "base seed (trial i uses seed + i)");
    run->add_option("--jobs", jobs, "parallel trial workers");
    run->add_option("--out", out_dir, "output directory (default $RSMPC_OUT or ./out)");
    run->add_option("--prior-offset", prior_offset, "wrong-prior vertical force [N]");

    auto* cmp = app.add_subcommand("compare", "tabulate summary JSON files");
    std::vector<std::string> files;
    cmp->add_option("files", files, "summary.json files")->required();

    app.add_subcommand("verify", "run the dense-oracle cross checks");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            std::map<std::string, std::string> overrides;
            if (!preset.empty()) overrides["preset"] = preset;
            if (!estimator.empty()) overrides["estimator"] = estimator;
            if (mu > -2.0) overrides["mu"] = std::to_string(mu);
            if (trials >= 0) overrides["trials"] = std::to_string(trials);
            if (steps >= 0) overrides["steps"] = std::to_string(steps);
            if (seed >= 0) overrides["seed"] = std::to_string(seed);
            if (jobs >= 0) overrides["jobs"] = std::to_string(jobs);
            if (!out_dir.empty()) overrides["out"] = out_dir;
            if (!std::isnan(prior_offset)) overrides["prior_offset"] = std::to_string(prior_offset);

            const auto cfg = rsmpc::harness::load_config(config_path, overrides);
            const auto sum = rsmpc::harness::run_study(cfg);
            std::cout << rsmpc::harness::summary_to_json(sum) << std::endl;
            return sum.failed_trials == cfg.trials ? 3 : 0;
        }
        if (cmp->parsed()) {
            rsmpc::harness::compare(files, std::cout);
            return 0;
        }
        return cmd_verify();
    } catch (const rsmpc::harness::ConfigError& e) {
        std::cerr << "config error: " << e.what() << std::endl;
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "run failed: " << e.what() << std::endl;
        return 3;
    }
}
