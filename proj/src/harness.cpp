#include "rsmpc/harness.hpp"

#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "rsmpc/random.hpp"

namespace rsmpc {
namespace harness {

using json = nlohmann::ordered_json;

namespace {

const std::vector<std::string> kPresets = {"quadrotor-load", "arm-push", "centroidal-prior"};

double preset_default_mu(const std::string& preset) {
    if (preset == "quadrotor-load") return 4e-3;
    if (preset == "arm-push") return bench::ArmScenario{}.mu;
    return 6.0;  // centroidal-prior
}

int preset_default_steps(const std::string& preset) {
    if (preset == "quadrotor-load") return 80;
    if (preset == "arm-push") {
        const bench::ArmScenario scn;
        const bench::TwoLinkParams p;
        return static_cast<int>(std::lround(scn.run_length / p.dt_plant));
    }
    return 400;
}

EstimatorSelection parse_estimator(const std::string& s) {
    if (s == "ekf") return EstimatorSelection::Ekf;
    if (s == "rs-ekf") return EstimatorSelection::RsEkf;
    if (s == "both") return EstimatorSelection::Both;
    throw ConfigError("estimator: expected ekf, rs-ekf or both, got '" + s + "'");
}

std::string estimator_name(EstimatorSelection e) {
    switch (e) {
        case EstimatorSelection::Ekf: return "ekf";
        case EstimatorSelection::RsEkf: return "rs-ekf";
        default: return "both";
    }
}

template <typename T>
T get_number(const json& j, const std::string& key) {
    if (!j.is_number()) throw ConfigError(key + ": expected a number");
    return j.get<T>();
}

}  // namespace

double ExperimentConfig::resolved_mu() const {
    return mu >= 0.0 ? mu : preset_default_mu(preset);
}

void validate_config(ExperimentConfig& cfg) {
    if (std::find(kPresets.begin(), kPresets.end(), cfg.preset) == kPresets.end())
        throw ConfigError("preset: unknown preset '" + cfg.preset + "'");
    if (cfg.mu != -1.0 && cfg.mu < 0.0) throw ConfigError("mu: must be >= 0");
    if (cfg.trials < 1) throw ConfigError("trials: must be >= 1");
    if (cfg.steps == -1) cfg.steps = preset_default_steps(cfg.preset);
    if (cfg.steps < 1) throw ConfigError("steps: must be >= 1");
    if (cfg.jobs < 1) throw ConfigError("jobs: must be >= 1");
    if (cfg.out_dir.empty()) cfg.out_dir = default_out_dir();
}

ExperimentConfig load_config(const std::string& path,
                             const std::map<std::string, std::string>& overrides) {
    json j = json::object();
    if (!path.empty()) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open config file: " + path);
        std::stringstream ss;
        ss << in.rdbuf();
        const std::string text = ss.str();
        if (text.find_first_not_of(" \t\r\n") != std::string::npos) {
            try {
                j = json::parse(text);
            } catch (const json::parse_error& e) {
                throw ConfigError("parse error in " + path + ": " + e.what());
            }
        }
    }
    if (!j.is_object()) throw ConfigError("config root must be an object");

    ExperimentConfig cfg;
    for (const auto& [key, value] : j.items()) {
        if (key == "preset") cfg.preset = value.get<std::string>();
        else if (key == "estimator") cfg.estimator = parse_estimator(value.get<std::string>());
        else if (key == "mu") cfg.mu = get_number<double>(value, "mu");
        else if (key == "trials") cfg.trials = get_number<int>(value, "trials");
        else if (key == "steps") cfg.steps = get_number<int>(value, "steps");
        else if (key == "seed") cfg.seed = get_number<std::uint64_t>(value, "seed");
        else if (key == "jobs") cfg.jobs = get_number<int>(value, "jobs");
        else if (key == "out") cfg.out_dir = value.get<std::string>();
        else if (key == "prior_offset") cfg.prior_offset = get_number<double>(value, "prior_offset");
        else if (key == "push_norm") cfg.push_norm = get_number<double>(value, "push_norm");
        else throw ConfigError("unknown config key '" + key + "'");
    }

    for (const auto& [key, value] : overrides) {
        if (key == "preset") cfg.preset = value;
        else if (key == "estimator") cfg.estimator = parse_estimator(value);
        else if (key == "mu") cfg.mu = std::stod(value);
        else if (key == "trials") cfg.trials = std::stoi(value);
        else if (key == "steps") cfg.steps = std::stoi(value);
        else if (key == "seed") cfg.seed = std::stoull(value);
        else if (key == "jobs") cfg.jobs = std::stoi(value);
        else if (key == "out") cfg.out_dir = value;
        else if (key == "prior_offset") cfg.prior_offset = std::stod(value);
        else if (key == "push_norm") cfg.push_norm = std::stod(value);
        else throw ConfigError("unknown override '" + key + "'");
    }

    validate_config(cfg);
    return cfg;
}

std::string default_out_dir() {
    if (const char* v = std::getenv("RSMPC_OUT")) return v;
    return "out";
}

namespace {

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

struct TrialRun {
    TrialRecord record;
    std::optional<TrajectoryLog> log_ekf, log_rs;
};

TrialRun run_one_trial(const ExperimentConfig& cfg, int trial) {
    TrialRun out;
    out.record.trial = trial;
    out.record.seed = cfg.seed + static_cast<std::uint64_t>(trial);
    const double mu = cfg.resolved_mu();
    const bool want_ekf = cfg.estimator != EstimatorSelection::RsEkf;
    const bool want_rs = cfg.estimator != EstimatorSelection::Ekf;

    auto run_pair = [&](const bench::BenchmarkProblem& prob, const bench::ClosedLoopSetup& s) {
        if (want_ekf)
            out.log_ekf = run_closed_loop(s.hooks, prob.filter_model, prob.noise,
                                          EstimatorKind::Ekf, prob.ocp, prob.risk, s.script,
                                          s.loop);
        if (want_rs)
            out.log_rs = run_closed_loop(s.hooks, prob.filter_model, prob.noise,
                                         EstimatorKind::RsEkf, prob.ocp, prob.risk, s.script,
                                         s.loop);
    };

    try {
        if (cfg.preset == "quadrotor-load") {
            bench::QuadrotorScenario scn;
            scn.mu = mu;
            scn.steps = cfg.steps;
            const bench::QuadrotorParams p;
            auto prob = bench::make_quadrotor(p, mu, scn);
            auto s = bench::make_quadrotor_setup(prob, p, scn, out.record.seed);
            run_pair(prob, s);
        } else if (cfg.preset == "arm-push") {
            bench::ArmScenario scn;
            scn.mu = mu;
            if (cfg.push_norm >= 0.0) scn.push_norm = cfg.push_norm;
            const bench::TwoLinkParams p;
            scn.run_length = cfg.steps * p.dt_plant;
            RandomStream push_rng(out.record.seed ^ 0x9e3779b97f4a7c15ull);
            const double onset = push_rng.uniform(scn.push_onset_min, scn.push_onset_max);
            const double angle = push_rng.uniform(0.0, 2.0 * M_PI);
            auto prob = bench::make_twolink(p, mu, scn);
            auto s = bench::make_twolink_setup(prob, p, scn, onset, angle, out.record.seed);
            run_pair(prob, s);
        } else {  // centroidal-prior
            const bench::CentroidalParams p;
            auto prob = bench::make_centroidal(p, mu);
            auto s = bench::make_centroidal_setup(prob, p, cfg.prior_offset, cfg.steps,
                                                  out.record.seed);
            run_pair(prob, s);
        }
    } catch (const std::exception& e) {
        out.record.failed = true;
        out.record.failure_reason = e.what();
        return out;
    }

    if (out.log_ekf) {
        out.record.mse_ekf = out.log_ekf->mse;
        out.record.cost_ekf = out.log_ekf->avg_cost;
    }
    if (out.log_rs) {
        out.record.mse_rs = out.log_rs->mse;
        out.record.cost_rs = out.log_rs->avg_cost;
    }
    return out;
}

}  // namespace

void write_trajectory_csv(const std::filesystem::path& path, const TrajectoryLog& log) {
    std::ofstream os(path);
    if (!os) throw RunError("cannot write " + path.string());
    if (log.rows.empty()) return;

    const auto& first = log.rows.front();
    os << "t";
    for (int i = 0; i < first.x_true.size(); ++i) os << ",x_true_" << i;
    for (int i = 0; i < first.y.size(); ++i) os << ",y_" << i;
    for (int i = 0; i < first.x_est.size(); ++i) os << ",x_hat_" << i;
    for (int i = 0; i < first.cov_diag.size(); ++i) os << ",P_" << i;
    for (int i = 0; i < first.u.size(); ++i) os << ",u_" << i;
    os << ",cost,ddp_iters,ddp_converged,solver_failed\n";

    for (const auto& row : log.rows) {
        os << row.t;
        for (int i = 0; i < row.x_true.size(); ++i) os << ',' << fmt17(row.x_true[i]);
        for (int i = 0; i < row.y.size(); ++i) os << ',' << fmt17(row.y[i]);
        for (int i = 0; i < row.x_est.size(); ++i) os << ',' << fmt17(row.x_est[i]);
        for (int i = 0; i < row.cov_diag.size(); ++i) os << ',' << fmt17(row.cov_diag[i]);
        for (int i = 0; i < row.u.size(); ++i) os << ',' << fmt17(row.u[i]);
        os << ',' << fmt17(row.stage_cost) << ',' << row.ddp_iters << ','
           << (row.ddp_converged ? 1 : 0) << ',' << (row.solver_failed ? 1 : 0) << '\n';
    }
}

StudySummary run_study(const ExperimentConfig& cfg) {
    namespace fs = std::filesystem;
    fs::create_directories(cfg.out_dir);

    const auto t0 = std::chrono::steady_clock::now();

    std::vector<TrialRun> runs(cfg.trials);
    std::atomic<int> next{0};
    auto worker = [&]() {
        for (;;) {
            const int i = next.fetch_add(1);
            if (i >= cfg.trials) break;
            runs[i] = run_one_trial(cfg, i);
        }
    };
    if (cfg.jobs <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < std::min(cfg.jobs, cfg.trials); ++w) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    StudySummary sum;
    sum.config = cfg;
    double mse_e = 0, mse_r = 0, cost_e = 0, cost_r = 0;
    int ok = 0;
    for (int i = 0; i < cfg.trials; ++i) {  // aggregation in trial-index order
        const auto& r = runs[i];
        sum.trials.push_back(r.record);
        if (r.record.failed) {
            ++sum.failed_trials;
            continue;
        }
        ++ok;
        mse_e += r.record.mse_ekf;
        mse_r += r.record.mse_rs;
        cost_e += r.record.cost_ekf;
        cost_r += r.record.cost_rs;

        char name[64];
        if (r.log_ekf) {
            std::snprintf(name, sizeof(name), "trial_%03d_ekf.csv", i);
            write_trajectory_csv(fs::path(cfg.out_dir) / name, *r.log_ekf);
        }
        if (r.log_rs) {
            std::snprintf(name, sizeof(name), "trial_%03d_rsekf.csv", i);
            write_trajectory_csv(fs::path(cfg.out_dir) / name, *r.log_rs);
        }
    }
    if (ok > 0) {
        sum.mse_ekf = mse_e / ok;
        sum.mse_rsekf = mse_r / ok;
        sum.cost_ekf = cost_e / ok;
        sum.cost_rsekf = cost_r / ok;
        if (cfg.estimator == EstimatorSelection::Both) {
            sum.mse_improvement_pct =
                sum.mse_ekf != 0.0 ? 100.0 * (sum.mse_ekf - sum.mse_rsekf) / sum.mse_ekf : 0.0;
            sum.cost_improvement_pct =
                sum.cost_ekf != 0.0 ? 100.0 * (sum.cost_ekf - sum.cost_rsekf) / sum.cost_ekf
                                    : 0.0;
        }
    }

    {
        std::ofstream os(fs::path(cfg.out_dir) / "summary.json");
        os << summary_to_json(sum) << '\n';
    }
    {
        const double wall =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        json meta;
        meta["config"] = json::parse(summary_to_json(sum))["config"];
        meta["wall_time_s"] = wall;
        meta["version"] = "rsmpc 1.0";
        std::ofstream os(fs::path(cfg.out_dir) / "meta.json");
        os << meta.dump(2) << '\n';
    }
    return sum;
}

std::string summary_to_json(const StudySummary& s) {
    json j;
    j["config"] = {{"preset", s.config.preset},
                   {"estimator", estimator_name(s.config.estimator)},
                   {"mu", s.config.resolved_mu()},
                   {"trials", s.config.trials},
                   {"steps", s.config.steps},
                   {"seed", s.config.seed},
                   {"prior_offset", s.config.prior_offset}};
    json trials = json::array();
    for (const auto& t : s.trials) {
        json tr = {{"trial", t.trial}, {"seed", t.seed}, {"failed", t.failed}};
        if (t.failed) {
            tr["reason"] = t.failure_reason;
        } else {
            tr["mse_ekf"] = t.mse_ekf;
            tr["cost_ekf"] = t.cost_ekf;
            tr["mse_rsekf"] = t.mse_rs;
            tr["cost_rsekf"] = t.cost_rs;
        }
        trials.push_back(tr);
    }
    j["per_trial"] = trials;
    j["failed_trials"] = s.failed_trials;
    j["aggregate"] = {{"mse_ekf", s.mse_ekf},
                      {"mse_rsekf", s.mse_rsekf},
                      {"cost_ekf", s.cost_ekf},
                      {"cost_rsekf", s.cost_rsekf},
                      {"mse_improvement_pct", s.mse_improvement_pct},
                      {"cost_improvement_pct", s.cost_improvement_pct}};
    return j.dump(2);
}

void compare(const std::vector<std::string>& files, std::ostream& os) {
    const std::vector<std::string> agg_fields = {"mse_ekf", "mse_rsekf", "cost_ekf",
                                                 "cost_rsekf", "mse_improvement_pct",
                                                 "cost_improvement_pct"};
    os << std::left << std::setw(28) << "file" << std::setw(18) << "preset" << std::setw(12)
       << "mu" << std::setw(8) << "trials";
    for (const auto& f : agg_fields) os << std::setw(22) << f;
    os << '\n';

    for (const auto& file : files) {
        std::ifstream in(file);
        if (!in) throw ConfigError("cannot open " + file);
        json j;
        try {
            j = json::parse(in);
        } catch (const json::parse_error& e) {
            throw ConfigError(file + ": " + e.what());
        }
        for (const char* field : {"config", "aggregate"})
            if (!j.contains(field))
                throw ConfigError(file + ": missing field '" + std::string(field) + "'");
        for (const char* field : {"preset", "mu", "trials"})
            if (!j["config"].contains(field))
                throw ConfigError(file + ": missing field 'config." + std::string(field) + "'");
        os << std::setw(28) << std::filesystem::path(file).filename().string()
           << std::setw(18) << j["config"]["preset"].get<std::string>() << std::setw(12)
           << j["config"]["mu"].dump() << std::setw(8) << j["config"]["trials"].dump();
        for (const auto& f : agg_fields) {
            if (!j["aggregate"].contains(f))
                throw ConfigError(file + ": missing field 'aggregate." + f + "'");
            os << std::setw(22) << j["aggregate"][f].dump();
        }
        os << '\n';
    }
}

}  // namespace harness
}  // namespace rsmpc
