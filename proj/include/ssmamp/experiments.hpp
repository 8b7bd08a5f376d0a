#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "ssmamp/mamp_engine.hpp"
#include "ssmamp/state_evolution.hpp"
#include "ssmamp/system_model.hpp"

namespace ssmamp {

/// Statistical tolerances. Entries marked "per sqrt N" are multiplied by
/// 1/sqrt(N); `scale` multiplies everything.
struct Tolerances {
    double lband = 5.0;          // per sqrt N, relative off-band deviation
    double monotone = 3.0;       // per sqrt N
    double orthogonality = 5.0;  // per sqrt N
    double gaussianity = 15.0;   // per sqrt N
    double dominance = 3.0;      // per sqrt N
    double memory = 3.0;         // per sqrt N
    double se_relative = 0.10;
    int se_horizon = 20;
    double idem_zeta = 1e-6;
    double idem_mse = 1e-8;
    double scale = 1.0;

    /// Tolerance in absolute units for a "per sqrt N" entry.
    double at(double per_sqrt_n, std::size_t N) const;
};

struct ExperimentConfig {
    SpectrumSpec spec{512, 0.5, 1.0, SpectrumProfile::geometric};
    SignalPrior prior{0.1};
    double snr_db = 30.0;
    int T = 30;
    std::vector<RunMode> modes{RunMode::plain, RunMode::ss_damped};
    std::vector<std::uint64_t> seeds{1};
    int mle_degree = 0;
    double singular_tau = 1e-10;
    Tolerances tol;
    std::string output_dir = "out";
    bool algebra_only = false;

    /// Throws ConfigError.
    void validate() const;
    double noise_var() const;
    MleSpec mle() const;
    std::string fingerprint(std::uint64_t seed) const;
};

/// Sectioned key = value text ([system], [prior], [run], [tolerances],
/// [output], [verify]). Unknown keys are rejected. Throws ConfigError.
ExperimentConfig parse_config(std::istream& is);
ExperimentConfig load_config(const std::string& path);
std::string dump_config(const ExperimentConfig& cfg);

/// Parses "1-10", "3" or "1,4,7" (ranges and lists may be mixed).
std::vector<std::uint64_t> parse_seed_list(const std::string& s);

struct RunnerOptions {
    std::string out_dir;  // overrides the config when nonempty
    int workers = 1;
    std::uint64_t seed_offset = 0;
};

/// Reports for one seed, one per requested mode in config order.
struct SeedRuns {
    std::uint64_t seed = 0;
    std::vector<RunReport> reports;
};

/// Runs every seed x mode, up to `workers` seeds at a time. The result is in
/// seed order regardless of scheduling.
std::vector<SeedRuns> run_seeds(const ExperimentConfig& cfg, const std::vector<RunMode>& modes,
                                int workers, bool audits = true);

SETrajectory run_config_se(const ExperimentConfig& cfg, RunMode mode);

// ---- checks shared by the runner, the verify battery and the acceptance run

struct RunChecks {
    double lband = 0.0;      // max relative off-band deviation of V_gamma, V_phi
    double monotone = 0.0;   // largest increase of mse_gamma or mse_phi between iterations
    double orthogonality = 0.0;
    double skewness = 0.0;   // max |.| over iterations
    double kurtosis = 0.0;   // max |excess kurtosis|
    double idem_zeta = 0.0;
    double idem_mse = 0.0;
    int idem_singular = 0;  // iterations where re-damping found a singular covariance
    double memory = 0.0;
};

RunChecks check_run(const RunReport& rep);

/// Largest |mean_s mse_s(t) / v_se(t) - 1| over t <= horizon, for mse_phi
/// against v_phi and mse_gamma against v_gamma. Runs that stopped early are
/// padded with their last value, as is the trajectory.
double se_agreement(const std::vector<const RunReport*>& runs, const SETrajectory& se,
                    int horizon);

/// The MSE stops improving: some t0 <= latest_start after which mse_phi
/// (including the final estimate) never falls below (1 - rel_slack) mse_phi(t0).
bool stalls(const RunReport& rep, double rel_slack, int latest_start);

/// Nonincreasing mse_phi and mse_gamma within `slack` and a final MSE below
/// `reference`.
bool settles_below(const RunReport& rep, double slack, double reference);

struct AlgebraChecks {
    double inverse_rel = 0.0;   // closed-form vs extended-precision inverse
    double identity = 0.0;      // max |V T - I|
    double quad_sum_rel = 0.0;  // |v_t 1^T V^{-1} 1 - 1|
    double damping_kkt = 0.0;   // |zeta - zeta_kkt|_inf / max(1, |zeta_kkt|_inf)
    double dominance = 0.0;     // largest relative amount a random feasible vector beats zeta
    double collapse_rel = 0.0;  // |zeta^T V zeta / v_t - 1| for L-banded V
    int lband_cases = 0, damping_cases = 0, collapse_cases = 0;
};

/// Randomised checks of the closed-form L-banded algebra and the damping
/// solver. Diagonals are strictly decreasing in (1e-3, 10] with t <= 20;
/// damping covariances have t <= 12 and condition number <= 1e6.
AlgebraChecks algebra_battery(int lband_cases, int damping_cases, int feasible_draws,
                              int collapse_cases, std::uint64_t seed);

/// Exit codes of run_experiment and verify_suite.
enum ExitCode : int { kExitOk = 0, kExitViolations = 1, kExitConfig = 2, kExitRuntime = 3 };

/// Writes run_s<seed>_<mode>.{csv,json}, se_<mode>.{csv,json} and
/// summary.txt. On an exception writes diagnostics.txt and returns
/// kExitRuntime.
int run_experiment(const ExperimentConfig& cfg, const RunnerOptions& opts, std::ostream& log);

/// State evolution only.
int run_se_only(const ExperimentConfig& cfg, const RunnerOptions& opts, std::ostream& log);

/// Runs the invariant battery and prints one verdict row per invariant.
int verify_suite(const ExperimentConfig& cfg, const RunnerOptions& opts, std::ostream& log);

}  // namespace ssmamp
