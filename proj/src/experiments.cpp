#include "ssmamp/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "ssmamp/damping.hpp"
#include "ssmamp/errors.hpp"
#include "ssmamp/lbanded.hpp"
#include "ssmamp/report_io.hpp"

namespace ssmamp {

namespace pt = boost::property_tree;
namespace fs = std::filesystem;

namespace {

const std::map<std::string, std::set<std::string>>& known_keys() {
    static const std::map<std::string, std::set<std::string>> keys{
        {"system", {"N", "delta", "kappa", "profile"}},
        {"prior", {"rho"}},
        {"run", {"snr_db", "T", "modes", "seeds", "mle_degree", "singular_tau"}},
        {"tolerances",
         {"lband", "monotone", "orthogonality", "gaussianity", "dominance", "memory", "se_relative",
          "se_horizon", "idem_zeta", "idem_mse", "scale"}},
        {"output", {"dir"}},
        {"verify", {"algebra_only"}},
    };
    return keys;
}

template <class T>
void read_key(const pt::ptree& tree, const std::string& path, T& out) {
    const auto node = tree.get_child_optional(pt::ptree::path_type(path, '.'));
    if (!node) return;
    try {
        out = node->get_value<T>();
    } catch (const pt::ptree_bad_data&) {
        throw ConfigError("bad value for " + path + ": '" + node->data() + "'");
    }
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep)) {
        const auto b = item.find_first_not_of(" \t");
        const auto e = item.find_last_not_of(" \t");
        if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
    }
    return out;
}

double max_increase(const std::vector<double>& v) {
    double worst = 0.0;
    for (std::size_t i = 1; i < v.size(); ++i) worst = std::max(worst, v[i] - v[i - 1]);
    return worst;
}

std::vector<double> phi_sequence(const RunReport& rep) {
    std::vector<double> v;
    for (const IterationRecord& r : rep.rows) v.push_back(r.mse_phi);
    v.push_back(rep.final_mse);
    return v;
}

double padded(const std::vector<double>& v, std::size_t i) {
    return v.empty() ? 0.0 : v[std::min(i, v.size() - 1)];
}

double rel_dev(double value, double ref) {
    if (std::abs(ref) <= 1e-300) return std::abs(value) <= 1e-300 ? 0.0 : INFINITY;
    return std::abs(value / ref - 1.0);
}

void write_file(const fs::path& p, const std::string& content) {
    std::ofstream os(p, std::ios::binary);
    if (!os) throw Error("cannot write " + p.string());
    os << content;
    if (!os) throw Error("write failed for " + p.string());
}

void write_diagnostics(const fs::path& dir, const ExperimentConfig& cfg, const std::string& what) {
    std::ostringstream os;
    os << "error: " << what << "\n\n[config]\n" << dump_config(cfg);
    std::error_code ec;
    fs::create_directories(dir, ec);
    std::ofstream f(dir / "diagnostics.txt");
    f << os.str();
}

ExperimentConfig with_offset(const ExperimentConfig& cfg, std::uint64_t offset) {
    ExperimentConfig c = cfg;
    for (auto& s : c.seeds) s += offset;
    return c;
}

fs::path output_dir(const ExperimentConfig& cfg, const RunnerOptions& opts) {
    return opts.out_dir.empty() ? fs::path(cfg.output_dir) : fs::path(opts.out_dir);
}

std::string pct(double v) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(2) << 100.0 * v;
    return os.str();
}

std::string sci(double v) {
    std::ostringstream os;
    os << std::scientific << std::setprecision(3) << v;
    return os.str();
}

Eigen::VectorXd random_decreasing(std::mt19937_64& rng, int t) {
    std::uniform_real_distribution<double> u(1e-3, 10.0);
    std::vector<double> d;
    while (static_cast<int>(d.size()) < t) {
        const double v = u(rng);
        if (std::none_of(d.begin(), d.end(), [v](double w) { return w == v; })) d.push_back(v);
    }
    std::sort(d.rbegin(), d.rend());
    return Eigen::Map<Eigen::VectorXd>(d.data(), t);
}

}  // namespace

double Tolerances::at(double per_sqrt_n, std::size_t N) const {
    return scale * per_sqrt_n / std::sqrt(static_cast<double>(N));
}

void ExperimentConfig::validate() const {
    try {
        spec.validate();
    } catch (const InvalidSpec& e) {
        throw ConfigError(e.what());
    }
    if (!(prior.rho > 0.0 && prior.rho < 1.0)) {
        throw ConfigError("rho must lie in (0, 1); rho = 1 makes the orthogonalised denoiser degenerate");
    }
    if (!std::isfinite(snr_db)) throw ConfigError("snr_db must be finite");
    if (T < 1) throw ConfigError("T must be at least 1");
    if (modes.empty()) throw ConfigError("modes must not be empty");
    if (seeds.empty()) throw ConfigError("seeds must not be empty");
    if (mle_degree < 0) throw ConfigError("mle_degree must be nonnegative");
    if (!(singular_tau > 0.0 && singular_tau < 1.0)) throw ConfigError("singular_tau must lie in (0, 1)");
    for (double v : {tol.lband, tol.monotone, tol.orthogonality, tol.gaussianity, tol.dominance,
                     tol.memory, tol.se_relative, tol.idem_zeta, tol.idem_mse, tol.scale}) {
        if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError("tolerances must be finite and nonnegative");
    }
    if (tol.se_horizon < 1) throw ConfigError("se_horizon must be at least 1");
    if (output_dir.empty()) throw ConfigError("output dir must not be empty");
}

double ExperimentConfig::noise_var() const { return noise_var_from_snr(snr_db, spec); }

MleSpec ExperimentConfig::mle() const {
    const Eigen::VectorXd moments = spectral_moments(spec, std::max(2, 2 * mle_degree + 2));
    if (mle_degree == 0) return matched_filter_mle(moments);
    const double smax = spectrum_singular_values(spec).maxCoeff();
    return neumann_mle(mle_degree, smax * smax, moments);
}

std::string ExperimentConfig::fingerprint(std::uint64_t seed) const {
    std::ostringstream os;
    os << "N=" << spec.N << ";delta=" << format_double(spec.delta)
       << ";kappa=" << format_double(spec.kappa) << ";profile=" << to_string(spec.profile)
       << ";rho=" << format_double(prior.rho) << ";snr_db=" << format_double(snr_db)
       << ";mle_degree=" << mle_degree << ";tau=" << format_double(singular_tau)
       << ";seed=" << seed;
    return os.str();
}

std::vector<std::uint64_t> parse_seed_list(const std::string& s) {
    std::vector<std::uint64_t> out;
    try {
        for (const std::string& part : split(s, ',')) {
            const auto dash = part.find('-');
            if (dash == std::string::npos) {
                out.push_back(std::stoull(part));
                continue;
            }
            const std::uint64_t lo = std::stoull(part.substr(0, dash));
            const std::uint64_t hi = std::stoull(part.substr(dash + 1));
            if (hi < lo) throw ConfigError("empty seed range '" + part + "'");
            for (std::uint64_t v = lo; v <= hi; ++v) out.push_back(v);
        }
    } catch (const std::logic_error&) {
        throw ConfigError("bad seed list '" + s + "'");
    }
    if (out.empty()) throw ConfigError("empty seed list");
    return out;
}

ExperimentConfig parse_config(std::istream& is) {
    pt::ptree tree;
    try {
        pt::ini_parser::read_ini(is, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(e.message() + " (line " + std::to_string(e.line()) + ")");
    }
    for (const auto& [section, body] : tree) {
        const auto it = known_keys().find(section);
        if (it == known_keys().end() || body.data().size()) {
            throw ConfigError("unknown section or key '" + section + "'");
        }
        for (const auto& kv : body) {
            if (!it->second.count(kv.first)) {
                throw ConfigError("unknown key '" + kv.first + "' in [" + section + "]");
            }
        }
    }

    ExperimentConfig c;
    read_key(tree, "system.N", c.spec.N);
    read_key(tree, "system.delta", c.spec.delta);
    read_key(tree, "system.kappa", c.spec.kappa);
    std::string profile = to_string(c.spec.profile);
    read_key(tree, "system.profile", profile);
    try {
        c.spec.profile = parse_profile(profile);
    } catch (const InvalidSpec& e) {
        throw ConfigError(e.what());
    }
    read_key(tree, "prior.rho", c.prior.rho);
    read_key(tree, "run.snr_db", c.snr_db);
    read_key(tree, "run.T", c.T);
    read_key(tree, "run.mle_degree", c.mle_degree);
    read_key(tree, "run.singular_tau", c.singular_tau);
    if (auto modes = tree.get_optional<std::string>("run.modes")) {
        c.modes.clear();
        for (const std::string& m : split(*modes, ',')) {
            try {
                c.modes.push_back(parse_mode(m));
            } catch (const Error&) {
                throw ConfigError("unknown mode '" + m + "'");
            }
        }
    }
    if (auto seeds = tree.get_optional<std::string>("run.seeds")) c.seeds = parse_seed_list(*seeds);
    read_key(tree, "tolerances.lband", c.tol.lband);
    read_key(tree, "tolerances.monotone", c.tol.monotone);
    read_key(tree, "tolerances.orthogonality", c.tol.orthogonality);
    read_key(tree, "tolerances.gaussianity", c.tol.gaussianity);
    read_key(tree, "tolerances.dominance", c.tol.dominance);
    read_key(tree, "tolerances.memory", c.tol.memory);
    read_key(tree, "tolerances.se_relative", c.tol.se_relative);
    read_key(tree, "tolerances.se_horizon", c.tol.se_horizon);
    read_key(tree, "tolerances.idem_zeta", c.tol.idem_zeta);
    read_key(tree, "tolerances.idem_mse", c.tol.idem_mse);
    read_key(tree, "tolerances.scale", c.tol.scale);
    read_key(tree, "output.dir", c.output_dir);
    read_key(tree, "verify.algebra_only", c.algebra_only);
    c.validate();
    return c;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config '" + path + "'");
    return parse_config(is);
}

std::string dump_config(const ExperimentConfig& c) {
    std::ostringstream os;
    os << "[system]\nN = " << c.spec.N << "\ndelta = " << format_double(c.spec.delta)
       << "\nkappa = " << format_double(c.spec.kappa) << "\nprofile = " << to_string(c.spec.profile)
       << "\n\n[prior]\nrho = " << format_double(c.prior.rho) << "\n\n[run]\nsnr_db = "
       << format_double(c.snr_db) << "\nT = " << c.T << "\nmodes = ";
    for (std::size_t i = 0; i < c.modes.size(); ++i) os << (i ? "," : "") << to_string(c.modes[i]);
    os << "\nseeds = ";
    for (std::size_t i = 0; i < c.seeds.size(); ++i) os << (i ? "," : "") << c.seeds[i];
    os << "\nmle_degree = " << c.mle_degree << "\nsingular_tau = " << format_double(c.singular_tau)
       << "\n\n[tolerances]\nlband = " << format_double(c.tol.lband)
       << "\nmonotone = " << format_double(c.tol.monotone)
       << "\northogonality = " << format_double(c.tol.orthogonality)
       << "\ngaussianity = " << format_double(c.tol.gaussianity)
       << "\ndominance = " << format_double(c.tol.dominance)
       << "\nmemory = " << format_double(c.tol.memory)
       << "\nse_relative = " << format_double(c.tol.se_relative)
       << "\nse_horizon = " << c.tol.se_horizon << "\nidem_zeta = " << format_double(c.tol.idem_zeta)
       << "\nidem_mse = " << format_double(c.tol.idem_mse) << "\nscale = " << format_double(c.tol.scale)
       << "\n\n[output]\ndir = " << c.output_dir << "\n\n[verify]\nalgebra_only = "
       << (c.algebra_only ? "true" : "false") << "\n";
    return os.str();
}

std::vector<SeedRuns> run_seeds(const ExperimentConfig& cfg, const std::vector<RunMode>& modes,
                                int workers, bool audits) {
    const std::size_t n = cfg.seeds.size();
    const MleSpec mle = cfg.mle();
    const double noise_var = cfg.noise_var();
    std::vector<SeedRuns> out(n);
    std::vector<std::exception_ptr> errors(n);
    std::atomic<std::size_t> next{0};

    auto work = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            const std::uint64_t seed = cfg.seeds[i];
            try {
                const SystemInstance inst = generate_system(seed, cfg.spec, cfg.prior, noise_var);
                out[i].seed = seed;
                for (RunMode m : modes) {
                    EngineOptions o;
                    o.T = cfg.T;
                    o.mode = m;
                    o.damping.singular_tau = cfg.singular_tau;
                    o.audits = audits;
                    o.audit_seed = seed;
                    o.fingerprint = cfg.fingerprint(seed);
                    out[i].reports.push_back(run_mamp(inst, mle, cfg.prior, o).report);
                }
            } catch (const std::exception& e) {
                errors[i] = std::make_exception_ptr(
                    Error("seed " + std::to_string(seed) + ": " + e.what()));
            }
        }
    };

    const int k = std::clamp(workers, 1, static_cast<int>(std::max<std::size_t>(n, 1)));
    if (k == 1) {
        work();
    } else {
        std::vector<std::jthread> pool;
        for (int i = 0; i < k; ++i) pool.emplace_back(work);
    }
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    return out;
}

SETrajectory run_config_se(const ExperimentConfig& cfg, RunMode mode) {
    const MleSpec mle = cfg.mle();
    const Eigen::VectorXd moments = spectral_moments(cfg.spec, mle.moments_needed());
    SeOptions o;
    o.T = cfg.T;
    o.mode = mode;
    o.damping.singular_tau = cfg.singular_tau;
    return run_se(mle, moments, cfg.prior, cfg.noise_var(), o);
}

RunChecks check_run(const RunReport& rep) {
    RunChecks c;
    std::vector<double> g;
    for (const IterationRecord& r : rep.rows) {
        c.lband = std::max({c.lband, r.lband_dev_gamma, r.lband_dev_phi});
        c.orthogonality = std::max(c.orthogonality, r.orth.max());
        c.skewness = std::max(c.skewness, std::abs(r.gauss.skewness));
        c.kurtosis = std::max(c.kurtosis, std::abs(r.gauss.excess_kurtosis));
        c.idem_zeta = std::max(c.idem_zeta, r.idem_zeta_dev);
        c.idem_mse = std::max(c.idem_mse, r.idem_mse_change);
        c.idem_singular += r.idem_singular ? 1 : 0;
        c.memory = std::max(c.memory, r.memory_gain);
        g.push_back(r.mse_gamma);
    }
    c.monotone = std::max(max_increase(g), max_increase(phi_sequence(rep)));
    return c;
}

double se_agreement(const std::vector<const RunReport*>& runs, const SETrajectory& se,
                    int horizon) {
    if (runs.empty()) return 0.0;
    double worst = 0.0;
    for (int t = 1; t <= horizon; ++t) {
        const auto i = static_cast<std::size_t>(t - 1);
        double phi = 0.0, gamma = 0.0;
        for (const RunReport* r : runs) {
            const std::vector<double> p = phi_sequence(*r);
            std::vector<double> g;
            for (const IterationRecord& row : r->rows) g.push_back(row.mse_gamma);
            phi += padded(p, i);
            gamma += padded(g, i);
        }
        phi /= static_cast<double>(runs.size());
        gamma /= static_cast<double>(runs.size());
        worst = std::max({worst, rel_dev(phi, padded(se.v_phi, i)), rel_dev(gamma, padded(se.v_gamma, i))});
    }
    return worst;
}

bool stalls(const RunReport& rep, double rel_slack, int latest_start) {
    const std::vector<double> v = phi_sequence(rep);
    for (std::size_t t0 = 0; t0 + 1 < v.size() && static_cast<int>(t0) < latest_start; ++t0) {
        const double floor = (1.0 - rel_slack) * v[t0];
        if (std::all_of(v.begin() + static_cast<std::ptrdiff_t>(t0) + 1, v.end(),
                        [floor](double m) { return m >= floor; })) {
            return true;
        }
    }
    return false;
}

bool settles_below(const RunReport& rep, double slack, double reference) {
    return check_run(rep).monotone <= slack && rep.final_mse < reference;
}

AlgebraChecks algebra_battery(int lband_cases, int damping_cases, int feasible_draws,
                              int collapse_cases, std::uint64_t seed) {
    using MatL = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> size20(1, 20), size12(1, 12);
    AlgebraChecks out;

    for (int c = 0; c < lband_cases; ++c) {
        const LBandedMatrix m(random_decreasing(rng, size20(rng)));
        const Eigen::MatrixXd V = m.expand();
        const Eigen::MatrixXd Tinv = lbanded_inverse(m).dense();
        const MatL ref = V.cast<long double>().inverse();
        const auto t = V.rows();
        for (Eigen::Index i = 0; i < t; ++i) {
            for (Eigen::Index j = 0; j < t; ++j) {
                const double r = static_cast<double>(ref(i, j));
                const double err = std::abs(Tinv(i, j) - r);
                // entries outside the tridiagonal band are zero in exact arithmetic
                out.inverse_rel = std::max(out.inverse_rel,
                                           std::abs(i - j) <= 1 ? err / std::abs(r) : err / std::abs(static_cast<double>(ref(i, i))));
            }
        }
        out.identity = std::max(out.identity,
                                (V * Tinv - Eigen::MatrixXd::Identity(t, t)).cwiseAbs().maxCoeff());
        const QuadraticSums qs = lbanded_quadratic_sums(m);
        out.quad_sum_rel = std::max(out.quad_sum_rel, std::abs(qs.total * m.diag()(t - 1) - 1.0));
        ++out.lband_cases;
    }

    std::normal_distribution<double> gauss;
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int c = 0; c < damping_cases; ++c) {
        const int t = size12(rng);
        const Eigen::MatrixXd Q = haar_orthogonal(t, rng(), 0);
        const double log_cond = 6.0 * unif(rng);
        Eigen::VectorXd lam(t);
        for (int i = 0; i < t; ++i) lam(i) = std::pow(10.0, -log_cond * unif(rng));
        lam(0) = 1.0;
        lam(t - 1) = std::pow(10.0, -log_cond);
        if (t == 1) lam(0) = 1.0;
        const Eigen::MatrixXd V = Q * lam.asDiagonal() * Q.transpose();
        const Eigen::MatrixXd Vs = 0.5 * (V + V.transpose());
        const DampingVector z = optimal_damping(Vs);
        const QpSolution kkt = qp_oracle_damping(Vs);
        const double zmax = std::max(1.0, kkt.zeta.zeta.cwiseAbs().maxCoeff());
        out.damping_kkt = std::max(out.damping_kkt, (z.zeta - kkt.zeta.zeta).cwiseAbs().maxCoeff() / zmax);
        const double best = damped_variance(Vs, z);
        for (int d = 0; d < feasible_draws; ++d) {
            Eigen::VectorXd w(t);
            for (int i = 0; i < t; ++i) w(i) = gauss(rng);
            const double s = w.sum();
            if (std::abs(s) < 1e-3) continue;
            w /= s;
            const double obj = w.dot(Vs * w);
            out.dominance = std::max(out.dominance, (best - obj) / best);
        }
        ++out.damping_cases;
    }

    for (int c = 0; c < collapse_cases; ++c) {
        const LBandedMatrix m(random_decreasing(rng, size20(rng)));
        const Eigen::MatrixXd V = m.expand();
        const DampingVector z = optimal_damping(V);
        const double vt = m.diag()(m.size() - 1);
        out.collapse_rel = std::max(out.collapse_rel, std::abs(damped_variance(V, z) / vt - 1.0));
        ++out.collapse_cases;
    }
    return out;
}

int run_experiment(const ExperimentConfig& config, const RunnerOptions& opts, std::ostream& log) {
    const ExperimentConfig cfg = with_offset(config, opts.seed_offset);
    const fs::path dir = output_dir(cfg, opts);
    try {
        fs::create_directories(dir);
        const std::vector<SeedRuns> runs = run_seeds(cfg, cfg.modes, opts.workers);
        std::vector<SETrajectory> se;
        for (RunMode m : cfg.modes) se.push_back(run_config_se(cfg, m));

        for (const SeedRuns& s : runs) {
            for (const RunReport& rep : s.reports) {
                const std::string stem = "run_s" + std::to_string(s.seed) + "_" + to_string(rep.mode);
                std::ostringstream csv;
                write_csv(rep, csv);
                write_file(dir / (stem + ".csv"), csv.str());
                write_file(dir / (stem + ".json"), to_json(rep).dump(2) + "\n");
            }
        }
        for (const SETrajectory& tr : se) {
            std::ostringstream csv;
            write_csv(tr, csv);
            write_file(dir / ("se_" + to_string(tr.mode) + ".csv"), csv.str());
            write_file(dir / ("se_" + to_string(tr.mode) + ".json"), to_json(tr).dump(2) + "\n");
        }

        const std::size_t N = cfg.spec.N;
        const double lband_tol = cfg.tol.at(cfg.tol.lband, N);
        const double mono_tol = cfg.tol.at(cfg.tol.monotone, N);
        const double orth_tol = cfg.tol.at(cfg.tol.orthogonality, N);
        const double dom_slack = cfg.tol.at(cfg.tol.dominance, N);
        const int horizon = std::min(cfg.tol.se_horizon, cfg.T);

        std::ostringstream sum;
        std::vector<std::string> violations;
        sum << "config " << cfg.fingerprint(0).substr(0, cfg.fingerprint(0).rfind(";seed")) << "\n\n";
        sum << std::left << std::setw(6) << "seed" << std::setw(7) << "mode" << std::setw(7) << "iters"
            << std::setw(12) << "final_mse" << std::setw(6) << "conv" << std::setw(12) << "lband_dev"
            << std::setw(12) << "monotone" << std::setw(12) << "orth_max" << std::setw(10) << "se_dev%"
            << "note\n";
        for (const SeedRuns& s : runs) {
            for (std::size_t m = 0; m < s.reports.size(); ++m) {
                const RunReport& rep = s.reports[m];
                const RunChecks c = check_run(rep);
                const double dev = se_agreement({&rep}, se[m], horizon);
                std::string note;
                if (rep.mode == RunMode::ss_damped) {
                    const std::string tag = "seed " + std::to_string(s.seed) + " ss: ";
                    if (c.lband > lband_tol) violations.push_back(tag + "L-banded deviation " + sci(c.lband));
                    if (c.monotone > mono_tol) violations.push_back(tag + "MSE increase " + sci(c.monotone));
                    if (c.orthogonality > orth_tol) {
                        violations.push_back(tag + "orthogonality " + sci(c.orthogonality));
                    }
                } else if (stalls(rep, mono_tol, 5) && rep.final_mse > 0.5 * phi_sequence(rep).front()) {
                    note = "no progress (stalls near the starting MSE)";
                } else if (c.monotone > mono_tol) {
                    note = "MSE rises";
                }
                if (rep.exact_recovery) note = "exact recovery";
                sum << std::left << std::setw(6) << s.seed << std::setw(7) << to_string(rep.mode)
                    << std::setw(7) << rep.rows.size() << std::setw(12) << sci(rep.final_mse)
                    << std::setw(6) << (rep.converged ? "yes" : "no") << std::setw(12) << sci(c.lband)
                    << std::setw(12) << sci(c.monotone) << std::setw(12) << sci(c.orthogonality)
                    << std::setw(10) << pct(dev) << note << "\n";
            }
        }

        const auto pi = std::find(cfg.modes.begin(), cfg.modes.end(), RunMode::plain);
        const auto si = std::find(cfg.modes.begin(), cfg.modes.end(), RunMode::ss_damped);
        if (pi != cfg.modes.end() && si != cfg.modes.end()) {
            sum << "\ndominance (slack " << sci(dom_slack) << "):";
            for (const SeedRuns& s : runs) {
                const DominanceTable d = compare_runs(s.reports[pi - cfg.modes.begin()],
                                                      s.reports[si - cfg.modes.begin()], dom_slack);
                sum << " " << s.seed << (d.all_ok ? ":ok" : ":FAIL");
                if (!d.all_ok) violations.push_back("seed " + std::to_string(s.seed) + ": ss worse than plain");
            }
            sum << "\n";
        }
        sum << "\nSE agreement, seed mean, t <= " << horizon << ":";
        for (std::size_t m = 0; m < cfg.modes.size(); ++m) {
            std::vector<const RunReport*> reps;
            for (const SeedRuns& s : runs) reps.push_back(&s.reports[m]);
            sum << " " << to_string(cfg.modes[m]) << " " << pct(se_agreement(reps, se[m], horizon)) << "%";
        }
        sum << "\n\nviolations:";
        if (violations.empty()) sum << " none";
        for (const std::string& v : violations) sum << "\n  " << v;
        sum << "\n";

        write_file(dir / "summary.txt", sum.str());
        log << sum.str();
        return violations.empty() ? kExitOk : kExitViolations;
    } catch (const std::exception& e) {
        write_diagnostics(dir, cfg, e.what());
        log << "error: " << e.what() << "\ndiagnostics written to " << (dir / "diagnostics.txt").string()
            << "\n";
        return kExitRuntime;
    }
}

int run_se_only(const ExperimentConfig& config, const RunnerOptions& opts, std::ostream& log) {
    const ExperimentConfig cfg = with_offset(config, opts.seed_offset);
    const fs::path dir = output_dir(cfg, opts);
    try {
        fs::create_directories(dir);
        for (RunMode m : cfg.modes) {
            const SETrajectory tr = run_config_se(cfg, m);
            std::ostringstream csv;
            write_csv(tr, csv);
            write_file(dir / ("se_" + to_string(m) + ".csv"), csv.str());
            write_file(dir / ("se_" + to_string(m) + ".json"), to_json(tr).dump(2) + "\n");
            const FixedPoint fp = fixed_point(tr);
            log << to_string(m) << ": iterations " << fp.iterations << ", v_gamma* " << sci(fp.v_gamma_star)
                << ", v_phi* " << sci(fp.v_phi_star) << (fp.converged ? "" : " (not converged)") << "\n";
        }
        return kExitOk;
    } catch (const std::exception& e) {
        write_diagnostics(dir, cfg, e.what());
        log << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
}

int verify_suite(const ExperimentConfig& config, const RunnerOptions& opts, std::ostream& log) {
    const ExperimentConfig cfg = with_offset(config, opts.seed_offset);
    const double s = cfg.tol.scale;
    struct Row {
        std::string name;
        double value;
        double tol;
    };
    std::vector<Row> rows;
    try {
        const AlgebraChecks a = algebra_battery(200, 200, 50, 100, 20240601);
        rows.push_back({"lbanded inverse (rel)", a.inverse_rel, 1e-9 * s});
        rows.push_back({"lbanded V*inv = I", a.identity, 1e-10 * s});
        rows.push_back({"lbanded 1'inv 1 = 1/v_t", a.quad_sum_rel, 1e-12 * s});
        rows.push_back({"damping vs KKT", a.damping_kkt, 1e-8 * s});
        rows.push_back({"damping dominance", a.dominance, 1e-12 * s});
        rows.push_back({"sufficient-statistic collapse", a.collapse_rel, 1e-10 * s});

        if (!cfg.algebra_only) {
            const std::size_t N = cfg.spec.N;
            const auto runs = run_seeds(cfg, {RunMode::plain, RunMode::ss_damped}, opts.workers);
            const SETrajectory se = run_config_se(cfg, RunMode::ss_damped);
            RunChecks worst;
            double dominance = 0.0;
            std::vector<const RunReport*> ss;
            for (const SeedRuns& sr : runs) {
                const RunChecks c = check_run(sr.reports[1]);
                worst.lband = std::max(worst.lband, c.lband);
                worst.monotone = std::max(worst.monotone, c.monotone);
                worst.orthogonality = std::max(worst.orthogonality, c.orthogonality);
                worst.skewness = std::max({worst.skewness, c.skewness, c.kurtosis});
                worst.idem_zeta = std::max(worst.idem_zeta, c.idem_zeta);
                worst.idem_mse = std::max(worst.idem_mse, c.idem_mse);
                worst.memory = std::max(worst.memory, c.memory);
                const DominanceTable d = compare_runs(sr.reports[0], sr.reports[1], 0.0);
                dominance = std::max(dominance, d.max_excess);
                ss.push_back(&sr.reports[1]);
            }
            const int horizon = std::min(cfg.tol.se_horizon, cfg.T);
            rows.push_back({"L-banded covariances (ss)", worst.lband, cfg.tol.at(cfg.tol.lband, N)});
            rows.push_back({"monotone MSE (ss)", worst.monotone, cfg.tol.at(cfg.tol.monotone, N)});
            rows.push_back({"orthogonality (ss)", worst.orthogonality, cfg.tol.at(cfg.tol.orthogonality, N)});
            rows.push_back({"gaussianity skew/kurtosis (ss)", worst.skewness, cfg.tol.at(cfg.tol.gaussianity, N)});
            rows.push_back({"dominance ss over plain", dominance, cfg.tol.at(cfg.tol.dominance, N)});
            rows.push_back({"SE agreement (ss, seed mean)", se_agreement(ss, se, horizon), cfg.tol.se_relative * s});
            rows.push_back({"idempotence zeta", worst.idem_zeta, cfg.tol.idem_zeta * s});
            rows.push_back({"idempotence MSE", worst.idem_mse, cfg.tol.idem_mse * s});
            rows.push_back({"memory proxy", worst.memory, cfg.tol.at(cfg.tol.memory, N)});
        }
    } catch (const std::exception& e) {
        write_diagnostics(output_dir(cfg, opts), cfg, e.what());
        log << "error: " << e.what() << "\n";
        return kExitRuntime;
    }

    bool ok = true;
    log << std::left << std::setw(34) << "invariant" << std::setw(13) << "value" << std::setw(13)
        << "tolerance" << "verdict\n";
    for (const Row& r : rows) {
        const bool pass = r.value <= r.tol;
        ok = ok && pass;
        log << std::left << std::setw(34) << r.name << std::setw(13) << sci(r.value) << std::setw(13)
            << sci(r.tol) << (pass ? "PASS" : "FAIL") << "\n";
    }
    return ok ? kExitOk : kExitViolations;
}

}  // namespace ssmamp
