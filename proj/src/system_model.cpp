#include "ssmamp/system_model.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>

#include "ssmamp/errors.hpp"

namespace ssmamp {

namespace {

std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), 0x55aa3c1bu};
    return std::mt19937_64(seq);
}

enum StreamId : std::uint64_t { kStreamV = 1, kStreamU = 2, kStreamSignal = 3, kStreamNoise = 4 };

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

void fwht_inplace(Eigen::VectorXd& v) {
    const Eigen::Index n = v.size();
    for (Eigen::Index len = 1; len < n; len <<= 1) {
        for (Eigen::Index i = 0; i < n; i += len << 1) {
            for (Eigen::Index j = i; j < i + len; ++j) {
                const double a = v(j);
                const double b = v(j + len);
                v(j) = a + b;
                v(j + len) = a - b;
            }
        }
    }
    v /= std::sqrt(static_cast<double>(n));
}

std::shared_ptr<const OrthogonalTransform> make_orthogonal(Eigen::Index n, std::uint64_t seed,
                                                           std::uint64_t stream) {
    if (static_cast<std::size_t>(n) <= kDenseHaarLimit) {
        return std::make_shared<DenseOrthogonal>(haar_orthogonal(n, seed, stream));
    }
    if (!is_power_of_two(static_cast<std::size_t>(n))) {
        throw InvalidSpec("dimensions above " + std::to_string(kDenseHaarLimit) +
                          " must be powers of two for the fast Haar surrogate");
    }
    auto eng = make_engine(seed, stream);
    auto signs = [&] {
        Eigen::VectorXd s(n);
        std::bernoulli_distribution coin(0.5);
        for (Eigen::Index i = 0; i < n; ++i) s(i) = coin(eng) ? 1.0 : -1.0;
        return s;
    };
    auto perm = [&] {
        Eigen::VectorXi p(n);
        std::iota(p.data(), p.data() + n, 0);
        std::shuffle(p.data(), p.data() + n, eng);
        return p;
    };
    Eigen::VectorXd s1 = signs();
    Eigen::VectorXi p1 = perm();
    Eigen::VectorXd s2 = signs();
    Eigen::VectorXi p2 = perm();
    return std::make_shared<HadamardSurrogate>(std::move(s1), std::move(p1), std::move(s2),
                                               std::move(p2));
}

// ---- binary helpers -------------------------------------------------------

template <typename T>
T to_little(T value) {
    if constexpr (std::endian::native == std::endian::big) {
        auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(value);
        std::reverse(bytes.begin(), bytes.end());
        return std::bit_cast<T>(bytes);
    }
    return value;
}

template <typename T>
void write_pod(std::ostream& os, T value) {
    value = to_little(value);
    os.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
    T value{};
    is.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!is) throw FormatError("truncated instance file");
    return to_little(value);
}

void write_doubles(std::ostream& os, const double* data, Eigen::Index n) {
    for (Eigen::Index i = 0; i < n; ++i) write_pod(os, data[i]);
}

Eigen::VectorXd read_doubles(std::istream& is, Eigen::Index n) {
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = read_pod<double>(is);
    return v;
}

constexpr char kMagic[8] = {'S', 'S', 'M', 'A', 'M', 'P', 'I', '1'};
constexpr std::uint32_t kKindDense = 0;
constexpr std::uint32_t kKindHadamard = 1;

void write_transform(std::ostream& os, const OrthogonalTransform& q) {
    if (const auto* d = dynamic_cast<const DenseOrthogonal*>(&q)) {
        write_doubles(os, d->matrix().data(), d->matrix().size());
        return;
    }
    const auto& h = dynamic_cast<const HadamardSurrogate&>(q);
    write_doubles(os, h.signs1().data(), h.size());
    for (Eigen::Index i = 0; i < h.size(); ++i) write_pod(os, static_cast<double>(h.perm1()(i)));
    write_doubles(os, h.signs2().data(), h.size());
    for (Eigen::Index i = 0; i < h.size(); ++i) write_pod(os, static_cast<double>(h.perm2()(i)));
}

std::shared_ptr<const OrthogonalTransform> read_transform(std::istream& is, std::uint32_t kind,
                                                          Eigen::Index n) {
    if (kind == kKindDense) {
        Eigen::MatrixXd q(n, n);
        for (Eigen::Index i = 0; i < q.size(); ++i) q.data()[i] = read_pod<double>(is);
        return std::make_shared<DenseOrthogonal>(std::move(q));
    }
    if (kind != kKindHadamard) throw FormatError("unknown transform kind");
    auto read_perm = [&] {
        Eigen::VectorXi p(n);
        for (Eigen::Index i = 0; i < n; ++i) p(i) = static_cast<int>(read_pod<double>(is));
        return p;
    };
    Eigen::VectorXd s1 = read_doubles(is, n);
    Eigen::VectorXi p1 = read_perm();
    Eigen::VectorXd s2 = read_doubles(is, n);
    Eigen::VectorXi p2 = read_perm();
    return std::make_shared<HadamardSurrogate>(std::move(s1), std::move(p1), std::move(s2),
                                               std::move(p2));
}

std::uint32_t kind_of(const OrthogonalTransform& q) {
    return dynamic_cast<const DenseOrthogonal*>(&q) != nullptr ? kKindDense : kKindHadamard;
}

}  // namespace

std::string to_string(SpectrumProfile p) {
    return p == SpectrumProfile::flat ? "flat" : "geometric";
}

SpectrumProfile parse_profile(const std::string& s) {
    if (s == "flat") return SpectrumProfile::flat;
    if (s == "geometric") return SpectrumProfile::geometric;
    throw InvalidSpec("unknown spectrum profile '" + s + "'");
}

std::size_t SpectrumSpec::M() const {
    return static_cast<std::size_t>(std::llround(delta * static_cast<double>(N)));
}

void SpectrumSpec::validate() const {
    if (N == 0) throw InvalidSpec("N must be positive");
    if (!(delta > 0.0) || !std::isfinite(delta)) throw InvalidSpec("delta must be in (0, inf)");
    if (!(kappa >= 1.0) || !std::isfinite(kappa)) throw InvalidSpec("kappa must be >= 1");
    if (M() == 0) throw InvalidSpec("delta * N rounds to zero rows");
}

void SignalPrior::validate() const {
    if (!(rho > 0.0 && rho <= 1.0)) throw InvalidSpec("rho must be in (0, 1]");
}

Eigen::MatrixXd OrthogonalTransform::dense() const {
    const Eigen::Index n = size();
    Eigen::MatrixXd out(n, n);
    Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
    for (Eigen::Index j = 0; j < n; ++j) {
        e(j) = 1.0;
        out.col(j) = apply(e);
        e(j) = 0.0;
    }
    return out;
}

HadamardSurrogate::HadamardSurrogate(Eigen::VectorXd signs1, Eigen::VectorXi perm1,
                                     Eigen::VectorXd signs2, Eigen::VectorXi perm2)
    : signs1_(std::move(signs1)),
      signs2_(std::move(signs2)),
      perm1_(std::move(perm1)),
      perm2_(std::move(perm2)) {
    const Eigen::Index n = signs1_.size();
    if (!is_power_of_two(static_cast<std::size_t>(n)) || signs2_.size() != n ||
        perm1_.size() != n || perm2_.size() != n) {
        throw DimensionMismatch("Hadamard surrogate needs power-of-two sized components");
    }
}

Eigen::VectorXd HadamardSurrogate::apply(const Eigen::VectorXd& v) const {
    if (v.size() != size()) throw DimensionMismatch("HadamardSurrogate::apply");
    Eigen::VectorXd w = v.cwiseProduct(signs1_);
    fwht_inplace(w);
    Eigen::VectorXd p(size());
    for (Eigen::Index i = 0; i < size(); ++i) p(i) = w(perm1_(i)) * signs2_(i);
    fwht_inplace(p);
    Eigen::VectorXd out(size());
    for (Eigen::Index i = 0; i < size(); ++i) out(i) = p(perm2_(i));
    return out;
}

Eigen::VectorXd HadamardSurrogate::apply_transpose(const Eigen::VectorXd& v) const {
    if (v.size() != size()) throw DimensionMismatch("HadamardSurrogate::apply_transpose");
    Eigen::VectorXd p(size());
    for (Eigen::Index i = 0; i < size(); ++i) p(perm2_(i)) = v(i);
    fwht_inplace(p);
    Eigen::VectorXd w(size());
    for (Eigen::Index i = 0; i < size(); ++i) w(perm1_(i)) = p(i) * signs2_(i);
    fwht_inplace(w);
    return w.cwiseProduct(signs1_);
}

Eigen::MatrixXd haar_orthogonal(Eigen::Index n, std::uint64_t seed, std::uint64_t stream) {
    auto eng = make_engine(seed, stream);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::MatrixXd g(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index i = 0; i < n; ++i) g(i, j) = gauss(eng);
    }
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    Eigen::MatrixXd q = qr.householderQ();
    const auto& r = qr.matrixQR();
    for (Eigen::Index j = 0; j < n; ++j) {
        if (r(j, j) < 0.0) q.col(j) *= -1.0;
    }
    return q;
}

Eigen::VectorXd spectrum_singular_values(const SpectrumSpec& spec) {
    spec.validate();
    const Eigen::Index n = static_cast<Eigen::Index>(std::min(spec.M(), spec.N));
    Eigen::VectorXd sigma(n);
    if (spec.profile == SpectrumProfile::flat || n == 1 || spec.kappa == 1.0) {
        sigma.setOnes();
    } else {
        // sigma_i = c r^i, sigma_0 / sigma_{n-1} = kappa
        const double ratio = std::pow(spec.kappa, -1.0 / static_cast<double>(n - 1));
        for (Eigen::Index i = 0; i < n; ++i) sigma(i) = std::pow(ratio, static_cast<double>(i));
    }
    const double scale = std::sqrt(static_cast<double>(spec.N) / sigma.squaredNorm());
    return sigma * scale;
}

Eigen::VectorXd gram_eigenvalues(const SpectrumSpec& spec) {
    const Eigen::VectorXd sigma = spectrum_singular_values(spec);
    Eigen::VectorXd lam = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(spec.N));
    lam.head(sigma.size()) = sigma.cwiseAbs2();
    return lam;
}

double noise_var_from_snr(double snr_db, const SpectrumSpec& spec) {
    spec.validate();
    // E||Ax||^2 = tr(A^T A) * (unit signal variance) = N
    return static_cast<double>(spec.N) /
           (static_cast<double>(spec.M()) * std::pow(10.0, snr_db / 10.0));
}

SystemInstance generate_system(std::uint64_t seed, const SpectrumSpec& spec,
                               const SignalPrior& prior, double noise_var) {
    spec.validate();
    prior.validate();
    if (!(noise_var >= 0.0) || !std::isfinite(noise_var)) {
        throw InvalidSpec("noise variance must be finite and nonnegative");
    }
    SystemInstance inst;
    inst.spec = spec;
    inst.prior = prior;
    inst.seed = seed;
    inst.noise_var = noise_var;

    const auto n = static_cast<Eigen::Index>(spec.N);
    const auto m = static_cast<Eigen::Index>(spec.M());
    inst.sigma = spectrum_singular_values(spec);
    inst.V = make_orthogonal(n, seed, kStreamV);
    inst.U = make_orthogonal(m, seed, kStreamU);

    auto sig_eng = make_engine(seed, kStreamSignal);
    std::bernoulli_distribution support(prior.rho);
    std::normal_distribution<double> amplitude(0.0, std::sqrt(prior.component_variance()));
    inst.x_true.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const bool on = support(sig_eng);
        const double a = amplitude(sig_eng);
        inst.x_true(i) = on ? a : 0.0;
    }

    inst.y.resize(m);  // apply_A reads M() from y
    Eigen::VectorXd clean = apply_A(inst, inst.x_true);
    if (noise_var > 0.0) {
        auto noise_eng = make_engine(seed, kStreamNoise);
        std::normal_distribution<double> noise(0.0, std::sqrt(noise_var));
        for (Eigen::Index i = 0; i < m; ++i) clean(i) += noise(noise_eng);
    }
    inst.y = std::move(clean);
    return inst;
}

Eigen::VectorXd apply_A(const SystemInstance& inst, const Eigen::VectorXd& v) {
    if (v.size() != inst.N()) throw DimensionMismatch("apply_A: vector length must be N");
    const Eigen::VectorXd w = inst.V->apply_transpose(v);
    Eigen::VectorXd s = Eigen::VectorXd::Zero(inst.M());
    const Eigen::Index k = inst.sigma.size();
    s.head(k) = inst.sigma.cwiseProduct(w.head(k));
    return inst.U->apply(s);
}

Eigen::VectorXd apply_AH(const SystemInstance& inst, const Eigen::VectorXd& u) {
    if (u.size() != inst.M()) throw DimensionMismatch("apply_AH: vector length must be M");
    const Eigen::VectorXd w = inst.U->apply_transpose(u);
    Eigen::VectorXd s = Eigen::VectorXd::Zero(inst.N());
    const Eigen::Index k = inst.sigma.size();
    s.head(k) = inst.sigma.cwiseProduct(w.head(k));
    return inst.V->apply(s);
}

Eigen::VectorXd spectral_moments(const Eigen::VectorXd& sigma, std::size_t N, int k_max) {
    if (k_max < 0) throw DimensionMismatch("spectral_moments: k_max must be >= 0");
    Eigen::VectorXd out(k_max + 1);
    const Eigen::VectorXd lam = sigma.cwiseAbs2();
    const double n = static_cast<double>(N);
    Eigen::VectorXd power = Eigen::VectorXd::Ones(lam.size());
    for (int k = 0; k <= k_max; ++k) {
        out(k) = power.sum() / n;
        power = power.cwiseProduct(lam);
    }
    return out;
}

Eigen::VectorXd spectral_moments(const SystemInstance& inst, int k_max) {
    return spectral_moments(inst.sigma, static_cast<std::size_t>(inst.N()), k_max);
}

Eigen::VectorXd spectral_moments(const SpectrumSpec& spec, int k_max) {
    return spectral_moments(spectrum_singular_values(spec), spec.N, k_max);
}

void save_instance(const SystemInstance& inst, std::ostream& os) {
    os.write(kMagic, sizeof(kMagic));
    write_pod<std::uint64_t>(os, static_cast<std::uint64_t>(inst.N()));
    write_pod<std::uint64_t>(os, static_cast<std::uint64_t>(inst.M()));
    write_pod<std::uint64_t>(os, inst.seed);
    write_pod<std::uint32_t>(os, inst.spec.profile == SpectrumProfile::flat ? 0u : 1u);
    write_pod<std::uint32_t>(os, kind_of(*inst.V));
    write_pod<std::uint32_t>(os, kind_of(*inst.U));
    write_pod<std::uint32_t>(os, 0u);
    write_pod(os, inst.spec.delta);
    write_pod(os, inst.spec.kappa);
    write_pod(os, inst.prior.rho);
    write_pod(os, inst.noise_var);
    write_doubles(os, inst.sigma.data(), inst.sigma.size());
    write_transform(os, *inst.V);
    write_transform(os, *inst.U);
    write_doubles(os, inst.x_true.data(), inst.x_true.size());
    write_doubles(os, inst.y.data(), inst.y.size());
    if (!os) throw FormatError("failed to write instance");
}

SystemInstance load_instance(std::istream& is) {
    char magic[sizeof(kMagic)];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw FormatError("not an instance file (bad magic)");
    }
    SystemInstance inst;
    const auto n = static_cast<Eigen::Index>(read_pod<std::uint64_t>(is));
    const auto m = static_cast<Eigen::Index>(read_pod<std::uint64_t>(is));
    inst.seed = read_pod<std::uint64_t>(is);
    const auto profile = read_pod<std::uint32_t>(is);
    const auto v_kind = read_pod<std::uint32_t>(is);
    const auto u_kind = read_pod<std::uint32_t>(is);
    (void)read_pod<std::uint32_t>(is);
    inst.spec.N = static_cast<std::size_t>(n);
    inst.spec.delta = read_pod<double>(is);
    inst.spec.kappa = read_pod<double>(is);
    inst.spec.profile = profile == 0 ? SpectrumProfile::flat : SpectrumProfile::geometric;
    inst.prior.rho = read_pod<double>(is);
    inst.noise_var = read_pod<double>(is);
    if (static_cast<Eigen::Index>(inst.spec.M()) != m) {
        throw FormatError("header dimensions disagree with delta");
    }
    inst.sigma = read_doubles(is, std::min(n, m));
    inst.V = read_transform(is, v_kind, n);
    inst.U = read_transform(is, u_kind, m);
    inst.x_true = read_doubles(is, n);
    inst.y = read_doubles(is, m);
    return inst;
}

}  // namespace ssmamp
