#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>

#include <Eigen/Dense>

namespace ssmamp {

enum class SpectrumProfile { flat, geometric };

std::string to_string(SpectrumProfile p);
SpectrumProfile parse_profile(const std::string& s);

/// Shape of the measurement matrix: N columns, M = round(delta N) rows,
/// nonzero singular values with max/min ratio kappa, normalised so that
/// (1/N) tr(A^T A) = 1.
struct SpectrumSpec {
    std::size_t N = 0;
    double delta = 1.0;
    double kappa = 1.0;
    SpectrumProfile profile = SpectrumProfile::flat;

    std::size_t M() const;
    /// Throws InvalidSpec.
    void validate() const;
};

/// Bernoulli-Gaussian prior: x_i = 0 with probability 1 - rho, otherwise
/// N(0, 1/rho). Mean zero, unit variance.
struct SignalPrior {
    double rho = 1.0;

    double component_variance() const { return 1.0 / rho; }
    void validate() const;
};

/// Orthogonal N x N operator. Either a stored dense matrix or a structured
/// fast transform for large N.
class OrthogonalTransform {
public:
    virtual ~OrthogonalTransform() = default;
    virtual Eigen::Index size() const = 0;
    /// Q v
    virtual Eigen::VectorXd apply(const Eigen::VectorXd& v) const = 0;
    /// Q^T v
    virtual Eigen::VectorXd apply_transpose(const Eigen::VectorXd& v) const = 0;
    virtual Eigen::MatrixXd dense() const;
};

class DenseOrthogonal final : public OrthogonalTransform {
public:
    explicit DenseOrthogonal(Eigen::MatrixXd q) : q_(std::move(q)) {}
    Eigen::Index size() const override { return q_.rows(); }
    Eigen::VectorXd apply(const Eigen::VectorXd& v) const override { return q_ * v; }
    Eigen::VectorXd apply_transpose(const Eigen::VectorXd& v) const override {
        return q_.transpose() * v;
    }
    Eigen::MatrixXd dense() const override { return q_; }
    const Eigen::MatrixXd& matrix() const { return q_; }

private:
    Eigen::MatrixXd q_;
};

/// Two rounds of (random sign flip, orthonormal Walsh-Hadamard transform,
/// random permutation). Size must be a power of two.
class HadamardSurrogate final : public OrthogonalTransform {
public:
    HadamardSurrogate(Eigen::VectorXd signs1, Eigen::VectorXi perm1, Eigen::VectorXd signs2,
                      Eigen::VectorXi perm2);
    Eigen::Index size() const override { return signs1_.size(); }
    Eigen::VectorXd apply(const Eigen::VectorXd& v) const override;
    Eigen::VectorXd apply_transpose(const Eigen::VectorXd& v) const override;

    const Eigen::VectorXd& signs1() const { return signs1_; }
    const Eigen::VectorXd& signs2() const { return signs2_; }
    const Eigen::VectorXi& perm1() const { return perm1_; }
    const Eigen::VectorXi& perm2() const { return perm2_; }

private:
    Eigen::VectorXd signs1_, signs2_;
    Eigen::VectorXi perm1_, perm2_;
};

/// Sizes above this use HadamardSurrogate instead of a dense Haar matrix.
inline constexpr std::size_t kDenseHaarLimit = 4096;

/// Haar-distributed orthogonal matrix from the QR factorisation of an IID
/// Gaussian matrix, with the signs of R's diagonal folded into Q.
Eigen::MatrixXd haar_orthogonal(Eigen::Index n, std::uint64_t seed, std::uint64_t stream);

/// One instance of y = A x + n with A = U diag(sigma) V^T.
struct SystemInstance {
    SpectrumSpec spec;
    SignalPrior prior;
    std::uint64_t seed = 0;
    std::shared_ptr<const OrthogonalTransform> U;  // M x M
    std::shared_ptr<const OrthogonalTransform> V;  // N x N
    Eigen::VectorXd sigma;                         // min(M, N) singular values
    Eigen::VectorXd x_true;
    Eigen::VectorXd y;
    double noise_var = 0.0;

    Eigen::Index N() const { return x_true.size(); }
    Eigen::Index M() const { return y.size(); }
};

/// Singular values prescribed by the spec (deterministic).
Eigen::VectorXd spectrum_singular_values(const SpectrumSpec& spec);

/// All N eigenvalues of A^T A, including the N - min(M, N) zeros.
Eigen::VectorXd gram_eigenvalues(const SpectrumSpec& spec);

/// noise variance that gives 10 log10(E||Ax||^2 / (M sigma^2)) = snr_db.
double noise_var_from_snr(double snr_db, const SpectrumSpec& spec);

/// Deterministic in (seed, spec, prior, noise_var). Throws InvalidSpec.
SystemInstance generate_system(std::uint64_t seed, const SpectrumSpec& spec,
                               const SignalPrior& prior, double noise_var);

Eigen::VectorXd apply_A(const SystemInstance& inst, const Eigen::VectorXd& v);
Eigen::VectorXd apply_AH(const SystemInstance& inst, const Eigen::VectorXd& u);

/// (1/N) sum_i sigma_i^{2k} over the min(M, N) singular values, k = 0..k_max.
Eigen::VectorXd spectral_moments(const SystemInstance& inst, int k_max);
Eigen::VectorXd spectral_moments(const SpectrumSpec& spec, int k_max);
Eigen::VectorXd spectral_moments(const Eigen::VectorXd& sigma, std::size_t N, int k_max);

/// Binary dump: "SSMAMPI1" magic, a fixed header (dims, seed, spec, prior,
/// noise variance, transform kinds) and a payload of little-endian doubles.
void save_instance(const SystemInstance& inst, std::ostream& os);
SystemInstance load_instance(std::istream& is);

}  // namespace ssmamp
