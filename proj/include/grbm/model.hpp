#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "grbm/types.hpp"

namespace grbm::model {

enum class PotentialFamily { Exponential, Zero };

struct PotentialValue {
    double u;
    double du;
};

/// Soft-reflection potential. Exponential(beta) is U(y) = -(1/beta) e^{-beta y};
/// Zero is U == 0 and exists for plumbing tests only.
class Potential {
public:
    static Potential exponential(double beta);
    static Potential zero();

    PotentialFamily family() const noexcept { return family_; }
    double beta() const noexcept { return beta_; }

    /// U'(y), saturated at kDerivativeCap.
    double derivative(double y) const noexcept {
        if (family_ == PotentialFamily::Zero) return 0.0;
        const double a = -beta_ * y;
        return a >= kLogCap ? kDerivativeCap : std::exp(a);
    }

    PotentialValue eval(double y) const noexcept;

    bool operator==(const Potential&) const = default;

    static constexpr double kDerivativeCap = 1e300;

private:
    Potential(PotentialFamily f, double beta) : family_(f), beta_(beta) {}

    static constexpr double kLogCap = 690.77552789821368;  // ln(1e300)

    PotentialFamily family_;
    double beta_;
};

PotentialValue potential_eval(const Potential& p, double y);

/// Tandem reflection matrix: ones on the diagonal, -1 on the first subdiagonal.
Matrix tandem_reflection(int d);

/// Full GRBM parameterization (Gamma, mu, R, U). Immutable; the constructor
/// enforces the structural invariants (consistent dimensions, finite entries,
/// symmetric Gamma, unit diagonal of R).
class ModelSpec {
public:
    ModelSpec(Matrix gamma, Vector mu, Matrix refl, Potential potential);

    int dim() const noexcept { return static_cast<int>(mu_.size()); }
    const Matrix& gamma() const noexcept { return gamma_; }
    const Vector& mu() const noexcept { return mu_; }
    const Matrix& refl() const noexcept { return refl_; }
    const Potential& potential() const noexcept { return potential_; }

    /// R has exactly the tandem structure (unit diagonal, -1 subdiagonal, 0 elsewhere).
    bool has_tandem_reflection() const noexcept { return tandem_; }

    /// b_i(x) = mu_i + sum_j U'(x_j) r_ij.
    void drift(std::span<const double> x, std::span<double> out) const;
    Vector drift(const Vector& x) const;

private:
    Matrix gamma_;
    Vector mu_;
    Matrix refl_;
    Potential potential_;
    bool tandem_;
};

/// O'Connell-Yor type model: tandem R, Exponential(beta).
ModelSpec make_tandem_model(const Matrix& gamma, const Vector& mu, double beta = 1.0);

struct ProbeGrid {
    int n_points = 401;
    /// Potential probes cover [-extent/beta, extent/beta].
    double extent = 40.0;
};

struct PotentialChecks {
    bool c3a = false;  // U' >= 0, decreasing on the negative half-line
    bool c3b = false;  // U' -> 0 at +inf, U' -> inf at -inf
    bool c3c = false;  // U'(a y)/U'(b y) -> inf as y -> -inf
    bool all() const noexcept { return c3a && c3b && c3c; }
};

struct ValidationReport {
    bool pd_ok = false;
    double lambda_min = 0.0;
    bool tridiag_ok = false;
    PotentialChecks potential;
    bool stability_ok = false;
    std::vector<std::string> messages;

    bool potential_ok() const noexcept { return potential.all(); }
    bool all_ok() const noexcept { return pd_ok && tridiag_ok && potential_ok() && stability_ok; }
};

inline constexpr double kPdTolerance = 1e-10;
inline constexpr double kVanishThreshold = 1e-12;
inline constexpr double kDivergeThreshold = 1e10;

ValidationReport validate_model(const ModelSpec& spec, const ProbeGrid& grid = {});

/// Largest singular value by power iteration on Gamma^T Gamma.
double spectral_norm(const Matrix& gamma);

/// Smallest eigenvalue of a symmetric matrix.
double min_eigenvalue(const Matrix& sym);

bool check_skew_symmetry(const Matrix& gamma, const Matrix& refl, double tol);

/// (1/(2 d ||Gamma||)) (min_i mu_i^2 - eps), clamped at 0. Throws
/// StabilityError unless mu < 0.
double drift_rate_bound(const ModelSpec& spec, double eps);

/// Stable-drift guard used by several operations.
bool drifts_negative(const Vector& mu) noexcept;

/// nu_i = sum_{k<=i} mu_k - (i/d) sum_k mu_k, i = 1..d-1.
Vector nu_vector(const Vector& mu);

/// Hard-reflection (Brownian TASEP gap) drift-condition rate.
double hard_rate_Kh(const Vector& mu);

/// Soft-reflection gap-process rate; d is the particle count.
double soft_rate_Ks(const Vector& mu_tilde, int d);

/// mu_tilde_i = mu_{i+1} - mu_i.
Vector gap_drift(const Vector& mu);

/// Covariance of the gap increments of d independent unit Brownian particles:
/// 2 on the diagonal, -1 off-diagonal, size d-1.
Matrix gap_covariance(int d);

struct RateConstants {
    double gamma_norm = 0.0;
    std::optional<double> drift_bound;
    std::optional<double> k_hard;
    std::optional<double> k_soft;
    Vector nu;
};

/// Rate constants for a d-particle system with drifts mu. Constants whose
/// stability hypotheses fail are left empty.
RateConstants rate_constants(const Vector& particle_mu, double eps = 0.0);

}  // namespace grbm::model
