#include "grbm/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "grbm/error.hpp"

namespace grbm::model {

Potential Potential::exponential(double beta) {
    if (!(beta > 0.0) || !std::isfinite(beta)) throw InputError("potential beta must be positive and finite");
    return Potential(PotentialFamily::Exponential, beta);
}

Potential Potential::zero() { return Potential(PotentialFamily::Zero, 0.0); }

PotentialValue Potential::eval(double y) const noexcept {
    if (family_ == PotentialFamily::Zero) return {0.0, 0.0};
    const double du = derivative(y);
    return {-du / beta_, du};
}

PotentialValue potential_eval(const Potential& p, double y) { return p.eval(y); }

Matrix tandem_reflection(int d) {
    Matrix r = Matrix::Identity(d, d);
    for (int i = 1; i < d; ++i) r(i, i - 1) = -1.0;
    return r;
}

namespace {

bool all_finite(const Matrix& m) { return m.allFinite(); }

}  // namespace

ModelSpec::ModelSpec(Matrix gamma, Vector mu, Matrix refl, Potential potential)
    : gamma_(std::move(gamma)), mu_(std::move(mu)), refl_(std::move(refl)), potential_(potential) {
    const auto d = mu_.size();
    if (d < 1) throw ConfigError("model dimension must be at least 1");
    if (gamma_.rows() != d || gamma_.cols() != d)
        throw ConfigError("gamma must be " + std::to_string(d) + "x" + std::to_string(d));
    if (refl_.rows() != d || refl_.cols() != d)
        throw ConfigError("refl must be " + std::to_string(d) + "x" + std::to_string(d));
    if (!all_finite(gamma_) || !mu_.allFinite() || !all_finite(refl_)) throw InputError("model has non-finite entries");
    for (Eigen::Index i = 0; i < d; ++i) {
        for (Eigen::Index j = i + 1; j < d; ++j) {
            if (std::abs(gamma_(i, j) - gamma_(j, i)) > 1e-12) throw ConfigError("gamma is not symmetric");
        }
        if (refl_(i, i) != 1.0) throw ConfigError("refl must have unit diagonal");
    }
    tandem_ = refl_ == tandem_reflection(static_cast<int>(d));
}

void ModelSpec::drift(std::span<const double> x, std::span<double> out) const {
    const int d = dim();
    if (tandem_) {
        double prev = 0.0;  // U'(x_0) with x_0 = +inf
        for (int i = 0; i < d; ++i) {
            const double cur = potential_.derivative(x[i]);
            out[i] = mu_[i] + cur - prev;
            prev = cur;
        }
        return;
    }
    thread_local std::vector<double> du;
    du.resize(d);
    for (int j = 0; j < d; ++j) du[j] = potential_.derivative(x[j]);
    for (int i = 0; i < d; ++i) {
        double s = mu_[i];
        for (int j = 0; j < d; ++j) {
            if (refl_(i, j) != 0.0) s += refl_(i, j) * du[j];
        }
        out[i] = s;
    }
}

Vector ModelSpec::drift(const Vector& x) const {
    Vector out(dim());
    drift(std::span<const double>(x.data(), x.size()), std::span<double>(out.data(), out.size()));
    return out;
}

ModelSpec make_tandem_model(const Matrix& gamma, const Vector& mu, double beta) {
    return ModelSpec(gamma, mu, tandem_reflection(static_cast<int>(mu.size())), Potential::exponential(beta));
}

double spectral_norm(const Matrix& gamma) {
    if (!gamma.allFinite()) throw InputError("spectral_norm: non-finite entries");
    const Matrix gtg = gamma.transpose() * gamma;
    const auto n = gtg.rows();
    if (n == 0 || gtg.cwiseAbs().maxCoeff() == 0.0) return 0.0;

    // Deterministic start with no special alignment to coordinate axes.
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = 1.0 + 0.1 * static_cast<double>(i) + 1e-3 * static_cast<double>(i * i);
    v.normalize();

    double estimate = v.dot(gtg * v);
    constexpr int kMaxIter = 100000;
    for (int it = 0; it < kMaxIter; ++it) {
        Vector w = gtg * v;
        const double norm = w.norm();
        if (norm == 0.0) return 0.0;
        v = w / norm;
        const double next = v.dot(gtg * v);
        if (std::abs(next - estimate) <= 1e-12 * std::abs(next) && it > 2) return std::sqrt(next);
        estimate = next;
    }
    throw NumericError("spectral_norm: power iteration did not converge");
}

double min_eigenvalue(const Matrix& sym) {
    Eigen::SelfAdjointEigenSolver<Matrix> solver(sym, Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success) throw NumericError("eigenvalue computation failed");
    return solver.eigenvalues().minCoeff();
}

bool check_skew_symmetry(const Matrix& gamma, const Matrix& refl, double tol) {
    const auto d = gamma.rows();
    if (gamma.cols() != d || refl.rows() != d || refl.cols() != d)
        throw ConfigError("check_skew_symmetry: dimension mismatch");
    for (Eigen::Index i = 0; i < d; ++i) {
        for (Eigen::Index j = 0; j < d; ++j) {
            if (i == j) continue;
            if (std::abs(refl(i, j) + refl(j, i) - 2.0 * gamma(i, j)) > tol) return false;
        }
    }
    return true;
}

bool drifts_negative(const Vector& mu) noexcept { return mu.size() > 0 && (mu.array() < 0.0).all(); }

ValidationReport validate_model(const ModelSpec& spec, const ProbeGrid& grid) {
    ValidationReport rep;

    rep.lambda_min = min_eigenvalue(spec.gamma());
    rep.pd_ok = rep.lambda_min > kPdTolerance;
    if (!rep.pd_ok) {
        std::ostringstream os;
        os << "gamma is not strictly positive definite (lambda_min = " << rep.lambda_min << ")";
        rep.messages.push_back(os.str());
    }

    rep.tridiag_ok = spec.has_tandem_reflection();
    if (!rep.tridiag_ok) rep.messages.push_back("reflection matrix is not of tandem form");

    const Potential& pot = spec.potential();
    const double scale = pot.family() == PotentialFamily::Exponential ? 1.0 / pot.beta() : 1.0;
    const double extent = grid.extent * scale;
    const int n = std::max(grid.n_points, 3);

    // 3a: nonnegative everywhere on the grid, strictly decreasing on [-extent, 0].
    bool nonneg = true;
    bool decreasing = true;
    double prev = std::numeric_limits<double>::infinity();
    for (int k = 0; k < n; ++k) {
        const double y = -extent + 2.0 * extent * k / (n - 1);
        const double du = pot.derivative(y);
        if (!(du >= 0.0)) nonneg = false;
        if (y <= 0.0) {
            if (!(du < prev)) decreasing = false;
            prev = du;
        }
    }
    rep.potential.c3a = nonneg && decreasing;
    if (!nonneg) rep.messages.push_back("U' takes negative values on the probe grid");
    if (!decreasing) rep.messages.push_back("U' is not decreasing on the negative half-line");

    // 3b: vanishing at +extent, diverging at -extent.
    const bool vanishes = pot.derivative(extent) < kVanishThreshold;
    const bool diverges = pot.derivative(-extent) > kDivergeThreshold;
    rep.potential.c3b = vanishes && diverges;
    if (!vanishes) rep.messages.push_back("U'(y) does not vanish as y -> +inf");
    if (!diverges) rep.messages.push_back("U'(y) does not diverge as y -> -inf");

    // 3c: U'(2y)/U'(y) strictly increasing along y -> -inf and eventually huge.
    bool growing = true;
    double last_ratio = 0.0;
    for (int k = 1; k < n; ++k) {
        const double y = -extent * k / (n - 1);
        const double num = pot.derivative(2.0 * y);
        const double den = pot.derivative(y);
        const double ratio = den > 0.0 ? num / den : std::numeric_limits<double>::quiet_NaN();
        if (!(ratio > last_ratio)) {
            // Saturation of U' at the cap is not a failure of growth.
            if (!(num == Potential::kDerivativeCap && ratio > 0.0)) {
                growing = false;
                break;
            }
        }
        last_ratio = std::max(last_ratio, ratio);
    }
    rep.potential.c3c = growing && last_ratio > kDivergeThreshold;
    if (!rep.potential.c3c) rep.messages.push_back("U'(2y)/U'(y) does not diverge as y -> -inf");

    rep.stability_ok = drifts_negative(spec.mu());
    if (!rep.stability_ok) rep.messages.push_back("drift mu is not componentwise negative");

    return rep;
}

double drift_rate_bound(const ModelSpec& spec, double eps) {
    if (!drifts_negative(spec.mu())) throw StabilityError("drift_rate_bound requires mu < 0");
    if (!(eps >= 0.0)) throw PreconditionError("eps must be nonnegative");
    const double mu_min_sq = spec.mu().array().square().minCoeff();
    const double norm = spectral_norm(spec.gamma());
    const double k = (mu_min_sq - eps) / (2.0 * spec.dim() * norm);
    return std::max(0.0, k);
}

Vector nu_vector(const Vector& mu) {
    const auto d = mu.size();
    if (d < 2) throw PreconditionError("nu_vector requires at least two particles");
    const double total = mu.sum();
    Vector nu(d - 1);
    double partial = 0.0;
    for (Eigen::Index i = 0; i + 1 < d; ++i) {
        partial += mu[i];
        nu[i] = partial - static_cast<double>(i + 1) / static_cast<double>(d) * total;
    }
    return nu;
}

double hard_rate_Kh(const Vector& mu) {
    const Vector nu = nu_vector(mu);
    if (!(nu.array() < 0.0).all()) throw StabilityError("hard_rate_Kh requires nu_i < 0 for all i");
    const double d = static_cast<double>(mu.size());
    const double c = std::cos(std::numbers::pi / d);
    return 4.0 / d * std::pow(1.0 - c, 3) / (1.0 + c) * nu.array().square().minCoeff();
}

double soft_rate_Ks(const Vector& mu_tilde, int d) {
    if (mu_tilde.size() == 0 || !drifts_negative(mu_tilde))
        throw StabilityError("soft_rate_Ks requires mu_tilde < 0 componentwise");
    if (d < 2) throw PreconditionError("soft_rate_Ks requires d >= 2");
    const double c = std::cos(std::numbers::pi / d);
    return mu_tilde.array().square().minCoeff() / (4.0 * d * (1.0 + c));
}

Vector gap_drift(const Vector& mu) {
    if (mu.size() < 2) throw PreconditionError("gap drift requires at least two particles");
    return mu.tail(mu.size() - 1) - mu.head(mu.size() - 1);
}

Matrix gap_covariance(int d) {
    if (d < 2) throw PreconditionError("gap covariance requires at least two particles");
    Matrix g = Matrix::Zero(d - 1, d - 1);
    for (int i = 0; i < d - 1; ++i) {
        g(i, i) = 2.0;
        if (i + 1 < d - 1) g(i, i + 1) = g(i + 1, i) = -1.0;
    }
    return g;
}

RateConstants rate_constants(const Vector& particle_mu, double eps) {
    RateConstants rc;
    const int d = static_cast<int>(particle_mu.size());
    const Matrix gamma = gap_covariance(d);
    rc.gamma_norm = spectral_norm(gamma);
    rc.nu = nu_vector(particle_mu);
    const Vector mt = gap_drift(particle_mu);
    if (drifts_negative(mt)) {
        rc.drift_bound = drift_rate_bound(make_tandem_model(gamma, mt), eps);
        rc.k_soft = soft_rate_Ks(mt, d);
    }
    if ((rc.nu.array() < 0.0).all()) rc.k_hard = hard_rate_Kh(particle_mu);
    return rc;
}

}  // namespace grbm::model
