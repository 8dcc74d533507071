#include "grbm/lyapunov.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "grbm/error.hpp"
#include "grbm/parallel.hpp"
#include "grbm/rng.hpp"

namespace grbm::lyapunov {

namespace {

// phi(1/2 + t) = 64 t^3 - 184 t^4 + 144 t^5 on t in [0, 1/2].
constexpr double kA3 = 64.0;
constexpr double kA4 = -184.0;
constexpr double kA5 = 144.0;

}  // namespace

BumpValue bump_eval(double s) {
    if (!(s >= 0.0)) throw PreconditionError("bump_eval requires s >= 0");
    if (s <= 0.5) return {0.0, 0.0, 0.0};
    if (s >= 1.0) return {s, 1.0, 0.0};
    const double t = s - 0.5;
    const double t2 = t * t;
    return {t2 * t * (kA3 + t * (kA4 + t * kA5)),
            t2 * (3.0 * kA3 + t * (4.0 * kA4 + t * 5.0 * kA5)),
            t * (6.0 * kA3 + t * (12.0 * kA4 + t * 20.0 * kA5))};
}

double lyapunov_V(const Vector& x, double lambda) {
    if (!(lambda > 0.0)) throw PreconditionError("lyapunov_V requires lambda > 0");
    return std::exp(lambda * bump_eval(x.norm()).phi);
}

PsiDerivatives psi_derivatives(const Vector& x) {
    const auto d = x.size();
    PsiDerivatives out{Vector::Zero(d), Matrix::Zero(d, d)};
    const double r = x.norm();
    if (r <= 0.5) return out;
    const BumpValue b = bump_eval(r);
    const Vector u = x / r;
    out.grad = b.dphi * u;
    out.hess = b.ddphi * (u * u.transpose()) + (b.dphi / r) * (Matrix::Identity(d, d) - u * u.transpose());
    return out;
}

double generator_ratio(const model::ModelSpec& spec, double lambda, const Vector& x) {
    if (x.size() != spec.dim()) throw ConfigError("generator: state dimension mismatch");
    const double r = x.norm();
    if (r <= 0.5) return 0.0;
    const BumpValue b = bump_eval(r);
    const Matrix& g = spec.gamma();

    // With u = x/r: sum Gamma_ij psi_ij = (phi'' - phi'/r) u'Gu + (phi'/r) tr G
    // and sum Gamma_ij psi_i psi_j = phi'^2 u'Gu.
    const Vector u = x / r;
    const double ugu = u.dot(g * u);
    const double hess_term = (b.ddphi - b.dphi / r) * ugu + (b.dphi / r) * g.trace();
    const double grad_term = b.dphi * b.dphi * ugu;
    const Vector drift = spec.drift(x);
    const double transport = b.dphi * drift.dot(u);
    return 0.5 * (lambda * hess_term + lambda * lambda * grad_term) + lambda * transport;
}

double generator_apply(const model::ModelSpec& spec, double lambda, const Vector& x) {
    return generator_ratio(spec, lambda, x) * lyapunov_V(x, lambda);
}

double beta_d(const model::ModelSpec& spec, const Vector& x) {
    if (x.size() != spec.dim()) throw ConfigError("beta_d: state dimension mismatch");
    const double r = x.norm();
    if (r == 0.0) throw PreconditionError("beta_d requires x != 0");
    const auto& pot = spec.potential();
    const auto& mu = spec.mu();
    double sum = 0.0;
    double prev = 0.0;
    for (Eigen::Index k = 0; k < x.size(); ++k) {
        const double cur = pot.derivative(x[k]);
        sum += (mu[k] + cur - prev) * (x[k] / r);
        prev = cur;
    }
    return sum;
}

double gamma_d(const model::ModelSpec& spec, const Vector& x) {
    if (x.size() != spec.dim()) throw ConfigError("gamma_d: state dimension mismatch");
    if (!(x.array() < 0.0).all()) throw PreconditionError("gamma_d requires x < 0 componentwise");
    const auto& pot = spec.potential();
    const double r = x.norm();
    const auto d = x.size();
    double sum = 0.0;
    for (Eigen::Index k = 0; k + 1 < d; ++k) sum += (x[k] - x[k + 1]) / r * pot.derivative(x[k]);
    sum += x[d - 1] / r * pot.derivative(x[d - 1]);
    return sum;
}

double default_lambda(const model::ModelSpec& spec) {
    const double mu_min = spec.mu().cwiseAbs().minCoeff();
    return mu_min / (spec.dim() * model::spectral_norm(spec.gamma()));
}

namespace {

// Sample index i of a shell: direction from the first d normals of stream i,
// radius from a uniform counter disjoint from the normal counters.
Vector shell_point(std::uint64_t seed, std::int64_t i, int d, double lo, double hi) {
    const auto key = rng::stream_key(seed, static_cast<std::uint64_t>(i));
    Vector v(d);
    double norm = 0.0;
    std::uint64_t idx = 0;
    do {
        for (int c = 0; c < d; ++c) v[c] = rng::normal_at(key, idx++);
        norm = v.norm();
    } while (norm == 0.0);
    const double radius = lo + (hi - lo) * rng::uniform_at(key, std::uint64_t{1} << 62);
    return v * (radius / norm);
}

}  // namespace

DriftReport verify_drift(const model::ModelSpec& spec, double lambda, double r, double shell_outer, std::int64_t n,
                         std::uint64_t seed, const DriftOptions& opts) {
    if (!model::drifts_negative(spec.mu())) throw StabilityError("verify_drift requires mu < 0");
    if (!(lambda > 0.0)) throw PreconditionError("verify_drift requires lambda > 0");
    if (!(r > 0.0) || !(shell_outer >= r)) throw PreconditionError("verify_drift requires 0 < r <= shell_outer");
    if (n < 1) throw PreconditionError("verify_drift requires n >= 1");

    const int d = spec.dim();
    DriftReport rep;
    rep.lambda = lambda;
    rep.r = r;
    rep.shell_outer = shell_outer;
    rep.eps = opts.eps;
    rep.n_samples = n;
    rep.target_rate = model::drift_rate_bound(spec, opts.eps);

    std::vector<double> ratios(static_cast<std::size_t>(n));
    std::vector<double> radii(opts.samples ? static_cast<std::size_t>(n) : 0);
    const std::uint64_t inner_seed = rng::derive_seed(seed, 1);
    const int workers = std::max(1, opts.workers);

    parallel_for(n, workers, [&](int, std::int64_t lo, std::int64_t hi) {
        for (std::int64_t i = lo; i < hi; ++i) {
            const Vector x = shell_point(seed, i, d, r, shell_outer);
            ratios[static_cast<std::size_t>(i)] = generator_ratio(spec, lambda, x);
            if (!radii.empty()) radii[static_cast<std::size_t>(i)] = x.norm();
        }
    });

    rep.k = -*std::max_element(ratios.begin(), ratios.end());
    rep.worst_margin = -std::numeric_limits<double>::infinity();
    for (double q : ratios) {
        const double margin = q + rep.target_rate;
        rep.worst_margin = std::max(rep.worst_margin, margin);
        if (margin > 0.0) ++rep.violation_count;
    }

    // Offset b on the ball, evaluated for the rate actually found.
    std::vector<double> inner(static_cast<std::size_t>(n));
    const double k = rep.k;
    parallel_for(n, workers, [&](int, std::int64_t lo, std::int64_t hi) {
        for (std::int64_t i = lo; i < hi; ++i) {
            const Vector x = shell_point(inner_seed, i, d, 0.0, r);
            const double v = lyapunov_V(x, lambda);
            inner[static_cast<std::size_t>(i)] = (generator_ratio(spec, lambda, x) + k) * v;
        }
    });
    rep.b = std::max(0.0, *std::max_element(inner.begin(), inner.end()));

    if (opts.samples) {
        opts.samples->clear();
        opts.samples->reserve(ratios.size());
        for (std::int64_t i = 0; i < n; ++i) {
            const auto u = static_cast<std::size_t>(i);
            opts.samples->push_back({i, radii[u], ratios[u]});
        }
    }
    return rep;
}

DriftReport certify_drift(const model::ModelSpec& spec, double lambda, std::int64_t n, std::uint64_t seed,
                          const DriftOptions& opts, const SearchOptions& search) {
    double r = search.r_start;
    std::int64_t attempts = 0;
    DriftReport rep;
    while (true) {
        ++attempts;
        rep = verify_drift(spec, lambda, r, search.shell_factor * r, n, seed, opts);
        rep.attempts = attempts;
        if (rep.accepted()) return rep;
        if (2.0 * r > search.r_limit) return rep;
        r *= 2.0;
    }
}

}  // namespace grbm::lyapunov
