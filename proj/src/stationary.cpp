#include "grbm/stationary.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <numbers>
#include <numeric>

#include "grbm/error.hpp"
#include "grbm/io.hpp"
#include "grbm/lyapunov.hpp"
#include "grbm/rng.hpp"

namespace grbm::stationary {

namespace {

Vector solve_product_weights(const model::ModelSpec& spec) {
    if (!model::check_skew_symmetry(spec.gamma(), spec.refl(), 1e-10))
        throw PreconditionError("density formula inapplicable: generalized skew-symmetry fails");
    const Matrix a = 2.0 * spec.gamma() - spec.refl();
    Eigen::FullPivLU<Matrix> lu(a);
    if (!lu.isInvertible()) throw NumericError("2 Gamma - R is singular");
    return lu.solve(spec.mu());
}

}  // namespace

double product_log_density(const model::ModelSpec& spec, const Vector& x) {
    if (x.size() != spec.dim()) throw ConfigError("product_log_density: dimension mismatch");
    const Vector w = solve_product_weights(spec);
    double s = w.dot(x);
    for (Eigen::Index i = 0; i < x.size(); ++i) s += spec.potential().eval(x[i]).u;
    return 2.0 * s;
}

DensitySpec product_density(const model::ModelSpec& spec) {
    const Vector w = solve_product_weights(spec);
    DensitySpec out;
    out.model_digest = io::model_digest(spec);
    out.dim = spec.dim();
    out.log_density = [w, pot = spec.potential()](std::span<const double> x) {
        double s = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) s += pot.eval(x[i]).u + w[static_cast<Eigen::Index>(i)] * x[i];
        return 2.0 * s;
    };
    return out;
}

DensitySpec product_marginal(const model::ModelSpec& spec, int i) {
    if (i < 0 || i >= spec.dim()) throw ConfigError("product_marginal: coordinate out of range");
    const Vector w = solve_product_weights(spec);
    DensitySpec out;
    out.model_digest = io::model_digest(spec);
    out.dim = 1;
    out.log_density = [wi = w[i], pot = spec.potential()](std::span<const double> x) {
        return 2.0 * (pot.eval(x[0]).u + wi * x[0]);
    };
    return out;
}

GaussLegendre gauss_legendre(int n) {
    if (n < 1) throw PreconditionError("gauss_legendre requires n >= 1");
    static std::mutex mu;
    static std::map<int, GaussLegendre> cache;
    {
        std::lock_guard lock(mu);
        if (auto it = cache.find(n); it != cache.end()) return it->second;
    }
    GaussLegendre gl;
    gl.nodes.resize(static_cast<std::size_t>(n));
    gl.weights.resize(static_cast<std::size_t>(n));
    const int half = (n + 1) / 2;
    for (int i = 0; i < half; ++i) {
        double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0;
            double p1 = x;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        // Recompute the derivative at the converged node.
        double p0 = 1.0;
        double p1 = x;
        for (int k = 2; k <= n; ++k) {
            const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
            p0 = p1;
            p1 = p2;
        }
        dp = n * (x * p1 - p0) / (x * x - 1.0);
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        gl.nodes[static_cast<std::size_t>(i)] = -x;
        gl.nodes[static_cast<std::size_t>(n - 1 - i)] = x;
        gl.weights[static_cast<std::size_t>(i)] = w;
        gl.weights[static_cast<std::size_t>(n - 1 - i)] = w;
    }
    if (n == 1) {
        gl.nodes[0] = 0.0;
        gl.weights[0] = 2.0;
    }
    std::lock_guard lock(mu);
    cache.emplace(n, gl);
    return gl;
}

namespace {

// Log-sum-exp accumulator.
struct LogSum {
    double max = -std::numeric_limits<double>::infinity();
    double sum = 0.0;

    void add(double log_value, double weight) {
        if (log_value == -std::numeric_limits<double>::infinity() || weight == 0.0) return;
        if (log_value > max) {
            sum = sum * std::exp(max - log_value) + weight;
            max = log_value;
        } else {
            sum += weight * std::exp(log_value - max);
        }
    }
    double value() const { return sum * std::exp(max); }
};

LogSum tensor_quadrature(const DensitySpec& dspec, const Box& box, int n) {
    const GaussLegendre gl = gauss_legendre(n);
    LogSum acc;
    if (dspec.dim == 1) {
        const double c = 0.5 * (box.lo[0] + box.hi[0]);
        const double h = 0.5 * (box.hi[0] - box.lo[0]);
        double x[1];
        for (int i = 0; i < n; ++i) {
            x[0] = c + h * gl.nodes[static_cast<std::size_t>(i)];
            acc.add(dspec.log_density(x), h * gl.weights[static_cast<std::size_t>(i)]);
        }
        return acc;
    }
    const double c0 = 0.5 * (box.lo[0] + box.hi[0]);
    const double h0 = 0.5 * (box.hi[0] - box.lo[0]);
    const double c1 = 0.5 * (box.lo[1] + box.hi[1]);
    const double h1 = 0.5 * (box.hi[1] - box.lo[1]);
    double x[2];
    for (int i = 0; i < n; ++i) {
        x[0] = c0 + h0 * gl.nodes[static_cast<std::size_t>(i)];
        for (int j = 0; j < n; ++j) {
            x[1] = c1 + h1 * gl.nodes[static_cast<std::size_t>(j)];
            acc.add(dspec.log_density(x), h0 * h1 * gl.weights[static_cast<std::size_t>(i)] * gl.weights[static_cast<std::size_t>(j)]);
        }
    }
    return acc;
}

double boundary_log_max(const DensitySpec& dspec, const Box& box) {
    double worst = -std::numeric_limits<double>::infinity();
    if (dspec.dim == 1) {
        for (double v : {box.lo[0], box.hi[0]}) {
            double x[1] = {v};
            worst = std::max(worst, dspec.log_density(x));
        }
        return worst;
    }
    constexpr int kEdgePoints = 201;
    double x[2];
    for (int k = 0; k < kEdgePoints; ++k) {
        const double s = static_cast<double>(k) / (kEdgePoints - 1);
        const double a = box.lo[0] + s * (box.hi[0] - box.lo[0]);
        const double b = box.lo[1] + s * (box.hi[1] - box.lo[1]);
        for (double y : {box.lo[1], box.hi[1]}) {
            x[0] = a;
            x[1] = y;
            worst = std::max(worst, dspec.log_density(x));
        }
        for (double y : {box.lo[0], box.hi[0]}) {
            x[0] = y;
            x[1] = b;
            worst = std::max(worst, dspec.log_density(x));
        }
    }
    return worst;
}

}  // namespace

double normalize_density(DensitySpec& dspec, const Box& domain, int n_quad) {
    if (dspec.dim < 1 || dspec.dim > 2) throw PreconditionError("quadrature supports d <= 2 only");
    if (domain.lo.size() != dspec.dim || domain.hi.size() != dspec.dim) throw ConfigError("quadrature box has wrong dimension");
    if (!((domain.hi - domain.lo).array() > 0.0).all()) throw ConfigError("quadrature box is empty");
    if (n_quad < 2) throw PreconditionError("n_quad must be >= 2");

    const LogSum coarse = tensor_quadrature(dspec, domain, n_quad);
    const LogSum fine = tensor_quadrature(dspec, domain, 2 * n_quad);
    const double peak = std::max(coarse.max, fine.max);
    if (!std::isfinite(peak)) throw NumericError("density vanishes on the quadrature domain");
    // A density whose declared support is exactly the domain may be nonzero on its boundary.
    const bool declared = dspec.support && dspec.support->lo == domain.lo && dspec.support->hi == domain.hi;
    if (!declared && boundary_log_max(dspec, domain) - peak >= std::log(1e-12))
        throw PreconditionError("quadrature domain too small: boundary density exceeds 1e-12 of the maximum");

    const double zc = coarse.value();
    const double zf = fine.value();
    if (!(std::abs(zf - zc) <= 1e-8 * std::abs(zf)))
        throw NumericError("quadrature did not converge: n and 2n rules differ by more than 1e-8");
    dspec.z = zf;
    dspec.support = domain;
    return zf;
}

std::function<double(double)> density_cdf_1d(const DensitySpec& dspec, int panels, int nodes) {
    if (dspec.dim != 1 || !dspec.support) throw PreconditionError("density_cdf_1d requires a normalized 1-d density");
    const double lo = dspec.support->lo[0];
    const double hi = dspec.support->hi[0];
    const GaussLegendre gl = gauss_legendre(nodes);
    const double width = (hi - lo) / panels;

    double peak = -std::numeric_limits<double>::infinity();
    for (int p = 0; p < panels; ++p) {
        for (double t : gl.nodes) {
            double x[1] = {lo + width * (p + 0.5 + 0.5 * t)};
            peak = std::max(peak, dspec.log_density(x));
        }
    }

    auto log_density = dspec.log_density;
    auto segment = [log_density, gl, peak](double a, double b) {
        const double c = 0.5 * (a + b);
        const double h = 0.5 * (b - a);
        double s = 0.0;
        for (std::size_t i = 0; i < gl.nodes.size(); ++i) {
            double x[1] = {c + h * gl.nodes[i]};
            s += gl.weights[i] * std::exp(log_density(x) - peak);
        }
        return s * h;
    };

    std::vector<double> cum(static_cast<std::size_t>(panels) + 1, 0.0);
    for (int p = 0; p < panels; ++p) cum[static_cast<std::size_t>(p) + 1] = cum[static_cast<std::size_t>(p)] + segment(lo + width * p, lo + width * (p + 1));
    const double total = cum.back();

    return [cum, total, segment, lo, hi, width, panels](double x) {
        if (!(x > lo)) return 0.0;
        if (x >= hi) return 1.0;
        const int p = std::min(panels - 1, static_cast<int>((x - lo) / width));
        const double left = lo + width * p;
        const double v = (cum[static_cast<std::size_t>(p)] + segment(left, x)) / total;
        return std::clamp(v, 0.0, 1.0);
    };
}

Histogram empirical_histogram(const Matrix& samples, const std::vector<std::vector<double>>& edges) {
    const auto d = samples.cols();
    if (samples.rows() == 0) throw PreconditionError("empirical_histogram requires samples");
    if (d < 1 || d > 2) throw PreconditionError("histograms support 1 or 2 dimensions");
    if (static_cast<std::size_t>(d) != edges.size()) throw ConfigError("edges do not match sample dimension");
    for (const auto& e : edges) {
        if (e.size() < 2 || !std::is_sorted(e.begin(), e.end())) throw ConfigError("edges must be sorted with at least two entries");
    }

    Histogram h;
    h.dims = static_cast<int>(d);
    h.edges = edges;
    h.n_samples = samples.rows();
    std::size_t cells = 1;
    for (int k = 0; k < h.dims; ++k) cells *= static_cast<std::size_t>(h.cells_in(k));
    std::vector<std::int64_t> counts(cells, 0);

    auto locate = [](const std::vector<double>& e, double v) -> std::size_t {
        if (v < e.front()) return 0;
        if (v > e.back()) return e.size();
        if (v == e.back()) return e.size() - 1;
        return static_cast<std::size_t>(std::upper_bound(e.begin(), e.end(), v) - e.begin());
    };

    for (Eigen::Index i = 0; i < samples.rows(); ++i) {
        std::size_t idx = locate(edges[0], samples(i, 0));
        if (d == 2) idx = idx * static_cast<std::size_t>(h.cells_in(1)) + locate(edges[1], samples(i, 1));
        ++counts[idx];
    }
    h.mass.resize(cells);
    const double n = static_cast<double>(h.n_samples);
    for (std::size_t c = 0; c < cells; ++c) h.mass[c] = static_cast<double>(counts[c]) / n;
    return h;
}

double tv_distance(const Histogram& p, const Histogram& q) {
    if (p.dims != q.dims || p.edges != q.edges) throw PreconditionError("tv_distance requires identical edges");
    double s = 0.0;
    for (std::size_t c = 0; c < p.mass.size(); ++c) s += std::abs(p.mass[c] - q.mass[c]);
    return std::min(1.0, 0.5 * s);
}

namespace {

double quantile_sorted(const std::vector<double>& v, double q) {
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto i = static_cast<std::size_t>(pos);
    const double frac = pos - static_cast<double>(i);
    if (i + 1 >= v.size()) return v.back();
    return v[i] + frac * (v[i + 1] - v[i]);
}

}  // namespace

std::vector<double> freedman_diaconis_edges(std::span<const double> samples, int max_bins) {
    if (samples.empty()) throw PreconditionError("freedman_diaconis_edges requires samples");
    std::vector<double> v(samples.begin(), samples.end());
    std::sort(v.begin(), v.end());
    const double lo = v.front();
    const double hi = v.back();
    if (hi == lo) return {lo - 0.5, lo + 0.5};
    const double iqr = quantile_sorted(v, 0.75) - quantile_sorted(v, 0.25);
    const double width = 2.0 * iqr / std::cbrt(static_cast<double>(v.size()));
    int bins = width > 0.0 ? static_cast<int>(std::ceil((hi - lo) / width)) : max_bins;
    bins = std::clamp(bins, 1, max_bins);
    std::vector<double> edges(static_cast<std::size_t>(bins) + 1);
    for (int k = 0; k <= bins; ++k) edges[static_cast<std::size_t>(k)] = lo + (hi - lo) * k / bins;
    edges.back() = hi;
    return edges;
}

double ks_distance_1d(std::span<const double> samples, const std::function<double(double)>& cdf) {
    if (samples.empty()) throw PreconditionError("ks_distance_1d requires samples");
    std::vector<double> v(samples.begin(), samples.end());
    std::sort(v.begin(), v.end());
    const double n = static_cast<double>(v.size());
    double d = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double f = cdf(v[i]);
        d = std::max({d, (static_cast<double>(i) + 1.0) / n - f, f - static_cast<double>(i) / n});
    }
    return d;
}

double ks_two_sample(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) throw PreconditionError("ks_two_sample requires non-empty samples");
    std::vector<double> x(a.begin(), a.end());
    std::vector<double> y(b.begin(), b.end());
    std::sort(x.begin(), x.end());
    std::sort(y.begin(), y.end());
    const double na = static_cast<double>(x.size());
    const double nb = static_cast<double>(y.size());
    std::size_t i = 0;
    std::size_t j = 0;
    double d = 0.0;
    while (i < x.size() && j < y.size()) {
        const double v = std::min(x[i], y[j]);
        while (i < x.size() && x[i] == v) ++i;
        while (j < y.size() && y[j] == v) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    return d;
}

double kolmogorov_survival(double lambda) {
    if (lambda < 0.2) return 1.0;
    double s = 0.0;
    for (int k = 1; k <= 200; ++k) {
        const double term = std::exp(-2.0 * k * k * lambda * lambda);
        s += (k % 2 ? term : -term);
        if (term < 1e-18) break;
    }
    return std::clamp(2.0 * s, 0.0, 1.0);
}

double ks_pvalue(double d, std::int64_t n) {
    const double sn = std::sqrt(static_cast<double>(n));
    return kolmogorov_survival((sn + 0.12 + 0.11 / sn) * d);
}

DecayFit fit_decay_exponent(std::span<const double> times, std::span<const double> tv, Window window) {
    if (times.size() != tv.size()) throw ConfigError("fit_decay_exponent: times and tv differ in length");
    DecayFit fit;
    fit.times.assign(times.begin(), times.end());
    fit.tv.assign(tv.begin(), tv.end());
    fit.window = window;

    std::vector<double> t;
    std::vector<double> y;
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (times[i] < window.t_lo || times[i] > window.t_hi) continue;
        if (!(tv[i] > 1e-3 && tv[i] < 0.5)) continue;
        t.push_back(times[i]);
        y.push_back(std::log(tv[i]));
    }
    if (t.size() < 4) throw DomainError("decay fit needs at least 4 points with tv in (1e-3, 0.5) inside the window");

    const double n = static_cast<double>(t.size());
    const double tm = std::accumulate(t.begin(), t.end(), 0.0) / n;
    const double ym = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double stt = 0.0;
    double sty = 0.0;
    double syy = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        stt += (t[i] - tm) * (t[i] - tm);
        sty += (t[i] - tm) * (y[i] - ym);
        syy += (y[i] - ym) * (y[i] - ym);
    }
    if (stt == 0.0) throw DomainError("decay fit needs distinct times");
    const double slope = sty / stt;
    fit.delta = -slope;
    fit.intercept = ym - slope * tm;
    double sres = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        const double r = y[i] - (fit.intercept + slope * t[i]);
        sres += r * r;
    }
    fit.r2 = syy > 0.0 ? std::clamp(1.0 - sres / syy, 0.0, 1.0) : 0.0;
    fit.points_used = static_cast<int>(t.size());
    return fit;
}

namespace {

void require_stable(const sim::System& sys) {
    if (const auto* spec = std::get_if<model::ModelSpec>(&sys)) {
        if (!model::drifts_negative(spec->mu())) throw StabilityError("mixing requires mu < 0");
        if (!(model::min_eigenvalue(spec->gamma()) > model::kPdTolerance)) throw PreconditionError("gamma is not positive definite");
        return;
    }
    const auto& ps = std::get<sim::ParticleSystem>(sys);
    if (!ps.hard && !model::drifts_negative(model::gap_drift(ps.mu)))
        throw StabilityError("soft-reflection gaps require mu_{i+1} - mu_i < 0");
}

Matrix observe(const sim::System& sys, const Matrix& states) {
    if (std::holds_alternative<sim::ParticleSystem>(sys)) return sim::gaps(states);
    return states;
}

double expected_null_tv(const Histogram& pooled, double na, double nb) {
    double s = 0.0;
    for (double p : pooled.mass) s += std::sqrt(p * (1.0 - p) * (1.0 / na + 1.0 / nb));
    return 0.5 * std::sqrt(2.0 / std::numbers::pi) * s;
}

}  // namespace

MixingCurve mixing_curve(const sim::System& sys, const Vector& x0_a, const Vector& x0_b, std::uint64_t seed_a,
                         std::uint64_t seed_b, const MixingOptions& opts) {
    require_stable(sys);
    const auto every = static_cast<int>(std::llround(opts.obs_interval / opts.dt));
    if (every < 1) throw PreconditionError("observation interval shorter than dt");

    sim::SimOptions so;
    so.scheme = opts.scheme;
    const auto ens_a = sim::run_ensemble(sys, x0_a, opts.n_paths, opts.dt, opts.t_max, seed_a, sim::Keep::thinned(every), opts.workers, so);
    const auto ens_b = sim::run_ensemble(sys, x0_b, opts.n_paths, opts.dt, opts.t_max, seed_b, sim::Keep::thinned(every), opts.workers, so);

    std::vector<Matrix> obs_a;
    std::vector<Matrix> obs_b;
    for (std::size_t t = 0; t < ens_a.times.size(); ++t) {
        obs_a.push_back(observe(sys, ens_a.snapshots[t]));
        obs_b.push_back(observe(sys, ens_b.snapshots[t]));
    }
    const auto dims = obs_a.back().cols();
    const Projection proj = opts.projection.value_or(dims == 1 ? Projection::Joint : Projection::Marginal);
    if (proj == Projection::Joint && dims > 2) throw PreconditionError("joint histograms support at most 2 dimensions");

    const Matrix& last_a = obs_a.back();
    const Matrix& last_b = obs_b.back();
    Matrix pooled(last_a.rows() + last_b.rows(), dims);
    pooled << last_a, last_b;

    std::vector<std::vector<double>> edges;
    for (Eigen::Index c = 0; c < dims; ++c) {
        const Vector col = pooled.col(c);
        edges.push_back(freedman_diaconis_edges(std::span<const double>(col.data(), col.size()), opts.max_bins));
    }

    MixingCurve curve;
    curve.times = ens_a.times;
    curve.n_paths = opts.n_paths;
    const double na = static_cast<double>(last_a.rows());
    const double nb = static_cast<double>(last_b.rows());

    auto tv_at = [&](const Matrix& a, const Matrix& b) {
        if (proj == Projection::Joint) return tv_distance(empirical_histogram(a, edges), empirical_histogram(b, edges));
        double worst = 0.0;
        for (Eigen::Index c = 0; c < dims; ++c) {
            const std::vector<std::vector<double>> e{edges[static_cast<std::size_t>(c)]};
            worst = std::max(worst, tv_distance(empirical_histogram(a.col(c), e), empirical_histogram(b.col(c), e)));
        }
        return worst;
    };
    for (std::size_t t = 0; t < curve.times.size(); ++t) curve.tv.push_back(tv_at(obs_a[t], obs_b[t]));

    if (proj == Projection::Joint) {
        curve.noise_floor = expected_null_tv(empirical_histogram(pooled, edges), na, nb);
    } else {
        for (Eigen::Index c = 0; c < dims; ++c) {
            const std::vector<std::vector<double>> e{edges[static_cast<std::size_t>(c)]};
            curve.noise_floor = std::max(curve.noise_floor, expected_null_tv(empirical_histogram(pooled.col(c), e), na, nb));
        }
    }
    return curve;
}

Window noise_limited_window(const MixingCurve& curve, double floor_factor) {
    Window w{0.0, curve.times.empty() ? 0.0 : curve.times.back()};
    const double threshold = floor_factor * curve.noise_floor;
    for (std::size_t i = 0; i < curve.times.size(); ++i) {
        if (curve.tv[i] < threshold) {
            w.t_hi = i == 0 ? 0.0 : curve.times[i - 1];
            break;
        }
    }
    return w;
}

TailEstimate tail_functional(const Matrix& samples, double lambda) {
    if (!(lambda > 0.0)) throw PreconditionError("tail_functional requires lambda > 0");
    if (samples.rows() == 0) throw PreconditionError("tail_functional requires samples");
    const auto n = samples.rows();
    double mean = 0.0;
    double m2 = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double v = lyapunov::lyapunov_V(samples.row(i).transpose(), lambda);
        const double delta = v - mean;
        mean += delta / static_cast<double>(i + 1);
        m2 += delta * (v - mean);
    }
    const double var = n > 1 ? m2 / static_cast<double>(n - 1) : 0.0;
    return {mean, std::sqrt(var / static_cast<double>(n))};
}

std::vector<PenaltyRow> penalty_sweep(const Vector& mu, const Vector& z0, std::span<const double> betas, double t_obs,
                                      std::int64_t n_paths, std::uint64_t seed, const PenaltyOptions& opts) {
    if (mu.size() < 2) throw PreconditionError("penalty_sweep requires at least two particles");
    if (betas.empty()) throw PreconditionError("penalty_sweep requires betas");
    for (std::size_t i = 0; i < betas.size(); ++i) {
        if (!(betas[i] > 0.0) || (i > 0 && !(betas[i] > betas[i - 1])))
            throw PreconditionError("betas must be positive and strictly increasing");
    }

    sim::SimOptions so;
    so.scheme = opts.scheme;
    const sim::ParticleSystem hard{mu, model::Potential::zero(), true};
    const Matrix ref = sim::gaps(
        sim::run_ensemble(hard, z0, n_paths, opts.dt, t_obs, rng::derive_seed(seed, 0), sim::Keep::terminal(), opts.workers, so)
            .terminal_states());

    std::vector<PenaltyRow> rows;
    for (std::size_t i = 0; i < betas.size(); ++i) {
        const sim::ParticleSystem soft{mu, model::Potential::exponential(betas[i]), false};
        const Matrix g = sim::gaps(sim::run_ensemble(soft, z0, n_paths, opts.dt, t_obs, rng::derive_seed(seed, i + 1),
                                                     sim::Keep::terminal(), opts.workers, so)
                                       .terminal_states());
        double dist = 0.0;
        for (Eigen::Index c = 0; c < g.cols(); ++c) {
            const Vector a = g.col(c);
            const Vector b = ref.col(c);
            dist = std::max(dist, ks_two_sample(std::span<const double>(a.data(), a.size()),
                                                std::span<const double>(b.data(), b.size())));
        }
        rows.push_back({betas[i], dist, n_paths});
    }
    return rows;
}

TrendCheck nonincreasing_trend(const std::vector<PenaltyRow>& rows) {
    TrendCheck tc;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const double inc = rows[i].distance - rows[i - 1].distance;
        if (inc > 0.0) {
            ++tc.inversions;
            tc.largest_increase = std::max(tc.largest_increase, inc);
        }
    }
    return tc;
}

}  // namespace grbm::stationary
