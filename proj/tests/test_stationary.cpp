#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "grbm/error.hpp"
#include "grbm/lyapunov.hpp"
#include "grbm/sim.hpp"
#include "grbm/stationary.hpp"
#include "oracles.hpp"

using namespace grbm;
using namespace grbm::stationary;

namespace {

Vector vec(std::initializer_list<double> v) {
    Vector out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) out[i++] = x;
    return out;
}

model::ModelSpec one_dim() {
    return model::ModelSpec(Matrix::Identity(1, 1), vec({-1}), Matrix::Identity(1, 1), model::Potential::exponential(1.0));
}

Box box1(double lo, double hi) { return {vec({lo}), vec({hi})}; }

// Exact draws from the d = 1 stationary law: X = ln 2 - ln G, G ~ Gamma(2).
std::vector<double> exact_samples(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::gamma_distribution<double> g(2.0, 1.0);
    std::vector<double> out(n);
    for (auto& x : out) x = std::log(2.0) - std::log(g(gen));
    return out;
}

Histogram hist_from_masses(std::vector<double> m) {
    Histogram h;
    h.dims = 1;
    h.edges = {std::vector<double>(m.size() - 1)};
    for (std::size_t i = 0; i + 1 < m.size(); ++i) h.edges[0][i] = static_cast<double>(i);
    h.mass = std::move(m);
    return h;
}

}  // namespace

TEST_CASE("product_log_density") {
    const auto spec = one_dim();
    CHECK(product_log_density(spec, vec({0})) == doctest::Approx(-2.0).epsilon(1e-15));
    CHECK(std::exp(product_log_density(spec, vec({0}))) == doctest::Approx(0.135335283236613).epsilon(1e-12));
    // Mode at zero.
    for (double x : {-0.5, -0.1, 0.1, 0.5}) CHECK(product_log_density(spec, vec({x})) < product_log_density(spec, vec({0})));

    const model::ModelSpec diag(Matrix::Identity(2, 2), vec({-1, -1}), Matrix::Identity(2, 2),
                                model::Potential::exponential(1.0));
    const Vector x = vec({0.7, -0.3});
    const double sep = 2 * (-std::exp(-0.7) - 0.7) + 2 * (-std::exp(0.3) + 0.3);
    CHECK(product_log_density(diag, x) == doctest::Approx(sep).epsilon(1e-14));

    const auto oy = model::make_tandem_model(model::gap_covariance(3), vec({-1, -1}));
    CHECK_THROWS_AS(product_log_density(oy, vec({1, 1})), PreconditionError);
}

TEST_CASE("normalize_density") {
    auto d = product_density(one_dim());
    const double z = normalize_density(d, box1(-10, 40), 2000);
    CHECK(std::abs(z - 0.25) <= 1e-8 * 0.25);
    REQUIRE(d.z.has_value());
    auto d2 = product_density(one_dim());
    CHECK(std::abs(normalize_density(d2, box1(-10, 40), 4000) - z) <= 1e-8 * z);

    auto small = product_density(one_dim());
    CHECK_THROWS_AS(normalize_density(small, box1(-2, 5), 200), PreconditionError);

    DensitySpec uniform{"", 1, [](std::span<const double>) { return 0.0; }, {}, {}};
    CHECK_THROWS_AS(normalize_density(uniform, box1(0, 1), 10), PreconditionError);
    uniform.support = box1(0, 1);
    CHECK(normalize_density(uniform, box1(0, 1), 10) == doctest::Approx(1.0).epsilon(1e-14));

    DensitySpec gauss{"", 2, [](std::span<const double> x) { return -0.5 * (x[0] * x[0] + x[1] * x[1]); }, {}, {}};
    CHECK(normalize_density(gauss, {vec({-12, -12}), vec({12, 12})}, 200) ==
          doctest::Approx(2 * std::numbers::pi).epsilon(1e-10));
}

TEST_CASE("density CDF matches the Gamma closed form") {
    auto d = product_density(one_dim());
    normalize_density(d, box1(-10, 40), 2000);
    const auto cdf = density_cdf_1d(d);
    for (double x = -3; x <= 10; x += 0.25) CHECK(std::abs(cdf(x) - oracle::gamma2_cdf_law(x)) < 1e-10);
}

TEST_CASE("histograms and TV") {
    Matrix s(4, 1);
    s << 0.1, 0.2, 0.3, 0.4;
    const auto h = empirical_histogram(s, {{0.0, 1.0, 2.0}});
    CHECK(h.mass[1] == 1.0);
    double total = 0;
    for (double m : h.mass) total += m;
    CHECK(std::abs(total - 1.0) <= 1e-12);
    CHECK(tv_distance(h, h) == 0.0);
    Matrix s2(2, 1);
    s2 << 1.5, 5.0;  // one in range, one in the overflow cell
    const auto h2 = empirical_histogram(s2, {{0.0, 1.0, 2.0}});
    CHECK(h2.mass[2] == 0.5);
    CHECK(h2.mass[3] == 0.5);
    CHECK(tv_distance(h, h2) == 1.0);
    CHECK(tv_distance(hist_from_masses({0.5, 0.5}), hist_from_masses({1.0, 0.0})) == doctest::Approx(0.5));
    CHECK_THROWS_AS(tv_distance(h, empirical_histogram(s, {{0.0, 2.0}})), PreconditionError);
    CHECK_THROWS_AS(empirical_histogram(Matrix(0, 1), {{0.0, 1.0}}), PreconditionError);

    std::mt19937_64 gen(1);
    std::uniform_real_distribution<double> u;
    for (int k = 0; k < 100; ++k) {
        auto rnd = [&] {
            std::vector<double> m(6);
            double t = 0;
            for (auto& v : m) t += (v = u(gen));
            for (auto& v : m) v /= t;
            return hist_from_masses(m);
        };
        const auto p = rnd(), q = rnd(), r = rnd();
        CHECK(tv_distance(p, q) == tv_distance(q, p));
        CHECK(tv_distance(p, r) <= tv_distance(p, q) + tv_distance(q, r) + 1e-15);
    }

    // Many exact samples: cell masses approach the analytic cell probabilities.
    const auto xs = exact_samples(200000, 5);
    Matrix m(static_cast<Eigen::Index>(xs.size()), 1);
    for (std::size_t i = 0; i < xs.size(); ++i) m(static_cast<Eigen::Index>(i), 0) = xs[i];
    const std::vector<double> edges = {-1, 0, 0.5, 1, 2, 4};
    const auto hh = empirical_histogram(m, {edges});
    for (std::size_t c = 0; c + 1 < edges.size(); ++c) {
        const double p = oracle::gamma2_cdf_law(edges[c + 1]) - oracle::gamma2_cdf_law(edges[c]);
        CHECK(std::abs(hh.mass[c + 1] - p) <= 4 * std::sqrt(p * (1 - p) / 200000));
    }
}

TEST_CASE("Kolmogorov-Smirnov") {
    const auto xs = exact_samples(10000, 17);
    const double ks = ks_distance_1d(xs, oracle::gamma2_cdf_law);
    CHECK(ks < 1.63 / std::sqrt(10000.0));
    CHECK(ks_pvalue(ks, 10000) > 0.01);

    const std::vector<double> point = {0.0};
    // The statistic assumes a continuous CDF, so a point mass gives the full jump.
    CHECK(ks_distance_1d(point, [](double x) { return x < 0 ? 0.0 : 1.0; }) == 1.0);

    // Shift by 0.5: KS tends to the sup CDF gap.
    std::vector<double> shifted = exact_samples(200000, 3);
    for (auto& x : shifted) x += 0.5;
    double gap = 0;
    for (double x = -5; x < 15; x += 1e-3)
        gap = std::max(gap, std::abs(oracle::gamma2_cdf_law(x - 0.5) - oracle::gamma2_cdf_law(x)));
    CHECK(ks_distance_1d(shifted, oracle::gamma2_cdf_law) == doctest::Approx(gap).epsilon(0.03));

    CHECK(kolmogorov_survival(1.628) == doctest::Approx(0.01).epsilon(0.01));
    CHECK(ks_two_sample(xs, xs) == 0.0);
}

TEST_CASE("decay fits") {
    std::vector<double> t, tv;
    for (int i = 0; i <= 40; ++i) {
        t.push_back(0.25 * i);
        tv.push_back(std::exp(-0.3 * t.back()) * 0.45);
    }
    const auto exact = fit_decay_exponent(t, tv, {0, 10});
    CHECK(exact.delta == doctest::Approx(0.3).epsilon(1e-10));
    CHECK(exact.r2 == doctest::Approx(1.0));

    std::mt19937_64 gen(4);
    std::uniform_real_distribution<double> u(-1, 1);
    std::vector<double> noisy = tv;
    for (auto& v : noisy) v *= 1 + 0.05 * u(gen);
    const auto nf = fit_decay_exponent(t, noisy, {0, 10});
    CHECK(nf.delta >= 0.27);
    CHECK(nf.delta <= 0.33);

    const std::vector<double> flat(t.size(), 0.2);
    const auto cf = fit_decay_exponent(t, flat, {0, 10});
    CHECK(std::abs(cf.delta) < 1e-12);
    CHECK(cf.low_r2());

    CHECK_THROWS_AS(fit_decay_exponent(t, tv, {0, 0.5}), DomainError);
}

TEST_CASE("mixing curve") {
    const auto spec = one_dim();
    MixingOptions mo;
    mo.n_paths = 2000;
    mo.t_max = 20;
    mo.obs_interval = 1.0;
    mo.dt = 2e-3;
    const auto same = mixing_curve(spec, vec({1}), vec({1}), 9, 9, mo);
    for (double v : same.tv) CHECK(v == 0.0);

    const auto c = mixing_curve(spec, vec({-2}), vec({4}), 1, 2, mo);
    CHECK(c.tv.front() == 1.0);
    CHECK(c.tv.back() < 0.05 + c.noise_floor);
    CHECK(c.tv[3] < c.tv[1]);

    mo.n_paths = 8000;
    const auto c4 = mixing_curve(spec, vec({-2}), vec({4}), 1, 2, mo);
    CHECK(c4.noise_floor == doctest::Approx(c.noise_floor / 2).epsilon(0.2));

    const model::ModelSpec unstable(Matrix::Identity(1, 1), vec({1}), Matrix::Identity(1, 1), model::Potential::exponential(1));
    CHECK_THROWS_AS(mixing_curve(unstable, vec({0}), vec({1}), 1, 2, mo), StabilityError);
}

TEST_CASE("tail functional") {
    Matrix inside = Matrix::Constant(10, 2, 0.1);
    CHECK(tail_functional(inside, 3.0).mean == 1.0);
    Matrix far = Matrix::Constant(10, 1, 5.0);
    CHECK(tail_functional(far, 1e-9).mean == doctest::Approx(1.0).epsilon(1e-7));

    // Exact stationary samples against quadrature of V p / Z.
    const auto xs = exact_samples(100000, 8);
    Matrix m(static_cast<Eigen::Index>(xs.size()), 1);
    for (std::size_t i = 0; i < xs.size(); ++i) m(static_cast<Eigen::Index>(i), 0) = xs[i];
    const double lambda = 0.5;
    const auto est = tail_functional(m, lambda);
    const auto gl = gauss_legendre(64);
    double integral = 0.0;
    for (int p = 0; p < 500; ++p) {
        const double a = -10 + 0.1 * p, h = 0.05;
        for (std::size_t i = 0; i < gl.nodes.size(); ++i) {
            const double x = a + h * (1 + gl.nodes[i]);
            integral += h * gl.weights[i] * lyapunov::lyapunov_V(vec({x}), lambda) * 4 * std::exp(-2 * std::exp(-x) - 2 * x);
        }
    }
    CHECK(std::abs(est.mean - integral) <= 3 * est.std_error);
    CHECK_THROWS_AS(tail_functional(m, 0.0), PreconditionError);
}

TEST_CASE("penalty sweep plumbing") {
    const std::vector<double> betas = {1, 4};
    const auto rows = penalty_sweep(vec({0, -1}), vec({0, 1}), betas, 1.0, 500, 3);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].beta == 1.0);
    CHECK(rows[1].n_paths == 500);
    for (const auto& r : rows) CHECK(r.distance > 0.0);

    PenaltyOptions po;
    po.workers = 3;
    const auto again = penalty_sweep(vec({0, -1}), vec({0, 1}), betas, 1.0, 500, 3, po);
    CHECK(again[0].distance == rows[0].distance);
    CHECK(again[1].distance == rows[1].distance);

    const std::vector<double> bad = {2, 1};
    CHECK_THROWS_AS(penalty_sweep(vec({0, -1}), vec({0, 1}), bad, 1.0, 10, 3), PreconditionError);

    std::vector<PenaltyRow> tr = {{1, 0.5, 1}, {2, 0.3, 1}, {4, 0.32, 1}, {8, 0.1, 1}};
    const auto tc = nonincreasing_trend(tr);
    CHECK(tc.inversions == 1);
    CHECK(tc.largest_increase == doctest::Approx(0.02));
}

TEST_CASE("soft versus soft at the same beta sits at the noise floor") {
    const sim::ParticleSystem soft{vec({0, -1}), model::Potential::exponential(2.0), false};
    const std::int64_t n = 4000;
    const auto a = sim::gaps(sim::run_ensemble(soft, vec({0, 1}), n, 2e-3, 2.0, 10).terminal_states());
    const auto b = sim::gaps(sim::run_ensemble(soft, vec({0, 1}), n, 2e-3, 2.0, 11).terminal_states());
    const Vector ca = a.col(0), cb = b.col(0);
    const double ks = ks_two_sample(std::span<const double>(ca.data(), ca.size()), std::span<const double>(cb.data(), cb.size()));
    // Two-sample 1% critical value 1.63 sqrt(2/n).
    CHECK(ks < 1.63 * std::sqrt(2.0 / n));
}
