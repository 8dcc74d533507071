#include <doctest.h>

#include <cmath>
#include <random>

#include "grbm/error.hpp"
#include "grbm/lyapunov.hpp"
#include "grbm/model.hpp"
#include "lyapunov_oracles.hpp"
#include "oracles.hpp"

using namespace grbm;
using namespace grbm::lyapunov;

namespace {

Vector vec(std::initializer_list<double> v) {
    Vector out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) out[i++] = x;
    return out;
}

Matrix random_spd(std::mt19937_64& gen, int d) {
    std::normal_distribution<double> n01;
    Matrix a(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) a(i, j) = n01(gen);
    return a * a.transpose() / d + 0.5 * Matrix::Identity(d, d);
}

Vector random_direction(std::mt19937_64& gen, int d) {
    std::normal_distribution<double> n01;
    Vector v(d);
    do {
        for (int i = 0; i < d; ++i) v[i] = n01(gen);
    } while (v.norm() == 0.0);
    return v / v.norm();
}

}  // namespace

TEST_CASE("bump profile") {
    CHECK(bump_eval(0.3).phi == 0.0);
    CHECK(bump_eval(0.3).dphi == 0.0);
    CHECK(bump_eval(0.3).ddphi == 0.0);
    const auto two = bump_eval(2.0);
    CHECK(two.phi == 2.0);
    CHECK(two.dphi == 1.0);
    CHECK(two.ddphi == 0.0);
    CHECK(bump_eval(0.75).phi == doctest::Approx(oracle::phi_ref(0.75)).epsilon(1e-14));
    CHECK(bump_eval(0.75).phi == doctest::Approx(0.421875));
    CHECK_THROWS_AS(bump_eval(-1e-9), PreconditionError);

    // C^2 at both joins: one-sided limits agree.
    for (double s : {0.5, 1.0}) {
        const auto lo = bump_eval(s - 1e-10);
        const auto hi = bump_eval(s + 1e-10);
        CHECK(std::abs(lo.phi - hi.phi) < 1e-9);
        CHECK(std::abs(lo.dphi - hi.dphi) < 1e-9);
        CHECK(std::abs(lo.ddphi - hi.ddphi) < 1e-7);
    }
    for (int k = 0; k <= 10000; ++k) CHECK(bump_eval(2.0 * k / 10000).dphi >= 0.0);
    // Interior values against the oracle polynomial.
    for (int k = 1; k < 50; ++k) {
        const double s = 0.5 + 0.5 * k / 50;
        CHECK(bump_eval(s).phi == doctest::Approx(oracle::phi_ref(s)).epsilon(1e-12));
    }
}

TEST_CASE("lyapunov_V") {
    CHECK(lyapunov_V(vec({0.1, -0.2}), 3.0) == 1.0);
    CHECK(lyapunov_V(vec({2.0, 0.0}), 0.5) == doctest::Approx(std::exp(1.0)).epsilon(1e-15));
    CHECK(lyapunov_V(vec({3.0, 4.0}), 1.0) == doctest::Approx(148.4131591025766).epsilon(1e-14));
    CHECK_THROWS_AS(lyapunov_V(vec({1.0}), 0.0), PreconditionError);
    std::mt19937_64 gen(3);
    std::uniform_real_distribution<double> u(0, 30);
    for (int k = 0; k < 100; ++k) CHECK(lyapunov_V(random_direction(gen, 3) * u(gen), 0.7) >= 1.0);
}

TEST_CASE("psi derivatives against finite differences") {
    const auto zero = psi_derivatives(Vector::Zero(3));
    CHECK(zero.grad.norm() == 0.0);
    CHECK(zero.hess.norm() == 0.0);

    std::mt19937_64 gen(11);
    std::uniform_real_distribution<double> u01(0, 1);
    const double h = 1e-5;
    auto psi = [](const Vector& y) { return oracle::phi_ref(y.norm()); };
    int count = 0;
    for (int d : {1, 2, 3, 5, 10}) {
        for (int k = 0; k < 200; ++k, ++count) {
            const double r = (k % 4 == 0) ? 0.6 + 0.3 * u01(gen) : 1.1 + 18.9 * u01(gen);
            const Vector x = random_direction(gen, d) * r;
            const auto pd = psi_derivatives(x);
            Vector fd_grad(d);
            Matrix fd_hess(d, d);
            for (int i = 0; i < d; ++i) {
                Vector e = Vector::Zero(d);
                e[i] = h;
                fd_grad[i] = (psi(x + e) - psi(x - e)) / (2 * h);
                fd_hess.col(i) = (psi_derivatives(x + e).grad - psi_derivatives(x - e).grad) / (2 * h);
            }
            CHECK((pd.grad - fd_grad).cwiseAbs().maxCoeff() <= 1e-6 * std::max(1.0, pd.grad.norm()));
            CHECK((pd.hess - fd_hess).cwiseAbs().maxCoeff() <= 1e-6 * std::max(1.0, pd.hess.norm()));
            if (r >= 1.0) {
                CHECK(pd.grad.norm() == doctest::Approx(1.0).epsilon(1e-14));
                // Operator norm of the symmetric Hessian.
                Eigen::SelfAdjointEigenSolver<Matrix> es(pd.hess);
                CHECK(es.eigenvalues().cwiseAbs().maxCoeff() <= 2.0 / r + 1e-14);
            }
        }
    }
    CHECK(count == 1000);
}

TEST_CASE("generator closed form") {
    const model::ModelSpec spec(Matrix::Identity(2, 2), vec({-1, -1}), model::tandem_reflection(2),
                                model::Potential::zero());
    const Vector x = vec({3, 4});
    CHECK(generator_apply(spec, 1.0, x) == doctest::Approx(-0.8 * std::exp(5.0)).epsilon(1e-13));
    CHECK(generator_apply(spec, 1.0, x) == doctest::Approx(-118.7305).epsilon(1e-6));
    CHECK(oracle::fd_generator(spec, 1.0, x, 1e-2) == doctest::Approx(-0.8 * std::exp(5.0)).epsilon(1e-8));
    CHECK(generator_apply(spec, 2.0, vec({0.3, -0.2})) == 0.0);
}

TEST_CASE("generator agrees with finite differences of V") {
    std::mt19937_64 gen(2024);
    std::uniform_real_distribution<double> u01(0, 1);
    double worst = 0.0;
    int points = 0;
    for (int d : {1, 2, 3, 5, 10}) {
        for (int k = 0; k < 200; ++k, ++points) {
            const Matrix g = random_spd(gen, d);
            Vector mu(d);
            for (int i = 0; i < d; ++i) mu[i] = -0.2 - 2.0 * u01(gen);
            const auto spec = model::make_tandem_model(g, mu, 0.5 + u01(gen));
            const double lambda = 0.1 + 0.9 * u01(gen);
            const Vector x = random_direction(gen, d) * (2.0 + 8.0 * u01(gen));
            const double a = generator_apply(spec, lambda, x);
            const double fd = oracle::fd_generator(spec, lambda, x, 1e-2);
            const double rel = std::abs(a - fd) / std::abs(a);
            worst = std::max(worst, rel);
            CHECK(rel <= 1e-5);
        }
    }
    CHECK(points == 1000);
    MESSAGE("worst relative generator error " << worst);
}

TEST_CASE("generator with a general reflection matrix") {
    std::mt19937_64 gen(5);
    std::uniform_real_distribution<double> u01(-1, 1);
    for (int k = 0; k < 50; ++k) {
        Matrix r = Matrix::Identity(3, 3);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                if (i != j) r(i, j) = u01(gen);
        const model::ModelSpec spec(random_spd(gen, 3), vec({-1, -0.5, -2}), r, model::Potential::exponential(1.0));
        const Vector x = random_direction(gen, 3) * 4.0;
        // b_i = mu_i + sum_j r_ij U'(x_j) by direct summation.
        Vector b = spec.mu();
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) b[i] += r(i, j) * std::exp(-x[j]);
        CHECK((spec.drift(x) - b).cwiseAbs().maxCoeff() <= 1e-12 * (1 + b.cwiseAbs().maxCoeff()));
        const double a = generator_apply(spec, 0.4, x);
        CHECK(std::abs(a - oracle::fd_generator(spec, 0.4, x, 1e-2)) <= 1e-5 * std::abs(a));
    }
}

TEST_CASE("beta_d and gamma_d") {
    const auto oy = model::make_tandem_model(Matrix::Identity(2, 2), vec({-1, -1}));
    CHECK(beta_d(oy, vec({1, 0})) == doctest::Approx(-1 + std::exp(-1.0)).epsilon(1e-14));
    CHECK(beta_d(oy, vec({0, 1})) == doctest::Approx(-2 + std::exp(-1.0)).epsilon(1e-14));
    CHECK_THROWS_AS(beta_d(oy, vec({0, 0})), PreconditionError);

    const model::ModelSpec zero(Matrix::Identity(3, 3), vec({-1, -2, -0.5}), model::tandem_reflection(3),
                                model::Potential::zero());
    const Vector x = vec({1, -2, 3});
    CHECK(beta_d(zero, x) == doctest::Approx(zero.mu().dot(x) / x.norm()));
    CHECK(gamma_d(zero, vec({-1, -2, -3})) == 0.0);
    CHECK_THROWS_AS(gamma_d(zero, vec({-1, 0, -3})), PreconditionError);

    for (int d : {2, 3, 5}) {
        const auto spec = model::make_tandem_model(Matrix::Identity(d, d), Vector::Constant(d, -1.0));
        const double t = 3.0;
        CHECK(gamma_d(spec, Vector::Constant(d, -t)) == doctest::Approx(-std::exp(t) / std::sqrt(d)).epsilon(1e-13));
    }

    std::mt19937_64 gen(9);
    std::uniform_real_distribution<double> u(0.05, 6.0);
    for (int d : {2, 3, 5}) {
        Vector mu(d);
        for (int i = 0; i < d; ++i) mu[i] = -0.3 - 0.2 * i;
        const auto spec = model::make_tandem_model(Matrix::Identity(d, d), mu);
        for (int k = 0; k < 500; ++k) {
            Vector y(d);
            for (int i = 0; i < d; ++i) y[i] = -u(gen);
            const double b = beta_d(spec, y);
            const double identity = mu.dot(y) / y.norm() + gamma_d(spec, y);
            CHECK(std::abs(b - identity) <= 1e-12 * (1 + std::abs(b)));
            std::sort(y.begin(), y.end());
            CHECK(gamma_d(spec, y) <= y[0] / y.norm() * std::exp(-y[d - 1]) + 1e-12);
        }
    }
}

TEST_CASE("verify_drift") {
    const auto oy = model::make_tandem_model(Matrix::Identity(2, 2), vec({-1, -1}));
    const auto rep = certify_drift(oy, 0.5, 20000, 42);
    CHECK(rep.accepted());
    CHECK(rep.k >= 0.2);
    CHECK(rep.violation_count == 0);
    CHECK(rep.b >= 0.0);

    DriftOptions many;
    many.workers = 4;
    const auto again = certify_drift(oy, 0.5, 20000, 42, many);
    CHECK(again.k == rep.k);
    CHECK(again.b == rep.b);
    CHECK(again.r == rep.r);

    CHECK_THROWS_AS(verify_drift(model::make_tandem_model(Matrix::Identity(2, 2), vec({1, -1})), 0.5, 16, 160, 10, 1),
                    PreconditionError);

    // Zero potential in d = 1: on the positive side LV/V -> 1/8 - 1/2 = -3/8
    // for large r, on the negative side 1/8 + 1/2 = +5/8.
    const model::ModelSpec flat(Matrix::Identity(1, 1), vec({-1}), Matrix::Identity(1, 1), model::Potential::zero());
    CHECK(generator_ratio(flat, 0.5, vec({1e4})) == doctest::Approx(-0.375));
    CHECK(generator_ratio(flat, 0.5, vec({-1e4})) == doctest::Approx(0.625));
    const auto rej = verify_drift(flat, 0.5, 1e3, 1e4, 2000, 1);
    CHECK(rej.k == doctest::Approx(-0.625));
    CHECK_FALSE(rej.accepted());
}
