#pragma once

// Finite-difference reference for the generator applied to V. The bump is
// rebuilt from its Hermite conditions instead of the library coefficients.

#include <cmath>
#include <vector>

#include "grbm/model.hpp"
#include "oracles.hpp"

namespace oracle {

using grbm::Matrix;
using grbm::Vector;

// Direct evaluation of V from its definition, with the bump given by the
// Hermite coefficients solved independently below.
inline std::vector<double> hermite_coefficients() {
    // p(t) = sum_k c_k t^k on t in [0, 1/2]; p, p', p'' vanish at 0 and match
    // s = t + 1/2 at t = 1/2 (value 1, slope 1, curvature 0).
    Mat a(6, std::vector<double>(6, 0.0));
    std::vector<double> rhs(6, 0.0);
    const double h = 0.5;
    for (int k = 0; k < 6; ++k) {
        a[0][k] = k == 0 ? 1 : 0;
        a[1][k] = k == 1 ? 1 : 0;
        a[2][k] = k == 2 ? 2 : 0;
        a[3][k] = std::pow(h, k);
        a[4][k] = k >= 1 ? k * std::pow(h, k - 1) : 0;
        a[5][k] = k >= 2 ? k * (k - 1) * std::pow(h, k - 2) : 0;
    }
    rhs[3] = 1.0;
    rhs[4] = 1.0;
    return solve(a, rhs);
}

inline double phi_ref(double s) {
    static const auto c = hermite_coefficients();
    if (s <= 0.5) return 0.0;
    if (s >= 1.0) return s;
    const double t = s - 0.5;
    double v = 0.0;
    for (int k = 5; k >= 0; --k) v = v * t + c[static_cast<std::size_t>(k)];
    return v;
}

inline double v_ref(const Vector& x, double lambda) { return std::exp(lambda * phi_ref(x.norm())); }

// Second-order central differences of the generator applied to V:
// 1/2 sum Gamma_ij d_ij V + sum b_i d_i V, with Richardson extrapolation
// between steps h and h/2.
inline double fd_generator(const grbm::model::ModelSpec& spec, double lambda, const Vector& x, double h) {
    const int d = spec.dim();
    const Matrix& g = spec.gamma();
    const Vector b = spec.drift(x);
    auto f = [&](const Vector& y) { return v_ref(y, lambda); };
    auto apply = [&](double step) {
        const double f0 = f(x);
        double total = 0.0;
        for (int i = 0; i < d; ++i) {
            Vector ei = Vector::Zero(d);
            ei[i] = step;
            const double fp = f(x + ei), fm = f(x - ei);
            total += b[i] * (fp - fm) / (2 * step);
            total += 0.5 * g(i, i) * (fp - 2 * f0 + fm) / (step * step);
            for (int j = i + 1; j < d; ++j) {
                if (g(i, j) == 0.0) continue;
                Vector ej = Vector::Zero(d);
                ej[j] = step;
                const double mixed = (f(x + ei + ej) - f(x + ei - ej) - f(x - ei + ej) + f(x - ei - ej)) / (4 * step * step);
                total += g(i, j) * mixed;  // both (i,j) and (j,i) with the 1/2
            }
        }
        return total;
    };
    const double coarse = apply(h);
    const double fine = apply(h / 2);
    return (4 * fine - coarse) / 3;
}

}  // namespace oracle
