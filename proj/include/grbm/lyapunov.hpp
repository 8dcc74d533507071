#pragma once

#include <cstdint>
#include <vector>

#include "grbm/model.hpp"
#include "grbm/types.hpp"

namespace grbm::lyapunov {

struct BumpValue {
    double phi;
    double dphi;
    double ddphi;
};

/// C^2 increasing profile: 0 on [0, 1/2], s on [1, inf), and on (1/2, 1)
/// the quintic matching value, slope and curvature at both ends.
BumpValue bump_eval(double s);

/// V(x) = exp(lambda * phi(|x|)).
double lyapunov_V(const Vector& x, double lambda);

struct PsiDerivatives {
    Vector grad;
    Matrix hess;
};

/// Gradient and Hessian of psi(x) = phi(|x|).
PsiDerivatives psi_derivatives(const Vector& x);

/// LV(x) / V(x). Finite even where V itself overflows.
double generator_ratio(const model::ModelSpec& spec, double lambda, const Vector& x);

/// Exact generator applied to V at x.
double generator_apply(const model::ModelSpec& spec, double lambda, const Vector& x);

/// Directional drift functional beta_d(x) for the tandem reflection.
double beta_d(const model::ModelSpec& spec, const Vector& x);

/// Potential part of beta_d on the negative orthant.
double gamma_d(const model::ModelSpec& spec, const Vector& x);

/// lambda = min_i |mu_i| / (d ||Gamma||).
double default_lambda(const model::ModelSpec& spec);

/// Empirical certificate for LV <= -k V + b 1_{B_r}. Sampled, not rigorous.
struct DriftReport {
    double lambda = 0.0;
    double k = 0.0;              // -max LV/V over the shell samples
    double b = 0.0;              // max(0, max over B_r samples of LV + k V)
    double r = 0.0;
    double shell_outer = 0.0;
    double eps = 0.0;
    double target_rate = 0.0;    // drift_rate_bound(spec, eps)
    std::int64_t n_samples = 0;
    double worst_margin = 0.0;   // max over shell samples of LV/V + target_rate
    std::int64_t violation_count = 0;
    std::int64_t attempts = 1;

    bool accepted() const noexcept { return worst_margin <= 0.0 && violation_count == 0; }
};

struct ShellSample {
    std::int64_t idx;
    double radius;
    double lv_over_v;
};

struct DriftOptions {
    double eps = 0.05;
    int workers = 1;
    /// When set, receives one row per shell sample in index order.
    std::vector<ShellSample>* samples = nullptr;
};

/// Samples n points with direction uniform on the sphere and radius uniform
/// in [r, shell_outer], plus n points inside B_r for the offset b.
DriftReport verify_drift(const model::ModelSpec& spec, double lambda, double r, double shell_outer, std::int64_t n,
                         std::uint64_t seed, const DriftOptions& opts = {});

struct SearchOptions {
    double r_start = 16.0;
    double r_limit = 1048576.0;  // 2^20
    double shell_factor = 10.0;
};

/// Doubles r from r_start until verify_drift accepts or r exceeds r_limit;
/// returns the last report (accepted() false on failure).
DriftReport certify_drift(const model::ModelSpec& spec, double lambda, std::int64_t n, std::uint64_t seed,
                          const DriftOptions& opts = {}, const SearchOptions& search = {});

}  // namespace grbm::lyapunov
