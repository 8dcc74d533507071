#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "grbm/model.hpp"
#include "grbm/sim.hpp"
#include "grbm/types.hpp"

namespace grbm::stationary {

struct Box {
    Vector lo;
    Vector hi;
};

/// Unnormalized log density with optional normalization constant.
struct DensitySpec {
    std::string model_digest;
    int dim = 0;
    std::function<double(std::span<const double>)> log_density;
    std::optional<double> z;
    std::optional<Box> support;
};

/// 2 [sum_i U(x_i) + ((2 Gamma - R)^{-1} mu) . x]. Requires the generalized
/// skew-symmetry condition at tolerance 1e-10.
double product_log_density(const model::ModelSpec& spec, const Vector& x);

/// Same density packaged for quadrature; (2 Gamma - R)^{-1} mu is solved once.
DensitySpec product_density(const model::ModelSpec& spec);

/// One-dimensional factor of the product density along coordinate i.
DensitySpec product_marginal(const model::ModelSpec& spec, int i);

/// Tensor Gauss-Legendre integral of exp(log_density) over the box (d <= 2).
/// Compares n and 2n nodes and returns the 2n value; sets dspec.z and
/// dspec.support. Throws when the box clips visible mass or the two rules
/// disagree by more than 1e-8 relative. The boundary check is skipped when
/// dspec.support is already set to exactly `domain`.
double normalize_density(DensitySpec& dspec, const Box& domain, int n_quad);

/// Gauss-Legendre nodes and weights on [-1, 1].
struct GaussLegendre {
    std::vector<double> nodes;
    std::vector<double> weights;
};
GaussLegendre gauss_legendre(int n);

/// CDF of a normalized 1-d density by composite Gauss-Legendre on the support.
std::function<double(double)> density_cdf_1d(const DensitySpec& dspec, int panels = 400, int nodes = 16);

/// Histogram with per-dimension edges. Cells include an underflow and an
/// overflow bin per dimension, so out-of-range samples stay in the mass.
struct Histogram {
    int dims = 0;
    std::vector<std::vector<double>> edges;
    std::vector<double> mass;
    std::int64_t n_samples = 0;

    int cells_in(int dim) const { return static_cast<int>(edges[static_cast<std::size_t>(dim)].size()) + 1; }
};

Histogram empirical_histogram(const Matrix& samples, const std::vector<std::vector<double>>& edges);

/// 1/2 sum |p - q| on a common grid.
double tv_distance(const Histogram& p, const Histogram& q);

/// Equal-width edges by the Freedman-Diaconis rule on `samples`, capped at
/// max_bins bins.
std::vector<double> freedman_diaconis_edges(std::span<const double> samples, int max_bins = 64);

/// sup |F_n - F| over the sample points.
double ks_distance_1d(std::span<const double> samples, const std::function<double(double)>& cdf);

/// sup |F_a - F_b| between two empirical CDFs.
double ks_two_sample(std::span<const double> a, std::span<const double> b);

/// Asymptotic Kolmogorov survival function P(K > lambda).
double kolmogorov_survival(double lambda);

/// p-value of a one-sample KS statistic with Stephens' small-sample correction.
double ks_pvalue(double d, std::int64_t n);

struct Window {
    double t_lo;
    double t_hi;
};

struct DecayFit {
    std::vector<double> times;
    std::vector<double> tv;
    double delta = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
    Window window{0.0, 0.0};
    int points_used = 0;

    bool low_r2() const noexcept { return r2 < 0.8; }
};

/// Least squares of log(tv) on t over points inside the window with
/// tv in (1e-3, 0.5). Requires at least 4 such points.
DecayFit fit_decay_exponent(std::span<const double> times, std::span<const double> tv, Window window);

enum class Projection { Joint, Marginal };

struct MixingOptions {
    double dt = 1e-3;
    double t_max = 10.0;
    double obs_interval = 0.25;
    std::int64_t n_paths = 10000;
    int workers = 1;
    sim::Scheme scheme = sim::Scheme::TamedEuler;
    /// Joint uses one histogram over all coordinates (dimension <= 2);
    /// Marginal takes the max TV over coordinate histograms.
    std::optional<Projection> projection;
    int max_bins = 64;
};

struct MixingCurve {
    std::vector<double> times;
    std::vector<double> tv;
    std::int64_t n_paths = 0;
    /// Expected TV between two independent samples of one law at the final grid time.
    double noise_floor = 0.0;
};

/// TV between two ensembles started from x0_a and x0_b. Particle systems are
/// observed through their gaps. Edges are fixed per experiment from the
/// pooled samples at the last grid time.
MixingCurve mixing_curve(const sim::System& sys, const Vector& x0_a, const Vector& x0_b, std::uint64_t seed_a,
                         std::uint64_t seed_b, const MixingOptions& opts);

/// Window from t = 0 until just before tv first falls below `floor_factor`
/// times the noise floor.
Window noise_limited_window(const MixingCurve& curve, double floor_factor = 3.0);

struct TailEstimate {
    double mean;
    double std_error;
};

/// Monte Carlo mean of V(x) = exp(lambda phi(|x|)) over sample rows.
TailEstimate tail_functional(const Matrix& samples, double lambda);

struct PenaltyRow {
    double beta;
    double distance;
    std::int64_t n_paths;
};

struct PenaltyOptions {
    double dt = 1e-3;
    int workers = 1;
    sim::Scheme scheme = sim::Scheme::TamedEuler;
};

/// For each beta, max over gap coordinates of the two-sample KS distance
/// between soft-reflection gaps (U_beta) and hard-recursion gaps at t_obs.
std::vector<PenaltyRow> penalty_sweep(const Vector& mu, const Vector& z0, std::span<const double> betas, double t_obs,
                                      std::int64_t n_paths, std::uint64_t seed, const PenaltyOptions& opts = {});

/// Number of increases along the distance column, and the largest one.
struct TrendCheck {
    int inversions = 0;
    double largest_increase = 0.0;
};
TrendCheck nonincreasing_trend(const std::vector<PenaltyRow>& rows);

}  // namespace grbm::stationary
