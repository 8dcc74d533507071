#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "grbm/model.hpp"
#include "grbm/types.hpp"

namespace grbm::sim {

enum class Scheme { EulerMaruyama, TamedEuler, HardRecursion };

std::string to_string(Scheme s);
Scheme scheme_from_string(const std::string& s);

/// Time-gridded path. Row k of `states` is the state at times[k]; with
/// thinning every `record_every` steps, times[k] = k * record_every * dt
/// (the final row is always the terminal step).
struct Trajectory {
    std::vector<double> times;
    Matrix states;
    std::uint64_t seed = 0;
    Scheme scheme = Scheme::TamedEuler;
    double dt = 0.0;
    int record_every = 1;

    int dim() const noexcept { return static_cast<int>(states.cols()); }
};

/// Lower-triangular L with L L^T = gamma.
Matrix cholesky(const Matrix& gamma);

struct SimOptions {
    Scheme scheme = Scheme::TamedEuler;
    /// Multiplies the noise; 0 gives the deterministic test mode.
    double noise_scale = 1.0;
    int record_every = 1;
    std::uint64_t path_index = 0;
};

inline constexpr double kBlowUpNorm = 1e12;

/// Number of steps for horizon T: ceil(T/dt) up to rounding slack.
std::int64_t step_count(double dt, double horizon);

/// One Euler update of the GRBM given the already-correlated increment
/// (L xi sqrt(dt)). TamedEuler replaces b dt by b dt / (1 + dt |b|).
void grbm_update(const model::ModelSpec& spec, Scheme scheme, double dt, std::span<double> x,
                 std::span<const double> increment);

/// One Euler update of the soft-reflection particle system with increment
/// xi sqrt(dt): particle 1 drifts at mu_1, particle i >= 2 at
/// mu_i + U'(z_i - z_{i-1}).
void soft_particle_update(const Vector& mu, const model::Potential& pot, Scheme scheme, double dt,
                          std::span<double> z, std::span<const double> increment);

/// One step of the hard-reflection recursion: z_1 moves freely, then for
/// i = 2..d in order z_i <- max(z_i + mu_i dt + increment_i, z_{i-1}).
void hard_particle_update(const Vector& mu, double dt, std::span<double> z, std::span<const double> increment);

Trajectory simulate_grbm(const model::ModelSpec& spec, const Vector& x0, double dt, double horizon, std::uint64_t seed,
                         const SimOptions& opts = {});

Trajectory simulate_soft_particles(const Vector& mu, const model::Potential& pot, const Vector& z0, double dt,
                                   double horizon, std::uint64_t seed, const SimOptions& opts = {});

/// opts.scheme is ignored; the result is tagged HardRecursion.
Trajectory simulate_hard_particles(const Vector& mu, const Vector& z0, double dt, double horizon, std::uint64_t seed,
                                   const SimOptions& opts = {});

/// Consecutive differences z_{i+1} - z_i per row.
Trajectory gaps(const Trajectory& traj);
Matrix gaps(const Matrix& states);

/// d particles with drifts mu and soft (potential) or hard reflection.
struct ParticleSystem {
    Vector mu;
    model::Potential potential = model::Potential::exponential(1.0);
    bool hard = false;

    int dim() const noexcept { return static_cast<int>(mu.size()); }
};

using System = std::variant<model::ModelSpec, ParticleSystem>;

int system_dim(const System& sys);
std::string system_digest(const System& sys);

struct Keep {
    /// Record every `every` steps; 0 keeps the terminal state only.
    int every = 0;

    static Keep terminal() { return {0}; }
    static Keep thinned(int k) { return {k}; }
};

struct Ensemble {
    std::int64_t n_paths = 0;
    int dim = 0;
    std::uint64_t base_seed = 0;
    std::string model_digest;
    std::vector<double> times;
    /// snapshots[t] is n_paths x dim, row j = path j at times[t].
    std::vector<Matrix> snapshots;

    const Matrix& terminal_states() const { return snapshots.back(); }
};

/// Path j is simulated from stream (base_seed, j); results do not depend on
/// the worker count. x0 is shared by all paths.
Ensemble run_ensemble(const System& sys, const Vector& x0, std::int64_t n_paths, double dt, double horizon,
                      std::uint64_t base_seed, Keep keep = Keep::terminal(), int workers = 1, SimOptions opts = {});

}  // namespace grbm::sim
