#include "grbm/sim.hpp"

#include <algorithm>
#include <cmath>

#include "grbm/error.hpp"
#include "grbm/io.hpp"
#include "grbm/parallel.hpp"
#include "grbm/rng.hpp"

namespace grbm::sim {

std::string to_string(Scheme s) {
    switch (s) {
        case Scheme::EulerMaruyama: return "euler-maruyama";
        case Scheme::TamedEuler: return "tamed-euler";
        case Scheme::HardRecursion: return "hard-recursion";
    }
    return "unknown";
}

Scheme scheme_from_string(const std::string& s) {
    if (s == "euler-maruyama") return Scheme::EulerMaruyama;
    if (s == "tamed-euler") return Scheme::TamedEuler;
    if (s == "hard-recursion") return Scheme::HardRecursion;
    throw ConfigError("unknown scheme '" + s + "'");
}

Matrix cholesky(const Matrix& gamma) {
    const auto d = gamma.rows();
    if (gamma.cols() != d) throw ConfigError("cholesky: matrix must be square");
    Matrix l = Matrix::Zero(d, d);
    for (Eigen::Index j = 0; j < d; ++j) {
        double pivot = gamma(j, j);
        for (Eigen::Index k = 0; k < j; ++k) pivot -= l(j, k) * l(j, k);
        if (!(pivot > 0.0)) throw NumericError("cholesky: non-positive pivot at column " + std::to_string(j));
        l(j, j) = std::sqrt(pivot);
        for (Eigen::Index i = j + 1; i < d; ++i) {
            double s = gamma(i, j);
            for (Eigen::Index k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
            l(i, j) = s / l(j, j);
        }
    }
    return l;
}

std::int64_t step_count(double dt, double horizon) {
    if (!(dt > 0.0) || !(dt <= 0.1)) throw PreconditionError("dt must lie in (0, 0.1]");
    if (!(horizon >= 0.0) || !std::isfinite(horizon)) throw PreconditionError("horizon must be finite and >= 0");
    const double ratio = horizon / dt;
    if (ratio > 1e9) throw PreconditionError("T/dt exceeds 1e9 steps");
    return static_cast<std::int64_t>(std::ceil(ratio - 1e-9));
}

namespace {

void apply_drift(Scheme scheme, double dt, std::span<double> x, const double* b) {
    const std::size_t d = x.size();
    double scale = dt;
    if (scheme == Scheme::TamedEuler) {
        double nb = 0.0;
        for (std::size_t i = 0; i < d; ++i) nb += b[i] * b[i];
        scale = dt / (1.0 + dt * std::sqrt(nb));
    }
    for (std::size_t i = 0; i < d; ++i) x[i] += b[i] * scale;
}

bool escaped(std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return !(s <= kBlowUpNorm * kBlowUpNorm);
}

// Per-path state machines. Each owns its scratch buffers; step() consumes d
// standard normals.
class GrbmStepper {
public:
    GrbmStepper(const model::ModelSpec& spec, Scheme scheme, double dt, double noise_scale)
        : spec_(spec), scheme_(scheme), dt_(dt), chol_(cholesky(spec.gamma()) * (noise_scale * std::sqrt(dt))),
          b_(spec.dim()), inc_(spec.dim()) {
        if (scheme == Scheme::HardRecursion) throw ConfigError("hard-recursion applies to hard particle systems only");
    }

    void step(std::span<double> x, std::span<const double> xi) {
        const int d = spec_.dim();
        for (int i = 0; i < d; ++i) {
            double s = 0.0;
            for (int j = 0; j <= i; ++j) s += chol_(i, j) * xi[j];
            inc_[i] = s;
        }
        spec_.drift(x, b_);
        apply_drift(scheme_, dt_, x, b_.data());
        for (int i = 0; i < d; ++i) x[i] += inc_[i];
    }

private:
    const model::ModelSpec& spec_;
    Scheme scheme_;
    double dt_;
    Matrix chol_;
    std::vector<double> b_;
    std::vector<double> inc_;
};

class SoftStepper {
public:
    SoftStepper(const ParticleSystem& sys, Scheme scheme, double dt, double noise_scale)
        : sys_(sys), scheme_(scheme), dt_(dt), noise_(noise_scale * std::sqrt(dt)), inc_(sys.mu.size()) {
        if (scheme == Scheme::HardRecursion) throw ConfigError("hard-recursion applies to hard particle systems only");
    }

    void step(std::span<double> z, std::span<const double> xi) {
        for (std::size_t i = 0; i < inc_.size(); ++i) inc_[i] = noise_ * xi[i];
        soft_particle_update(sys_.mu, sys_.potential, scheme_, dt_, z, inc_);
    }

private:
    const ParticleSystem& sys_;
    Scheme scheme_;
    double dt_;
    double noise_;
    std::vector<double> inc_;
};

class HardStepper {
public:
    HardStepper(const ParticleSystem& sys, double dt, double noise_scale)
        : sys_(sys), dt_(dt), noise_(noise_scale * std::sqrt(dt)), inc_(sys.mu.size()) {}

    void step(std::span<double> z, std::span<const double> xi) {
        for (std::size_t i = 0; i < inc_.size(); ++i) inc_[i] = noise_ * xi[i];
        hard_particle_update(sys_.mu, dt_, z, inc_);
    }

private:
    const ParticleSystem& sys_;
    double dt_;
    double noise_;
    std::vector<double> inc_;
};

// Runs one path, invoking record(row_index_in_output, step, x) at recorded steps.
template <class Stepper, class Record>
void run_path(Stepper& stepper, std::span<double> x, std::int64_t n_steps, int record_every, std::uint64_t seed,
              std::uint64_t path, Record&& record) {
    rng::GaussianStream stream(seed, path);
    std::vector<double> xi(x.size());
    if (escaped(x)) throw BlowUpError(path, 0, "initial state is not finite");
    if (record_every > 0) record(0, x);
    for (std::int64_t s = 1; s <= n_steps; ++s) {
        stream.fill(xi);
        stepper.step(x, xi);
        if (escaped(x)) throw BlowUpError(path, static_cast<std::uint64_t>(s), "state left the finite range");
        if (record_every > 0 ? (s % record_every == 0 || s == n_steps) : s == n_steps) record(s, x);
    }
    if (n_steps == 0 && record_every == 0) record(0, x);
}

std::vector<std::int64_t> recorded_steps(std::int64_t n_steps, int record_every) {
    std::vector<std::int64_t> out;
    if (record_every <= 0) {
        out.push_back(n_steps);
        return out;
    }
    for (std::int64_t s = 0; s <= n_steps; s += record_every) out.push_back(s);
    if (out.back() != n_steps) out.push_back(n_steps);
    return out;
}

template <class Stepper>
Trajectory trajectory_from(Stepper& stepper, const Vector& x0, double dt, double horizon, std::uint64_t seed,
                           const SimOptions& opts, Scheme tag) {
    if (opts.record_every < 1) throw PreconditionError("record_every must be >= 1");
    const std::int64_t n = step_count(dt, horizon);
    const auto steps = recorded_steps(n, opts.record_every);
    Trajectory t;
    t.seed = seed;
    t.scheme = tag;
    t.dt = dt;
    t.record_every = opts.record_every;
    t.states.resize(static_cast<Eigen::Index>(steps.size()), x0.size());
    t.times.reserve(steps.size());
    for (auto s : steps) t.times.push_back(static_cast<double>(s) * dt);
    std::vector<double> x(x0.data(), x0.data() + x0.size());
    Eigen::Index row = 0;
    run_path(stepper, std::span<double>(x), n, opts.record_every, seed, opts.path_index,
             [&](std::int64_t, std::span<const double> state) {
                 for (std::size_t c = 0; c < state.size(); ++c) t.states(row, static_cast<Eigen::Index>(c)) = state[c];
                 ++row;
             });
    return t;
}

void check_dim(const Vector& x0, int d, const char* what) {
    if (x0.size() != d) throw ConfigError(std::string(what) + ": initial state has wrong dimension");
}

void check_ordered(const Vector& z0) {
    for (Eigen::Index i = 1; i < z0.size(); ++i) {
        if (!(z0[i] >= z0[i - 1])) throw PreconditionError("hard particles require an ascending initial configuration");
    }
}

}  // namespace

void grbm_update(const model::ModelSpec& spec, Scheme scheme, double dt, std::span<double> x,
                 std::span<const double> increment) {
    std::vector<double> b(x.size());
    spec.drift(x, b);
    apply_drift(scheme, dt, x, b.data());
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += increment[i];
}

void soft_particle_update(const Vector& mu, const model::Potential& pot, Scheme scheme, double dt,
                          std::span<double> z, std::span<const double> increment) {
    const std::size_t d = z.size();
    double stack_buf[16];
    std::vector<double> heap;
    double* b = stack_buf;
    if (d > 16) {
        heap.resize(d);
        b = heap.data();
    }
    b[0] = mu[0];
    for (std::size_t i = 1; i < d; ++i) b[i] = mu[static_cast<Eigen::Index>(i)] + pot.derivative(z[i] - z[i - 1]);
    apply_drift(scheme, dt, z, b);
    for (std::size_t i = 0; i < d; ++i) z[i] += increment[i];
}

void hard_particle_update(const Vector& mu, double dt, std::span<double> z, std::span<const double> increment) {
    z[0] += mu[0] * dt + increment[0];
    for (std::size_t i = 1; i < z.size(); ++i) {
        z[i] = std::max(z[i] + mu[static_cast<Eigen::Index>(i)] * dt + increment[i], z[i - 1]);
    }
}

Trajectory simulate_grbm(const model::ModelSpec& spec, const Vector& x0, double dt, double horizon, std::uint64_t seed,
                         const SimOptions& opts) {
    check_dim(x0, spec.dim(), "simulate_grbm");
    GrbmStepper stepper(spec, opts.scheme, dt, opts.noise_scale);
    return trajectory_from(stepper, x0, dt, horizon, seed, opts, opts.scheme);
}

Trajectory simulate_soft_particles(const Vector& mu, const model::Potential& pot, const Vector& z0, double dt,
                                   double horizon, std::uint64_t seed, const SimOptions& opts) {
    check_dim(z0, static_cast<int>(mu.size()), "simulate_soft_particles");
    const ParticleSystem sys{mu, pot, false};
    SoftStepper stepper(sys, opts.scheme, dt, opts.noise_scale);
    return trajectory_from(stepper, z0, dt, horizon, seed, opts, opts.scheme);
}

Trajectory simulate_hard_particles(const Vector& mu, const Vector& z0, double dt, double horizon, std::uint64_t seed,
                                   const SimOptions& opts) {
    check_dim(z0, static_cast<int>(mu.size()), "simulate_hard_particles");
    check_ordered(z0);
    const ParticleSystem sys{mu, model::Potential::zero(), true};
    HardStepper stepper(sys, dt, opts.noise_scale);
    return trajectory_from(stepper, z0, dt, horizon, seed, opts, Scheme::HardRecursion);
}

Matrix gaps(const Matrix& states) {
    if (states.cols() < 2) throw PreconditionError("gaps require at least two particles");
    const auto d = states.cols();
    return states.rightCols(d - 1) - states.leftCols(d - 1);
}

Trajectory gaps(const Trajectory& traj) {
    Trajectory out = traj;
    out.states = gaps(traj.states);
    return out;
}

int system_dim(const System& sys) {
    return std::visit([](const auto& s) { return s.dim(); }, sys);
}

std::string system_digest(const System& sys) {
    if (const auto* spec = std::get_if<model::ModelSpec>(&sys)) return io::model_digest(*spec);
    return io::sha256_hex(io::particles_to_json_text(std::get<ParticleSystem>(sys)));
}

Ensemble run_ensemble(const System& sys, const Vector& x0, std::int64_t n_paths, double dt, double horizon,
                      std::uint64_t base_seed, Keep keep, int workers, SimOptions opts) {
    if (n_paths < 1) throw PreconditionError("run_ensemble requires n_paths >= 1");
    const int d = system_dim(sys);
    check_dim(x0, d, "run_ensemble");
    const std::int64_t n = step_count(dt, horizon);
    const auto steps = recorded_steps(n, keep.every);

    Ensemble ens;
    ens.n_paths = n_paths;
    ens.dim = d;
    ens.base_seed = base_seed;
    ens.model_digest = system_digest(sys);
    for (auto s : steps) ens.times.push_back(static_cast<double>(s) * dt);
    ens.snapshots.assign(steps.size(), Matrix(n_paths, d));

    const auto* particles = std::get_if<ParticleSystem>(&sys);
    if (particles && particles->hard) check_ordered(x0);

    parallel_for(n_paths, workers, [&](int, std::int64_t lo, std::int64_t hi) {
        std::vector<double> x(static_cast<std::size_t>(d));
        auto simulate = [&](auto& stepper) {
            for (std::int64_t p = lo; p < hi; ++p) {
                std::copy(x0.data(), x0.data() + d, x.begin());
                std::size_t slot = 0;
                run_path(stepper, std::span<double>(x), n, keep.every, base_seed, static_cast<std::uint64_t>(p),
                         [&](std::int64_t, std::span<const double> state) {
                             Matrix& snap = ens.snapshots[slot++];
                             for (int c = 0; c < d; ++c) snap(p, c) = state[static_cast<std::size_t>(c)];
                         });
            }
        };
        if (const auto* spec = std::get_if<model::ModelSpec>(&sys)) {
            GrbmStepper stepper(*spec, opts.scheme, dt, opts.noise_scale);
            simulate(stepper);
        } else if (particles->hard) {
            HardStepper stepper(*particles, dt, opts.noise_scale);
            simulate(stepper);
        } else {
            SoftStepper stepper(*particles, opts.scheme, dt, opts.noise_scale);
            simulate(stepper);
        }
    });
    return ens;
}

}  // namespace grbm::sim
