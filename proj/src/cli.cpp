#include "grbm/cli.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <set>
#include <sstream>

#include <unistd.h>

#include <CLI11.hpp>

#include "grbm/error.hpp"
#include "grbm/io.hpp"
#include "grbm/lyapunov.hpp"
#include "grbm/model.hpp"
#include "grbm/parallel.hpp"
#include "grbm/rng.hpp"
#include "grbm/sim.hpp"
#include "grbm/stationary.hpp"
#include "grbm/svg.hpp"

namespace grbm::cli {

namespace fs = std::filesystem;
using nlohmann::json;

void apply_override(json& config, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects KEY=VALUE, got '" + assignment + "'");
    const std::string key = assignment.substr(0, eq);
    const std::string raw = assignment.substr(eq + 1);
    json value;
    try {
        value = json::parse(raw);
    } catch (const json::parse_error&) {
        value = raw;
    }
    json* node = &config;
    std::size_t start = 0;
    while (true) {
        const auto dot = key.find('.', start);
        const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (part.empty()) throw ConfigError("--set has an empty key segment in '" + key + "'");
        if (!node->is_object()) {
            if (!node->is_null()) throw ConfigError("--set path '" + key + "' crosses a non-object value");
            *node = json::object();
        }
        if (dot == std::string::npos) {
            (*node)[part] = value;
            return;
        }
        node = &(*node)[part];
        start = dot + 1;
    }
}

void ArtifactSet::add(std::string name, std::string content) { items_.emplace_back(std::move(name), std::move(content)); }

void ArtifactSet::commit(const std::string& config_digest, std::uint64_t seed) const {
    json manifest;
    manifest["config_digest"] = config_digest;
    manifest["seed"] = seed;
    manifest["tool_version"] = kToolVersion;
    manifest["artifacts"] = json::array();
    for (const auto& [name, content] : items_) manifest["artifacts"].push_back({{"name", name}, {"sha256", io::sha256_hex(content)}});

    const fs::path out = fs::absolute(out_dir_);
    const fs::path staging = out.parent_path() / ("." + out.filename().string() + ".staging-" + std::to_string(::getpid()));
    fs::remove_all(staging);
    fs::create_directories(staging);
    auto write = [&](const std::string& name, const std::string& content) {
        std::ofstream f(staging / name, std::ios::binary | std::ios::trunc);
        f << content;
        f.close();
        if (!f) throw Error("failed to write artifact " + name);
    };
    for (const auto& [name, content] : items_) write(name, content);
    write("manifest.json", manifest.dump(2) + "\n");

    fs::create_directories(out);
    for (const auto& [name, _] : items_) fs::rename(staging / name, out / name);
    fs::rename(staging / "manifest.json", out / "manifest.json");
    fs::remove_all(staging);
}

namespace {

// ---------------------------------------------------------------------------
// Config plumbing

const std::set<std::string> kTopKeys = {"kind", "model", "run", "analysis", "output_dir"};
const std::set<std::string> kRunKeys = {"dt", "T", "n_paths", "seed", "scheme"};

const std::map<std::string, std::set<std::string>>& analysis_keys() {
    static const std::map<std::string, std::set<std::string>> keys = {
        {"validate", {"probe_points", "probe_extent"}},
        {"simulate", {"x0", "record_every", "trajectory_path", "noise_scale"}},
        {"drift-check", {"lambda", "eps", "n_samples", "r", "r_start", "r_limit", "shell_factor"}},
        {"stationary-check", {"x0", "domain_lo", "domain_hi", "n_quad", "alpha", "lambda"}},
        {"mixing", {"x0_a", "x0_b", "t_max", "obs_interval", "projection", "max_bins", "floor_factor", "d_list", "mu_pattern",
                    "gap_a", "gap_b"}},
        {"rate-scaling", {"d_list", "mu_pattern"}},
        {"penalty-limit", {"betas", "t_obs", "z0"}},
    };
    return keys;
}

void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
    if (!obj.is_object()) throw ConfigError(where + " must be an object");
    for (const auto& [k, _] : obj.items()) {
        if (!allowed.count(k)) throw ConfigError("unknown key '" + k + "' in " + where);
    }
}

struct Context {
    std::string kind;
    json config;
    json run;
    json analysis;
    std::uint64_t seed = 0;
    int workers = 1;
    fs::path out_dir;
    std::ostream* out = nullptr;
    std::ostream* err = nullptr;
};

double get_number(const json& obj, const char* key, double fallback) {
    if (!obj.contains(key)) return fallback;
    if (!obj[key].is_number()) throw ConfigError(std::string("'") + key + "' must be a number");
    const double v = obj[key].get<double>();
    if (!std::isfinite(v)) throw InputError(std::string("'") + key + "' must be finite");
    return v;
}

std::int64_t get_int(const json& obj, const char* key, std::int64_t fallback) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj[key];
    if (v.is_number_integer()) return v.get<std::int64_t>();
    if (v.is_number_float()) {
        const double d = v.get<double>();
        if (d == std::floor(d) && std::abs(d) < 9e15) return static_cast<std::int64_t>(d);
    }
    throw ConfigError(std::string("'") + key + "' must be an integer");
}

Vector get_vector(const json& obj, const char* key) {
    const json& v = obj.at(key);
    if (!v.is_array()) throw ConfigError(std::string("'") + key + "' must be an array");
    Vector out(static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!v[i].is_number()) throw ConfigError(std::string("'") + key + "' must contain numbers");
        out[static_cast<Eigen::Index>(i)] = v[i].get<double>();
    }
    if (!out.allFinite()) throw InputError(std::string("'") + key + "' has non-finite entries");
    return out;
}

std::vector<int> get_int_list(const json& obj, const char* key) {
    const json& v = obj.at(key);
    if (!v.is_array() || v.empty()) throw ConfigError(std::string("'") + key + "' must be a non-empty array");
    std::vector<int> out;
    for (const auto& e : v) {
        if (!e.is_number_integer()) throw ConfigError(std::string("'") + key + "' must contain integers");
        out.push_back(e.get<int>());
    }
    return out;
}

sim::System system_from(const Context& ctx) {
    if (!ctx.config.contains("model")) throw ConfigError("config is missing 'model'");
    const json& m = ctx.config["model"];
    if (m.is_object() && m.contains("particles")) {
        reject_unknown(m, {"particles"}, "model");
        return io::particles_from_json(m["particles"]);
    }
    return io::model_from_json(m);
}

model::ModelSpec grbm_from(const Context& ctx) {
    auto sys = system_from(ctx);
    if (auto* spec = std::get_if<model::ModelSpec>(&sys)) return *spec;
    throw ConfigError(ctx.kind + " requires a GRBM model, not a particle system");
}

sim::Scheme scheme_from(const Context& ctx) {
    return sim::scheme_from_string(ctx.run.value("scheme", std::string("tamed-euler")));
}

Vector default_start(const sim::System& sys) {
    const int d = sim::system_dim(sys);
    if (std::holds_alternative<sim::ParticleSystem>(sys)) return Vector::LinSpaced(d, 0.0, static_cast<double>(d - 1));
    return Vector::Zero(d);
}

Vector start_from(const json& analysis, const char* key, const sim::System& sys) {
    if (!analysis.contains(key)) return default_start(sys);
    Vector v = get_vector(analysis, key);
    if (v.size() != sim::system_dim(sys)) throw ConfigError(std::string("'") + key + "' has wrong dimension");
    return v;
}

// ---------------------------------------------------------------------------
// Formatting

std::string fmt(double v) { return io::format_shortest(v); }

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::string states_csv(const std::string& first, const std::vector<double>& index, const Matrix& states) {
    std::string out = first;
    for (Eigen::Index c = 0; c < states.cols(); ++c) out += ",x" + std::to_string(c + 1);
    out += '\n';
    for (Eigen::Index r = 0; r < states.rows(); ++r) {
        out += fmt(index[static_cast<std::size_t>(r)]);
        for (Eigen::Index c = 0; c < states.cols(); ++c) out += "," + fmt(states(r, c));
        out += '\n';
    }
    return out;
}

std::string terminal_csv(const Matrix& states) {
    std::string out = "path";
    for (Eigen::Index c = 0; c < states.cols(); ++c) out += ",x" + std::to_string(c + 1);
    out += '\n';
    for (Eigen::Index r = 0; r < states.rows(); ++r) {
        out += std::to_string(r);
        for (Eigen::Index c = 0; c < states.cols(); ++c) out += "," + fmt(states(r, c));
        out += '\n';
    }
    return out;
}

double least_squares_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i] / n;
        my += y[i] / n;
    }
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    return sxy / sxx;
}

// ---------------------------------------------------------------------------
// Commands. Each fills the artifact set and returns an exit code.

json validation_json(const model::ValidationReport& rep) {
    json j;
    j["pd_ok"] = rep.pd_ok;
    j["lambda_min"] = rep.lambda_min;
    j["tridiag_ok"] = rep.tridiag_ok;
    j["potential_ok"] = {{"3a", rep.potential.c3a}, {"3b", rep.potential.c3b}, {"3c", rep.potential.c3c}};
    j["stability_ok"] = rep.stability_ok;
    j["all_ok"] = rep.all_ok();
    j["messages"] = rep.messages;
    return j;
}

int cmd_validate(Context& ctx, ArtifactSet& art) {
    const auto spec = grbm_from(ctx);
    model::ProbeGrid grid;
    grid.n_points = static_cast<int>(get_int(ctx.analysis, "probe_points", grid.n_points));
    grid.extent = get_number(ctx.analysis, "probe_extent", grid.extent);
    const auto rep = model::validate_model(spec, grid);
    const json j = validation_json(rep);
    art.add("validation.json", j.dump(2) + "\n");
    *ctx.out << j.dump(2) << "\n";
    return rep.all_ok() ? kOk : kDomainFailure;
}

int cmd_simulate(Context& ctx, ArtifactSet& art) {
    const auto sys = system_from(ctx);
    const Vector x0 = start_from(ctx.analysis, "x0", sys);
    const double dt = get_number(ctx.run, "dt", 1e-3);
    const double horizon = get_number(ctx.run, "T", 1.0);
    const auto n_paths = get_int(ctx.run, "n_paths", 1);
    sim::SimOptions so;
    so.scheme = scheme_from(ctx);
    so.noise_scale = get_number(ctx.analysis, "noise_scale", 1.0);
    so.record_every = static_cast<int>(get_int(ctx.analysis, "record_every", 1));
    so.path_index = static_cast<std::uint64_t>(get_int(ctx.analysis, "trajectory_path", 0));

    sim::Trajectory traj;
    if (const auto* spec = std::get_if<model::ModelSpec>(&sys)) {
        traj = sim::simulate_grbm(*spec, x0, dt, horizon, ctx.seed, so);
    } else {
        const auto& ps = std::get<sim::ParticleSystem>(sys);
        traj = ps.hard ? sim::simulate_hard_particles(ps.mu, x0, dt, horizon, ctx.seed, so)
                       : sim::simulate_soft_particles(ps.mu, ps.potential, x0, dt, horizon, ctx.seed, so);
    }
    art.add("trajectory.csv", states_csv("t", traj.times, traj.states));

    const auto ens = sim::run_ensemble(sys, x0, n_paths, dt, horizon, ctx.seed, sim::Keep::terminal(), ctx.workers, so);
    art.add("terminal.csv", terminal_csv(ens.terminal_states()));

    std::vector<svg::Series> series;
    for (Eigen::Index c = 0; c < traj.states.cols(); ++c) {
        svg::Series s{"x" + std::to_string(c + 1), traj.times, {}};
        for (Eigen::Index r = 0; r < traj.states.rows(); ++r) s.y.push_back(traj.states(r, c));
        series.push_back(std::move(s));
    }
    art.add("trajectory.svg", svg::line_chart(series, {"Sample path (" + sim::to_string(traj.scheme) + ")", "t", "state"}));
    *ctx.out << "simulated " << n_paths << " path(s), " << traj.times.size() << " recorded rows\n";
    return kOk;
}

json drift_json(const lyapunov::DriftReport& r) {
    json j;
    j["lambda"] = r.lambda;
    j["k"] = number_or_null(r.k);
    j["b"] = number_or_null(r.b);
    j["r"] = r.r;
    j["shell_outer"] = r.shell_outer;
    j["eps"] = r.eps;
    j["target_rate"] = r.target_rate;
    j["n_samples"] = r.n_samples;
    j["worst_margin"] = number_or_null(r.worst_margin);
    j["violation_count"] = r.violation_count;
    j["attempts"] = r.attempts;
    j["accepted"] = r.accepted();
    j["note"] = "empirical sampled certificate, not a rigorous proof";
    return j;
}

int cmd_drift_check(Context& ctx, ArtifactSet& art) {
    const auto spec = grbm_from(ctx);
    lyapunov::DriftOptions opts;
    opts.eps = get_number(ctx.analysis, "eps", 0.05);
    opts.workers = ctx.workers;
    const auto n = get_int(ctx.analysis, "n_samples", 100000);

    if (!model::drifts_negative(spec.mu())) {
        const json j = {{"accepted", false}, {"reason", "stability gate failed: mu must be componentwise negative"}};
        art.add("drift_report.json", j.dump(2) + "\n");
        *ctx.err << "drift-check: stability gate failed (mu must be < 0)\n";
        return kDomainFailure;
    }
    const double lambda = get_number(ctx.analysis, "lambda", lyapunov::default_lambda(spec));

    std::vector<lyapunov::ShellSample> samples;
    opts.samples = &samples;
    lyapunov::DriftReport rep;
    if (ctx.analysis.contains("r")) {
        const double r = get_number(ctx.analysis, "r", 16.0);
        rep = lyapunov::verify_drift(spec, lambda, r, get_number(ctx.analysis, "shell_factor", 10.0) * r, n, ctx.seed, opts);
    } else {
        lyapunov::SearchOptions search;
        search.r_start = get_number(ctx.analysis, "r_start", search.r_start);
        search.r_limit = get_number(ctx.analysis, "r_limit", search.r_limit);
        search.shell_factor = get_number(ctx.analysis, "shell_factor", search.shell_factor);
        rep = lyapunov::certify_drift(spec, lambda, n, ctx.seed, opts, search);
    }

    const json j = drift_json(rep);
    art.add("drift_report.json", j.dump(2) + "\n");
    std::string csv = "idx,radius,lv_over_v\n";
    csv.reserve(samples.size() * 48);
    for (const auto& s : samples) csv += std::to_string(s.idx) + "," + fmt(s.radius) + "," + fmt(s.lv_over_v) + "\n";
    art.add("drift_samples.csv", std::move(csv));
    *ctx.out << j.dump(2) << "\n";
    return rep.accepted() ? kOk : kDomainFailure;
}

int cmd_stationary_check(Context& ctx, ArtifactSet& art) {
    const auto spec = grbm_from(ctx);
    const int d = spec.dim();
    if (d > 2) throw ConfigError("stationary-check supports d <= 2");
    const double dt = get_number(ctx.run, "dt", 1e-3);
    const double horizon = get_number(ctx.run, "T", 50.0);
    const auto n_paths = get_int(ctx.run, "n_paths", 100000);
    const double alpha = get_number(ctx.analysis, "alpha", 0.01);
    const int n_quad = static_cast<int>(get_int(ctx.analysis, "n_quad", 2000));
    const Vector lo = ctx.analysis.contains("domain_lo") ? get_vector(ctx.analysis, "domain_lo") : Vector::Constant(d, -10.0);
    const Vector hi = ctx.analysis.contains("domain_hi") ? get_vector(ctx.analysis, "domain_hi") : Vector::Constant(d, 40.0);
    if (lo.size() != d || hi.size() != d) throw ConfigError("domain bounds have wrong dimension");

    // Applicability first: the product form needs skew-symmetry.
    auto joint = stationary::product_density(spec);
    stationary::Box box{lo, hi};
    const double z = stationary::normalize_density(joint, box, d == 1 ? n_quad : std::min(n_quad, 400));

    sim::SimOptions so;
    so.scheme = scheme_from(ctx);
    const Vector x0 = start_from(ctx.analysis, "x0", sim::System(spec));
    const auto ens = sim::run_ensemble(spec, x0, n_paths, dt, horizon, ctx.seed, sim::Keep::terminal(), ctx.workers, so);
    const Matrix& samples = ens.terminal_states();

    json j;
    j["Z"] = z;
    j["alpha"] = alpha;
    j["n_samples"] = n_paths;
    j["marginals"] = json::array();
    bool pass = true;
    std::vector<svg::Series> series;
    for (int i = 0; i < d; ++i) {
        auto marginal = stationary::product_marginal(spec, i);
        Vector mlo(1), mhi(1);
        mlo << lo[i];
        mhi << hi[i];
        const double zi = stationary::normalize_density(marginal, {mlo, mhi}, n_quad);
        const auto cdf = stationary::density_cdf_1d(marginal);
        const Vector col = samples.col(i);
        const double ks = stationary::ks_distance_1d(std::span<const double>(col.data(), col.size()), cdf);
        const double p = stationary::ks_pvalue(ks, n_paths);
        pass = pass && p >= alpha;
        j["marginals"].push_back({{"coordinate", i + 1}, {"Z", zi}, {"ks", ks}, {"p_value", p}, {"pass", p >= alpha}});

        const auto edges = stationary::freedman_diaconis_edges(std::span<const double>(col.data(), col.size()));
        const auto hist = stationary::empirical_histogram(col, {edges});
        svg::Series emp{"empirical x" + std::to_string(i + 1), {}, {}, true};
        svg::Series ana{"analytic x" + std::to_string(i + 1), {}, {}};
        for (std::size_t b = 0; b + 1 < edges.size(); ++b) {
            const double w = edges[b + 1] - edges[b];
            const double mid = 0.5 * (edges[b] + edges[b + 1]);
            emp.x.push_back(mid);
            emp.y.push_back(hist.mass[b + 1] / w);
            double xm[1] = {mid};
            ana.x.push_back(mid);
            ana.y.push_back(std::exp(marginal.log_density(xm)) / zi);
        }
        series.push_back(std::move(emp));
        series.push_back(std::move(ana));
    }
    const double lambda = get_number(ctx.analysis, "lambda", lyapunov::default_lambda(spec));
    const auto tail = stationary::tail_functional(samples, lambda);
    j["tail"] = {{"lambda", lambda}, {"mean_V", number_or_null(tail.mean)}, {"std_error", number_or_null(tail.std_error)}};
    j["pass"] = pass;
    art.add("stationary.json", j.dump(2) + "\n");
    art.add("terminal.csv", terminal_csv(samples));
    art.add("density.svg", svg::line_chart(series, {"Stationary marginals", "x", "density"}));
    *ctx.out << j.dump(2) << "\n";
    return pass ? kOk : kDomainFailure;
}

Vector mu_from_pattern(const json& pattern, int d) {
    reject_unknown(pattern, {"kind", "slope", "offset", "drift", "values"}, "mu_pattern");
    const std::string kind = pattern.value("kind", std::string("linear"));
    Vector mu(d);
    if (kind == "linear") {
        const double slope = get_number(pattern, "slope", -1.0);
        const double offset = get_number(pattern, "offset", 0.0);
        for (int i = 0; i < d; ++i) mu[i] = offset + slope * (i + 1);
    } else if (kind == "leader") {
        mu.setZero();
        mu[0] = get_number(pattern, "drift", -1.0) * d;
    } else if (kind == "explicit") {
        mu = get_vector(pattern, "values");
        if (mu.size() != d) throw ConfigError("explicit mu_pattern does not match d = " + std::to_string(d));
    } else {
        throw ConfigError("unknown mu_pattern kind '" + kind + "'");
    }
    return mu;
}

json fit_json(const stationary::DecayFit& fit, const stationary::MixingCurve& curve) {
    return {{"delta", fit.delta},         {"intercept", fit.intercept}, {"r2", fit.r2},
            {"low_r2", fit.low_r2()},     {"points_used", fit.points_used},
            {"window", {fit.window.t_lo, fit.window.t_hi}},
            {"noise_floor", curve.noise_floor},
            {"note", "empirical TV-decay exponent; not the constant of the ergodicity bound"}};
}

stationary::MixingOptions mixing_options(const Context& ctx) {
    stationary::MixingOptions mo;
    mo.dt = get_number(ctx.run, "dt", 1e-3);
    mo.n_paths = get_int(ctx.run, "n_paths", 20000);
    mo.t_max = get_number(ctx.analysis, "t_max", 10.0);
    mo.obs_interval = get_number(ctx.analysis, "obs_interval", 0.25);
    mo.max_bins = static_cast<int>(get_int(ctx.analysis, "max_bins", 64));
    mo.workers = ctx.workers;
    mo.scheme = scheme_from(ctx);
    if (ctx.analysis.contains("projection")) {
        const std::string p = ctx.analysis["projection"].get<std::string>();
        if (p == "joint") mo.projection = stationary::Projection::Joint;
        else if (p == "marginal") mo.projection = stationary::Projection::Marginal;
        else throw ConfigError("projection must be 'joint' or 'marginal'");
    }
    return mo;
}

int cmd_mixing(Context& ctx, ArtifactSet& art) {
    const auto mo = mixing_options(ctx);
    const double floor_factor = get_number(ctx.analysis, "floor_factor", 3.0);

    if (ctx.analysis.contains("d_list")) {
        // Soft-gap exponent table over particle counts.
        const auto ds = get_int_list(ctx.analysis, "d_list");
        const json pattern = ctx.analysis.value("mu_pattern", json{{"kind", "linear"}, {"slope", -1.0}});
        const double gap_a = get_number(ctx.analysis, "gap_a", 0.0);
        const double gap_b = get_number(ctx.analysis, "gap_b", 4.0);
        std::string csv = "d,delta,r2,n_paths\n";
        svg::Series s{"delta(d)", {}, {}, true};
        for (std::size_t k = 0; k < ds.size(); ++k) {
            const int d = ds[k];
            if (d < 2) throw ConfigError("d_list entries must be >= 2");
            sim::ParticleSystem ps{mu_from_pattern(pattern, d), model::Potential::exponential(1.0), false};
            Vector za(d), zb(d);
            for (int i = 0; i < d; ++i) {
                za[i] = gap_a * i;
                zb[i] = gap_b * i;
            }
            const auto curve = stationary::mixing_curve(ps, za, zb, rng::derive_seed(ctx.seed, 2 * k + 1),
                                                        rng::derive_seed(ctx.seed, 2 * k + 2), mo);
            std::string delta = "";
            std::string r2 = "";
            try {
                const auto fit = stationary::fit_decay_exponent(curve.times, curve.tv,
                                                                stationary::noise_limited_window(curve, floor_factor));
                delta = fmt(fit.delta);
                r2 = fmt(fit.r2);
                s.x.push_back(d);
                s.y.push_back(fit.delta);
            } catch (const DomainError& e) {
                *ctx.err << "mixing: d = " << d << ": " << e.what() << "\n";
            }
            csv += std::to_string(d) + "," + delta + "," + r2 + "," + std::to_string(mo.n_paths) + "\n";
        }
        art.add("delta_table.csv", std::move(csv));
        art.add("delta_table.svg", svg::line_chart({s}, {"Fitted TV-decay exponent of soft gaps", "d", "delta", true, true}));
        *ctx.out << "wrote delta table for " << ds.size() << " particle counts\n";
        return kOk;
    }

    const auto sys = system_from(ctx);
    const Vector xa = start_from(ctx.analysis, "x0_a", sys);
    const Vector xb = start_from(ctx.analysis, "x0_b", sys);
    const auto curve = stationary::mixing_curve(sys, xa, xb, rng::derive_seed(ctx.seed, 1), rng::derive_seed(ctx.seed, 2), mo);
    std::string csv = "t,tv,n_paths\n";
    for (std::size_t i = 0; i < curve.times.size(); ++i)
        csv += fmt(curve.times[i]) + "," + fmt(curve.tv[i]) + "," + std::to_string(curve.n_paths) + "\n";
    art.add("decay.csv", std::move(csv));
    art.add("decay.svg", svg::line_chart({{"TV estimate", curve.times, curve.tv, true}},
                                         {"TV distance between ensembles", "t", "tv", false, true}));
    const auto fit = stationary::fit_decay_exponent(curve.times, curve.tv, stationary::noise_limited_window(curve, floor_factor));
    const json j = fit_json(fit, curve);
    art.add("fit.json", j.dump(2) + "\n");
    *ctx.out << j.dump(2) << "\n";
    return kOk;
}

int cmd_rate_scaling(Context& ctx, ArtifactSet& art) {
    const auto ds = get_int_list(ctx.analysis, "d_list");
    const json pattern = ctx.analysis.value("mu_pattern", json::object());
    reject_unknown(pattern, {"hard", "soft"}, "mu_pattern");
    const json hard = pattern.value("hard", json{{"kind", "leader"}, {"drift", -1.0}});
    const json soft = pattern.value("soft", json{{"kind", "linear"}, {"slope", -1.0}});

    std::vector<double> logd, logh, logs, dv, kh, ks;
    std::string csv = "d,k_hard,k_soft\n";
    for (int d : ds) {
        if (d < 2) throw ConfigError("d_list entries must be >= 2");
        const double h = model::hard_rate_Kh(mu_from_pattern(hard, d));
        const double s = model::soft_rate_Ks(model::gap_drift(mu_from_pattern(soft, d)), d);
        csv += std::to_string(d) + "," + fmt(h) + "," + fmt(s) + "\n";
        dv.push_back(d);
        kh.push_back(h);
        ks.push_back(s);
        logd.push_back(std::log(d));
        logh.push_back(std::log(h));
        logs.push_back(std::log(s));
    }
    json j;
    if (ds.size() >= 2) {
        j["hard_slope"] = least_squares_slope(logd, logh);
        j["soft_slope"] = least_squares_slope(logd, logs);
    } else {
        j["hard_slope"] = nullptr;
        j["soft_slope"] = nullptr;
    }
    art.add("rate_scaling.csv", std::move(csv));
    art.add("rate_scaling.json", j.dump(2) + "\n");
    art.add("rate_scaling.svg", svg::line_chart({{"K hard", dv, kh, true}, {"K soft", dv, ks, true}},
                                                {"Drift-condition rates", "d", "K", true, true}));
    *ctx.out << j.dump(2) << "\n";
    return kOk;
}

int cmd_penalty_limit(Context& ctx, ArtifactSet& art) {
    const auto sys = system_from(ctx);
    const auto* ps = std::get_if<sim::ParticleSystem>(&sys);
    if (!ps) throw ConfigError("penalty-limit requires a particle system model");
    const Vector z0 = start_from(ctx.analysis, "z0", sys);
    const Vector betas_v = ctx.analysis.contains("betas") ? get_vector(ctx.analysis, "betas")
                                                          : (Vector(6) << 1, 2, 4, 8, 16, 32).finished();
    const std::vector<double> betas(betas_v.data(), betas_v.data() + betas_v.size());
    const double t_obs = get_number(ctx.analysis, "t_obs", 10.0);
    const auto n_paths = get_int(ctx.run, "n_paths", 20000);
    stationary::PenaltyOptions po;
    po.dt = get_number(ctx.run, "dt", 1e-3);
    po.workers = ctx.workers;
    po.scheme = scheme_from(ctx);

    const auto rows = stationary::penalty_sweep(ps->mu, z0, betas, t_obs, n_paths, ctx.seed, po);
    std::string csv = "beta,distance,n_paths\n";
    svg::Series s{"KS distance", {}, {}, true};
    for (const auto& r : rows) {
        csv += fmt(r.beta) + "," + fmt(r.distance) + "," + std::to_string(r.n_paths) + "\n";
        s.x.push_back(r.beta);
        s.y.push_back(r.distance);
    }
    const auto trend = stationary::nonincreasing_trend(rows);
    const double floor = 1.0 / std::sqrt(static_cast<double>(n_paths));
    const json j = {{"inversions", trend.inversions},
                    {"largest_increase", trend.largest_increase},
                    {"noise_floor", floor},
                    {"trend_ok", trend.inversions <= 1 && trend.largest_increase <= floor}};
    art.add("penalty.csv", std::move(csv));
    art.add("penalty.json", j.dump(2) + "\n");
    art.add("penalty.svg", svg::line_chart({s}, {"Soft vs hard gap law", "beta", "KS distance", true, false}));
    *ctx.out << j.dump(2) << "\n";
    return kOk;
}

using Command = int (*)(Context&, ArtifactSet&);

const std::map<std::string, Command>& commands() {
    static const std::map<std::string, Command> table = {
        {"validate", cmd_validate},         {"simulate", cmd_simulate},   {"drift-check", cmd_drift_check},
        {"stationary-check", cmd_stationary_check}, {"mixing", cmd_mixing}, {"rate-scaling", cmd_rate_scaling},
        {"penalty-limit", cmd_penalty_limit},
    };
    return table;
}

json load_config(const std::string& path) {
    if (path.empty()) return json::object();
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file '" + path + "'");
    try {
        return json::parse(f);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("malformed JSON in '") + path + "': " + e.what());
    }
}

int execute(const std::string& kind, const std::string& config_path, std::optional<std::uint64_t> seed, int workers,
            const std::string& out_flag, const std::vector<std::string>& sets, std::ostream& out, std::ostream& err) {
    Context ctx;
    ctx.kind = kind;
    ctx.out = &out;
    ctx.err = &err;
    ctx.config = load_config(config_path);
    if (!ctx.config.is_object()) throw ConfigError("config must be a JSON object");
    for (const auto& s : sets) apply_override(ctx.config, s);
    reject_unknown(ctx.config, kTopKeys, "config");
    if (ctx.config.contains("kind") && ctx.config["kind"] != kind)
        throw ConfigError("config kind '" + ctx.config["kind"].get<std::string>() + "' does not match subcommand '" + kind + "'");

    ctx.run = ctx.config.value("run", json::object());
    reject_unknown(ctx.run, kRunKeys, "run");
    ctx.analysis = ctx.config.value("analysis", json::object());
    reject_unknown(ctx.analysis, analysis_keys().at(kind), "analysis");

    if (seed) {
        ctx.seed = *seed;
    } else {
        const auto s = get_int(ctx.run, "seed", 0);
        if (s < 0) throw ConfigError("seed must be nonnegative");
        ctx.seed = static_cast<std::uint64_t>(s);
    }
    ctx.workers = workers > 0 ? workers : default_workers();

    std::string out_dir = out_flag;
    if (out_dir.empty()) out_dir = ctx.config.value("output_dir", std::string());
    if (out_dir.empty()) throw ConfigError("no output directory: pass --out or set output_dir");
    ctx.out_dir = out_dir;

    // The digest covers everything that determines the results.
    json digest_doc = ctx.config;
    digest_doc.erase("output_dir");
    digest_doc["kind"] = kind;
    digest_doc["run"]["seed"] = ctx.seed;
    const std::string digest = io::sha256_hex(digest_doc.dump());

    ArtifactSet art(ctx.out_dir);
    const int code = commands().at(kind)(ctx, art);
    art.commit(digest, ctx.seed);
    return code;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Simulation and verification toolkit for generalized reflected Brownian motions", "grbm"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    int workers = 0;
    std::string out_dir;
    std::vector<std::string> sets;

    for (const auto& [name, _] : commands()) {
        auto* sub = app.add_subcommand(name, "Run the " + name + " workflow");
        sub->add_option("--config", config_path, "JSON experiment config");
        sub->add_option("--seed", seed, "Base seed (overrides run.seed)");
        sub->add_option("--workers", workers, "Worker threads; results do not depend on it")->check(CLI::NonNegativeNumber);
        sub->add_option("--out", out_dir, "Output directory (overrides output_dir)");
        sub->add_option("--set", sets, "Config override KEY=VALUE (dotted path)")->take_all();
    }

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    if (!reversed.empty()) reversed.pop_back();
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << "\n" << app.help();
        return kUsage;
    }

    const std::string kind = app.get_subcommands().front()->get_name();
    try {
        return execute(kind, config_path, seed, workers, out_dir, sets, out, err);
    } catch (const BlowUpError& e) {
        err << "numeric blow-up: " << e.what() << "\n";
        return kNumeric;
    } catch (const NumericError& e) {
        err << "numeric error: " << e.what() << "\n";
        return kNumeric;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return kUsage;
    } catch (const DomainError& e) {
        err << "domain failure: " << e.what() << "\n";
        return kDomainFailure;
    } catch (const nlohmann::json::exception& e) {
        err << "config error: " << e.what() << "\n";
        return kUsage;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kDomainFailure;
    }
}

}  // namespace grbm::cli
