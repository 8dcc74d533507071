#include "grbm/io.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <set>

#include <openssl/evp.h>

#include "grbm/error.hpp"

namespace grbm::io {

using nlohmann::json;

std::string format_shortest(double v) {
    std::array<char, 64> buf{};
    auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), res.ptr);
}

std::string format_17g(double v) {
    if (!std::isfinite(v)) throw InputError("cannot serialize non-finite value");
    std::array<char, 64> buf{};
    std::snprintf(buf.data(), buf.size(), "%.17g", v);
    return buf.data();
}

namespace {

void append_matrix(std::string& out, const Matrix& m) {
    out += '[';
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        if (i) out += ", ";
        out += '[';
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            if (j) out += ", ";
            out += format_17g(m(i, j));
        }
        out += ']';
    }
    out += ']';
}

double number_from(const json& v, const char* what) {
    if (v.is_number()) return v.get<double>();
    if (v.is_string()) {
        const auto& s = v.get_ref<const std::string&>();
        double out = 0.0;
        auto res = std::from_chars(s.data(), s.data() + s.size(), out);
        if (res.ec == std::errc() && res.ptr == s.data() + s.size()) return out;
    }
    throw ConfigError(std::string("expected a number for ") + what);
}

Matrix matrix_from(const json& v, int d, const char* what) {
    Matrix m(d, d);
    if (!v.is_array()) throw ConfigError(std::string(what) + " must be an array");
    if (v.size() == static_cast<std::size_t>(d) * d && !v.front().is_array()) {
        for (int k = 0; k < d * d; ++k) m(k / d, k % d) = number_from(v[k], what);
        return m;
    }
    if (v.size() != static_cast<std::size_t>(d)) throw ConfigError(std::string(what) + " has wrong dimension");
    for (int i = 0; i < d; ++i) {
        const json& row = v[i];
        if (!row.is_array() || row.size() != static_cast<std::size_t>(d))
            throw ConfigError(std::string(what) + " row " + std::to_string(i) + " has wrong dimension");
        for (int j = 0; j < d; ++j) m(i, j) = number_from(row[j], what);
    }
    return m;
}

void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
    for (const auto& [key, _] : obj.items()) {
        if (!allowed.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
    }
}

}  // namespace

model::Potential potential_from_json(const json& p) {
    if (!p.is_object()) throw ConfigError("potential must be an object");
    reject_unknown(p, {"family", "beta"}, "potential");
    const std::string family = p.value("family", std::string("exponential"));
    if (family == "exponential") return model::Potential::exponential(p.contains("beta") ? number_from(p["beta"], "beta") : 1.0);
    if (family == "zero") return model::Potential::zero();
    throw ConfigError("unknown potential family '" + family + "'");
}

namespace {

void append_potential(std::string& out, const model::Potential& p) {
    out += "{\"family\": ";
    if (p.family() == model::PotentialFamily::Exponential) {
        out += "\"exponential\", \"beta\": " + format_17g(p.beta());
    } else {
        out += "\"zero\"";
    }
    out += '}';
}

void append_vector(std::string& out, const Vector& v) {
    out += '[';
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (i) out += ", ";
        out += format_17g(v[i]);
    }
    out += ']';
}

}  // namespace

std::string model_to_json_text(const model::ModelSpec& spec) {
    std::string out = "{\"d\": " + std::to_string(spec.dim()) + ", \"gamma\": ";
    append_matrix(out, spec.gamma());
    out += ", \"mu\": [";
    for (int i = 0; i < spec.dim(); ++i) {
        if (i) out += ", ";
        out += format_17g(spec.mu()[i]);
    }
    out += "], \"refl\": ";
    if (spec.has_tandem_reflection()) {
        out += "\"tridiagonal\"";
    } else {
        append_matrix(out, spec.refl());
    }
    out += ", \"potential\": ";
    append_potential(out, spec.potential());
    out += '}';
    return out;
}

std::string particles_to_json_text(const sim::ParticleSystem& sys) {
    std::string out = "{\"d\": " + std::to_string(sys.dim()) + ", \"mu\": ";
    append_vector(out, sys.mu);
    out += ", \"reflection\": ";
    out += sys.hard ? "\"hard\"" : "\"soft\"";
    if (!sys.hard) {
        out += ", \"potential\": ";
        append_potential(out, sys.potential);
    }
    out += '}';
    return out;
}

sim::ParticleSystem particles_from_json(const json& doc) {
    if (!doc.is_object()) throw ConfigError("particles must be a JSON object");
    reject_unknown(doc, {"d", "mu", "reflection", "potential"}, "particles");
    if (!doc.contains("mu") || !doc["mu"].is_array()) throw ConfigError("particles.mu must be an array");
    const json& mu_doc = doc["mu"];
    const int d = static_cast<int>(mu_doc.size());
    if (doc.contains("d") && (!doc["d"].is_number_integer() || doc["d"].get<int>() != d))
        throw ConfigError("particles.d does not match mu");
    if (d < 2) throw ConfigError("particle systems need at least two particles");
    sim::ParticleSystem sys;
    sys.mu.resize(d);
    for (int i = 0; i < d; ++i) sys.mu[i] = number_from(mu_doc[i], "mu");
    if (!sys.mu.allFinite()) throw InputError("particles.mu has non-finite entries");
    const std::string refl = doc.value("reflection", std::string("soft"));
    if (refl == "hard") {
        sys.hard = true;
        sys.potential = model::Potential::zero();
    } else if (refl != "soft") {
        throw ConfigError("particles.reflection must be 'soft' or 'hard'");
    }
    if (doc.contains("potential")) {
        if (sys.hard) throw ConfigError("hard reflection takes no potential");
        sys.potential = potential_from_json(doc["potential"]);
    }
    return sys;
}

model::ModelSpec model_from_json(const json& doc) {
    if (!doc.is_object()) throw ConfigError("model must be a JSON object");
    reject_unknown(doc, {"d", "gamma", "mu", "refl", "potential"}, "model");
    for (const char* key : {"d", "gamma", "mu"}) {
        if (!doc.contains(key)) throw ConfigError(std::string("model is missing '") + key + "'");
    }
    if (!doc["d"].is_number_integer() || doc["d"].get<long long>() < 1) throw ConfigError("model.d must be a positive integer");
    const int d = doc["d"].get<int>();

    const json& mu_doc = doc["mu"];
    if (!mu_doc.is_array() || mu_doc.size() != static_cast<std::size_t>(d)) throw ConfigError("mu must have d entries");
    Vector mu(d);
    for (int i = 0; i < d; ++i) mu[i] = number_from(mu_doc[i], "mu");

    Matrix gamma = matrix_from(doc["gamma"], d, "gamma");

    Matrix refl = model::tandem_reflection(d);
    if (doc.contains("refl")) {
        const json& r = doc["refl"];
        if (r.is_string()) {
            if (r.get<std::string>() != "tridiagonal") throw ConfigError("unknown refl shorthand '" + r.get<std::string>() + "'");
        } else {
            refl = matrix_from(r, d, "refl");
        }
    }

    model::Potential pot = model::Potential::exponential(1.0);
    if (doc.contains("potential")) pot = potential_from_json(doc["potential"]);
    return model::ModelSpec(std::move(gamma), std::move(mu), std::move(refl), pot);
}

std::string sha256_hex(std::string_view bytes) {
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), md.data(), &len, EVP_sha256(), nullptr) != 1)
        throw NumericError("sha256 failed");
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out += kHex[md[i] >> 4];
        out += kHex[md[i] & 0xF];
    }
    return out;
}

std::string model_digest(const model::ModelSpec& spec) { return sha256_hex(model_to_json_text(spec)); }

}  // namespace grbm::io
