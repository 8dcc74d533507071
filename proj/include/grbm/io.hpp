#pragma once

#include <string>
#include <string_view>

#include <json.hpp>

#include "grbm/model.hpp"
#include "grbm/sim.hpp"

namespace grbm::io {

/// Shortest decimal string that parses back to the same double.
std::string format_shortest(double v);

/// Fixed 17-significant-digit representation (always round-trips).
std::string format_17g(double v);

/// Serializes a ModelSpec. Matrices are nested row arrays, every number
/// printed with 17 significant digits. A tandem R is written as "tridiagonal".
std::string model_to_json_text(const model::ModelSpec& spec);

/// Parses the ModelSpec document. Accepts gamma/refl as nested rows or a flat
/// row-major array, numbers or numeric strings, and refl = "tridiagonal".
/// Unknown keys are rejected.
model::ModelSpec model_from_json(const nlohmann::json& doc);

/// {"d", "mu", "reflection": "soft"|"hard", "potential": {...}}; the
/// potential is omitted for hard reflection.
std::string particles_to_json_text(const sim::ParticleSystem& sys);
sim::ParticleSystem particles_from_json(const nlohmann::json& doc);

/// Potential document {"family", "beta"}.
model::Potential potential_from_json(const nlohmann::json& doc);

/// Hex SHA-256 of a byte string.
std::string sha256_hex(std::string_view bytes);

/// Content hash of the canonical ModelSpec JSON text.
std::string model_digest(const model::ModelSpec& spec);

}  // namespace grbm::io
