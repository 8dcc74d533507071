#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace grbm::cli {

inline constexpr const char* kToolVersion = "0.1.0";

enum ExitCode : int { kOk = 0, kDomainFailure = 1, kUsage = 2, kNumeric = 3 };

/// Entry point shared by the executable and the tests. args[0] is the
/// program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Applies a dotted-path override ("run.dt=0.01"). The value is parsed as
/// JSON when possible and taken as a string otherwise.
void apply_override(nlohmann::json& config, const std::string& assignment);

/// Collects named artifacts in memory and publishes them into the output
/// directory only on commit: files are written to a sibling staging
/// directory first and renamed into place, manifest.json last.
class ArtifactSet {
public:
    explicit ArtifactSet(std::filesystem::path out_dir) : out_dir_(std::move(out_dir)) {}

    void add(std::string name, std::string content);
    void commit(const std::string& config_digest, std::uint64_t seed) const;

    const std::vector<std::pair<std::string, std::string>>& items() const noexcept { return items_; }

private:
    std::filesystem::path out_dir_;
    std::vector<std::pair<std::string, std::string>> items_;
};

}  // namespace grbm::cli
