#pragma once

#include <memory>
#include <string>

#include <json.hpp>

#include "iss/certificate.hpp"
#include "iss/environment.hpp"
#include "iss/losses.hpp"

namespace iss {

/// Environment factory from the config "env" object (see README for the
/// schema). Unknown kinds and malformed fields raise ConfigError.
std::unique_ptr<Environment> make_environment(const nlohmann::json& env_cfg);

TrainConfig train_config_from_json(const nlohmann::json& train_cfg);
nlohmann::json train_config_to_json(const TrainConfig& cfg);

Scenario scenario_from_json(const nlohmann::json& scen_cfg);

nlohmann::json bundle_to_json(const CertificateBundle& bundle);
CertificateBundle bundle_from_json(const nlohmann::json& j);

inline constexpr int kCheckpointFormatVersion = 1;

struct Checkpoint {
    int format_version = kCheckpointFormatVersion;
    std::string created_at;  // empty unless a caller stamps it; excluded from identity
    nlohmann::json env_config;
    TrainConfig train_config;
    CertificateBundle bundle;
    nlohmann::json history_summary;
    std::uint64_t seed = 0;
};

/// Versioned JSON with flat numeric arrays. Doubles round-trip exactly;
/// save/load/save is byte-stable apart from created_at.
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

nlohmann::json checkpoint_to_json(const Checkpoint& ckpt);
Checkpoint checkpoint_from_json(const nlohmann::json& j);

nlohmann::json load_json_file(const std::string& path);
void write_json_file(const std::string& path, const nlohmann::json& j);

}  // namespace iss
