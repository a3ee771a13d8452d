#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "surfkin/fk/dataset.hpp"
#include "surfkin/ik/solver.hpp"
#include "surfkin/sim2real/model.hpp"

namespace surfkin::cli {

// A stage was asked to run before the artifact it consumes exists.
class MissingPrerequisite : public Error {
 public:
  explicit MissingPrerequisite(const std::string& what) : Error("missing prerequisite: " + what) {}
};

// One or more audit thresholds failed; the message lists them.
class AuditFailure : public Error {
 public:
  using Error::Error;
};

nlohmann::json default_config();

// Defaults, then the file (if any) merged on top, then each "a.b.c=value"
// override in order. Values parse as JSON when they can and as plain strings
// otherwise. Keys that do not exist in the defaults are rejected.
nlohmann::json load_config(const std::optional<std::filesystem::path>& file, const std::vector<std::string>& overrides);
void apply_override(nlohmann::json& cfg, const std::string& assignment);

std::uint64_t seed(const nlohmann::json& cfg);
oracle::MannequinConfig mannequin_config(const nlohmann::json& cfg);
oracle::GapConfig gap_config(const nlohmann::json& cfg);
fk::DatasetOptions dataset_options(const nlohmann::json& cfg);
fk::FkTrainOptions fk_options(const nlohmann::json& cfg);
oracle::CaptureConfig capture_config(const nlohmann::json& cfg);
sim2real::S2rOptions s2r_options(const nlohmann::json& cfg);
sim2real::MkOptions baseline_options(const nlohmann::json& cfg);
ik::IkConfig ik_config(const nlohmann::json& cfg);

std::string history_csv(const std::vector<nn::EpochRecord>& history);

}  // namespace surfkin::cli
