#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "surfkin/oracle/mannequin.hpp"

namespace surfkin::oracle {

inline constexpr int kDefaultMarkers = 34;

// Occlusion model: marker i goes missing with probability
// base_rate + slope * |normal displacement at marker| / max chamber amplitude.
struct DropoutPolicy {
  bool enabled = true;
  double base_rate = 0.005;
  double slope = 0.11;

  double probability(double displacement, double max_amplitude) const;
};

struct CaptureConfig {
  double noise_sigma = 0.1;  // mm, isotropic
  DropoutPolicy dropout;
  int max_retries = 10;
};

struct Observation {
  int marker_id = 0;
  std::optional<Vec3> position;  // empty when the marker was not seen
};

struct MarkerFrame {
  Actuation actuation{};
  std::vector<Observation> observations;

  int observed_count() const;
  // True when every listed marker was observed.
  bool complete() const;
  // Checks ids against a canonical set of `marker_count` markers and that at
  // least one observation is present.
  void validate(int marker_count) const;
};

// 6 x 6 regular layout over [0.1, 0.9]^2 with the (0,0) and (1,1) corners
// removed. Only count = 34 uses that layout; other counts take the first
// `count` points of a 2-D Halton sequence shrunk into [0.05, 0.95]^2.
std::vector<Vec2> canonical_marker_uvs(int count = kDefaultMarkers);

// Simulated motion capture. Noise and dropout draw from an mt19937_64 seeded
// from (seed, attempt); when every marker drops, a new attempt is made up to
// max_retries times before failing with "all markers dropped".
MarkerFrame capture_frame(const VirtualMannequin& vm, const RealityGap& gap, const Actuation& a,
                          const std::vector<Vec2>& marker_uvs, const CaptureConfig& cfg,
                          std::uint64_t seed);

// Uniform random actuations for capture sessions.
std::vector<Actuation> random_actuations(int count, std::uint64_t seed);

struct CaptureSummary {
  int frames = 0;
  int complete = 0;
  int incomplete = 0;
  int observed = 0;
};

CaptureSummary summarize(const std::vector<MarkerFrame>& frames);

nlohmann::json to_json(const MarkerFrame& f);
MarkerFrame frame_from_json(const nlohmann::json& j);

// One JSON object per line; missing positions are null.
std::string to_jsonl(const std::vector<MarkerFrame>& frames);
std::vector<MarkerFrame> frames_from_jsonl(const std::string& text);

nlohmann::json to_json(const CaptureConfig& c);
CaptureConfig capture_config_from_json(const nlohmann::json& j);

}  // namespace surfkin::oracle
