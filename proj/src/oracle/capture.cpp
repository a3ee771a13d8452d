#include "surfkin/oracle/capture.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <random>
#include <set>
#include <sstream>

namespace surfkin::oracle {

double DropoutPolicy::probability(double displacement, double max_amplitude) const {
  if (!enabled) return 0.0;
  const double rel = max_amplitude > 0.0 ? std::abs(displacement) / max_amplitude : 0.0;
  return std::clamp(base_rate + slope * rel, 0.0, 1.0);
}

int MarkerFrame::observed_count() const {
  return static_cast<int>(std::count_if(observations.begin(), observations.end(),
                                        [](const Observation& o) { return o.position.has_value(); }));
}

bool MarkerFrame::complete() const { return observed_count() == static_cast<int>(observations.size()); }

void MarkerFrame::validate(int marker_count) const {
  validate_actuation(actuation);
  std::set<int> seen;
  for (const auto& o : observations) {
    if (o.marker_id < 0 || o.marker_id >= marker_count) throw InputError("frame: unknown marker id");
    if (!seen.insert(o.marker_id).second) throw InputError("frame: duplicate marker id");
  }
  if (observed_count() < 1) throw InputError("frame: no observed markers");
}

std::vector<Vec2> canonical_marker_uvs(int count) {
  if (count < 4) throw InputError("marker count must be at least 4");
  std::vector<Vec2> uvs;
  if (count == kDefaultMarkers) {
    for (int i = 0; i < 6; ++i) {
      for (int j = 0; j < 6; ++j) {
        if ((i == 0 && j == 0) || (i == 5 && j == 5)) continue;
        uvs.emplace_back(0.1 + 0.16 * i, 0.1 + 0.16 * j);
      }
    }
    return uvs;
  }
  for (const auto& h : halton(2, count, 0)) uvs.emplace_back(0.05 + 0.9 * h[0], 0.05 + 0.9 * h[1]);
  return uvs;
}

namespace {

std::mt19937_64 frame_rng(std::uint64_t seed, int attempt) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(attempt), 0x6d61726bu};
  return std::mt19937_64(seq);
}

}  // namespace

MarkerFrame capture_frame(const VirtualMannequin& vm, const RealityGap& gap, const Actuation& a,
                          const std::vector<Vec2>& marker_uvs, const CaptureConfig& cfg,
                          std::uint64_t seed) {
  validate_actuation(a);
  if (marker_uvs.empty()) throw InputError("capture: empty marker set");
  if (cfg.noise_sigma < 0.0) throw InputError("capture: negative noise sigma");
  const double max_amp = vm.max_amplitude();

  std::vector<Vec3> clean;
  std::vector<double> drop_p;
  for (const auto& uv : marker_uvs) {
    clean.push_back(gap.real_point(vm, a, uv.x(), uv.y()));
    drop_p.push_back(cfg.dropout.probability(vm.displacement(a, uv.x(), uv.y()), max_amp));
  }

  for (int attempt = 0; attempt <= cfg.max_retries; ++attempt) {
    auto rng = frame_rng(seed, attempt);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> noise(0.0, 1.0);
    MarkerFrame f;
    f.actuation = a;
    for (std::size_t i = 0; i < marker_uvs.size(); ++i) {
      // Always draw the same number of variates per marker so that changing
      // one policy knob does not reshuffle the rest of the stream.
      const double r = unit(rng);
      const Vec3 n(noise(rng), noise(rng), noise(rng));
      Observation o;
      o.marker_id = static_cast<int>(i);
      if (r >= drop_p[i]) o.position = clean[i] + cfg.noise_sigma * n;
      f.observations.push_back(o);
    }
    if (f.observed_count() > 0) return f;
  }
  throw Error("all markers dropped");
}

std::vector<Actuation> random_actuations(int count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Actuation> out(static_cast<std::size_t>(std::max(count, 0)));
  for (auto& a : out) {
    for (double& x : a) x = unit(rng);
  }
  return out;
}

CaptureSummary summarize(const std::vector<MarkerFrame>& frames) {
  CaptureSummary s;
  for (const auto& f : frames) {
    ++s.frames;
    if (f.complete()) {
      ++s.complete;
    } else {
      ++s.incomplete;
    }
    s.observed += f.observed_count();
  }
  return s;
}

nlohmann::json to_json(const MarkerFrame& f) {
  nlohmann::json obs = nlohmann::json::array();
  for (const auto& o : f.observations) {
    nlohmann::json pos = nullptr;
    if (o.position) pos = {o.position->x(), o.position->y(), o.position->z()};
    obs.push_back({{"id", o.marker_id}, {"position", std::move(pos)}});
  }
  return {{"actuation", std::vector<double>(f.actuation.begin(), f.actuation.end())},
          {"observations", std::move(obs)}};
}

MarkerFrame frame_from_json(const nlohmann::json& j) {
  try {
    MarkerFrame f;
    const auto a = j.at("actuation").get<std::vector<double>>();
    if (a.size() != kChambers) throw InputError("frame json: actuation needs 9 entries");
    std::copy(a.begin(), a.end(), f.actuation.begin());
    validate_actuation(f.actuation);
    for (const auto& o : j.at("observations")) {
      Observation ob;
      ob.marker_id = o.at("id").get<int>();
      const auto& p = o.at("position");
      if (!p.is_null()) ob.position = Vec3(p.at(0).get<double>(), p.at(1).get<double>(), p.at(2).get<double>());
      f.observations.push_back(ob);
    }
    return f;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("frame json: ") + e.what());
  }
}

std::string to_jsonl(const std::vector<MarkerFrame>& frames) {
  std::string out;
  for (const auto& f : frames) {
    out += to_json(f).dump();
    out += '\n';
  }
  return out;
}

std::vector<MarkerFrame> frames_from_jsonl(const std::string& text) {
  std::vector<MarkerFrame> frames;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw InputError("frames line " + std::to_string(lineno) + ": " + e.what());
    }
    frames.push_back(frame_from_json(j));
  }
  return frames;
}

nlohmann::json to_json(const CaptureConfig& c) {
  return {{"noise_sigma", c.noise_sigma},
          {"max_retries", c.max_retries},
          {"dropout",
           {{"enabled", c.dropout.enabled}, {"base_rate", c.dropout.base_rate}, {"slope", c.dropout.slope}}}};
}

CaptureConfig capture_config_from_json(const nlohmann::json& j) {
  CaptureConfig c;
  try {
    c.noise_sigma = j.value("noise_sigma", c.noise_sigma);
    c.max_retries = j.value("max_retries", c.max_retries);
    if (j.contains("dropout")) {
      const auto& d = j.at("dropout");
      c.dropout.enabled = d.value("enabled", c.dropout.enabled);
      c.dropout.base_rate = d.value("base_rate", c.dropout.base_rate);
      c.dropout.slope = d.value("slope", c.dropout.slope);
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("capture config: ") + e.what());
  }
  if (c.noise_sigma < 0.0 || c.max_retries < 0) throw InputError("capture config: invalid values");
  return c;
}

}  // namespace surfkin::oracle
