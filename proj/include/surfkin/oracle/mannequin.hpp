#pragma once

#include <array>
#include <optional>

#include <nlohmann/json_fwd.hpp>

#include "surfkin/bspline/surface.hpp"
#include "surfkin/geometry/mesh.hpp"

namespace surfkin::oracle {

inline constexpr int kChambers = 9;

// Normalized chamber pressures, each in [0, 1].
using Actuation = std::array<double, kChambers>;

void validate_actuation(const Actuation& a);
VecX to_vec(const Actuation& a);
Actuation actuation_from(const VecX& v);
Actuation uniform_actuation(double value);

// One pneumatic chamber: a compactly supported bump in (u, v) scaled by a
// saturating pressure response.
struct Chamber {
  Vec2 center_uv = Vec2(0.5, 0.5);
  Vec2 extent_uv = Vec2(0.2, 0.2);  // semi-axes of the elliptic support
  double amplitude = 30.0;          // peak normal displacement at full pressure (mm)
  double stiffness = 1.0;           // curvature of the response; > 0

  // (1 - exp(-k a)) / (1 - exp(-k)): smooth, monotone, r(0) = 0, r(1) = 1.
  double response(double a) const;
  double response_derivative(double a) const;
  // (1 - s^2)^4 for s^2 = |(uv - center) / extent|^2 < 1, else 0.
  double bump(double u, double v) const;
};

// Analytic half-torso used as the undeformed shell, roughly 400 x 600 x 200 mm.
struct TorsoShape {
  double height = 600.0;
  double radius_x = 195.0;
  double radius_z = 150.0;
  double angular_span = 0.9 * 3.14159265358979323846;
  double chest_bulge = 20.0;

  Vec3 point(double u, double v) const;
};

struct MannequinConfig {
  TorsoShape torso;
  std::array<Chamber, kChambers> chambers;
  int grid_rows = 60;     // (u, v) sample grid for sim/real surfaces
  int grid_cols = 60;
  int rest_controls = 16;  // control grid used to represent the rest shell

  void validate() const;
};

MannequinConfig default_mannequin();

// Deterministic forward-deformation model standing in for the simulator:
// rest point displaced along the rest normal by sum_k A_k r_k(a_k) bump_k(u, v).
class VirtualMannequin {
 public:
  explicit VirtualMannequin(MannequinConfig cfg);

  const MannequinConfig& config() const { return cfg_; }
  const bspline::BSplineSurface& rest() const { return rest_; }
  const std::vector<Vec2>& grid_params() const { return grid_; }
  double max_amplitude() const;

  // Signed normal displacement and its components.
  double displacement(const Actuation& a, double u, double v) const;
  Vec3 rest_point(double u, double v) const;
  Vec3 rest_normal(double u, double v) const;
  Vec3 sim_point(const Actuation& a, double u, double v) const;

  geometry::SampledSurface sim_surface(const Actuation& a) const;

 private:
  MannequinConfig cfg_;
  bspline::BSplineSurface rest_;
  std::vector<Vec2> grid_;
  Points grid_rest_;
  Points grid_normal_;
  std::vector<std::array<double, kChambers>> grid_bump_;
};

geometry::SampledSurface sim_surface(const VirtualMannequin& vm, const Actuation& a);

struct GaussianBump {
  Vec3 center = Vec3::Zero();
  double sigma = 100.0;
  Vec3 amplitude = Vec3::Zero();
};

// The synthetic discrepancy between simulated and "physical" shapes:
// x -> x + t + L E (x/L) + L q(x/L) + sum gaussian bumps, applied after each
// chamber's displacement is skewed by (1 + skew_k).
struct GapConfig {
  double length_scale = 300.0;
  Vec3 offset = Vec3::Zero();
  Mat3 linear = Mat3::Zero();                 // E
  std::array<Vec3, 3> quadratic{Vec3::Zero(), Vec3::Zero(), Vec3::Zero()};  // q_a(s) = s^T diag(quadratic[a]) s
  std::vector<GaussianBump> bumps;
  std::array<double, kChambers> skew{};

  static GapConfig identity();
  static GapConfig affine(const Mat3& linear, const Vec3& offset);
};

GapConfig default_gap();

class RealityGap {
 public:
  explicit RealityGap(GapConfig cfg = GapConfig::identity()) : cfg_(std::move(cfg)) {}

  const GapConfig& config() const { return cfg_; }

  Vec3 warp_space(const Vec3& x) const;
  Mat3 space_jacobian(const Vec3& x) const;
  Vec3 real_point(const VirtualMannequin& vm, const Actuation& a, double u, double v) const;

 private:
  GapConfig cfg_;
};

geometry::SampledSurface real_surface(const VirtualMannequin& vm, const RealityGap& gap,
                                      const Actuation& a);

// 2^9 binary min/max combinations; chamber 0 is the most significant digit.
std::vector<Actuation> corner_actuations();

// Radical-inverse Halton points using the first `dim` primes. Point k uses
// sequence index skip + k + 1.
std::vector<VecX> halton(int dim, int count, int skip);

nlohmann::json to_json(const MannequinConfig& c);
MannequinConfig mannequin_from_json(const nlohmann::json& j);
nlohmann::json to_json(const GapConfig& g);
GapConfig gap_from_json(const nlohmann::json& j);

}  // namespace surfkin::oracle
