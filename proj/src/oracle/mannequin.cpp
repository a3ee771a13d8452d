#include "surfkin/oracle/mannequin.hpp"

#include <Eigen/Geometry>
#include <nlohmann/json.hpp>

#include <cmath>

#include "surfkin/bspline/fit.hpp"

namespace surfkin::oracle {

void validate_actuation(const Actuation& a) {
  for (double x : a) {
    if (!(x >= 0.0 && x <= 1.0)) throw InputError("actuation out of range");
  }
}

VecX to_vec(const Actuation& a) { return Eigen::Map<const VecX>(a.data(), kChambers); }

Actuation actuation_from(const VecX& v) {
  if (v.size() != kChambers) throw InputError("actuation must have 9 components");
  Actuation a;
  for (int k = 0; k < kChambers; ++k) a[k] = v[k];
  return a;
}

Actuation uniform_actuation(double value) {
  Actuation a;
  a.fill(value);
  return a;
}

double Chamber::response(double a) const {
  return (1.0 - std::exp(-stiffness * a)) / (1.0 - std::exp(-stiffness));
}

double Chamber::response_derivative(double a) const {
  return stiffness * std::exp(-stiffness * a) / (1.0 - std::exp(-stiffness));
}

double Chamber::bump(double u, double v) const {
  const double su = (u - center_uv.x()) / extent_uv.x();
  const double sv = (v - center_uv.y()) / extent_uv.y();
  const double s2 = su * su + sv * sv;
  if (s2 >= 1.0) return 0.0;
  const double w = 1.0 - s2;
  return w * w * w * w;
}

Vec3 TorsoShape::point(double u, double v) const {
  const double theta = (u - 0.5) * angular_span;
  const double rx = radius_x + 12.0 * std::sin(M_PI * v) - 8.0 * v;
  const double rz = radius_z + 25.0 * std::sin(M_PI * v);
  const double du = u - 0.5;
  const double dv = v - 0.68;
  const double chest = chest_bulge * std::exp(-(du * du / 0.05 + dv * dv / 0.03));
  return {rx * std::sin(theta), height * (v - 0.5), rz * std::cos(theta) + chest - 0.6 * radius_z};
}

void MannequinConfig::validate() const {
  for (const auto& c : chambers) {
    if (!(c.amplitude > 0.0)) throw InputError("mannequin: chamber amplitudes must be positive");
    if (!(c.stiffness > 0.0)) throw InputError("mannequin: chamber stiffness must be positive");
    if (!(c.extent_uv.x() > 0.0 && c.extent_uv.y() > 0.0)) {
      throw InputError("mannequin: chamber extents must be positive");
    }
  }
  if (grid_rows < 4 || grid_cols < 4) throw InputError("mannequin: sample grid too small");
  if (rest_controls < 4) throw InputError("mannequin: rest control grid too small");
}

MannequinConfig default_mannequin() {
  MannequinConfig c;
  constexpr double amps[kChambers] = {28.0, 34.0, 26.0, 32.0, 40.0, 30.0, 24.0, 36.0, 30.0};
  constexpr double stiff[kChambers] = {1.0, 0.8, 1.2, 0.9, 1.1, 0.7, 1.0, 0.9, 0.8};
  constexpr double pos[3] = {0.2, 0.5, 0.8};
  for (int k = 0; k < kChambers; ++k) {
    auto& ch = c.chambers[k];
    ch.center_uv = Vec2(pos[k % 3], pos[k / 3]);
    ch.extent_uv = Vec2(0.21, 0.21);
    ch.amplitude = amps[k];
    ch.stiffness = stiff[k];
  }
  return c;
}

VirtualMannequin::VirtualMannequin(MannequinConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  // The rest shell is the least-squares B-spline of the analytic torso.
  constexpr int kDense = 48;
  geometry::SampledSurface dense;
  dense.params = bspline::regular_grid(kDense, kDense);
  for (const auto& uv : dense.params) dense.points.push_back(cfg_.torso.point(uv.x(), uv.y()));
  rest_ = bspline::fit(dense, cfg_.rest_controls, cfg_.rest_controls, 3, 0.0).surface;

  grid_ = bspline::regular_grid(cfg_.grid_rows, cfg_.grid_cols);
  for (const auto& uv : grid_) {
    grid_rest_.push_back(rest_point(uv.x(), uv.y()));
    grid_normal_.push_back(rest_normal(uv.x(), uv.y()));
    std::array<double, kChambers> b{};
    for (int k = 0; k < kChambers; ++k) b[k] = cfg_.chambers[k].bump(uv.x(), uv.y());
    grid_bump_.push_back(b);
  }
}

double VirtualMannequin::max_amplitude() const {
  double m = 0.0;
  for (const auto& c : cfg_.chambers) m = std::max(m, c.amplitude);
  return m;
}

double VirtualMannequin::displacement(const Actuation& a, double u, double v) const {
  double d = 0.0;
  for (int k = 0; k < kChambers; ++k) {
    const auto& ch = cfg_.chambers[k];
    const double b = ch.bump(u, v);
    if (b > 0.0) d += ch.amplitude * ch.response(a[k]) * b;
  }
  return d;
}

Vec3 VirtualMannequin::rest_point(double u, double v) const { return rest_.evaluate(u, v); }

Vec3 VirtualMannequin::rest_normal(double u, double v) const {
  Vec3 p, du, dv;
  rest_.evaluate_derivs(u, v, p, du, dv);
  return du.cross(dv).normalized();
}

Vec3 VirtualMannequin::sim_point(const Actuation& a, double u, double v) const {
  validate_actuation(a);
  return rest_point(u, v) + displacement(a, u, v) * rest_normal(u, v);
}

geometry::SampledSurface VirtualMannequin::sim_surface(const Actuation& a) const {
  validate_actuation(a);
  std::array<double, kChambers> scale{};
  for (int k = 0; k < kChambers; ++k) {
    scale[k] = cfg_.chambers[k].amplitude * cfg_.chambers[k].response(a[k]);
  }
  geometry::SampledSurface s;
  s.params = grid_;
  s.points.resize(grid_.size());
  for (std::size_t i = 0; i < grid_.size(); ++i) {
    double d = 0.0;
    for (int k = 0; k < kChambers; ++k) d += scale[k] * grid_bump_[i][k];
    s.points[i] = grid_rest_[i] + d * grid_normal_[i];
  }
  return s;
}

geometry::SampledSurface sim_surface(const VirtualMannequin& vm, const Actuation& a) {
  return vm.sim_surface(a);
}

GapConfig GapConfig::identity() { return {}; }

GapConfig GapConfig::affine(const Mat3& linear, const Vec3& offset) {
  GapConfig g;
  g.linear = linear;
  g.offset = offset;
  return g;
}

GapConfig default_gap() {
  GapConfig g;
  g.offset = Vec3(0.8, -0.6, 1.2);
  g.linear << 0.003, -0.002, 0.001,
              0.002, -0.002, 0.0015,
              -0.001, 0.0025, 0.002;
  g.quadratic[0] = Vec3(0.0, 0.0015, 0.0);
  g.quadratic[1] = Vec3(0.001, 0.0, -0.001);
  g.quadratic[2] = Vec3(0.003, -0.0015, 0.0);
  g.bumps.push_back({Vec3(100.0, 120.0, 150.0), 110.0, Vec3(0.6, -0.4, 1.2)});
  g.bumps.push_back({Vec3(-120.0, -150.0, 130.0), 130.0, Vec3(-0.5, 0.5, -1.0)});
  g.skew = {0.04, -0.03, 0.02, -0.04, 0.03, 0.04, -0.02, 0.03, -0.03};
  return g;
}

Vec3 RealityGap::warp_space(const Vec3& x) const {
  const double L = cfg_.length_scale;
  const Vec3 s = x / L;
  Vec3 d = cfg_.offset + L * (cfg_.linear * s);
  for (int a = 0; a < 3; ++a) d[a] += L * s.dot(cfg_.quadratic[a].cwiseProduct(s));
  for (const auto& b : cfg_.bumps) {
    d += b.amplitude * std::exp(-(x - b.center).squaredNorm() / (2.0 * b.sigma * b.sigma));
  }
  return x + d;
}

Mat3 RealityGap::space_jacobian(const Vec3& x) const {
  const double L = cfg_.length_scale;
  const Vec3 s = x / L;
  Mat3 j = Mat3::Identity() + cfg_.linear;
  for (int a = 0; a < 3; ++a) j.row(a) += 2.0 * cfg_.quadratic[a].cwiseProduct(s).transpose();
  for (const auto& b : cfg_.bumps) {
    const double g = std::exp(-(x - b.center).squaredNorm() / (2.0 * b.sigma * b.sigma));
    j -= b.amplitude * (g / (b.sigma * b.sigma)) * (x - b.center).transpose();
  }
  return j;
}

Vec3 RealityGap::real_point(const VirtualMannequin& vm, const Actuation& a, double u, double v) const {
  validate_actuation(a);
  double extra = 0.0;
  for (int k = 0; k < kChambers; ++k) {
    if (cfg_.skew[k] == 0.0) continue;
    const auto& ch = vm.config().chambers[k];
    extra += cfg_.skew[k] * ch.amplitude * ch.response(a[k]) * ch.bump(u, v);
  }
  const Vec3 p = vm.sim_point(a, u, v) + extra * vm.rest_normal(u, v);
  return warp_space(p);
}

geometry::SampledSurface real_surface(const VirtualMannequin& vm, const RealityGap& gap,
                                      const Actuation& a) {
  geometry::SampledSurface s = vm.sim_surface(a);
  const auto& chambers = vm.config().chambers;
  for (std::size_t i = 0; i < s.params.size(); ++i) {
    const double u = s.params[i].x();
    const double v = s.params[i].y();
    double extra = 0.0;
    for (int k = 0; k < kChambers; ++k) {
      if (gap.config().skew[k] == 0.0) continue;
      extra += gap.config().skew[k] * chambers[k].amplitude * chambers[k].response(a[k]) *
               chambers[k].bump(u, v);
    }
    if (extra != 0.0) s.points[i] += extra * vm.rest_normal(u, v);
    s.points[i] = gap.warp_space(s.points[i]);
  }
  return s;
}

std::vector<Actuation> corner_actuations() {
  std::vector<Actuation> out;
  out.reserve(1u << kChambers);
  for (int code = 0; code < (1 << kChambers); ++code) {
    Actuation a;
    for (int k = 0; k < kChambers; ++k) a[k] = (code >> (kChambers - 1 - k)) & 1 ? 1.0 : 0.0;
    out.push_back(a);
  }
  return out;
}

std::vector<VecX> halton(int dim, int count, int skip) {
  static constexpr int primes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23};
  if (dim < 1 || dim > 9) throw InputError("halton: dim must be in [1, 9]");
  if (count < 0 || skip < 0) throw InputError("halton: count and skip must be non-negative");
  std::vector<VecX> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) {
    VecX x(dim);
    for (int d = 0; d < dim; ++d) {
      const int base = primes[d];
      long index = static_cast<long>(skip) + k + 1;
      double f = 1.0;
      double r = 0.0;
      while (index > 0) {
        f /= base;
        r += f * static_cast<double>(index % base);
        index /= base;
      }
      x[d] = r;
    }
    out.push_back(std::move(x));
  }
  return out;
}

namespace {

nlohmann::json vec_json(const Vec3& v) { return {v.x(), v.y(), v.z()}; }
Vec3 vec_from(const nlohmann::json& j) { return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()}; }

}  // namespace

nlohmann::json to_json(const MannequinConfig& c) {
  nlohmann::json chambers = nlohmann::json::array();
  for (const auto& ch : c.chambers) {
    chambers.push_back({{"center_uv", {ch.center_uv.x(), ch.center_uv.y()}},
                        {"extent_uv", {ch.extent_uv.x(), ch.extent_uv.y()}},
                        {"amplitude", ch.amplitude},
                        {"stiffness", ch.stiffness}});
  }
  return {{"torso",
           {{"height", c.torso.height},
            {"radius_x", c.torso.radius_x},
            {"radius_z", c.torso.radius_z},
            {"angular_span", c.torso.angular_span},
            {"chest_bulge", c.torso.chest_bulge}}},
          {"chambers", std::move(chambers)},
          {"grid_rows", c.grid_rows},
          {"grid_cols", c.grid_cols},
          {"rest_controls", c.rest_controls}};
}

MannequinConfig mannequin_from_json(const nlohmann::json& j) {
  MannequinConfig c = default_mannequin();
  try {
    if (j.contains("torso")) {
      const auto& t = j.at("torso");
      c.torso.height = t.value("height", c.torso.height);
      c.torso.radius_x = t.value("radius_x", c.torso.radius_x);
      c.torso.radius_z = t.value("radius_z", c.torso.radius_z);
      c.torso.angular_span = t.value("angular_span", c.torso.angular_span);
      c.torso.chest_bulge = t.value("chest_bulge", c.torso.chest_bulge);
    }
    if (j.contains("chambers")) {
      const auto& chs = j.at("chambers");
      if (chs.size() != kChambers) throw InputError("mannequin json: need exactly 9 chambers");
      for (int k = 0; k < kChambers; ++k) {
        const auto& ch = chs[k];
        auto& out = c.chambers[k];
        if (ch.contains("center_uv")) out.center_uv = Vec2(ch["center_uv"][0], ch["center_uv"][1]);
        if (ch.contains("extent_uv")) out.extent_uv = Vec2(ch["extent_uv"][0], ch["extent_uv"][1]);
        out.amplitude = ch.value("amplitude", out.amplitude);
        out.stiffness = ch.value("stiffness", out.stiffness);
      }
    }
    c.grid_rows = j.value("grid_rows", c.grid_rows);
    c.grid_cols = j.value("grid_cols", c.grid_cols);
    c.rest_controls = j.value("rest_controls", c.rest_controls);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("mannequin json: ") + e.what());
  }
  c.validate();
  return c;
}

nlohmann::json to_json(const GapConfig& g) {
  nlohmann::json linear = nlohmann::json::array();
  for (int r = 0; r < 3; ++r) linear.push_back({g.linear(r, 0), g.linear(r, 1), g.linear(r, 2)});
  nlohmann::json quad = nlohmann::json::array();
  for (const auto& q : g.quadratic) quad.push_back(vec_json(q));
  nlohmann::json bumps = nlohmann::json::array();
  for (const auto& b : g.bumps) {
    bumps.push_back({{"center", vec_json(b.center)}, {"sigma", b.sigma}, {"amplitude", vec_json(b.amplitude)}});
  }
  return {{"length_scale", g.length_scale}, {"offset", vec_json(g.offset)}, {"linear", std::move(linear)},
          {"quadratic", std::move(quad)},   {"bumps", std::move(bumps)},    {"skew", g.skew}};
}

GapConfig gap_from_json(const nlohmann::json& j) {
  GapConfig g;
  try {
    g.length_scale = j.value("length_scale", g.length_scale);
    if (j.contains("offset")) g.offset = vec_from(j["offset"]);
    if (j.contains("linear")) {
      for (int r = 0; r < 3; ++r) g.linear.row(r) = vec_from(j["linear"][r]).transpose();
    }
    if (j.contains("quadratic")) {
      for (int a = 0; a < 3; ++a) g.quadratic[a] = vec_from(j["quadratic"][a]);
    }
    if (j.contains("bumps")) {
      for (const auto& b : j["bumps"]) {
        g.bumps.push_back({vec_from(b.at("center")), b.at("sigma").get<double>(), vec_from(b.at("amplitude"))});
      }
    }
    if (j.contains("skew")) {
      const auto s = j["skew"].get<std::vector<double>>();
      if (s.size() != kChambers) throw InputError("gap json: skew needs 9 entries");
      for (int k = 0; k < kChambers; ++k) g.skew[k] = s[k];
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("gap json: ") + e.what());
  }
  if (!(g.length_scale > 0.0)) throw InputError("gap json: length_scale must be positive");
  return g;
}

}  // namespace surfkin::oracle
