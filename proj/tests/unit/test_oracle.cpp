#include <doctest.h>

#include <set>

#include <nlohmann/json.hpp>

#include "fixtures.hpp"

using namespace surfkin;
using namespace surfkin::oracle;

TEST_CASE("chamber response is normalized, monotone and differentiable") {
  for (double k : {0.3, 1.0, 4.0}) {
    Chamber c;
    c.stiffness = k;
    CHECK(c.response(0.0) == doctest::Approx(0.0));
    CHECK(c.response(1.0) == doctest::Approx(1.0));
    double prev = -1.0;
    for (int i = 0; i <= 50; ++i) {
      const double a = i / 50.0;
      CHECK(c.response(a) > prev);
      prev = c.response(a);
      if (i > 0 && i < 50) {
        const double fd = (c.response(a + 1e-6) - c.response(a - 1e-6)) / 2e-6;
        CHECK(c.response_derivative(a) == doctest::Approx(fd).epsilon(1e-6));
      }
    }
  }
}

TEST_CASE("bumps have compact support") {
  Chamber c;
  c.center_uv = Vec2(0.5, 0.5);
  c.extent_uv = Vec2(0.1, 0.2);
  CHECK(c.bump(0.5, 0.5) == doctest::Approx(1.0));
  CHECK(c.bump(0.61, 0.5) == 0.0);
  CHECK(c.bump(0.5, 0.71) == 0.0);
  CHECK(c.bump(0.55, 0.55) > 0.0);
}

TEST_CASE("corner actuations enumerate the 512 binary patterns") {
  const auto corners = corner_actuations();
  REQUIRE(corners.size() == 512);
  std::set<Actuation> unique(corners.begin(), corners.end());
  CHECK(unique.size() == 512);
  CHECK(corners[1][8] == 1.0);
  CHECK(corners[256][0] == 1.0);
}

TEST_CASE("Halton sequence radical inverses") {
  const auto h = halton(3, 4, 0);
  CHECK(h[0](0) == doctest::Approx(0.5));
  CHECK(h[1](0) == doctest::Approx(0.25));
  CHECK(h[2](0) == doctest::Approx(0.75));
  CHECK(h[0](1) == doctest::Approx(1.0 / 3.0));
  CHECK(h[0](2) == doctest::Approx(0.2));
  CHECK(halton(2, 3, 1)[0] == h[1].head(2));
}

TEST_CASE("zero actuation leaves the rest shell") {
  const VirtualMannequin vm(default_mannequin());
  const auto zero = uniform_actuation(0.0);
  for (const Vec2 uv : {Vec2(0.2, 0.3), Vec2(0.5, 0.5), Vec2(0.9, 0.1)}) {
    CHECK((vm.sim_point(zero, uv.x(), uv.y()) - vm.rest_point(uv.x(), uv.y())).norm() < 1e-12);
  }
  CHECK(vm.max_amplitude() == doctest::Approx(40.0));
  CHECK_THROWS(validate_actuation(uniform_actuation(1.5)));
}

TEST_CASE("identity and affine gaps") {
  const VirtualMannequin vm(default_mannequin());
  const auto a = random_actuations(1, 3)[0];
  const RealityGap id(GapConfig::identity());
  CHECK((id.real_point(vm, a, 0.4, 0.6) - vm.sim_point(a, 0.4, 0.6)).norm() < 1e-12);
  Mat3 E = Mat3::Zero();
  E(0, 1) = 0.01;
  const Vec3 t(1, 2, 3);
  const RealityGap aff(GapConfig::affine(E, t));
  const Vec3 x = vm.sim_point(a, 0.4, 0.6);
  CHECK((aff.real_point(vm, a, 0.4, 0.6) - (x + E * x + t)).norm() < 1e-9);
  CHECK((aff.space_jacobian(x) - (Mat3::Identity() + E)).norm() < 1e-12);
}

TEST_CASE("default gap Jacobian matches finite differences") {
  const RealityGap gap(default_gap());
  const Vec3 x(40, 250, 90);
  Mat3 fd;
  for (int d = 0; d < 3; ++d) {
    Vec3 e = Vec3::Zero();
    e(d) = 1e-4;
    fd.col(d) = (gap.warp_space(x + e) - gap.warp_space(x - e)) / 2e-4;
  }
  CHECK((gap.space_jacobian(x) - fd).norm() < 1e-7);
}

TEST_CASE("clean capture observes the real surface exactly") {
  const VirtualMannequin vm(default_mannequin());
  const RealityGap gap(default_gap());
  CaptureConfig cfg;
  cfg.noise_sigma = 0.0;
  cfg.dropout.enabled = false;
  const auto uvs = canonical_marker_uvs();
  REQUIRE(uvs.size() == 34);
  const auto a = random_actuations(1, 4)[0];
  const auto f = capture_frame(vm, gap, a, uvs, cfg, 0);
  CHECK(f.complete());
  for (const auto& o : f.observations) {
    const Vec2 uv = uvs[static_cast<std::size_t>(o.marker_id)];
    CHECK((*o.position - gap.real_point(vm, a, uv.x(), uv.y())).norm() < 1e-12);
  }
}

TEST_CASE("capture is seeded and round-trips with null entries") {
  const VirtualMannequin vm(default_mannequin());
  const RealityGap gap(default_gap());
  const auto uvs = canonical_marker_uvs();
  CaptureConfig cfg;
  cfg.dropout.base_rate = 0.3;
  std::vector<MarkerFrame> frames;
  for (std::uint64_t k = 0; k < 5; ++k) frames.push_back(capture_frame(vm, gap, random_actuations(5, 1)[k], uvs, cfg, k));
  const std::string text = to_jsonl(frames);
  CHECK(text.find("null") != std::string::npos);
  CHECK(to_jsonl(frames_from_jsonl(text)) == text);
  const auto again = capture_frame(vm, gap, frames[2].actuation, uvs, cfg, 2);
  CHECK(to_json(again) == to_json(frames[2]));
  const auto s = summarize(frames);
  CHECK(s.frames == 5);
  CHECK(s.complete + s.incomplete == 5);
  CHECK(s.incomplete > 0);
}

TEST_CASE("default dropout gives roughly the intended incomplete share") {
  const VirtualMannequin vm(default_mannequin());
  const RealityGap gap(default_gap());
  const auto uvs = canonical_marker_uvs();
  const auto acts = random_actuations(200, 100);
  std::vector<MarkerFrame> frames;
  for (std::size_t k = 0; k < acts.size(); ++k) frames.push_back(capture_frame(vm, gap, acts[k], uvs, {}, k));
  const auto s = summarize(frames);
  const double share = static_cast<double>(s.incomplete) / s.frames;
  CHECK(share > 0.3);
  CHECK(share < 0.6);
  CHECK(s.observed > 0.9 * 34 * s.frames);
}

TEST_CASE("every marker dropping fails after the retry budget") {
  const VirtualMannequin vm(default_mannequin());
  CaptureConfig cfg;
  cfg.dropout.base_rate = 1.0;
  cfg.max_retries = 2;
  CHECK_THROWS_WITH(capture_frame(vm, RealityGap(), uniform_actuation(0.5), canonical_marker_uvs(), cfg, 0),
                    doctest::Contains("all markers dropped"));
}

TEST_CASE("config JSON round trips") {
  const auto m = default_mannequin();
  CHECK(to_json(mannequin_from_json(to_json(m))) == to_json(m));
  const auto g = default_gap();
  CHECK(to_json(gap_from_json(to_json(g))) == to_json(g));
}
