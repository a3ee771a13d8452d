#include "surfkin/ik/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

#include <nlohmann/json.hpp>

#include "surfkin/geometry/icp.hpp"

namespace surfkin::ik {

void IkConfig::validate() const {
  if (!(tau > 0.0 && tau < 1.0)) throw InputError("ik: tau must be in (0, 1)");
  if (max_iterations < 1) throw InputError("ik: max_iterations must be >= 1");
  if (sample_count < 3) throw InputError("ik: sample_count must be >= 3");
  if (!(initial_step > 0.0)) throw InputError("ik: initial_step must be positive");
  if (!(shrink > 0.0 && shrink < 1.0)) throw InputError("ik: shrink must be in (0, 1)");
  if (!(min_step > 0.0 && min_step < initial_step)) throw InputError("ik: min_step must be in (0, initial_step)");
  if (max_expansions < 0) throw InputError("ik: max_expansions must be >= 0");
  if (max_inner_steps < 0) throw InputError("ik: max_inner_steps must be >= 0");
  if (icp_iterations < 1) throw InputError("ik: icp_iterations must be >= 1");
  if (!(icp_tolerance >= 0.0)) throw InputError("ik: icp_tolerance must be >= 0");
}

const char* to_string(Termination t) {
  switch (t) {
    case Termination::Tolerance: return "tolerance";
    case Termination::Stall: return "stall";
    case Termination::IterationLimit: return "iteration_limit";
  }
  return "unknown";
}

namespace {

oracle::Actuation clamp_step(const oracle::Actuation& a, const VecX& g, double h) {
  oracle::Actuation out{};
  for (std::size_t k = 0; k < a.size(); ++k) out[k] = std::clamp(a[k] - h * g[static_cast<Eigen::Index>(k)], 0.0, 1.0);
  return out;
}

struct Iterate {
  PipelineState state;
  Points targets;
  double loss = 0.0;
};

Iterate make_iterate(const Models& models, const geometry::MeshQuery& target, const geometry::RigidTransform& pose,
                     const oracle::Actuation& a, const std::vector<Vec2>& params, bool parallel) {
  Iterate it;
  it.state = evaluate_pipeline(models, a, params, parallel);
  it.targets = correspondences(it.state.points, target, pose, parallel);
  it.loss = frozen_loss(it.state.points, it.targets);
  return it;
}

void repose(Iterate& it, const geometry::MeshQuery& target, geometry::RigidTransform& pose, const IkConfig& cfg) {
  pose = geometry::icp_register(it.state.points, target, pose, cfg.icp_iterations, cfg.icp_tolerance).transform;
  it.targets = correspondences(it.state.points, target, pose, cfg.parallel);
  it.loss = frozen_loss(it.state.points, it.targets);
}

// |D_old - D_new| / D_new, measured against the newer loss.
double relative_decrease(double before, double after) {
  return after > 0.0 ? std::abs(before - after) / after : 0.0;
}

std::pair<double, double> point_errors(const Iterate& it) {
  double sum = 0.0;
  double mx = 0.0;
  for (std::size_t j = 0; j < it.targets.size(); ++j) {
    const double d = (it.state.points[j] - it.targets[j]).norm();
    sum += d;
    mx = std::max(mx, d);
  }
  return {it.targets.empty() ? 0.0 : sum / static_cast<double>(it.targets.size()), mx};
}

}  // namespace

double shape_loss(const Models& models, const geometry::MeshQuery& target, const geometry::RigidTransform& pose,
                  const oracle::Actuation& a, const std::vector<Vec2>& params, bool parallel) {
  return make_iterate(models, target, pose, a, params, parallel).loss;
}

VecX loss_gradient(const Models& models, const geometry::MeshQuery& target, const geometry::RigidTransform& pose,
                   const oracle::Actuation& a, const std::vector<Vec2>& params, const Branches& branches) {
  const auto it = make_iterate(models, target, pose, a, params, true);
  return frozen_gradient(models, it.state, it.targets, branches);
}

geometry::TriangleMesh calibrated_mesh(const Models& models, const oracle::Actuation& a, int rows, int cols) {
  const auto grid = bspline::regular_grid(rows, cols);
  return geometry::grid_mesh(rows, cols, evaluate_pipeline(models, a, grid).points);
}

IkResult solve_ik(const Models& models, const geometry::MeshQuery& target, const oracle::Actuation& a0,
                  const IkConfig& cfg) {
  cfg.validate();
  oracle::validate_actuation(a0);
  const auto t0 = std::chrono::steady_clock::now();
  const auto params = sample_params(cfg.sample_count);

  IkResult r;
  geometry::RigidTransform pose;
  Iterate cur = make_iterate(models, target, pose, a0, params, cfg.parallel);
  repose(cur, target, pose, cfg);

  auto record = [&](const char* event, double step) {
    r.trace.push_back({r.iterations, r.rounds, event, cur.loss, point_errors(cur).first, step});
  };
  record("init", 0.0);

  int stalls = 0;
  bool done = cur.loss <= 0.0;
  if (done) {
    r.converged = true;
    r.termination = Termination::Tolerance;
  }
  while (!done && r.rounds < cfg.max_iterations && r.iterations < cfg.max_iterations) {
    ++r.rounds;
    const double round_start = cur.loss;
    bool stalled = false;
    int inner = 0;

    while (r.iterations < cfg.max_iterations) {
      const VecX g = frozen_gradient(models, cur.state, cur.targets);
      const double before = cur.loss;

      // Shrink until the loss (with fresh correspondences) decreases.
      double h = cfg.initial_step;
      Iterate best;
      bool found = false;
      while (h >= cfg.min_step) {
        best = make_iterate(models, target, pose, clamp_step(cur.state.a, g, h), params, cfg.parallel);
        if (best.loss < before) {
          found = true;
          break;
        }
        h *= cfg.shrink;
      }
      if (!found) {
        stalled = true;
        break;
      }
      // Then walk outward in increments of the last shrink (half the
      // accepted step for the default factor) while the loss keeps falling.
      const double inc = h * cfg.shrink;
      double best_h = h;
      for (int e = 1; e <= cfg.max_expansions; ++e) {
        const double he = h + e * inc;
        Iterate trial = make_iterate(models, target, pose, clamp_step(cur.state.a, g, he), params, cfg.parallel);
        if (!(trial.loss < best.loss)) break;
        best = std::move(trial);
        best_h = he;
      }
      cur = std::move(best);
      ++r.iterations;
      record("step", best_h);
      if (relative_decrease(before, cur.loss) <= cfg.tau) break;
      if (cfg.max_inner_steps > 0 && ++inner >= cfg.max_inner_steps) break;
    }

    const double pre_pose = cur.loss;
    const auto old_pose = pose;
    repose(cur, target, pose, cfg);
    if (cur.loss > pre_pose) {
      // ICP stopped at a worse local alignment; keep the previous pose.
      pose = old_pose;
      cur.targets = correspondences(cur.state.points, target, pose, cfg.parallel);
      cur.loss = frozen_loss(cur.state.points, cur.targets);
    }
    record("pose", 0.0);

    if (cur.loss <= 0.0) {
      r.converged = true;
      r.termination = Termination::Tolerance;
      break;
    }
    if (stalled) {
      if (++stalls >= 2) {
        r.converged = true;
        r.termination = Termination::Stall;
        break;
      }
      continue;
    }
    stalls = 0;
    if (relative_decrease(round_start, cur.loss) <= cfg.tau) {
      r.converged = true;
      r.termination = Termination::Tolerance;
      break;
    }
  }

  r.a_opt = cur.state.a;
  r.pose = pose;
  r.final_loss = cur.loss;
  std::tie(r.mean_error, r.max_error) = point_errors(cur);
  r.wall_time_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

nlohmann::json to_json(const IkResult& r) {
  nlohmann::json trace = nlohmann::json::array();
  for (const auto& t : r.trace) {
    trace.push_back({{"iteration", t.iteration}, {"round", t.round}, {"event", t.event},
                     {"loss", t.loss}, {"mean_error", t.mean_error}, {"step", t.step}});
  }
  const Mat3& R = r.pose.rotation();
  nlohmann::json rot = nlohmann::json::array();
  for (int i = 0; i < 3; ++i) rot.push_back({R(i, 0), R(i, 1), R(i, 2)});
  const Vec3& t = r.pose.translation();
  return {{"a_opt", std::vector<double>(r.a_opt.begin(), r.a_opt.end())},
          {"rotation", rot},
          {"translation", {t.x(), t.y(), t.z()}},
          {"trace", trace},
          {"converged", r.converged},
          {"termination", to_string(r.termination)},
          {"iterations", r.iterations},
          {"rounds", r.rounds},
          {"final_loss", r.final_loss},
          {"mean_error", r.mean_error},
          {"max_error", r.max_error},
          {"wall_time_ms", r.wall_time_ms}};
}

nlohmann::json to_json(const IkConfig& c) {
  return {{"tau", c.tau},
          {"max_iterations", c.max_iterations},
          {"sample_count", c.sample_count},
          {"initial_step", c.initial_step},
          {"shrink", c.shrink},
          {"min_step", c.min_step},
          {"max_expansions", c.max_expansions},
          {"max_inner_steps", c.max_inner_steps},
          {"icp_iterations", c.icp_iterations},
          {"icp_tolerance", c.icp_tolerance},
          {"parallel", c.parallel}};
}

IkConfig ik_config_from_json(const nlohmann::json& j) {
  IkConfig c;
  try {
    c.tau = j.value("tau", c.tau);
    c.max_iterations = j.value("max_iterations", c.max_iterations);
    c.sample_count = j.value("sample_count", c.sample_count);
    c.initial_step = j.value("initial_step", c.initial_step);
    c.shrink = j.value("shrink", c.shrink);
    c.min_step = j.value("min_step", c.min_step);
    c.max_expansions = j.value("max_expansions", c.max_expansions);
    c.max_inner_steps = j.value("max_inner_steps", c.max_inner_steps);
    c.icp_iterations = j.value("icp_iterations", c.icp_iterations);
    c.icp_tolerance = j.value("icp_tolerance", c.icp_tolerance);
    c.parallel = j.value("parallel", c.parallel);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("ik config: ") + e.what());
  }
  c.validate();
  return c;
}

std::string trace_csv(const IkResult& r) {
  std::ostringstream os;
  os.precision(17);
  os << "iteration,round,event,loss,mean_error,step\n";
  for (const auto& t : r.trace) {
    os << t.iteration << ',' << t.round << ',' << t.event << ',' << t.loss << ',' << t.mean_error << ',' << t.step << '\n';
  }
  return os.str();
}

}  // namespace surfkin::ik
