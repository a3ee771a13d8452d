#pragma once

#include <string>

#include <nlohmann/json_fwd.hpp>

#include "surfkin/ik/pipeline.hpp"

namespace surfkin::ik {

struct IkConfig {
  double tau = 0.01;           // relative loss-decrease threshold
  int max_iterations = 30;     // caps accepted descent steps and rounds alike
  int sample_count = 1200;
  double initial_step = 1.0;
  double shrink = 0.5;
  double min_step = 1e-8;
  int max_expansions = 50;
  int max_inner_steps = 1;     // descent steps per round before re-posing; 0 = until tau
  int icp_iterations = 50;
  double icp_tolerance = 1e-6;
  bool parallel = true;

  void validate() const;
};

enum class Termination { Tolerance, Stall, IterationLimit };
const char* to_string(Termination t);

struct TraceRow {
  int iteration = 0;        // accepted descent steps so far
  int round = 0;            // outer round, 0 for the initial pose
  std::string event;        // "init", "step" or "pose"
  double loss = 0.0;
  double mean_error = 0.0;  // mean |p*_j - y_j|
  double step = 0.0;        // accepted step length, 0 for non-step rows
};

struct IkResult {
  oracle::Actuation a_opt{};
  geometry::RigidTransform pose;  // maps the target frame onto the robot frame
  std::vector<TraceRow> trace;
  bool converged = false;
  Termination termination = Termination::IterationLimit;
  int iterations = 0;
  int rounds = 0;
  double final_loss = 0.0;
  double mean_error = 0.0;
  double max_error = 0.0;
  double wall_time_ms = 0.0;
};

// Alternates line-searched gradient descent on the actuation (correspondences
// frozen within each inner loop, recomputed for every trial) with rigid
// re-registration of the target. Starts with an ICP alignment at a0.
IkResult solve_ik(const Models& models, const geometry::MeshQuery& target, const oracle::Actuation& a0,
                  const IkConfig& cfg);

// Loss with correspondences recomputed at the given pose.
double shape_loss(const Models& models, const geometry::MeshQuery& target, const geometry::RigidTransform& pose,
                  const oracle::Actuation& a, const std::vector<Vec2>& params, bool parallel = true);

// Gradient of the loss at a with correspondences frozen at a.
VecX loss_gradient(const Models& models, const geometry::MeshQuery& target, const geometry::RigidTransform& pose,
                   const oracle::Actuation& a, const std::vector<Vec2>& params, const Branches& branches = {});

// Triangulated calibrated surface S*(a) on a rows x cols parameter grid.
geometry::TriangleMesh calibrated_mesh(const Models& models, const oracle::Actuation& a, int rows, int cols);

nlohmann::json to_json(const IkResult& r);
nlohmann::json to_json(const IkConfig& c);
IkConfig ik_config_from_json(const nlohmann::json& j);
std::string trace_csv(const IkResult& r);

}  // namespace surfkin::ik
