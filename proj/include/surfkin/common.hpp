#pragma once

#include <Eigen/Core>

#include <stdexcept>
#include <string>
#include <vector>

namespace surfkin {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;

using Points = std::vector<Vec3>;

// Base error for all library failures. Messages are stable and tested.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or out-of-contract input (bad file, wrong dimensions, ...).
class InputError : public Error {
 public:
  using Error::Error;
};

}  // namespace surfkin
