#pragma once

#include <Eigen/Dense>

#include <vector>

#include "diffeo/geometry.hpp"
#include "diffeo/mapping.hpp"

namespace diffeo {

struct Pose {
  Vec3 position = Vec3::Zero();
  Quat orientation = Quat::Identity();
};

struct Twist {
  Vec3 linear = Vec3::Zero();   // [m/s]
  Vec3 angular = Vec3::Zero();  // [rad/s]
};

struct TrajectorySample {
  double t = 0.0;  // [s]
  Pose pose;
};

/// Time-stamped pose sequence with strictly increasing timestamps.
struct Trajectory {
  std::vector<TrajectorySample> samples;

  /// Throws std::invalid_argument when empty or non-monotone in time.
  void validate() const;
  double duration() const;
  /// Linear position / slerp orientation interpolation, clamped to the
  /// first and last samples.
  Pose sample_at(double t) const;
};

/// Piecewise straight-line trajectory visiting `targets[order[i]]` at the
/// given constant speed, dwelling `hold` seconds at each stop.
Trajectory waypoint_trajectory(const std::vector<Vec3>& targets,
                               const std::vector<int>& order, double speed,
                               double hold,
                               const Quat& orientation = Quat::Identity());

struct RevoluteJoint {
  Vec3 axis = Vec3::UnitZ();    // in the local frame, unit norm
  Vec3 offset = Vec3::Zero();   // from the parent frame origin [m]
};

/// Serial kinematic chain of revolute joints.
struct SerialChain {
  std::vector<RevoluteJoint> joints;
  Vec3 tool = Vec3::Zero();

  Pose forward(const std::vector<double>& joint_angles) const;
  /// Numerical geometric Jacobian (6 x n): linear rows first, angular rows
  /// (full-angle rotation vector) below.
  Eigen::Matrix<double, 6, Eigen::Dynamic> jacobian(
      const std::vector<double>& joint_angles, double h = 1e-6) const;

  /// Generic six-revolute elbow arm used by the simulation harness.
  static SerialChain six_axis();
};

/// Proportional pose controller: linear = kp * position error, angular =
/// kp * full-angle rotation vector of the orientation error.
Twist proportional_velocity(const Pose& target, const Pose& current,
                            double kp);

/// Regularized least-squares inverse kinematics: the closed-form minimizer
/// of |J qdot - xdot|^2 + reg |qdot|^2, i.e. (J^T J + reg I) qdot = J^T xdot.
Eigen::VectorXd resolve_ik(const Eigen::MatrixXd& jacobian,
                           const Eigen::Matrix<double, 6, 1>& desired_twist,
                           double regularization = 1.0);

enum class FollowerMode { Point, Chain };

struct FollowerState {
  FollowerMode mode = FollowerMode::Point;
  Pose pose;                         // point mode state
  SerialChain chain;                 // chain mode model
  std::vector<double> joint_angles;  // chain mode state

  static FollowerState point(const Pose& start);
  static FollowerState chain_at(SerialChain chain,
                                std::vector<double> joint_angles);
};

struct VelocityRecord {
  double t = 0.0;
  double speed = 0.0;          // realized linear speed norm [m/s]
  double angular_speed = 0.0;  // [rad/s]
  double error_norm = 0.0;     // augmented pose error norm
};

struct ReplicationResult {
  Trajectory follower;
  std::vector<VelocityRecord> velocity_log;
};

struct ReplicationOptions {
  double dt = 0.002;  // [s], 500 Hz
  double kp = 2.0;
  double ik_regularization = 1.0;
};

/// Replays the primary trajectory through the map: each tick the mapped
/// primary pose becomes the follower target, tracked by the proportional
/// controller (point mode integrates the twist directly, chain mode routes
/// through resolve_ik and forward kinematics).
ReplicationResult simulate_replication(const DiffeoMap& map,
                                       const Trajectory& primary,
                                       FollowerState follower,
                                       const ReplicationOptions& opts = {});

}  // namespace diffeo
