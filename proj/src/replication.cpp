#include "diffeo/replication.hpp"

#include <cmath>
#include <stdexcept>

namespace diffeo {

void Trajectory::validate() const {
  if (samples.empty()) {
    throw std::invalid_argument("Trajectory: at least one sample required");
  }
  for (std::size_t i = 1; i < samples.size(); ++i) {
    if (!(samples[i].t > samples[i - 1].t)) {
      throw std::invalid_argument(
          "Trajectory: timestamps must be strictly increasing");
    }
  }
}

double Trajectory::duration() const {
  if (samples.empty()) return 0.0;
  return samples.back().t - samples.front().t;
}

Pose Trajectory::sample_at(double t) const {
  if (samples.empty()) {
    throw std::invalid_argument("Trajectory: empty");
  }
  if (t <= samples.front().t) return samples.front().pose;
  if (t >= samples.back().t) return samples.back().pose;
  std::size_t hi = 1;
  while (samples[hi].t < t) ++hi;
  const TrajectorySample& a = samples[hi - 1];
  const TrajectorySample& b = samples[hi];
  const double alpha = (t - a.t) / (b.t - a.t);
  Pose out;
  out.position = (1.0 - alpha) * a.pose.position + alpha * b.pose.position;
  out.orientation =
      a.pose.orientation.slerp(alpha, b.pose.orientation).normalized();
  return out;
}

Trajectory waypoint_trajectory(const std::vector<Vec3>& targets,
                               const std::vector<int>& order, double speed,
                               double hold, const Quat& orientation) {
  if (targets.empty() || order.empty()) {
    throw std::invalid_argument("waypoint_trajectory: empty input");
  }
  if (speed <= 0.0) {
    throw std::invalid_argument("waypoint_trajectory: speed must be > 0");
  }
  Trajectory traj;
  double t = 0.0;
  Vec3 at = targets.at(static_cast<std::size_t>(order.front()));
  traj.samples.push_back({t, {at, orientation}});
  if (hold > 0.0) {
    t += hold;
    traj.samples.push_back({t, {at, orientation}});
  }
  for (std::size_t i = 1; i < order.size(); ++i) {
    const Vec3 next = targets.at(static_cast<std::size_t>(order[i]));
    const double dist = (next - at).norm();
    if (dist > 1e-12) {
      t += dist / speed;
      traj.samples.push_back({t, {next, orientation}});
      at = next;
    }
    if (hold > 0.0) {
      t += hold;
      traj.samples.push_back({t, {at, orientation}});
    }
  }
  return traj;
}

Pose SerialChain::forward(const std::vector<double>& joint_angles) const {
  if (joint_angles.size() != joints.size()) {
    throw std::invalid_argument("SerialChain: joint angle count mismatch");
  }
  Mat3 rot = Mat3::Identity();
  Vec3 pos = Vec3::Zero();
  for (std::size_t i = 0; i < joints.size(); ++i) {
    pos += rot * joints[i].offset;
    rot = rot * Eigen::AngleAxisd(joint_angles[i], joints[i].axis.normalized())
                    .toRotationMatrix();
  }
  Pose out;
  out.position = pos + rot * tool;
  out.orientation = Quat(rot).normalized();
  return out;
}

Eigen::Matrix<double, 6, Eigen::Dynamic> SerialChain::jacobian(
    const std::vector<double>& joint_angles, double h) const {
  const int n = static_cast<int>(joints.size());
  Eigen::Matrix<double, 6, Eigen::Dynamic> jac(6, n);
  for (int i = 0; i < n; ++i) {
    std::vector<double> fwd = joint_angles;
    std::vector<double> bwd = joint_angles;
    fwd[static_cast<std::size_t>(i)] += h;
    bwd[static_cast<std::size_t>(i)] -= h;
    const Pose a = forward(fwd);
    const Pose b = forward(bwd);
    jac.col(i).head<3>() = (a.position - b.position) / (2.0 * h);
    jac.col(i).tail<3>() =
        2.0 * quat_log(a.orientation * b.orientation.conjugate()) / (2.0 * h);
  }
  return jac;
}

SerialChain SerialChain::six_axis() {
  SerialChain chain;
  chain.joints = {
      {Vec3::UnitZ(), {0.0, 0.0, 0.15}},
      {Vec3::UnitY(), {0.0, 0.0, 0.12}},
      {Vec3::UnitY(), {0.0, 0.0, 0.30}},
      {Vec3::UnitZ(), {0.0, 0.0, 0.25}},
      {Vec3::UnitY(), {0.0, 0.0, 0.10}},
      {Vec3::UnitX(), {0.05, 0.0, 0.05}},
  };
  chain.tool = {0.0, 0.0, 0.08};
  return chain;
}

Twist proportional_velocity(const Pose& target, const Pose& current,
                            double kp) {
  if (kp <= 0.0) {
    throw std::invalid_argument("proportional_velocity: kp must be > 0");
  }
  Twist twist;
  twist.linear = kp * (target.position - current.position);
  twist.angular =
      kp * 2.0 *
      quat_log(target.orientation * current.orientation.conjugate());
  return twist;
}

Eigen::VectorXd resolve_ik(const Eigen::MatrixXd& jacobian,
                           const Eigen::Matrix<double, 6, 1>& desired_twist,
                           double regularization) {
  const int n = static_cast<int>(jacobian.cols());
  const Eigen::MatrixXd normal =
      jacobian.transpose() * jacobian +
      regularization * Eigen::MatrixXd::Identity(n, n);
  return normal.ldlt().solve(jacobian.transpose() * desired_twist);
}

FollowerState FollowerState::point(const Pose& start) {
  FollowerState st;
  st.mode = FollowerMode::Point;
  st.pose = start;
  return st;
}

FollowerState FollowerState::chain_at(SerialChain chain,
                                      std::vector<double> joint_angles) {
  FollowerState st;
  st.mode = FollowerMode::Chain;
  st.chain = std::move(chain);
  st.joint_angles = std::move(joint_angles);
  st.pose = st.chain.forward(st.joint_angles);
  return st;
}

ReplicationResult simulate_replication(const DiffeoMap& map,
                                       const Trajectory& primary,
                                       FollowerState follower,
                                       const ReplicationOptions& opts) {
  primary.validate();
  if (opts.dt <= 0.0) {
    throw std::invalid_argument("simulate_replication: dt must be > 0");
  }
  ReplicationResult result;
  const double t0 = primary.samples.front().t;
  const double t_end = primary.samples.back().t;
  const int n_updates = static_cast<int>(
      std::ceil((t_end - t0) / opts.dt - 1e-12));

  for (int i = 0; i <= std::max(0, n_updates); ++i) {
    const double t = std::min(t0 + i * opts.dt, t_end);
    const Pose current = follower.mode == FollowerMode::Point
                             ? follower.pose
                             : follower.chain.forward(follower.joint_angles);
    result.follower.samples.push_back({t, current});
    if (i == n_updates) break;

    const Pose prim = primary.sample_at(t);
    Pose target;
    target.position = map_position(map, prim.position);
    target.orientation = map_orientation(map, prim.position, prim.orientation);

    const Twist twist = proportional_velocity(target, current, opts.kp);
    const Vec3 rot_err =
        2.0 * quat_log(target.orientation * current.orientation.conjugate());
    const double error_norm =
        std::sqrt((target.position - current.position).squaredNorm() +
                  rot_err.squaredNorm());

    double speed = 0.0;
    double angular_speed = 0.0;
    if (follower.mode == FollowerMode::Point) {
      speed = twist.linear.norm();
      angular_speed = twist.angular.norm();
      follower.pose.position += twist.linear * opts.dt;
      follower.pose.orientation =
          (quat_exp(twist.angular * (opts.dt / 2.0)) *
           follower.pose.orientation)
              .normalized();
    } else {
      const Eigen::Matrix<double, 6, Eigen::Dynamic> jac =
          follower.chain.jacobian(follower.joint_angles);
      Eigen::Matrix<double, 6, 1> desired;
      desired.head<3>() = twist.linear;
      desired.tail<3>() = twist.angular;
      const Eigen::VectorXd qdot =
          resolve_ik(jac, desired, opts.ik_regularization);
      const Eigen::Matrix<double, 6, 1> realized = jac * qdot;
      speed = realized.head<3>().norm();
      angular_speed = realized.tail<3>().norm();
      for (std::size_t j = 0; j < follower.joint_angles.size(); ++j) {
        follower.joint_angles[j] += qdot(static_cast<Eigen::Index>(j)) *
                                    opts.dt;
      }
    }
    result.velocity_log.push_back({t, speed, angular_speed, error_norm});
  }
  return result;
}

}  // namespace diffeo
