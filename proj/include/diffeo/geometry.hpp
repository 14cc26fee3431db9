#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace diffeo {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Quat = Eigen::Quaterniond;

/// Gaussian RBF weight exp(-rho^2 ||p - c||^2), always in (0, 1].
/// Throws std::domain_error on non-finite input.
double rbf(const Vec3& p, double rho, const Vec3& c);

/// Rotation-vector logarithm of a unit quaternion, half-angle convention:
/// ||quat_log(q)|| = angle(q) / 2, in [0, pi/2]. The quaternion sign is
/// flipped to w >= 0 first so the log always lands on the short arc.
/// Numerically stable for all unit quaternions, never returns NaN.
Vec3 quat_log(const Quat& q);

/// Inverse of quat_log: quat_exp(quat_log(q)) == q for rotations below pi.
/// Result is renormalized to unit length.
Quat quat_exp(const Vec3& v);

/// q^t = quat_exp(t * quat_log(q)). Continuous in t,
/// angle(quat_pow(q, t)) = t * angle(q) for t in [0, 1].
Quat quat_pow(const Quat& q, double t);

/// Full rotation angle of q, in [0, pi].
double quat_angle(const Quat& q);

/// Minimal rotation carrying direction `from` onto direction `to`; inputs
/// need not be normalized. A vector shorter than 1e-9 yields the identity.
/// Antiparallel inputs rotate by pi about a fixed perpendicular axis
/// (cross with x, falling back to y) so the result is deterministic.
Quat quat_between_directions(const Vec3& from, const Vec3& to);

/// Sigmoid-scheduled twist angle: amplitude / (1 + exp(-rho_sig * x)).
/// Monotone in x, half the amplitude at x = 0.
double twist_angle(double x, double amplitude, double rho_sig);

Mat3 rot_roll(double phi);     // about x
Mat3 rot_pitch(double theta);  // about y
Mat3 rot_yaw(double psi);      // about z

/// Twist factor P * R_pitch(theta_t) * P * R_roll(phi_t) + (I - P)
/// with P = diag(1, 1, 0). Identity when both angles are zero.
Mat3 twist_rotation(double phi_t, double theta_t);

/// Parameters of the twisted-affine transform. Continuous entries are boxed
/// to their fit ranges (scaling [0.5, 2], shear [0, 1], rotation
/// [-pi/2, pi/2]); reflection components are +-1 and twist amplitudes are
/// 0 or pi when produced by the fitter.
struct TwistedAffineParams {
  Vec3 scaling{1.0, 1.0, 1.0};      // a_x, a_y, a_z
  Vec3 shear{0.0, 0.0, 0.0};        // s_xy, s_xz, s_yz
  Vec3 rotation{0.0, 0.0, 0.0};     // phi, theta, psi
  Vec3 reflection{1.0, 1.0, 1.0};   // r_x, r_y, r_z
  double twist_roll = 0.0;          // roll twist amplitude phi_t0
  double twist_pitch = 0.0;         // pitch twist amplitude theta_t0
  double rho_sig = 10.0;            // twist sigmoid slope [1/m]
  Vec3 translation{0.0, 0.0, 0.0};  // centroid shift mu_goal - mu_init
  Vec3 mu_init{0.0, 0.0, 0.0};      // recentering anchors
  Vec3 mu_goal{0.0, 0.0, 0.0};
};

/// Constant factor R_scaling * R_shear * R_rotation * R_reflection.
Mat3 affine_factor(const TwistedAffineParams& params);

/// Position-dependent matrix affine_factor * R_twist, with twist angles
/// evaluated from the x and y components of `p`. `p` is expected in the
/// recentered frame (relative to mu_init).
Mat3 make_rotation_factors(const TwistedAffineParams& params, const Vec3& p);

/// Recentered twisted-affine map p -> R_TA(p - mu_init) + mu_goal.
Vec3 twisted_affine_apply(const TwistedAffineParams& params, const Vec3& p);

}  // namespace diffeo
