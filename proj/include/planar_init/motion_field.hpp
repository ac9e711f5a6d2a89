#pragma once

#include "planar_init/geometry.hpp"
#include "planar_init/homography.hpp"

#include <span>
#include <vector>

namespace planar_init {

/// Image-plane velocity of p_j = H(p_i) given the velocity of p_i, using the
/// h1..h4 partition. Throws kHorizonSingularity when h3 p_i + h4 vanishes.
Vec2 predicted_normalized_velocity(const Homography& H, const Vec2& p_i, const Vec2& v_i);

/// d/dt of the normalized projection of a camera-frame point moving at v_c.
/// Throws kZeroDepth for |z| < 1e-9.
Vec2 feature_normalized_velocity(const Vec3& p_c, const Vec3& v_c);

/// Jacobian of the normalized projection, [[1/z, 0, -x/z^2], [0, 1/z, -y/z^2]].
Eigen::Matrix<double, 2, 3> normalized_projection_jacobian(const Vec3& p_c);

/// World velocity of the camera origin induced by body rotation,
/// R_b^w (omega_b x t_c^b).
Vec3 lever_arm_velocity(const Vec3& omega_b, const Rotation& R_wb, const CameraRig& rig);

/// Apparent camera-frame velocity of static scene points:
/// v_c = -R_b^c R_w^b (v_b^w + lever arm). R_wb maps world into body.
Vec3 camera_velocity(const Vec3& v_b_w, const Vec3& omega_b, const Rotation& R_wb,
                     const CameraRig& rig);

/// One tracked feature between keyframes k and k+1.
struct FlowFeature {
  int id = -1;
  Vec2 p_k;       ///< normalized position at k
  Vec2 p_k1;      ///< normalized position at k+1
  Vec3 x_k;       ///< point in camera k, metric
  double weight = 1.0;
};

/// Everything the velocity model needs for one keyframe interval.
struct VelocityProblem {
  std::vector<FlowFeature> features;
  Rotation R_ck_ck1;  ///< camera k -> camera k+1, x_{k+1} = R (x_k - displacement)
  Rotation R_bw;      ///< body attitude at k, R_b^w
  Vec3 omega_b = Vec3::Zero();
  double dt = 0.05;
  CameraRig rig;
};

struct GaussNewtonOptions {
  int max_iterations = 25;
  double step_tolerance = 1e-10;
  double relative_cost_tolerance = 1e-12;
};

struct VelocityEstimate {
  Vec3 velocity = Vec3::Zero();  ///< mean body velocity over the interval, world frame
  int iterations = 0;
  double initial_cost = 0.0;
  double final_cost = 0.0;
  bool converged = false;
  std::vector<double> cost_history;  ///< cost after every accepted step
};

/// Stacked residuals r = measured - predicted normalized velocity (2 per feature,
/// unweighted) for a candidate body velocity.
Eigen::VectorXd velocity_residuals(const VelocityProblem& problem, const Vec3& v_b_w);

/// Analytic d(residual)/d(v_b^w), 2N x 3, unweighted.
Eigen::MatrixXd velocity_jacobian(const VelocityProblem& problem, const Vec3& v_b_w);

/// Gauss-Newton on the weighted motion-field residuals. Measured normalized
/// velocities are forward differences (p_{k+1} - p_k) / dt; the prediction
/// moves x_k with the camera velocity over dt and reprojects it. Throws
/// kInsufficientData below 3 features and kUnobservableVelocity when the
/// Jacobian has rank < 3. Non-convergence leaves converged = false and returns
/// the best iterate.
VelocityEstimate refine_body_velocity(const VelocityProblem& problem, const Vec3& v_init,
                                      const GaussNewtonOptions& options = {});

}  // namespace planar_init
