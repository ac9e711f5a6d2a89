#include "planar_init/motion_field.hpp"

#include "planar_init/errors.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <limits>

namespace planar_init {

Vec2 predicted_normalized_velocity(const Homography& H, const Vec2& p_i, const Vec2& v_i) {
  const double den = H.h3().dot(p_i) + H.h4();
  if (std::abs(den) < 1e-9) throw Error(ErrorKind::kHorizonSingularity, "h3 p + h4 vanishes");
  const Vec2 num = H.h1() * p_i + H.h2();
  return (den * (H.h1() * v_i) - num * H.h3().dot(v_i)) / (den * den);
}

Eigen::Matrix<double, 2, 3> normalized_projection_jacobian(const Vec3& p_c) {
  if (std::abs(p_c.z()) < 1e-9) throw Error(ErrorKind::kZeroDepth, "feature depth is zero");
  const double iz = 1.0 / p_c.z();
  Eigen::Matrix<double, 2, 3> j;
  j << iz, 0.0, -p_c.x() * iz * iz,
       0.0, iz, -p_c.y() * iz * iz;
  return j;
}

Vec2 feature_normalized_velocity(const Vec3& p_c, const Vec3& v_c) {
  return normalized_projection_jacobian(p_c) * v_c;
}

Vec3 lever_arm_velocity(const Vec3& omega_b, const Rotation& R_wb, const CameraRig& rig) {
  return R_wb.inverse() * omega_b.cross(rig.T_cb.translation);
}

Vec3 camera_velocity(const Vec3& v_b_w, const Vec3& omega_b, const Rotation& R_wb,
                     const CameraRig& rig) {
  const Vec3 v_c_w = v_b_w + lever_arm_velocity(omega_b, R_wb, rig);
  return -(rig.T_cb.rotation.inverse() * (R_wb * v_c_w));
}

namespace {

// x_{k+1} predicted for a candidate body velocity.
Vec3 moved_point(const VelocityProblem& problem, const FlowFeature& f, const Vec3& v_c) {
  return problem.R_ck_ck1 * (f.x_k + v_c * problem.dt);
}

double weighted_cost(const VelocityProblem& problem, const Vec3& v) {
  const Eigen::VectorXd r = velocity_residuals(problem, v);
  double cost = 0.0;
  for (std::size_t k = 0; k < problem.features.size(); ++k) {
    cost += problem.features[k].weight * r.segment<2>(2 * static_cast<Eigen::Index>(k)).squaredNorm();
  }
  return cost;
}

}  // namespace

Eigen::VectorXd velocity_residuals(const VelocityProblem& problem, const Vec3& v_b_w) {
  if (!(problem.dt > 0.0)) throw Error(ErrorKind::kTime, "interval must be positive");
  const Rotation R_wb = problem.R_bw.inverse();
  const Vec3 v_c = camera_velocity(v_b_w, problem.omega_b, R_wb, problem.rig);
  Eigen::VectorXd r(2 * problem.features.size());
  for (std::size_t k = 0; k < problem.features.size(); ++k) {
    const FlowFeature& f = problem.features[k];
    const Vec3 x = moved_point(problem, f, v_c);
    if (std::abs(x.z()) < 1e-9) throw Error(ErrorKind::kZeroDepth, "predicted depth is zero");
    const Vec2 measured = (f.p_k1 - f.p_k) / problem.dt;
    const Vec2 predicted = (x.head<2>() / x.z() - f.p_k) / problem.dt;
    r.segment<2>(2 * static_cast<Eigen::Index>(k)) = measured - predicted;
  }
  return r;
}

Eigen::MatrixXd velocity_jacobian(const VelocityProblem& problem, const Vec3& v_b_w) {
  const Rotation R_wb = problem.R_bw.inverse();
  const Vec3 v_c = camera_velocity(v_b_w, problem.omega_b, R_wb, problem.rig);
  // d v_c / d v_b^w = -R_b^c R_w^b; the dt of the displacement cancels the 1/dt
  // of the finite difference.
  const Mat3 dvc = -(problem.rig.T_cb.rotation.inverse() * R_wb).matrix();
  const Mat3 chain = problem.R_ck_ck1.matrix() * dvc;
  Eigen::MatrixXd J(2 * problem.features.size(), 3);
  for (std::size_t k = 0; k < problem.features.size(); ++k) {
    const Vec3 x = moved_point(problem, problem.features[k], v_c);
    J.block<2, 3>(2 * static_cast<Eigen::Index>(k), 0) = -normalized_projection_jacobian(x) * chain;
  }
  return J;
}

VelocityEstimate refine_body_velocity(const VelocityProblem& problem, const Vec3& v_init,
                                      const GaussNewtonOptions& options) {
  if (problem.features.size() < 3) {
    throw Error(ErrorKind::kInsufficientData, "velocity refinement needs at least 3 features");
  }
  VelocityEstimate est;
  Vec3 v = v_init;
  double cost = weighted_cost(problem, v);
  est.initial_cost = cost;

  for (int it = 0; it < options.max_iterations; ++it) {
    const Eigen::VectorXd r = velocity_residuals(problem, v);
    const Eigen::MatrixXd J = velocity_jacobian(problem, v);
    Mat3 hessian = Mat3::Zero();
    Vec3 gradient = Vec3::Zero();
    for (std::size_t k = 0; k < problem.features.size(); ++k) {
      const auto jk = J.block<2, 3>(2 * static_cast<Eigen::Index>(k), 0);
      const double w = problem.features[k].weight;
      hessian += w * jk.transpose() * jk;
      gradient += w * jk.transpose() * r.segment<2>(2 * static_cast<Eigen::Index>(k));
    }
    Eigen::SelfAdjointEigenSolver<Mat3> eig(hessian);
    const Vec3 ev = eig.eigenvalues();
    if (!(ev(2) > 0.0) || ev(0) <= 1e-12 * ev(2)) {
      throw Error(ErrorKind::kUnobservableVelocity, "motion-field Jacobian has rank < 3");
    }
    ++est.iterations;
    const Vec3 step = hessian.ldlt().solve(-gradient);

    // Backtrack so every accepted iterate decreases the cost.
    double alpha = 1.0;
    Vec3 candidate = v + step;
    double c = weighted_cost(problem, candidate);
    while (c > cost && alpha > 1e-6) {
      alpha *= 0.5;
      candidate = v + alpha * step;
      c = weighted_cost(problem, candidate);
    }
    if (c > cost) {
      est.converged = step.norm() < options.step_tolerance;
      break;
    }
    const double decrease = cost - c;
    v = candidate;
    cost = c;
    est.cost_history.push_back(cost);
    if (alpha * step.norm() < options.step_tolerance ||
        decrease <= options.relative_cost_tolerance * std::max(cost + decrease, 1e-300)) {
      est.converged = true;
      break;
    }
  }
  est.velocity = v;
  est.final_cost = cost;
  return est;
}

}  // namespace planar_init
