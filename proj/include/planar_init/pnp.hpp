#pragma once

#include "planar_init/geometry.hpp"

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace planar_init {

/// A known world point and its normalized observation in the camera.
struct PnpPair {
  Vec3 p_w;
  Vec2 obs;
};

struct PnpOptions {
  double threshold = 8e-3;  ///< reprojection error, normalized units
  double confidence = 0.999;
  int max_iterations = 500;
  int refine_iterations = 20;
};

struct PnpResult {
  Pose T_cw;  ///< camera pose in the world, T_c^w
  std::vector<bool> inliers;
  int num_inliers = 0;
  int iterations = 0;
  double final_cost = 0.0;
};

/// Closed-form P3P (Grunert): candidate camera-frame poses from three bearing
/// correspondences. Each result maps world to camera, x_c = R x_w + t.
struct P3pSolution {
  Mat3 R;
  Vec3 t;
};
std::vector<P3pSolution> solve_p3p(const std::array<Vec3, 3>& world,
                                   const std::array<Vec3, 3>& bearings);

/// Robust camera pose: minimal P3P inside a seeded sampling loop followed by
/// (optionally weighted) Gauss-Newton reprojection refinement on the inliers.
/// Coplanar world points are fine. Throws kInsufficientData below 4 pairs and
/// kDegeneratePnp without consensus.
PnpResult solve_pnp(std::span<const PnpPair> pairs, std::uint64_t seed,
                    const PnpOptions& options = {}, std::span<const double> weights = {});

/// Gauss-Newton reprojection refinement from an initial world-to-camera guess.
/// Returns the final weighted cost; R and t are updated in place.
double refine_pose(std::span<const PnpPair> pairs, std::span<const double> weights, Mat3& R,
                   Vec3& t, int max_iterations);

}  // namespace planar_init
