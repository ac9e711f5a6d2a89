#pragma once

#include "planar_init/geometry.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace planar_init {

/// Planar homography between two normalized image planes, p_j ~ H p_i.
///
/// Stored scaled so that its second singular value is 1, which is the scale
/// at which H = R + t n^T / d holds exactly. The sign is kept as given, so a
/// homography built from (R, t, n, d) keeps positive depth ratios.
class Homography {
 public:
  Homography() : h_(Mat3::Identity()) {}
  /// Throws kDegenerateHomography if the matrix has no usable second singular value.
  static Homography from_matrix(const Mat3& m);

  const Mat3& matrix() const { return h_; }
  Mat2 h1() const { return h_.topLeftCorner<2, 2>(); }
  Vec2 h2() const { return h_.topRightCorner<2, 1>(); }
  Eigen::RowVector2d h3() const { return h_.bottomLeftCorner<1, 2>(); }
  double h4() const { return h_(2, 2); }

  /// Forward transfer of a normalized point; nullopt when H p lands at infinity.
  std::optional<Vec2> transfer(const Vec2& p) const;
  Homography inverse() const;
  Homography flipped() const;

 private:
  explicit Homography(const Mat3& m) : h_(m) {}
  Mat3 h_;
};

struct Correspondence {
  Vec2 p_i;
  Vec2 p_j;
  int id = -1;
};

struct HomographySolution {
  Rotation R;             ///< camera i -> camera j
  Vec3 t_bar = Vec3::Zero();  ///< t / d
  Vec3 n = Vec3::UnitZ();     ///< plane normal in camera i
  /// False for (near) pure rotation, where the plane normal is unobservable.
  bool normal_determined = true;

  Mat3 reassemble() const { return R.matrix() + t_bar * n.transpose(); }
};

struct RansacOptions {
  double threshold = 1e-3;  ///< symmetric transfer error, normalized units
  double confidence = 0.999;
  int max_iterations = 2000;
};

struct HomographyEstimate {
  Homography H;
  std::vector<bool> inliers;
  int num_inliers = 0;
  int iterations = 0;
};

/// H = R + t n^T / d, scale-normalized. Throws kInvalidPlane for d <= 0.
Homography synthesize(const Rotation& R, const Vec3& t, const Vec3& n, double d);

/// Larger of the forward and backward transfer distances; +inf when either
/// transfer hits the line at infinity.
double symmetric_transfer_error(const Homography& H, const Correspondence& c);

/// Normalized (Hartley) DLT over all given correspondences.
Homography fit_dlt(std::span<const Correspondence> correspondences);

/// Robust estimate: 4-point normalized DLT in a seeded sampling loop, then a
/// least-squares refit on the consensus set. The returned H is oriented so
/// that inliers have positive depth ratios.
HomographyEstimate estimate(std::span<const Correspondence> correspondences,
                            const RansacOptions& options, std::uint64_t seed);

/// Analytic SVD decomposition of a normalized H into at most four distinct
/// (R, t/d, n) triples. Pure rotation yields a single solution with an
/// undetermined normal. Throws kDegenerateHomography for rank-deficient H.
std::vector<HomographySolution> decompose(const Homography& H);

/// Keeps solutions that put every correspondence in front of both cameras.
/// Throws kInconsistentData when nothing survives.
std::vector<HomographySolution> filter_positive_depth(
    std::span<const HomographySolution> solutions,
    std::span<const Correspondence> correspondences);

/// Planarity indicator: 2D distance between p_j and the transfer of p_i.
/// Returns +inf when the transfer is at infinity.
double indicator(const Homography& H, const Correspondence& c);

}  // namespace planar_init
