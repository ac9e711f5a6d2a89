#pragma once

#include "planar_init/config.hpp"
#include "planar_init/geometry.hpp"
#include "planar_init/homography.hpp"
#include "planar_init/imu.hpp"
#include "planar_init/pnp.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace planar_init {

/// One feature seen by both cameras in one frame.
struct FeatureObservation {
  int id = -1;
  Vec2 left_px;
  Vec2 right_px;
  Vec2 left;   ///< normalized
  Vec2 right;  ///< normalized
};

/// A camera frame; observations are sorted by id.
struct Keyframe {
  int frame = 0;
  double t = 0.0;
  std::vector<FeatureObservation> features;

  const FeatureObservation* find(int id) const;
};

struct KeyframeWindow {
  std::vector<Keyframe> keyframes;
  int capacity = 10;

  /// Throws kTime unless timestamps strictly increase, kInsufficientData for
  /// fewer than two keyframes or more than the capacity.
  void validate() const;
};

/// Builds an observation from pixels, filling in the normalized coordinates.
FeatureObservation make_observation(int id, const Vec2& left_px, const Vec2& right_px,
                                    const CameraRig& rig);

/// Per-feature pixel deviation over a window: RMS of the stereo deviations of
/// every keyframe that observes the feature. Pairs with invalid disparity are
/// skipped.
std::map<int, double> window_feature_sigmas(const KeyframeWindow& window, const CameraRig& rig);

/// IMU-only state at the first window keyframe plus the prior normal there.
struct WindowAnchor {
  NavState state;
  PriorNormal normal;
};

enum class InitStatus { kInitialized, kImuOnlyFallback, kPureRotation, kFailed, kGateNotReached };
std::string_view to_string(InitStatus status);

struct KeyframeState {
  int frame = 0;
  double t = 0.0;
  Pose T_bw{Rotation(), Vec3::Zero(), FrameId::body(), FrameId::world()};
  Vec3 velocity = Vec3::Zero();
};

/// Normal-selection bookkeeping for one keyframe pair.
struct SelectionRecord {
  int keyframe = 0;
  Vec3 prior = Vec3::UnitZ();          ///< prior normal, camera j
  std::vector<Vec3> candidates;        ///< candidate normals rotated into camera j
  int selected = 0;
  double margin = 0.0;
};

struct PairDiagnostics {
  int keyframe = 0;
  int correspondences = 0;
  int homography_inliers = 0;
  int pnp_pairs = 0;
  int pnp_inliers = 0;
  double t_bar_norm = 0.0;
  Vec3 t_bar_cam0 = Vec3::Zero();  ///< camera j position in camera 0, over d
  Vec3 t_hat = Vec3::Zero();       ///< metric camera j position in camera 0
  bool used_for_scale = false;
};

struct Diagnostics {
  double selection_margin = 0.0;  ///< smallest margin over the window
  int pnp_inliers = 0;            ///< total over all pairs
  int gn_iterations = 0;          ///< total over all intervals
  double gn_final_cost = 0.0;
  bool gn_converged = true;
  double indicator_p50 = 0.0;
  double indicator_p95 = 0.0;
  double indicator_max = 0.0;
  std::vector<double> indicators;  ///< per correspondence, every pair
  double scale_normal_residual = 0.0;
  std::vector<SelectionRecord> selections;
  std::vector<PairDiagnostics> pairs;
  std::vector<Vec3> interval_velocities;
  std::string failed_stage;
  std::string error_kind;
  std::string message;
};

struct InitializationResult {
  InitStatus status = InitStatus::kFailed;
  std::vector<KeyframeState> keyframes;
  double scale = 0.0;                  ///< metres per unit t_bar, i.e. d at keyframe 0
  HomographySolution selected;         ///< solution of the widest pair (0, last)
  Vec3 normal_cam0 = Vec3::UnitZ();
  Diagnostics diagnostics;
};

/// Prior-normal selection: the candidate whose normal is closest to the prior; ties go to the
/// first. `candidates` and the prior must be in the same frame.
HomographySolution select_solution(const PriorNormal& prior,
                                   std::span<const HomographySolution> candidates,
                                   double* margin = nullptr, int* index = nullptr);

struct StereoPoint {
  Vec3 p_c = Vec3::Zero();
  bool reliable = true;  ///< false when the disparity is below the minimum
};

/// Depth from disparity, z = f b / (u_L - u_R), lifted along the left ray.
/// Throws kInvalidDisparity for non-positive disparity.
StereoPoint triangulate_stereo(const Vec2& left_px, const Vec2& right_px, const CameraRig& rig,
                               double min_disparity_px = 0.0);

/// Camera-frame normal of the plane seen in stereo. Over a plane the disparity
/// is affine in the normalized left coordinates, u_L - u_R = (f b / d) n . [x y 1],
/// so the fit is linear least squares with noise in the disparity only; one
/// pass of residual trimming drops off-plane points. Throws kInsufficientData
/// below 3 features or when the plane is not in front of the camera.
Vec3 fit_plane_normal(std::span<const FeatureObservation> features);

/// Least-squares scale s minimising |s t_bar - t_hat|^2. Throws
/// kDegenerateTranslation for |t_bar| <= 1e-6. `backwards` is set when s <= 0.
double recover_scale(const Vec3& t_bar, const Vec3& t_hat, bool* backwards = nullptr);
/// Stacked form over several pairs.
double recover_scale(std::span<const Vec3> t_bar, std::span<const Vec3> t_hat,
                     bool* backwards = nullptr);

/// Metric position of camera j in the reference camera frame,
/// (R_b^w R_c^b)^T (t_c^w - t_b^w) - (R_c^b)^T t_c^b.
/// T_pnp is T_{c_j}^w, T_body is the reference T_b^w. Throws kLabeledFrame on
/// mislabeled poses.
Vec3 metric_alignment(const Pose& T_pnp, const Pose& T_body, const CameraRig& rig);

/// Runs the initializer over a gathered window. Never throws for data
/// problems: failures come back as status kFailed with the stage named.
InitializationResult run_initialization(const KeyframeWindow& window,
                                        std::span<const ImuSample> imu,
                                        const WindowAnchor& anchor, const CameraRig& rig,
                                        const PipelineConfig& config, std::uint64_t seed);

/// splitmix64 step, used for all derived seeds.
std::uint64_t splitmix64(std::uint64_t x);

}  // namespace planar_init
