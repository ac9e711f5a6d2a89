#include "planar_init/initializer.hpp"

#include "planar_init/errors.hpp"
#include "planar_init/metrics.hpp"
#include "planar_init/motion_field.hpp"
#include "planar_init/weighting.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <limits>

namespace planar_init {

const FeatureObservation* Keyframe::find(int id) const {
  auto it = std::lower_bound(features.begin(), features.end(), id,
                             [](const FeatureObservation& f, int i) { return f.id < i; });
  return it != features.end() && it->id == id ? &*it : nullptr;
}

void KeyframeWindow::validate() const {
  if (keyframes.size() < 2) throw Error(ErrorKind::kInsufficientData, "window needs two keyframes");
  if (static_cast<int>(keyframes.size()) > capacity) {
    throw Error(ErrorKind::kInsufficientData, "window exceeds its capacity");
  }
  for (std::size_t k = 1; k < keyframes.size(); ++k) {
    if (!(keyframes[k].t > keyframes[k - 1].t)) {
      throw Error(ErrorKind::kTime, "keyframe timestamps must increase");
    }
  }
}

FeatureObservation make_observation(int id, const Vec2& left_px, const Vec2& right_px,
                                    const CameraRig& rig) {
  return {id, left_px, right_px, normalize(rig, left_px), normalize(rig, right_px)};
}

std::string_view to_string(InitStatus status) {
  switch (status) {
    case InitStatus::kInitialized: return "initialized";
    case InitStatus::kImuOnlyFallback: return "imu-only-fallback";
    case InitStatus::kPureRotation: return "pure-rotation";
    case InitStatus::kFailed: return "failed";
    case InitStatus::kGateNotReached: return "gate-not-reached";
  }
  return "failed";
}

std::uint64_t splitmix64(std::uint64_t x) {
  std::uint64_t z = x + 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

HomographySolution select_solution(const PriorNormal& prior,
                                   std::span<const HomographySolution> candidates, double* margin,
                                   int* index) {
  if (candidates.empty()) throw Error(ErrorKind::kNoSolution, "no candidate solutions");
  if (candidates.size() == 1) {
    if (margin) *margin = std::numeric_limits<double>::infinity();
    if (index) *index = 0;
    return candidates[0];
  }
  int best = 0;
  double best_dist = (prior.n - candidates[0].n).norm();
  double runner_up = std::numeric_limits<double>::infinity();
  for (std::size_t k = 1; k < candidates.size(); ++k) {
    const double d = (prior.n - candidates[k].n).norm();
    if (d < best_dist) {
      runner_up = best_dist;
      best_dist = d;
      best = static_cast<int>(k);
    } else {
      runner_up = std::min(runner_up, d);
    }
  }
  if (margin) *margin = std::abs(runner_up - best_dist);
  if (index) *index = best;
  return candidates[static_cast<std::size_t>(best)];
}

StereoPoint triangulate_stereo(const Vec2& left_px, const Vec2& right_px, const CameraRig& rig,
                               double min_disparity_px) {
  const double disparity = left_px.x() - right_px.x();
  if (!(disparity > 0.0)) throw Error(ErrorKind::kInvalidDisparity, "non-positive disparity");
  const double z = rig.f * rig.baseline / disparity;
  StereoPoint p;
  p.p_c = z * homogeneous(normalize(rig, left_px));
  p.reliable = disparity >= min_disparity_px;
  return p;
}

namespace {

Vec3 disparity_plane(std::span<const FeatureObservation> features, std::span<const char> keep) {
  Mat3 ata = Mat3::Zero();
  Vec3 atb = Vec3::Zero();
  int n = 0;
  for (std::size_t k = 0; k < features.size(); ++k) {
    if (!keep[k]) continue;
    const Vec3 a = homogeneous(features[k].left);
    ata += a * a.transpose();
    atb += a * (features[k].left_px.x() - features[k].right_px.x());
    ++n;
  }
  const Eigen::LDLT<Mat3> ldlt(ata);
  if (n < 3 || ldlt.info() != Eigen::Success || !(ldlt.rcond() > 1e-12)) {
    throw Error(ErrorKind::kInsufficientData, "stereo plane fit is underdetermined");
  }
  const Vec3 c = ldlt.solve(atb);
  if (!(c.z() > 0.0)) throw Error(ErrorKind::kInvalidDisparity, "stereo plane is not in front of the camera");
  return c;
}

}  // namespace

Vec3 fit_plane_normal(std::span<const FeatureObservation> features) {
  std::vector<char> keep(features.size(), 1);
  const Vec3 c = disparity_plane(features, keep);
  std::vector<double> r(features.size());
  for (std::size_t k = 0; k < features.size(); ++k) {
    r[k] = std::abs(features[k].left_px.x() - features[k].right_px.x() - c.dot(homogeneous(features[k].left)));
  }
  std::vector<double> sorted = r;
  const auto mid = sorted.begin() + static_cast<long>(sorted.size() / 2);
  std::nth_element(sorted.begin(), mid, sorted.end());
  const double cut = 3.0 * 1.4826 * *mid;
  int kept = 0;
  for (std::size_t k = 0; k < features.size(); ++k) kept += keep[k] = r[k] <= cut;
  if (kept >= 3 && kept < static_cast<int>(features.size())) return disparity_plane(features, keep).normalized();
  return c.normalized();
}

double recover_scale(const Vec3& t_bar, const Vec3& t_hat, bool* backwards) {
  const Vec3 a[1] = {t_bar};
  const Vec3 b[1] = {t_hat};
  return recover_scale(std::span<const Vec3>(a), std::span<const Vec3>(b), backwards);
}

double recover_scale(std::span<const Vec3> t_bar, std::span<const Vec3> t_hat, bool* backwards) {
  if (t_bar.size() != t_hat.size() || t_bar.empty()) {
    throw Error(ErrorKind::kInsufficientData, "scale needs matching, non-empty translations");
  }
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < t_bar.size(); ++k) {
    num += t_bar[k].dot(t_hat[k]);
    den += t_bar[k].squaredNorm();
  }
  if (std::sqrt(den) <= 1e-6) {
    throw Error(ErrorKind::kDegenerateTranslation, "translation too small to observe scale");
  }
  const double s = num / den;
  if (backwards) *backwards = !(s > 0.0);
  return s;
}

Vec3 metric_alignment(const Pose& T_pnp, const Pose& T_body, const CameraRig& rig) {
  if (T_pnp.of.kind != FrameKind::kCamera || T_pnp.in.kind != FrameKind::kWorld) {
    throw Error(ErrorKind::kLabeledFrame, "PnP pose must be camera-in-world, got " + T_pnp.of.str() +
                                              " in " + T_pnp.in.str());
  }
  if (T_body.of.kind != FrameKind::kBody || T_body.in.kind != FrameKind::kWorld) {
    throw Error(ErrorKind::kLabeledFrame, "reference pose must be body-in-world, got " +
                                              T_body.of.str() + " in " + T_body.in.str());
  }
  if (rig.T_cb.of.kind != FrameKind::kCamera || rig.T_cb.in.kind != FrameKind::kBody) {
    throw Error(ErrorKind::kLabeledFrame, "extrinsic must be camera-in-body");
  }
  const Rotation r_cw = T_body.rotation * rig.T_cb.rotation;
  return r_cw.inverse() * (T_pnp.translation - T_body.translation) -
         rig.T_cb.rotation.inverse() * rig.T_cb.translation;
}

std::map<int, double> window_feature_sigmas(const KeyframeWindow& window, const CameraRig& rig) {
  std::map<int, std::pair<double, int>> acc;
  for (const auto& kf : window.keyframes) {
    for (const auto& f : kf.features) {
      try {
        const double s = stereo_deviation({f.left, f.right}, rig).sigma;
        auto& a = acc[f.id];
        a.first += s * s;
        a.second += 1;
      } catch (const Error&) {
      }
    }
  }
  std::map<int, double> out;
  for (const auto& [id, a] : acc) out[id] = std::sqrt(a.first / a.second);
  return out;
}

namespace {

std::vector<Correspondence> match(const Keyframe& a, const Keyframe& b) {
  std::vector<Correspondence> out;
  auto ia = a.features.begin();
  auto ib = b.features.begin();
  while (ia != a.features.end() && ib != b.features.end()) {
    if (ia->id < ib->id) {
      ++ia;
    } else if (ib->id < ia->id) {
      ++ib;
    } else {
      out.push_back({ia->left, ib->left, ia->id});
      ++ia;
      ++ib;
    }
  }
  return out;
}

Pose relabel(Pose p, FrameId of, FrameId in) {
  p.of = of;
  p.in = in;
  return p;
}

struct PairState {
  bool present = false;
  bool rotation_only = false;
  HomographySolution solution;
  Vec3 t_bar_cam0 = Vec3::Zero();
  Vec3 t_hat = Vec3::Zero();
  bool pnp_ok = false;
};

}  // namespace

InitializationResult run_initialization(const KeyframeWindow& window,
                                        std::span<const ImuSample> imu,
                                        const WindowAnchor& anchor, const CameraRig& rig,
                                        const PipelineConfig& config, std::uint64_t seed) {
  InitializationResult res;
  Diagnostics& diag = res.diagnostics;
  std::string stage = "input";
  std::vector<NavState> imu_states;

  auto fill_imu_only = [&] {
    res.keyframes.clear();
    for (std::size_t k = 0; k < imu_states.size(); ++k) {
      KeyframeState s;
      s.frame = window.keyframes[k].frame;
      s.t = window.keyframes[k].t;
      s.T_bw = relabel(imu_states[k].pose, FrameId::body(static_cast<int>(k)), FrameId::world());
      s.velocity = imu_states[k].velocity;
      res.keyframes.push_back(s);
    }
  };

  try {
    config.validate();
    rig.validate();
    window.validate();
    const auto& kfs = window.keyframes;
    const std::size_t K = kfs.size();

    stage = "imu";
    std::vector<std::vector<ImuSample>> segments(K);
    std::vector<PriorNormal> priors(K);
    NavState state = anchor.state;
    state.gyro_bias = config.gyro_bias;
    state.accel_bias = config.accel_bias;
    state.t = kfs[0].t;
    imu_states.push_back(state);
    priors[0] = anchor.normal;
    for (std::size_t k = 1; k < K; ++k) {
      segments[k] = slice(imu, kfs[k - 1].t, kfs[k].t);
      if (segments[k].size() < 2) throw Error(ErrorKind::kStream, "no IMU samples between keyframes");
      state = propagate(state, segments[k], config.gravity);
      imu_states.push_back(state);
      priors[k] = propagate_normal(
          priors[k - 1], integrate_camera_rotation(segments[k], config.gyro_bias, rig.T_cb), kfs[k].t);
    }

    stage = "features";
    for (const auto& kf : kfs) {
      if (static_cast<int>(kf.features.size()) < config.min_features) {
        res.status = InitStatus::kImuOnlyFallback;
        diag.message = "keyframe " + std::to_string(kf.frame) + " has " +
                       std::to_string(kf.features.size()) + " features";
        fill_imu_only();
        return res;
      }
    }
    const std::map<int, double> sigmas =
        config.deviation == DeviationMode::kDynamic ? window_feature_sigmas(window, rig)
                                                    : std::map<int, double>{};
    auto feature_weight = [&](int id) {
      if (config.deviation == DeviationMode::kFixed) {
        return weight({config.fixed_deviation_px}, config.deviation_floor_px);
      }
      auto it = sigmas.find(id);
      const double s = it == sigmas.end() ? config.fixed_deviation_px : it->second;
      return weight({s}, config.deviation_floor_px);
    };

    const Pose T_c0w_anchor = compose(anchor.state.pose, rig.T_cb);
    std::vector<PairState> pairs(K);
    pairs[0].present = true;
    pairs[0].rotation_only = true;
    double max_parallax = 0.0;

    for (std::size_t j = 1; j < K; ++j) {
      PairState& ps = pairs[j];
      PairDiagnostics pd;
      pd.keyframe = static_cast<int>(j);

      stage = "homography";
      const std::vector<Correspondence> corr = match(kfs[0], kfs[j]);
      pd.correspondences = static_cast<int>(corr.size());
      const HomographyEstimate est = estimate(corr, config.ransac, splitmix64(seed + 2 * j));
      pd.homography_inliers = est.num_inliers;
      std::vector<Correspondence> inliers;
      for (std::size_t k = 0; k < corr.size(); ++k) {
        if (est.inliers[k]) inliers.push_back(corr[k]);
      }
      for (const auto& c : corr) {
        const double ind = indicator(est.H, c);
        if (std::isfinite(ind)) diag.indicators.push_back(ind);
      }

      stage = "decomposition";
      const std::vector<HomographySolution> solutions = decompose(est.H);
      ps.present = true;
      double widest = 0.0;
      for (const auto& sol : solutions) widest = std::max(widest, sol.t_bar.norm());
      if (!solutions[0].normal_determined || widest < config.min_parallax) {
        // Too little translation for the normal or the scale: keep the rotation only.
        ps.rotation_only = true;
        ps.solution = solutions[0];
        ps.solution.t_bar = Vec3::Zero();
        ps.solution.normal_determined = false;
        pd.t_bar_norm = widest;
        diag.pairs.push_back(pd);
        continue;
      }

      stage = "positive-depth";
      const std::vector<HomographySolution> candidates = filter_positive_depth(solutions, inliers);

      stage = "selection";
      std::vector<HomographySolution> in_cam_j(candidates.begin(), candidates.end());
      SelectionRecord rec;
      rec.keyframe = static_cast<int>(j);
      rec.prior = priors[j].n;
      for (auto& c : in_cam_j) {
        c.n = (c.R * c.n).normalized();
        rec.candidates.push_back(c.n);
      }
      int index = 0;
      select_solution(priors[j], in_cam_j, &rec.margin, &index);
      rec.selected = index;
      ps.solution = candidates[static_cast<std::size_t>(index)];
      diag.selections.push_back(rec);
      ps.t_bar_cam0 = -(ps.solution.R.inverse() * ps.solution.t_bar);
      pd.t_bar_cam0 = ps.t_bar_cam0;
      pd.t_bar_norm = ps.solution.t_bar.norm();
      max_parallax = std::max(max_parallax, pd.t_bar_norm);
      diag.pairs.push_back(pd);
    }

    diag.indicator_p50 = percentile(diag.indicators, 50);
    diag.indicator_p95 = percentile(diag.indicators, 95);
    diag.indicator_max = percentile(diag.indicators, 100);
    if (!diag.selections.empty()) {
      diag.selection_margin = std::numeric_limits<double>::infinity();
      for (const auto& s : diag.selections) diag.selection_margin = std::min(diag.selection_margin, s.margin);
    }

    if (max_parallax < std::max(config.min_parallax, 1e-6)) {
      res.status = InitStatus::kPureRotation;
      diag.message = "no keyframe pair shows enough translation to observe scale";
      fill_imu_only();
      return res;
    }

    stage = "pnp";
    for (auto& pd : diag.pairs) {
      const std::size_t j = static_cast<std::size_t>(pd.keyframe);
      PairState& ps = pairs[j];
      if (ps.rotation_only) continue;
      std::vector<PnpPair> pnp_pairs;
      std::vector<double> weights;
      for (const auto& f : kfs[j].features) {
        const FeatureObservation* ref = kfs[0].find(f.id);
        if (!ref || !(ref->left_px.x() - ref->right_px.x() > 0.0)) continue;
        const StereoPoint sp = triangulate_stereo(ref->left_px, ref->right_px, rig, config.min_disparity_px);
        if (!sp.reliable) continue;
        pnp_pairs.push_back({T_c0w_anchor * sp.p_c, f.left});
        weights.push_back(feature_weight(f.id));
      }
      pd.pnp_pairs = static_cast<int>(pnp_pairs.size());
      const PnpResult pnp = solve_pnp(pnp_pairs, splitmix64(seed + 2 * j + 1), config.pnp, weights);
      pd.pnp_inliers = pnp.num_inliers;
      diag.pnp_inliers += pnp.num_inliers;
      ps.t_hat = metric_alignment(pnp.T_cw, anchor.state.pose, rig);
      ps.pnp_ok = true;
      pd.t_hat = ps.t_hat;
    }

    stage = "scale";
    std::vector<Vec3> tb, th;
    for (std::size_t j = 1; j < K; ++j) {
      if (pairs[j].rotation_only || !pairs[j].pnp_ok) continue;
      tb.push_back(pairs[j].t_bar_cam0);
      th.push_back(pairs[j].t_hat);
      for (auto& pd : diag.pairs) {
        if (pd.keyframe == static_cast<int>(j)) pd.used_for_scale = true;
      }
    }
    bool backwards = false;
    const double s = recover_scale(tb, th, &backwards);
    for (std::size_t k = 0; k < tb.size(); ++k) diag.scale_normal_residual += tb[k].dot(s * tb[k] - th[k]);
    res.scale = s;
    if (backwards) {
      res.status = InitStatus::kFailed;
      diag.failed_stage = stage;
      diag.error_kind = "backwards-scale";
      diag.message = "recovered scale is not positive";
      fill_imu_only();
      return res;
    }

    stage = "poses";
    // Plane normal in camera 0, weighted toward wide pairs.
    Vec3 n0 = Vec3::Zero();
    for (std::size_t j = 1; j < K; ++j) {
      if (!pairs[j].rotation_only) n0 += pairs[j].solution.t_bar.squaredNorm() * pairs[j].solution.n;
    }
    n0.normalize();
    res.normal_cam0 = n0;
    for (std::size_t j = K - 1; j >= 1; --j) {
      if (!pairs[j].rotation_only) {
        res.selected = pairs[j].solution;
        break;
      }
    }

    Rotation r_c0w = anchor.state.pose.rotation * rig.T_cb.rotation;
    if (config.plane_tilt_correction) {
      // Level against the stereo ground plane seen from keyframe 0; for a
      // near-vertical climb the homography normals straddle the truth.
      // Frame noise is independent, so average every keyframe's fit in camera 0.
      Vec3 n_stereo = Vec3::Zero();
      for (std::size_t j = 0; j < K; ++j) {
        const Rotation r_cj_c0 = j == 0 ? Rotation() : pairs[j].solution.R.inverse();
        n_stereo += static_cast<double>(kfs[j].features.size()) *
                    (r_cj_c0 * fit_plane_normal(kfs[j].features));
      }
      const Vec3 n_w = r_c0w * n_stereo.normalized();
      const Eigen::Quaterniond fix = Eigen::Quaterniond::FromTwoVectors(n_w, Vec3::UnitZ());
      r_c0w = Rotation(fix) * r_c0w;
    }
    const Rotation r_b0w = r_c0w * rig.T_cb.rotation.inverse();
    const Vec3 p_c0w = anchor.state.pose.translation + r_b0w * rig.T_cb.translation;
    const Pose T_c0w{r_c0w, p_c0w, FrameId::camera(0), FrameId::world()};

    std::vector<Rotation> r_c0_to_cj(K);
    std::vector<Vec3> t_bar_j(K, Vec3::Zero());
    res.keyframes.resize(K);
    for (std::size_t j = 0; j < K; ++j) {
      const int ij = static_cast<int>(j);
      if (j > 0) {
        r_c0_to_cj[j] = pairs[j].solution.R;
        t_bar_j[j] = pairs[j].solution.t_bar;
      }
      const Pose T_cj_c0{r_c0_to_cj[j].inverse(), s * (-(r_c0_to_cj[j].inverse() * t_bar_j[j])),
                         FrameId::camera(ij), FrameId::camera(0)};
      const Pose T_cjw = compose(T_c0w, T_cj_c0);
      const Pose T_bc = relabel(invert(rig.T_cb), FrameId::body(ij), FrameId::camera(ij));
      KeyframeState& ks = res.keyframes[j];
      ks.frame = kfs[j].frame;
      ks.t = kfs[j].t;
      ks.T_bw = compose(T_cjw, T_bc);
    }

    stage = "velocity";
    std::vector<Vec3> v_sum(K, Vec3::Zero());
    std::vector<int> v_count(K, 0);
    for (std::size_t k = 0; k + 1 < K; ++k) {
      const std::vector<ImuSample>& seg = segments[k + 1];
      VelocityProblem problem;
      problem.rig = rig;
      problem.dt = kfs[k + 1].t - kfs[k].t;
      problem.R_bw = res.keyframes[k].T_bw.rotation;
      problem.R_ck_ck1 = integrate_camera_rotation(seg, config.gyro_bias, rig.T_cb);
      problem.omega_b = integrate_body_rotation(seg, config.gyro_bias).log() / problem.dt;
      const Vec3 n_k = r_c0_to_cj[k] * n0;
      const double d_k = s * (1.0 + n_k.dot(t_bar_j[k]));
      for (const Correspondence& c : match(kfs[k], kfs[k + 1])) {
        const double den = n_k.dot(homogeneous(c.p_i));
        if (!(den > 1e-9)) continue;
        FlowFeature f;
        f.id = c.id;
        f.p_k = c.p_i;
        f.p_k1 = c.p_j;
        f.x_k = (d_k / den) * homogeneous(c.p_i);
        f.weight = feature_weight(c.id);
        problem.features.push_back(f);
      }
      const Vec3 v_init =
          (imu_states[k + 1].pose.translation - imu_states[k].pose.translation) / problem.dt;
      const VelocityEstimate ve = refine_body_velocity(problem, v_init, config.gn);
      diag.gn_iterations += ve.iterations;
      diag.gn_final_cost += ve.final_cost;
      diag.gn_converged = diag.gn_converged && ve.converged;
      diag.interval_velocities.push_back(ve.velocity);

      // Turn the interval mean into endpoint velocities with the IMU:
      // mean = v_k + (1/dt) * integral of (v - v_k).
      NavState rel = NavState::at_rest(kfs[k].t, problem.R_bw);
      rel.gyro_bias = config.gyro_bias;
      rel.accel_bias = config.accel_bias;
      const NavState end = propagate(rel, seg, config.gravity);
      const Vec3 v_k = ve.velocity - end.pose.translation / problem.dt;
      v_sum[k] += v_k;
      v_count[k] += 1;
      v_sum[k + 1] += v_k + end.velocity;
      v_count[k + 1] += 1;
    }
    for (std::size_t k = 0; k < K; ++k) res.keyframes[k].velocity = v_sum[k] / v_count[k];

    res.status = InitStatus::kInitialized;
  } catch (const Error& e) {
    res.status = InitStatus::kFailed;
    diag.failed_stage = stage;
    diag.error_kind = std::string(to_string(e.kind()));
    diag.message = e.what();
    if (imu_states.size() == window.keyframes.size()) {
      fill_imu_only();
    } else {
      res.keyframes.clear();
    }
  }
  return res;
}

}  // namespace planar_init
