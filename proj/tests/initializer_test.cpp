#include "planar_init/config.hpp"
#include "planar_init/errors.hpp"
#include "planar_init/initializer.hpp"
#include "planar_init/pipeline.hpp"
#include "planar_init/simulator.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace planar_init;

namespace {

HomographySolution with_normal(const Vec3& n) {
  HomographySolution s;
  s.n = n;
  return s;
}

/// Window of `size` frames starting at `first`, anchored on ground truth.
struct TruthWindow {
  KeyframeWindow window;
  WindowAnchor anchor;
};

TruthWindow truth_window(const Dataset& d, std::size_t first, int size = 10) {
  TruthWindow w;
  w.window.capacity = size;
  w.window.keyframes.assign(d.frames.begin() + static_cast<long>(first),
                            d.frames.begin() + static_cast<long>(first) + size);
  const TruthFrame& tf = d.truth.frames[first];
  w.anchor.state.t = tf.t;
  w.anchor.state.pose = tf.T_bw;
  w.anchor.state.velocity = tf.velocity;
  w.anchor.normal = {tf.normal_c, tf.t};
  return w;
}

const TruthFrame& truth_at(const Dataset& d, int frame) {
  return d.truth.frames[static_cast<std::size_t>(frame)];
}

}  // namespace

TEST(SelectSolution, ClosestToPrior) {
  const std::vector<HomographySolution> c = {with_normal(Vec3::UnitZ()), with_normal(Vec3::UnitX())};
  int index = -1;
  double margin = 0.0;
  select_solution({Vec3::UnitZ(), 0.0}, c, &margin, &index);
  EXPECT_EQ(index, 0);
  EXPECT_NEAR(margin, std::sqrt(2.0), 1e-12);
  const std::vector<HomographySolution> swapped = {c[1], c[0]};
  select_solution({Vec3::UnitZ(), 0.0}, swapped, nullptr, &index);
  EXPECT_EQ(index, 1);
}

TEST(SelectSolution, TieGoesToFirst) {
  const std::vector<HomographySolution> c = {with_normal(Vec3(1, 0, 1).normalized()),
                                             with_normal(Vec3(-1, 0, 1).normalized())};
  int index = -1;
  select_solution({Vec3::UnitZ(), 0.0}, c, nullptr, &index);
  EXPECT_EQ(index, 0);
}

TEST(SelectSolution, EmptyThrows) {
  try {
    select_solution({Vec3::UnitZ(), 0.0}, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kNoSolution);
  }
}

TEST(TriangulateStereo, DirectEvaluation) {
  const CameraRig rig = default_rig();
  const StereoPoint p = triangulate_stereo(Vec2(660, 400), Vec2(640, 400), rig);
  EXPECT_NEAR(p.p_c.z(), 2.0, 1e-12);
  EXPECT_NEAR(p.p_c.x(), 0.1, 1e-12);
  EXPECT_TRUE(p.reliable);
  EXPECT_FALSE(triangulate_stereo(Vec2(640.5, 400), Vec2(640, 400), rig, 1.0).reliable);
}

TEST(TriangulateStereo, SimulatedPointExact) {
  const CameraRig rig = default_rig();
  for (const Vec3& p : {Vec3(0.3, -0.4, 1.7), Vec3(-1.1, 0.2, 3.2), Vec3(0.0, 0.9, 0.8)}) {
    const StereoPoint sp = triangulate_stereo(project(rig, p), project(rig, p - Vec3(rig.baseline, 0, 0)), rig);
    EXPECT_LT((sp.p_c - p).norm(), 1e-9);
  }
}

TEST(TriangulateStereo, ZeroDisparityThrows) {
  try {
    triangulate_stereo(Vec2(640, 400), Vec2(640, 400), default_rig());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kInvalidDisparity);
  }
}

TEST(RecoverScale, ClosedForms) {
  EXPECT_NEAR(recover_scale(Vec3(0, 0, 1), Vec3(0, 0, 2)), 2.0, 1e-15);
  EXPECT_NEAR(recover_scale(Vec3(1, 0, 0), Vec3(2, 0.1, 0)), 2.0, 1e-15);
  bool backwards = false;
  recover_scale(Vec3(0, 0, 1), Vec3(0, 0, -1), &backwards);
  EXPECT_TRUE(backwards);
}

TEST(RecoverScale, PureRotationThrows) {
  try {
    recover_scale(Vec3(1e-7, 0, 0), Vec3(0, 0, 1));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kDegenerateTranslation);
  }
}

TEST(RecoverScale, NormalEquationResidualVanishes) {
  const std::vector<Vec3> tb = {Vec3(0.1, 0.02, -0.3), Vec3(0.2, -0.01, -0.5), Vec3(0.05, 0.1, -0.2)};
  const std::vector<Vec3> th = {Vec3(0.21, 0.03, -0.61), Vec3(0.38, 0.0, -1.02), Vec3(0.1, 0.22, -0.39)};
  const double s = recover_scale(tb, th);
  double r = 0.0;
  for (std::size_t k = 0; k < tb.size(); ++k) r += tb[k].dot(s * tb[k] - th[k]);
  EXPECT_LT(std::abs(r), 1e-12);
}

TEST(MetricAlignment, IdentityChainCollapses) {
  CameraRig rig = default_rig();
  rig.T_cb = {Rotation(), Vec3::Zero(), FrameId::camera(), FrameId::body()};
  const Pose body{Rotation(), Vec3::Zero(), FrameId::body(), FrameId::world()};
  const Pose pnp{Rotation(), Vec3(0, 0, 2), FrameId::camera(3), FrameId::world()};
  EXPECT_LT((metric_alignment(pnp, body, rig) - Vec3(0, 0, 2)).norm(), 1e-15);
}

TEST(MetricAlignment, OffsetExtrinsicsMatchSimulator) {
  const Dataset d = simulate(noise_free(simulation_preset("helipad", "oblique", 2)));
  const TruthFrame& f0 = d.truth.frames[40];
  for (std::size_t j : {41u, 45u, 49u}) {
    const TruthFrame& fj = d.truth.frames[j];
    const Vec3 expected = f0.T_cw.rotation.inverse() * (fj.T_cw.translation - f0.T_cw.translation);
    EXPECT_LT((metric_alignment(fj.T_cw, f0.T_bw, d.config.rig) - expected).norm(), 1e-9);
  }
}

TEST(MetricAlignment, PoseChainAgreesWithComponentFormula) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int k = 0; k < 100; ++k) {
    CameraRig rig = default_rig();
    rig.T_cb = {Rotation::from_euler_ned(u(rng), u(rng), 3 * u(rng)), Vec3(u(rng), u(rng), u(rng)),
                FrameId::camera(), FrameId::body()};
    const Pose body{Rotation::from_euler_ned(u(rng), u(rng), 3 * u(rng)), Vec3(u(rng), u(rng), u(rng)),
                    FrameId::body(), FrameId::world()};
    const Pose pnp{Rotation::from_euler_ned(u(rng), u(rng), 3 * u(rng)), Vec3(u(rng), u(rng), u(rng)),
                   FrameId::camera(1), FrameId::world()};
    const Pose cam0 = compose(body, rig.T_cb);
    const Vec3 chain = invert(cam0).rotation * pnp.translation + invert(cam0).translation;
    EXPECT_LT((metric_alignment(pnp, body, rig) - chain).norm(), 1e-12);
  }
}

TEST(MetricAlignment, MislabeledPoseThrows) {
  const Pose body{Rotation(), Vec3::Zero(), FrameId::body(), FrameId::world()};
  const Pose wrong{Rotation(), Vec3::Zero(), FrameId::body(), FrameId::world()};
  try {
    metric_alignment(wrong, body, default_rig());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kLabeledFrame);
  }
}

TEST(FitPlaneNormal, TiltedPlaneExact) {
  const CameraRig rig = default_rig();
  const Vec3 n = Vec3(0.1, -0.2, 1.0).normalized();
  const double d = 2.0;
  std::vector<FeatureObservation> obs;
  for (int k = 0; k < 50; ++k) {
    const Vec2 p(0.04 * (k % 10) - 0.2, 0.05 * (k / 10) - 0.1);
    const Vec3 X = (d / n.dot(homogeneous(p))) * homogeneous(p);
    obs.push_back(make_observation(k, project(rig, X), project(rig, X - Vec3(rig.baseline, 0, 0)), rig));
  }
  EXPECT_LT((fit_plane_normal(obs) - n).norm(), 1e-12);
  obs.resize(2);
  EXPECT_THROW(fit_plane_normal(obs), Error);
}

TEST(WindowSigmas, ConsistentStereoIsZero) {
  const Dataset d = simulate(noise_free(simulation_preset("helipad", "vertical", 1)));
  const TruthWindow w = truth_window(d, 120);
  const auto sigmas = window_feature_sigmas(w.window, d.config.rig);
  ASSERT_FALSE(sigmas.empty());
  for (const auto& [id, s] : sigmas) EXPECT_LT(s, 1e-9) << id;
}

TEST(KeyframeWindowCheck, RejectsBadWindows) {
  KeyframeWindow w;
  w.keyframes.resize(1);
  EXPECT_THROW(w.validate(), Error);
  w.keyframes.resize(3);
  w.keyframes[0].t = 0.0;
  w.keyframes[1].t = 0.1;
  w.keyframes[2].t = 0.1;
  EXPECT_THROW(w.validate(), Error);
  w.capacity = 2;
  w.keyframes[2].t = 0.2;
  EXPECT_THROW(w.validate(), Error);
}

TEST(RunInitialization, NoiseFreeTakeoffIsExact) {
  for (const char* profile : {"vertical", "oblique"}) {
    const Dataset d = simulate(noise_free(simulation_preset("helipad", profile, 7)));
    const PipelineOutput out = run_pipeline(d.frames, d.imu, d.config.rig, PipelineConfig{}, 7);
    const InitializationResult& r = out.result;
    ASSERT_EQ(r.status, InitStatus::kInitialized) << profile << ": " << r.diagnostics.message;
    ASSERT_EQ(r.keyframes.size(), 10u);
    const TruthFrame& f0 = truth_at(d, r.keyframes.front().frame);
    EXPECT_LT(std::abs(r.scale - f0.d) / f0.d, 1e-6);
    EXPECT_LT(std::abs(r.diagnostics.scale_normal_residual), 1e-12);
    for (const auto& ks : r.keyframes) {
      const TruthFrame& tf = truth_at(d, ks.frame);
      EXPECT_LT((ks.T_bw.translation - tf.T_bw.translation).cwiseAbs().maxCoeff(), 1e-4);
      EXPECT_LT((ks.velocity - tf.velocity).cwiseAbs().maxCoeff(), 1e-4);
      EXPECT_LT(angular_distance(ks.T_bw.rotation, tf.T_bw.rotation), 1e-5);
    }
  }
}

TEST(RunInitialization, OnePixelNoiseWithinDecimetre) {
  SimulationConfig sim = simulation_preset("helipad", "vertical", 12);
  sim.render.noise_px = 1.0;
  const Dataset d = simulate(sim);
  const PipelineOutput out = run_pipeline(d.frames, d.imu, sim.rig, PipelineConfig{}, 12);
  ASSERT_EQ(out.result.status, InitStatus::kInitialized);
  const auto& kfs = out.result.keyframes;
  const Vec3 offset = kfs.front().T_bw.translation - truth_at(d, kfs.front().frame).T_bw.translation;
  Vec3 sq = Vec3::Zero();
  for (const auto& ks : kfs) {
    const Vec3 e = ks.T_bw.translation - offset - truth_at(d, ks.frame).T_bw.translation;
    sq += e.cwiseProduct(e);
  }
  EXPECT_LT((sq / static_cast<double>(kfs.size())).cwiseSqrt().maxCoeff(), 0.1);
}

TEST(RunInitialization, TooFewFeaturesFallsBackToImu) {
  const Dataset d = simulate(noise_free(simulation_preset("helipad", "vertical", 1)));
  TruthWindow w = truth_window(d, 120);
  for (auto& kf : w.window.keyframes) kf.features.resize(5);
  const InitializationResult r = run_initialization(w.window, d.imu, w.anchor, d.config.rig, PipelineConfig{}, 1);
  EXPECT_EQ(r.status, InitStatus::kImuOnlyFallback);
  ASSERT_EQ(r.keyframes.size(), 10u);
  for (const auto& ks : r.keyframes) {
    EXPECT_LT((ks.T_bw.translation - truth_at(d, ks.frame).T_bw.translation).norm(), 1e-5);
  }
}

TEST(RunInitialization, HoverIsPureRotation) {
  const Dataset d = simulate(simulation_preset("helipad", "hover", 4));
  const TruthWindow w = truth_window(d, 20);
  const InitializationResult r = run_initialization(w.window, d.imu, w.anchor, d.config.rig, PipelineConfig{}, 4);
  EXPECT_EQ(r.status, InitStatus::kPureRotation);
  EXPECT_EQ(r.scale, 0.0);
}

TEST(RunInitialization, StageFailureIsNamed) {
  const Dataset d = simulate(noise_free(simulation_preset("helipad", "vertical", 1)));
  TruthWindow w = truth_window(d, 120);
  // Disjoint feature ids: nothing matches between keyframes.
  for (std::size_t k = 1; k < w.window.keyframes.size(); ++k) {
    for (auto& f : w.window.keyframes[k].features) f.id += 100000 * static_cast<int>(k);
  }
  const InitializationResult r = run_initialization(w.window, d.imu, w.anchor, d.config.rig, PipelineConfig{}, 1);
  EXPECT_EQ(r.status, InitStatus::kFailed);
  EXPECT_EQ(r.diagnostics.failed_stage, "homography");
  EXPECT_EQ(r.diagnostics.error_kind, "insufficient-data");
  EXPECT_EQ(r.keyframes.size(), 10u);
}

TEST(RunInitialization, DeterministicUnderSeed) {
  const Dataset d = simulate(simulation_preset("lawn", "oblique", 9));
  const PipelineOutput a = run_pipeline(d.frames, d.imu, d.config.rig, PipelineConfig{}, 5);
  const PipelineOutput b = run_pipeline(d.frames, d.imu, d.config.rig, PipelineConfig{}, 5);
  ASSERT_EQ(a.result.keyframes.size(), b.result.keyframes.size());
  for (std::size_t k = 0; k < a.result.keyframes.size(); ++k) {
    EXPECT_EQ(a.result.keyframes[k].T_bw.translation, b.result.keyframes[k].T_bw.translation);
    EXPECT_EQ(a.result.keyframes[k].velocity, b.result.keyframes[k].velocity);
  }
}

TEST(Pipeline, PhasesAndGate) {
  const Dataset d = simulate(simulation_preset("helipad", "vertical", 2));
  const PipelineOutput out = run_pipeline(d.frames, d.imu, d.config.rig, PipelineConfig{}, 2);
  ASSERT_EQ(out.result.status, InitStatus::kInitialized);
  const std::vector<Phase> expected = {Phase::kWaitStationary, Phase::kImuPropagation, Phase::kGatherWindow,
                                       Phase::kInitialize, Phase::kDone};
  EXPECT_EQ(out.phases, expected);
  ASSERT_GE(out.gate_frame, 0);
  EXPECT_EQ(out.result.keyframes.front().frame, out.gate_frame);
  EXPECT_GT(truth_at(d, out.gate_frame).d, 1.4);
}

TEST(Pipeline, StereoAltitudeOnHelipad) {
  const Dataset d = simulate(noise_free(simulation_preset("helipad", "vertical", 2)));
  const TruthFrame& tf = d.truth.frames[150];
  const auto h = stereo_altitude(d.frames[150], d.config.rig, tf.normal_c, 1.0, 20);
  ASSERT_TRUE(h.has_value());
  EXPECT_NEAR(*h, tf.d, 1e-9);
  EXPECT_FALSE(stereo_altitude(d.frames[0], d.config.rig, tf.normal_c, 1.0, 20).has_value());
}
