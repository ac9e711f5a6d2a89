#include "planar_init/errors.hpp"
#include "planar_init/motion_field.hpp"
#include "planar_init/simulator.hpp"
#include "planar_init/weighting.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace planar_init;

TEST(StereoDeviation, ConsistentPairIsZero) {
  const CameraRig rig = default_rig();
  const Vec3 p(0.3, -0.2, 2.5);
  const StereoObservation obs{p.head<2>() / p.z(), (p - Vec3(rig.baseline, 0, 0)).head<2>() / p.z()};
  EXPECT_LT(stereo_deviation(obs, rig).sigma, 1e-12);
  EXPECT_LT(stereo_deviation(obs, rig, 2.5).sigma, 1e-12);
}

TEST(StereoDeviation, DirectEvaluation) {
  const StereoObservation obs{Vec2(0, 0), Vec2(-0.0525, 0)};
  const PixelDeviation dev = stereo_deviation(obs, default_rig(), 2.0);
  EXPECT_NEAR(dev.sigma, 1.0, 1e-12);
  EXPECT_EQ(dev.kind, DeviationKind::kStereo);
}

TEST(StereoDeviation, InvalidDisparityThrows) {
  try {
    stereo_deviation({Vec2(0, 0), Vec2(0.01, 0)}, default_rig());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kInvalidDisparity);
  }
}

TEST(StereoDeviation, MonteCarloMatchesNoiseLevel) {
  const CameraRig rig = default_rig();
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-1.0, 1.0), z(1.0, 4.0);
  std::normal_distribution<double> noise(0.0, 0.5);
  double sum = 0.0;
  const int n = 10000;
  for (int k = 0; k < n; ++k) {
    const Vec3 p(u(rng), u(rng), z(rng));
    const Vec2 right_px = project(rig, p - Vec3(rig.baseline, 0, 0)) + Vec2(noise(rng), noise(rng));
    const StereoObservation obs{p.head<2>() / p.z(), normalize(rig, right_px)};
    sum += stereo_deviation(obs, rig, p.z()).sigma;
  }
  EXPECT_NEAR(sum / n, 0.5, 0.3 * 0.5);
}

TEST(TemporalDeviation, StaticCamera) {
  const CameraRig rig = default_rig();
  const Vec2 pk(0.1, 0.05), pk1(0.1025, 0.05);
  const PixelDeviation dev =
      temporal_deviation(pk, pk1, Vec3(0.2, 0.1, 2.0), Vec3::Zero(), Vec3::Zero(), 0.05, rig);
  EXPECT_NEAR(dev.sigma, rig.f * (pk1 - pk).norm(), 1e-12);
  EXPECT_EQ(dev.kind, DeviationKind::kTemporal);
}

TEST(TemporalDeviation, DirectEvaluation) {
  // p_c = [0.1, 0, 1] moving at v_c = [0.2, 0, 0] gives v = [0.2, 0].
  const PixelDeviation dev = temporal_deviation(Vec2(0.1, 0), Vec2(0.1125, 0), Vec3(0.1, 0, 1),
                                                Vec3(-0.2, 0, 0), Vec3::Zero(), 0.05, default_rig());
  EXPECT_NEAR(dev.sigma, 1.0, 1e-12);
}

TEST(TemporalDeviation, Errors) {
  const CameraRig rig = default_rig();
  try {
    temporal_deviation(Vec2(0, 0), Vec2(0, 0), Vec3(0, 0, 1), Vec3::Zero(), Vec3::Zero(), 0.0, rig);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kTime);
  }
  try {
    temporal_deviation(Vec2(0, 0), Vec2(0, 0), Vec3(0, 0, 0), Vec3::Zero(), Vec3::Zero(), 0.05, rig);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kZeroDepth);
  }
}

TEST(TemporalDeviation, NoiseFreeAscentStaysSmall) {
  const SimulationConfig sim = noise_free(simulation_preset("helipad", "vertical", 3));
  const Dataset d = simulate(sim);
  const Vec3 lift(0, 0, d.truth.ground_z);
  int checked = 0;
  for (std::size_t k = 40; k + 1 < d.truth.frames.size(); k += 20) {
    const TruthFrame& a = d.truth.frames[k];
    const TruthFrame& b = d.truth.frames[k + 1];
    const Rotation r_wc = a.T_cw.rotation.inverse();
    const Vec3 v_rel = r_wc * a.velocity;  // camera velocity, camera frame (no rotation here)
    for (std::size_t s = 0; s < d.scene.size(); s += 7) {
      const Vec3 xa = r_wc * (d.scene[s].p + lift - a.T_cw.translation);
      const Vec3 xb = b.T_cw.rotation.inverse() * (d.scene[s].p + lift - b.T_cw.translation);
      if (xa.z() < 0.1 || xb.z() < 0.1) continue;
      const Vec2 pa = xa.head<2>() / xa.z(), pb = xb.head<2>() / xb.z();
      if (!sim.rig.in_image(denormalize(sim.rig, pa))) continue;
      const PixelDeviation dev = temporal_deviation(pa, pb, xa, v_rel, Vec3::Zero(), b.t - a.t, sim.rig);
      EXPECT_LT(dev.sigma, 0.5);
      ++checked;
    }
  }
  EXPECT_GT(checked, 100);
}

TEST(Weight, BaselineAndFloor) {
  EXPECT_NEAR(weight({1.5}), 1.0 / 2.25, 1e-15);
  EXPECT_NEAR(weight({0.0}), 1.0 / (0.25 * 0.25), 1e-12);
  EXPECT_GT(weight({0.8}), weight({1.2}));
  EXPECT_NEAR(weight({0.1}, 0.5), 4.0, 1e-12);
}

TEST(EstimatedFlow, DirectEvaluation) {
  const CameraRig rig = default_rig();
  EXPECT_LT(estimated_flow(Vec2(0.1, 0), Vec2::Zero(), 0.05, rig).norm(), 1e-15);
  EXPECT_LT((estimated_flow(Vec2(0.1, 0), Vec2(0.2, 0), 0.05, rig) - Vec2(4.0, 0.0)).norm(), 1e-12);
}

TEST(EstimatedFlow, MatchesSimulatedDisplacement) {
  const SimulationConfig sim = noise_free(simulation_preset("helipad", "vertical", 6));
  const Dataset d = simulate(sim);
  const Vec3 lift(0, 0, d.truth.ground_z);
  double worst = 0.0;
  for (std::size_t k = 30; k + 1 < d.truth.frames.size(); k += 10) {
    const TruthFrame& a = d.truth.frames[k];
    const TruthFrame& b = d.truth.frames[k + 1];
    // First-order flow only holds once the per-frame depth change is small.
    if (a.d < 1.5) continue;
    const Rotation r_wc = a.T_cw.rotation.inverse();
    const Vec3 v_c = camera_velocity(a.velocity, Vec3::Zero(), a.T_bw.rotation.inverse(), sim.rig);
    for (std::size_t s = 0; s < d.scene.size(); s += 5) {
      const Vec3 xa = r_wc * (d.scene[s].p + lift - a.T_cw.translation);
      const Vec3 xb = b.T_cw.rotation.inverse() * (d.scene[s].p + lift - b.T_cw.translation);
      if (xa.z() < 0.1 || xb.z() < 0.1) continue;
      const Vec2 ua = project(sim.rig, xa), ub = project(sim.rig, xb);
      if (!sim.rig.in_image(ua) || !sim.rig.in_image(ub)) continue;
      const Vec2 flow = estimated_flow(xa.head<2>() / xa.z(), feature_normalized_velocity(xa, v_c), b.t - a.t, sim.rig);
      worst = std::max(worst, (flow - (ub - ua)).norm());
    }
  }
  EXPECT_LT(worst, 0.5);
}
