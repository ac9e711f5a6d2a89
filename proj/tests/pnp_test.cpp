#include "planar_init/errors.hpp"
#include "planar_init/pnp.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>

using namespace planar_init;

namespace {

/// Ground points (z = 0 in the world) seen by a camera at altitude looking down.
struct PnpScene {
  Pose T_cw;
  std::vector<PnpPair> pairs;
};

PnpScene ground_scene(std::mt19937_64& rng, int n, double altitude, double noise_px, double f = 400.0) {
  PnpScene s;
  std::uniform_real_distribution<double> small(-0.1, 0.1), spread(-2.0, 2.0);
  std::normal_distribution<double> noise(0.0, noise_px / f);
  const Rotation r_wc = Rotation::from_euler_ned(small(rng), small(rng), 3.0 * small(rng));
  s.T_cw = {r_wc, Vec3(small(rng), small(rng), -altitude), FrameId::camera(), FrameId::world()};
  while (static_cast<int>(s.pairs.size()) < n) {
    const Vec3 p_w(spread(rng), spread(rng), 0.0);
    const Vec3 p_c = s.T_cw.rotation.inverse() * (p_w - s.T_cw.translation);
    if (p_c.z() < 0.5) continue;
    const Vec2 obs = p_c.head<2>() / p_c.z() + Vec2(noise(rng), noise(rng));
    if (obs.cwiseAbs().maxCoeff() > 1.5) continue;
    s.pairs.push_back({p_w, obs});
  }
  return s;
}

}  // namespace

TEST(P3p, CandidatesContainTruth) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    const PnpScene s = ground_scene(rng, 3, 3.0, 0.0);
    std::array<Vec3, 3> world, bearings;
    for (int k = 0; k < 3; ++k) {
      world[k] = s.pairs[k].p_w;
      bearings[k] = homogeneous(s.pairs[k].obs).normalized();
    }
    const Mat3 R_true = s.T_cw.rotation.inverse().matrix();
    const Vec3 t_true = -(R_true * s.T_cw.translation);
    bool found = false;
    for (const auto& sol : solve_p3p(world, bearings)) {
      found = found || ((sol.R - R_true).norm() < 1e-6 && (sol.t - t_true).norm() < 1e-6);
    }
    EXPECT_TRUE(found) << "trial " << trial;
  }
}

TEST(SolvePnp, IdentityPose) {
  std::vector<PnpPair> pairs;
  for (int k = 0; k < 10; ++k) {
    const Vec3 p(0.3 * (k % 3) - 0.3, 0.2 * (k % 4) - 0.3, 2.0 + 0.1 * k);
    pairs.push_back({p, p.head<2>() / p.z()});
  }
  const PnpResult r = solve_pnp(pairs, 1);
  EXPECT_LT(r.T_cw.rotation.angle(), 1e-9);
  EXPECT_LT(r.T_cw.translation.norm(), 1e-9);
  EXPECT_EQ(r.num_inliers, 10);
  EXPECT_EQ(r.T_cw.of.kind, FrameKind::kCamera);
  EXPECT_EQ(r.T_cw.in.kind, FrameKind::kWorld);
}

TEST(SolvePnp, CoplanarNoiseFree) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const PnpScene s = ground_scene(rng, 100, 3.0, 0.0);
    const PnpResult r = solve_pnp(s.pairs, static_cast<std::uint64_t>(trial));
    EXPECT_LT(angular_distance(r.T_cw.rotation, s.T_cw.rotation), 1e-6);
    EXPECT_LT((r.T_cw.translation - s.T_cw.translation).norm(), 1e-6);
  }
}

TEST(SolvePnp, OnePixelNoiseMedianTranslation) {
  std::mt19937_64 rng(13);
  std::vector<double> err;
  for (int trial = 0; trial < 200; ++trial) {
    const PnpScene s = ground_scene(rng, 100, 3.0, 1.0);
    const PnpResult r = solve_pnp(s.pairs, static_cast<std::uint64_t>(trial));
    err.push_back((r.T_cw.translation - s.T_cw.translation).norm());
  }
  std::nth_element(err.begin(), err.begin() + 100, err.end());
  EXPECT_LT(err[100], 0.05);
}

TEST(SolvePnp, RejectsOutliers) {
  std::mt19937_64 rng(19);
  PnpScene s = ground_scene(rng, 60, 2.0, 0.0);
  for (int k = 0; k < 15; ++k) s.pairs[static_cast<std::size_t>(4 * k)].obs += Vec2(0.2, -0.15);
  const PnpResult r = solve_pnp(s.pairs, 3);
  EXPECT_EQ(r.num_inliers, 45);
  EXPECT_LT((r.T_cw.translation - s.T_cw.translation).norm(), 1e-6);
}

TEST(SolvePnp, TooFewPairs) {
  std::vector<PnpPair> pairs(3, {Vec3(0, 0, 1), Vec2(0, 0)});
  try {
    solve_pnp(pairs, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kInsufficientData);
  }
}

TEST(RefinePose, WeightsDownplayBadPoints) {
  std::mt19937_64 rng(23);
  PnpScene s = ground_scene(rng, 40, 2.0, 0.0);
  s.pairs[0].obs += Vec2(0.01, 0.0);
  const Mat3 R0 = s.T_cw.rotation.inverse().matrix();
  const Vec3 t0 = -(R0 * s.T_cw.translation);
  std::vector<double> uniform(40, 1.0), down(40, 1.0);
  down[0] = 1e-6;
  Mat3 Ra = R0, Rb = R0;
  Vec3 ta = t0, tb = t0;
  refine_pose(s.pairs, uniform, Ra, ta, 20);
  refine_pose(s.pairs, down, Rb, tb, 20);
  EXPECT_LT((tb - t0).norm(), (ta - t0).norm());
}
