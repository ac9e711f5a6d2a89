#include "planar_init/errors.hpp"
#include "planar_init/imu.hpp"
#include "planar_init/simulator.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace planar_init;

namespace {

constexpr double kPi = 3.14159265358979323846;

std::vector<ImuSample> constant_stream(const Vec3& gyro, const Vec3& accel, double T, double rate = 200.0) {
  std::vector<ImuSample> s;
  const int n = static_cast<int>(std::lround(T * rate));
  for (int k = 0; k <= n; ++k) s.push_back({k / rate, gyro, accel});
  return s;
}

}  // namespace

TEST(Propagate, HoverIsEquilibrium) {
  const Vec3 g = default_gravity();
  const auto s = constant_stream(Vec3::Zero(), -g, 3.0);
  const NavState out = propagate(NavState::at_rest(0.0), s, g);
  EXPECT_LT(out.pose.translation.norm(), 1e-12);
  EXPECT_LT(out.velocity.norm(), 1e-12);
  EXPECT_LT(out.pose.rotation.angle(), 1e-12);
  EXPECT_DOUBLE_EQ(out.t, 3.0);
}

TEST(Propagate, ConstantAccelerationClosedForm) {
  const Vec3 g = default_gravity();
  const Vec3 a(0.3, -0.2, -1.1);
  const double T = 2.0;
  const NavState out = propagate(NavState::at_rest(0.0), constant_stream(Vec3::Zero(), a - g, T), g);
  EXPECT_LT((out.pose.translation - 0.5 * a * T * T).norm(), 1e-9);
  EXPECT_LT((out.velocity - a * T).norm(), 1e-9);
}

TEST(Propagate, ConstantYawRate) {
  const double w = 0.7, T = 1.5;
  const auto s = constant_stream(Vec3(0, 0, w), -default_gravity(), T);
  const NavState out = propagate(NavState::at_rest(0.0), s, default_gravity());
  EXPECT_NEAR(to_euler_ned(out.pose.rotation).yaw, w * T, 1e-9);
  EXPECT_LT(out.pose.translation.norm(), 1e-9);
}

TEST(Propagate, BiasesAreRemoved) {
  const Vec3 g = default_gravity();
  const Vec3 bg(0.01, -0.02, 0.005), ba(0.1, 0.05, -0.08);
  NavState st = NavState::at_rest(0.0);
  st.gyro_bias = bg;
  st.accel_bias = ba;
  const NavState out = propagate(st, constant_stream(bg, -g + ba, 2.0), g);
  EXPECT_LT(out.pose.translation.norm(), 1e-12);
  EXPECT_LT(out.pose.rotation.angle(), 1e-12);
}

TEST(Propagate, RejectsBadStreams) {
  auto s = constant_stream(Vec3::Zero(), -default_gravity(), 0.1);
  std::swap(s[3], s[4]);
  try {
    propagate(NavState::at_rest(0.0), s, default_gravity());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kStream);
  }
  const auto ok = constant_stream(Vec3::Zero(), -default_gravity(), 0.1);
  EXPECT_THROW(propagate(NavState::at_rest(0.5), ok, default_gravity()), Error);
}

TEST(CameraRotation, ZeroGyroIsIdentity) {
  const auto s = constant_stream(Vec3::Zero(), Vec3::Zero(), 0.05);
  EXPECT_LT(integrate_camera_rotation(s, Vec3::Zero(), default_rig().T_cb).angle(), 1e-15);
  EXPECT_THROW(integrate_camera_rotation({}, Vec3::Zero(), default_rig().T_cb), Error);
}

TEST(CameraRotation, IdentityExtrinsicFollowsBody) {
  const Pose T_cb = Pose::identity(FrameId::camera());
  const auto s = constant_stream(Vec3(0.2, -0.1, 0.4), Vec3::Zero(), 0.5);
  const Rotation body = integrate_body_rotation(s, Vec3::Zero());
  const Rotation cam = integrate_camera_rotation(s, Vec3::Zero(), T_cb);
  // Same motion, expressed in the i -> j direction.
  EXPECT_LT(angular_distance(cam, body.inverse()), 1e-12);
}

TEST(CameraRotation, ConjugatesThroughExtrinsic) {
  const Rotation r_cb = Rotation::about_x(kPi / 2);
  const Pose T_cb{r_cb, Vec3(0.1, 0, 0), FrameId::camera(), FrameId::body()};
  const double w = 0.6, T = 0.5;
  const auto s = constant_stream(Vec3(0, 0, w), Vec3::Zero(), T);
  const Rotation cam = integrate_camera_rotation(s, Vec3::Zero(), T_cb);
  const Mat3 oracle = r_cb.matrix().transpose() * Rotation::about_z(-w * T).matrix() * r_cb.matrix();
  EXPECT_LT((cam.matrix() - oracle).norm(), 1e-12);
  // Body z is camera y under this extrinsic; i -> j reverses the angle.
  EXPECT_LT(angular_distance(cam, Rotation::about_y(-w * T)), 1e-12);
}

TEST(PriorNormal, Propagation) {
  const PriorNormal n0{Vec3::UnitZ(), 0.0};
  EXPECT_LT((propagate_normal(n0, Rotation(), 0.1).n - Vec3::UnitZ()).norm(), 1e-15);
  const PriorNormal n1 = propagate_normal(n0, Rotation::about_x(kPi / 2), 0.1);
  EXPECT_LT((n1.n - Vec3(0, -1, 0)).norm(), 1e-12);
  EXPECT_DOUBLE_EQ(n1.t, 0.1);
}

TEST(PriorNormal, TracksObliqueTakeoff) {
  SimulationConfig sim = noise_free(simulation_preset("helipad", "oblique", 3));
  const Dataset d = simulate(sim);
  PriorNormal n{Vec3::UnitZ(), 0.0};
  for (std::size_t k = 1; k < d.truth.frames.size(); ++k) {
    const auto seg = slice(d.imu, d.truth.frames[k - 1].t, d.truth.frames[k].t);
    n = propagate_normal(n, integrate_camera_rotation(seg, Vec3::Zero(), sim.rig.T_cb), d.truth.frames[k].t);
  }
  const double err = std::acos(std::min(1.0, n.n.dot(d.truth.frames.back().normal_c)));
  EXPECT_LT(err, 0.5 * kPi / 180.0);
}

TEST(Slice, InterpolatesEndpoints) {
  std::vector<ImuSample> s;
  for (int k = 0; k <= 10; ++k) s.push_back({0.1 * k, Vec3(k, 0, 0), Vec3(0, k, 0)});
  const auto out = slice(s, 0.15, 0.42);
  ASSERT_GE(out.size(), 2u);
  EXPECT_DOUBLE_EQ(out.front().t, 0.15);
  EXPECT_DOUBLE_EQ(out.back().t, 0.42);
  EXPECT_NEAR(out.front().gyro.x(), 1.5, 1e-12);
  EXPECT_NEAR(out.back().accel.y(), 4.2, 1e-12);
  EXPECT_THROW(slice(s, -1.0, 0.5), Error);
}

TEST(Stationarity, FindsRestAndAttitude) {
  const Rotation tilt = Rotation::from_euler_ned(0.05, -0.03, 0.0);
  const Vec3 f = tilt.inverse() * -default_gravity();
  auto s = constant_stream(Vec3::Zero(), f, 1.0);
  const StationaryWindow w = detect_stationary(s, 9.81, {});
  ASSERT_TRUE(w.found);
  EXPECT_DOUBLE_EQ(w.t_begin, 0.0);
  const EulerNed e = to_euler_ned(gravity_aligned_attitude(w.mean_accel));
  EXPECT_NEAR(e.roll, 0.05, 1e-12);
  EXPECT_NEAR(e.pitch, -0.03, 1e-12);

  auto spinning = constant_stream(Vec3(0, 0, 0.5), f, 1.0);
  EXPECT_FALSE(detect_stationary(spinning, 9.81, {}).found);
  auto falling = constant_stream(Vec3::Zero(), Vec3::Zero(), 1.0);
  EXPECT_FALSE(detect_stationary(falling, 9.81, {}).found);
}
