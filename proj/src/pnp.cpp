#include "planar_init/pnp.hpp"

#include "planar_init/errors.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace planar_init {
namespace {

using Poly = std::array<double, 5>;  // coefficient k multiplies v^k

Poly mul(const std::array<double, 3>& a, const std::array<double, 3>& b) {
  Poly p{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) p[i + j] += a[i] * b[j];
  return p;
}

double eval(const Poly& p, double v) {
  double r = 0.0;
  for (int k = 4; k >= 0; --k) r = r * v + p[k];
  return r;
}

double eval_derivative(const Poly& p, double v) {
  double r = 0.0;
  for (int k = 4; k >= 1; --k) r = r * v + k * p[k];
  return r;
}

std::vector<double> real_roots(const Poly& p) {
  int degree = 4;
  const double scale = std::max({std::abs(p[0]), std::abs(p[1]), std::abs(p[2]), std::abs(p[3]),
                                 std::abs(p[4])});
  if (scale == 0.0) return {};
  while (degree > 0 && std::abs(p[degree]) < 1e-14 * scale) --degree;
  if (degree == 0) return {};
  Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(degree, degree);
  for (int k = 0; k < degree; ++k) companion(0, k) = -p[degree - 1 - k] / p[degree];
  for (int k = 1; k < degree; ++k) companion(k, k - 1) = 1.0;
  const Eigen::VectorXcd eig = companion.eigenvalues();
  std::vector<double> roots;
  for (Eigen::Index k = 0; k < eig.size(); ++k) {
    if (std::abs(eig(k).imag()) > 1e-6 * (1.0 + std::abs(eig(k).real()))) continue;
    double v = eig(k).real();
    for (int it = 0; it < 5; ++it) {
      const double d = eval_derivative(p, v);
      if (d == 0.0) break;
      v -= eval(p, v) / d;
    }
    roots.push_back(v);
  }
  return roots;
}

/// Rigid transform x_c = R x_w + t from three or more exact correspondences.
bool absolute_orientation(std::span<const Vec3> world, std::span<const Vec3> cam, Mat3& R, Vec3& t) {
  Vec3 cw = Vec3::Zero(), cc = Vec3::Zero();
  for (std::size_t k = 0; k < world.size(); ++k) {
    cw += world[k];
    cc += cam[k];
  }
  cw /= static_cast<double>(world.size());
  cc /= static_cast<double>(cam.size());
  Mat3 h = Mat3::Zero();
  for (std::size_t k = 0; k < world.size(); ++k) h += (world[k] - cw) * (cam[k] - cc).transpose();
  Eigen::JacobiSVD<Mat3> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 d = Mat3::Identity();
  if ((svd.matrixV() * svd.matrixU().transpose()).determinant() < 0.0) d(2, 2) = -1.0;
  R = svd.matrixV() * d * svd.matrixU().transpose();
  t = cc - R * cw;
  return R.allFinite() && t.allFinite();
}

double reprojection_error(const Mat3& R, const Vec3& t, const PnpPair& pair) {
  const Vec3 x = R * pair.p_w + t;
  if (!(x.z() > 0.0)) return std::numeric_limits<double>::infinity();
  return (pair.obs - x.head<2>() / x.z()).norm();
}

Eigen::Matrix<double, 2, 3> projection_jacobian(const Vec3& x) {
  const double iz = 1.0 / x.z();
  Eigen::Matrix<double, 2, 3> j;
  j << iz, 0.0, -x.x() * iz * iz,
       0.0, iz, -x.y() * iz * iz;
  return j;
}

double weighted_cost(std::span<const PnpPair> pairs, std::span<const double> weights, const Mat3& R,
                     const Vec3& t) {
  double cost = 0.0;
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const Vec3 x = R * pairs[k].p_w + t;
    if (!(x.z() > 0.0)) return std::numeric_limits<double>::infinity();
    const double w = weights.empty() ? 1.0 : weights[k];
    cost += w * (pairs[k].obs - x.head<2>() / x.z()).squaredNorm();
  }
  return cost;
}

}  // namespace

std::vector<P3pSolution> solve_p3p(const std::array<Vec3, 3>& world,
                                   const std::array<Vec3, 3>& bearings) {
  const Vec3 j1 = bearings[0].normalized(), j2 = bearings[1].normalized(),
             j3 = bearings[2].normalized();
  const double a2 = (world[1] - world[2]).squaredNorm();
  const double b2 = (world[0] - world[2]).squaredNorm();
  const double c2 = (world[0] - world[1]).squaredNorm();
  if (a2 < 1e-18 || b2 < 1e-18 || c2 < 1e-18) return {};
  const double ca = j2.dot(j3), cb = j1.dot(j3), cg = j1.dot(j2);

  // With s2 = u s1, s3 = v s1, the law of cosines gives u = N(v) / D(v) and a
  // quartic in v after substitution.
  const std::array<double, 3> n_poly = {(c2 - a2) - b2, -2.0 * cb * (c2 - a2), (c2 - a2) + b2};
  const std::array<double, 3> d_poly = {-2.0 * b2 * cg, 2.0 * b2 * ca, 0.0};
  const std::array<double, 3> q_poly = {1.0, -2.0 * cb, 1.0};
  const Poly nn = mul(n_poly, n_poly);
  const Poly nd = mul(n_poly, d_poly);
  const Poly dd = mul(d_poly, d_poly);
  const Poly qdd = [&] {
    Poly p{};
    for (int i = 0; i < 3; ++i)
      for (int k = 0; k + i < 5; ++k) p[i + k] += q_poly[i] * dd[k];
    return p;
  }();
  Poly quartic{};
  for (int k = 0; k < 5; ++k) quartic[k] = b2 * (dd[k] + nn[k] - 2.0 * cg * nd[k]) - c2 * qdd[k];

  std::vector<P3pSolution> out;
  for (const double v : real_roots(quartic)) {
    const double d = d_poly[0] + d_poly[1] * v;
    if (std::abs(d) < 1e-14) continue;
    const double u = (n_poly[0] + n_poly[1] * v + n_poly[2] * v * v) / d;
    const double q = 1.0 + v * v - 2.0 * v * cb;
    if (!(q > 0.0) || !(u > 0.0) || !(v > 0.0)) continue;
    const double s1 = std::sqrt(b2 / q);
    const std::array<Vec3, 3> cam = {s1 * j1, u * s1 * j2, v * s1 * j3};
    P3pSolution sol;
    if (absolute_orientation(world, cam, sol.R, sol.t)) out.push_back(sol);
  }
  return out;
}

double refine_pose(std::span<const PnpPair> pairs, std::span<const double> weights, Mat3& R, Vec3& t,
                   int max_iterations) {
  double cost = weighted_cost(pairs, weights, R, t);
  double lambda = 1e-6;
  for (int it = 0; it < max_iterations; ++it) {
    Eigen::Matrix<double, 6, 6> hessian = Eigen::Matrix<double, 6, 6>::Zero();
    Eigen::Matrix<double, 6, 1> gradient = Eigen::Matrix<double, 6, 1>::Zero();
    for (std::size_t k = 0; k < pairs.size(); ++k) {
      const Vec3 x = R * pairs[k].p_w + t;
      const Vec2 r = pairs[k].obs - x.head<2>() / x.z();
      Eigen::Matrix<double, 3, 6> dx;
      dx << -skew(x), Mat3::Identity();
      const Eigen::Matrix<double, 2, 6> j = -projection_jacobian(x) * dx;
      const double w = weights.empty() ? 1.0 : weights[k];
      hessian += w * j.transpose() * j;
      gradient += w * j.transpose() * r;
    }
    bool accepted = false;
    Eigen::Matrix<double, 6, 1> step;
    for (int attempt = 0; attempt < 10; ++attempt) {
      Eigen::Matrix<double, 6, 6> damped = hessian;
      damped.diagonal() *= (1.0 + lambda);
      step = damped.ldlt().solve(-gradient);
      if (!step.allFinite()) break;
      const Rotation dr = Rotation::exp(step.head<3>());
      const Mat3 r_new = dr.matrix() * R;
      const Vec3 t_new = dr * t + step.tail<3>();
      const double c = weighted_cost(pairs, weights, r_new, t_new);
      if (c <= cost) {
        R = r_new;
        t = t_new;
        cost = c;
        lambda = std::max(1e-12, lambda * 0.1);
        accepted = true;
        break;
      }
      lambda *= 10.0;
    }
    if (!accepted || step.norm() < 1e-14) break;
  }
  R = Rotation::from_matrix(R).matrix();
  return cost;
}

PnpResult solve_pnp(std::span<const PnpPair> pairs, std::uint64_t seed, const PnpOptions& options,
                    std::span<const double> weights) {
  const std::size_t n = pairs.size();
  if (n < 4) throw Error(ErrorKind::kInsufficientData, "PnP needs at least 4 pairs");
  if (!weights.empty() && weights.size() != n) {
    throw Error(ErrorKind::kInsufficientData, "weight count does not match pair count");
  }

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  Mat3 best_r = Mat3::Identity();
  Vec3 best_t = Vec3::Zero();
  int best_count = -1;
  double best_error = std::numeric_limits<double>::infinity();
  int required = options.max_iterations;
  int iterations = 0;

  for (int attempt = 0; iterations < required && attempt < 10 * options.max_iterations; ++attempt) {
    std::array<std::size_t, 3> idx{};
    for (std::size_t k = 0; k < 3; ++k) {
      std::size_t c;
      do {
        c = pick(rng);
      } while (std::find(idx.begin(), idx.begin() + static_cast<long>(k), c) !=
               idx.begin() + static_cast<long>(k));
      idx[k] = c;
    }
    const std::array<Vec3, 3> world = {pairs[idx[0]].p_w, pairs[idx[1]].p_w, pairs[idx[2]].p_w};
    const Vec3 e1 = world[1] - world[0], e2 = world[2] - world[0];
    if (e1.cross(e2).norm() < 1e-9 * (e1.squaredNorm() + e2.squaredNorm())) continue;
    ++iterations;
    const std::array<Vec3, 3> bearings = {homogeneous(pairs[idx[0]].obs),
                                          homogeneous(pairs[idx[1]].obs),
                                          homogeneous(pairs[idx[2]].obs)};
    for (const auto& hyp : solve_p3p(world, bearings)) {
      int count = 0;
      double total = 0.0;
      for (const auto& p : pairs) {
        const double e = reprojection_error(hyp.R, hyp.t, p);
        if (e < options.threshold) {
          ++count;
          total += e;
        }
      }
      if (count > best_count || (count == best_count && total < best_error)) {
        best_count = count;
        best_error = total;
        best_r = hyp.R;
        best_t = hyp.t;
        const double w = static_cast<double>(count) / static_cast<double>(n);
        const double p_fail = 1.0 - w * w * w;
        if (p_fail <= 0.0) {
          required = std::min(required, iterations);
        } else if (p_fail < 1.0) {
          const double k = std::log(1.0 - options.confidence) / std::log(p_fail);
          if (k < required) required = std::max(1, static_cast<int>(std::ceil(k)));
        }
      }
    }
  }
  if (best_count < 4) throw Error(ErrorKind::kDegeneratePnp, "no PnP consensus set");

  PnpResult result;
  Mat3 r = best_r;
  Vec3 t = best_t;
  std::vector<bool> mask(n, false);
  double cost = 0.0;
  for (int round = 0; round < 3; ++round) {
    for (std::size_t k = 0; k < n; ++k) mask[k] = reprojection_error(r, t, pairs[k]) < options.threshold;
    std::vector<PnpPair> inl;
    std::vector<double> w;
    for (std::size_t k = 0; k < n; ++k) {
      if (!mask[k]) continue;
      inl.push_back(pairs[k]);
      if (!weights.empty()) w.push_back(weights[k]);
    }
    if (inl.size() < 4) throw Error(ErrorKind::kDegeneratePnp, "PnP consensus collapsed");
    cost = refine_pose(inl, w, r, t, options.refine_iterations);
  }
  for (std::size_t k = 0; k < n; ++k) mask[k] = reprojection_error(r, t, pairs[k]) < options.threshold;

  // x_c = R x_w + t, so the camera pose in the world is (R^T, -R^T t).
  const Rotation r_wc = Rotation::from_matrix(r.transpose());
  result.T_cw = Pose{r_wc, -(r.transpose() * t), FrameId::camera(), FrameId::world()};
  result.inliers = mask;
  result.num_inliers = static_cast<int>(std::count(mask.begin(), mask.end(), true));
  result.iterations = iterations;
  result.final_cost = cost;
  return result;
}

}  // namespace planar_init
