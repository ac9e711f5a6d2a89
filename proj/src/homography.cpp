#include "planar_init/homography.hpp"

#include "planar_init/errors.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace planar_init {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::optional<Vec2> apply(const Mat3& h, const Vec2& p) {
  const Vec3 q = h * homogeneous(p);
  if (std::abs(q.z()) < 1e-15) return std::nullopt;
  return Vec2(q.x() / q.z(), q.y() / q.z());
}

double transfer_error(const Mat3& h, const Mat3& h_inv, const Correspondence& c) {
  const auto fwd = apply(h, c.p_i);
  const auto bwd = apply(h_inv, c.p_j);
  if (!fwd || !bwd) return kInf;
  return std::max((c.p_j - *fwd).norm(), (c.p_i - *bwd).norm());
}

/// Similarity that moves the centroid to the origin and the mean distance to sqrt(2).
Mat3 hartley_transform(std::span<const Vec2> points) {
  Vec2 centroid = Vec2::Zero();
  for (const auto& p : points) centroid += p;
  centroid /= static_cast<double>(points.size());
  double mean_dist = 0.0;
  for (const auto& p : points) mean_dist += (p - centroid).norm();
  mean_dist /= static_cast<double>(points.size());
  const double s = mean_dist > 1e-15 ? std::sqrt(2.0) / mean_dist : 1.0;
  Mat3 t;
  t << s, 0.0, -s * centroid.x(),
       0.0, s, -s * centroid.y(),
       0.0, 0.0, 1.0;
  return t;
}

Mat3 solve_dlt(std::span<const Vec2> src, std::span<const Vec2> dst) {
  const auto n = static_cast<Eigen::Index>(src.size());
  Eigen::MatrixXd a(2 * n, 9);
  for (Eigen::Index k = 0; k < n; ++k) {
    const double x = src[k].x(), y = src[k].y();
    const double u = dst[k].x(), v = dst[k].y();
    a.row(2 * k) << 0.0, 0.0, 0.0, -x, -y, -1.0, v * x, v * y, v;
    a.row(2 * k + 1) << x, y, 1.0, 0.0, 0.0, 0.0, -u * x, -u * y, -u;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const Eigen::VectorXd h = svd.matrixV().col(8);
  Mat3 m;
  m << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);
  return m;
}

Mat3 normalized_dlt(std::span<const Vec2> src, std::span<const Vec2> dst) {
  const Mat3 t_src = hartley_transform(src);
  const Mat3 t_dst = hartley_transform(dst);
  std::vector<Vec2> src_n, dst_n;
  src_n.reserve(src.size());
  dst_n.reserve(dst.size());
  for (const auto& p : src) src_n.push_back((t_src * homogeneous(p)).head<2>());
  for (const auto& p : dst) dst_n.push_back((t_dst * homogeneous(p)).head<2>());
  return t_dst.inverse() * solve_dlt(src_n, dst_n) * t_src;
}

bool collinear(const Vec2& a, const Vec2& b, const Vec2& c) {
  const Vec2 ab = b - a, ac = c - a;
  const double cross = ab.x() * ac.y() - ab.y() * ac.x();
  return std::abs(cross) <= 1e-12 * std::max(1e-300, ab.squaredNorm() + ac.squaredNorm());
}

bool degenerate_sample(const std::array<Vec2, 4>& p) {
  return collinear(p[0], p[1], p[2]) || collinear(p[0], p[1], p[3]) ||
         collinear(p[0], p[2], p[3]) || collinear(p[1], p[2], p[3]);
}

struct Score {
  int count = 0;
  double total_error = kInf;
  bool better_than(const Score& o) const {
    return count > o.count || (count == o.count && total_error < o.total_error);
  }
};

Score score(const Mat3& h, std::span<const Correspondence> cs, double threshold,
            std::vector<bool>* mask) {
  Score s{0, 0.0};
  const Eigen::FullPivLU<Mat3> lu(h);
  if (!lu.isInvertible()) return {0, kInf};
  const Mat3 h_inv = lu.inverse();
  if (mask) mask->assign(cs.size(), false);
  for (std::size_t k = 0; k < cs.size(); ++k) {
    const double e = transfer_error(h, h_inv, cs[k]);
    if (e < threshold) {
      ++s.count;
      s.total_error += e;
      if (mask) (*mask)[k] = true;
    }
  }
  return s;
}

Homography oriented(const Mat3& h, std::span<const Correspondence> cs, const std::vector<bool>& mask) {
  double depth_sign = 0.0;
  for (std::size_t k = 0; k < cs.size(); ++k) {
    if (mask[k]) depth_sign += (h * homogeneous(cs[k].p_i)).z();
  }
  return Homography::from_matrix(depth_sign < 0.0 ? Mat3(-h) : h);
}

bool same_solution(const HomographySolution& a, const HomographySolution& b) {
  constexpr double kTol = 1e-8;
  if (angular_distance(a.R, b.R) >= kTol) return false;
  if ((a.t_bar - b.t_bar).norm() >= kTol) return false;
  if (a.normal_determined != b.normal_determined) return false;
  return !a.normal_determined || std::acos(std::clamp(a.n.dot(b.n), -1.0, 1.0)) < kTol;
}

HomographySolution pure_rotation(const Mat3& h) {
  HomographySolution s;
  s.R = Rotation::from_matrix(h);
  s.t_bar = Vec3::Zero();
  s.n = Vec3::UnitZ();
  s.normal_determined = false;
  return s;
}

}  // namespace

Homography Homography::from_matrix(const Mat3& m) {
  if (!m.allFinite()) throw Error(ErrorKind::kDegenerateHomography, "non-finite homography");
  Eigen::JacobiSVD<Mat3> svd(m);
  const Vec3 sv = svd.singularValues();
  if (!(sv(0) > 0.0) || sv(1) <= 1e-12 * sv(0)) {
    throw Error(ErrorKind::kDegenerateHomography, "second singular value vanishes");
  }
  return Homography(m / sv(1));
}

std::optional<Vec2> Homography::transfer(const Vec2& p) const { return apply(h_, p); }

Homography Homography::inverse() const { return from_matrix(h_.inverse()); }

Homography Homography::flipped() const { return Homography(Mat3(-h_)); }

Homography synthesize(const Rotation& R, const Vec3& t, const Vec3& n, double d) {
  if (!(d > 0.0)) throw Error(ErrorKind::kInvalidPlane, "plane distance must be positive");
  if (std::abs(n.norm() - 1.0) > 1e-9) throw Error(ErrorKind::kInvalidPlane, "normal is not unit");
  return Homography::from_matrix(R.matrix() + t * n.transpose() / d);
}

double symmetric_transfer_error(const Homography& H, const Correspondence& c) {
  const Eigen::FullPivLU<Mat3> lu(H.matrix());
  if (!lu.isInvertible()) return kInf;
  return transfer_error(H.matrix(), lu.inverse(), c);
}

Homography fit_dlt(std::span<const Correspondence> correspondences) {
  if (correspondences.size() < 4) {
    throw Error(ErrorKind::kInsufficientData, "need at least 4 correspondences");
  }
  std::vector<Vec2> src, dst;
  for (const auto& c : correspondences) {
    src.push_back(c.p_i);
    dst.push_back(c.p_j);
  }
  const std::vector<bool> all(correspondences.size(), true);
  return oriented(normalized_dlt(src, dst), correspondences, all);
}

HomographyEstimate estimate(std::span<const Correspondence> cs, const RansacOptions& options,
                            std::uint64_t seed) {
  const std::size_t n = cs.size();
  if (n < 4) throw Error(ErrorKind::kInsufficientData, "need at least 4 correspondences");
  for (const auto& c : cs) {
    if (!c.p_i.allFinite() || !c.p_j.allFinite()) {
      throw Error(ErrorKind::kInsufficientData, "non-finite correspondence");
    }
  }

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);

  Mat3 best_h = Mat3::Identity();
  Score best;
  best.total_error = kInf;
  best.count = -1;
  int required = options.max_iterations;
  int iterations = 0;
  int attempts = 0;
  const int max_attempts = 10 * std::max(1, options.max_iterations);

  while (iterations < required && attempts < max_attempts) {
    ++attempts;
    std::array<std::size_t, 4> idx{};
    for (std::size_t k = 0; k < 4; ++k) {
      std::size_t candidate;
      do {
        candidate = pick(rng);
      } while (std::find(idx.begin(), idx.begin() + static_cast<long>(k), candidate) !=
               idx.begin() + static_cast<long>(k));
      idx[k] = candidate;
    }
    std::array<Vec2, 4> src, dst;
    for (std::size_t k = 0; k < 4; ++k) {
      src[k] = cs[idx[k]].p_i;
      dst[k] = cs[idx[k]].p_j;
    }
    if (degenerate_sample(src) || degenerate_sample(dst)) continue;
    ++iterations;

    const Mat3 h = normalized_dlt(src, dst);
    const Score s = score(h, cs, options.threshold, nullptr);
    if (s.better_than(best)) {
      best = s;
      best_h = h;
      const double w = static_cast<double>(s.count) / static_cast<double>(n);
      const double p_fail = 1.0 - std::pow(w, 4);
      if (p_fail <= 0.0) {
        required = std::min(required, iterations);
      } else if (p_fail < 1.0) {
        const double k = std::log(1.0 - options.confidence) / std::log(p_fail);
        if (k < static_cast<double>(required)) required = std::max(1, static_cast<int>(std::ceil(k)));
      }
    }
  }

  if (best.count < 4) {
    throw Error(ErrorKind::kDegenerateEstimation, "no consensus set of size >= 4");
  }

  std::vector<bool> mask;
  score(best_h, cs, options.threshold, &mask);
  Mat3 h = best_h;
  for (int refit = 0; refit < 5; ++refit) {
    std::vector<Vec2> src, dst;
    for (std::size_t k = 0; k < n; ++k) {
      if (!mask[k]) continue;
      src.push_back(cs[k].p_i);
      dst.push_back(cs[k].p_j);
    }
    const Mat3 refined = normalized_dlt(src, dst);
    std::vector<bool> refined_mask;
    const Score s = score(refined, cs, options.threshold, &refined_mask);
    if (s.count < 4) break;
    h = refined;
    if (refined_mask == mask) break;
    mask = std::move(refined_mask);
  }
  score(h, cs, options.threshold, &mask);

  HomographyEstimate out;
  out.H = oriented(h, cs, mask);
  out.inliers = mask;
  out.num_inliers = static_cast<int>(std::count(mask.begin(), mask.end(), true));
  out.iterations = iterations;
  return out;
}

std::vector<HomographySolution> decompose(const Homography& H) {
  const Mat3& h_in = H.matrix();
  Eigen::JacobiSVD<Mat3> svd(h_in, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec3 sv = svd.singularValues();
  if (!(sv(0) > 0.0) || sv(2) < 1e-9 * sv(0)) {
    throw Error(ErrorKind::kDegenerateHomography, "homography is numerically rank deficient");
  }
  const Mat3 h = h_in / sv(1);
  const double s1 = sv(0) / sv(1);
  const double s3 = sv(2) / sv(1);

  if (s1 - s3 < 1e-10) return {pure_rotation(h)};

  Mat3 v = svd.matrixV();
  if (v.determinant() < 0.0) v = -v;
  const Vec3 v1 = v.col(0), v2 = v.col(1), v3 = v.col(2);

  const double a = std::sqrt(std::max(0.0, 1.0 - s3 * s3));
  const double b = std::sqrt(std::max(0.0, s1 * s1 - 1.0));
  const double c = std::sqrt(s1 * s1 - s3 * s3);
  const Vec3 u1 = (a * v1 + b * v3) / c;
  const Vec3 u2 = (a * v1 - b * v3) / c;

  auto from_basis = [&](const Vec3& u) {
    Mat3 basis, image;
    basis << v2, u, v2.cross(u);
    const Vec3 hv2 = h * v2, hu = h * u;
    image << hv2, hu, hv2.cross(hu);
    HomographySolution s;
    s.R = Rotation::from_matrix(image * basis.transpose());
    s.n = v2.cross(u).normalized();
    s.t_bar = (h - s.R.matrix()) * s.n;
    return s;
  };

  const HomographySolution first = from_basis(u1);
  const HomographySolution second = from_basis(u2);
  std::vector<HomographySolution> candidates = {first, second};
  for (const auto& s : {first, second}) {
    HomographySolution mirrored = s;
    mirrored.n = -s.n;
    mirrored.t_bar = -s.t_bar;
    candidates.push_back(mirrored);
  }

  const bool all_static = std::all_of(candidates.begin(), candidates.end(),
                                      [](const auto& s) { return s.t_bar.norm() < 1e-6; });
  if (all_static) return {pure_rotation(h)};

  std::vector<HomographySolution> out;
  for (const auto& s : candidates) {
    const bool dup = std::any_of(out.begin(), out.end(),
                                 [&](const auto& kept) { return same_solution(kept, s); });
    if (!dup) out.push_back(s);
  }
  return out;
}

std::vector<HomographySolution> filter_positive_depth(
    std::span<const HomographySolution> solutions, std::span<const Correspondence> correspondences) {
  if (solutions.empty() || correspondences.empty()) {
    throw Error(ErrorKind::kInsufficientData, "positive-depth filter needs solutions and points");
  }
  std::vector<HomographySolution> out;
  for (const auto& s : solutions) {
    if (!s.normal_determined) {
      out.push_back(s);
      continue;
    }
    const Mat3 r = s.R.matrix();
    bool visible = true;
    for (const auto& c : correspondences) {
      const Vec3 ray = homogeneous(c.p_i);
      const double cos_n = s.n.dot(ray);
      if (!(cos_n > 0.0)) {
        visible = false;
        break;
      }
      // Plane point at unit distance; depth in camera j must also be positive.
      const Vec3 x_j = r * (ray / cos_n) + s.t_bar;
      if (!(x_j.z() > 0.0)) {
        visible = false;
        break;
      }
    }
    if (visible) out.push_back(s);
  }
  if (out.empty()) {
    throw Error(ErrorKind::kInconsistentData, "no decomposition keeps all points in front");
  }
  return out;
}

double indicator(const Homography& H, const Correspondence& c) {
  const auto q = H.transfer(c.p_i);
  if (!q) return kInf;
  return (c.p_j - *q).norm();
}

}  // namespace planar_init
