#include "planar_init/dataset_io.hpp"

#include "planar_init/config.hpp"
#include "planar_init/errors.hpp"

#include "json.hpp"
#include <fmt/format.h>

#include <fstream>
#include <sstream>

namespace planar_init {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr const char* kFiles[] = {"rig.json", "imu.csv", "features.csv", "groundtruth.csv", "scene.json"};

std::vector<std::vector<double>> read_csv(const fs::path& path, std::size_t columns) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  std::string line;
  std::getline(in, line);  // header
  std::vector<std::vector<double>> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw Error(ErrorKind::kIo, fmt::format("{}:{}: bad number '{}'", path.string(), line_no, cell));
      }
    }
    if (row.size() != columns) {
      throw Error(ErrorKind::kIo, fmt::format("{}:{}: expected {} columns", path.string(), line_no, columns));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

}  // namespace

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorKind::kIo, "write failed for " + path.string());
}

void write_dataset(const fs::path& dir, const Dataset& d) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::kIo, "cannot create " + dir.string() + ": " + ec.message());

  write_text(dir / "rig.json", rig_to_json(d.config.rig) + "\n");

  fmt::memory_buffer imu;
  fmt::format_to(std::back_inserter(imu), "t,gx,gy,gz,ax,ay,az\n");
  for (const auto& s : d.imu) {
    fmt::format_to(std::back_inserter(imu), "{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g}\n",
                   s.t, s.gyro.x(), s.gyro.y(), s.gyro.z(), s.accel.x(), s.accel.y(), s.accel.z());
  }
  write_text(dir / "imu.csv", fmt::to_string(imu));

  fmt::memory_buffer feat;
  fmt::format_to(std::back_inserter(feat), "frame,t,feature_id,uL,vL,uR,vR\n");
  for (const auto& kf : d.frames) {
    for (const auto& f : kf.features) {
      fmt::format_to(std::back_inserter(feat), "{},{:.17g},{},{:.17g},{:.17g},{:.17g},{:.17g}\n", kf.frame,
                     kf.t, f.id, f.left_px.x(), f.left_px.y(), f.right_px.x(), f.right_px.y());
    }
  }
  write_text(dir / "features.csv", fmt::to_string(feat));

  fmt::memory_buffer gt;
  fmt::format_to(std::back_inserter(gt), "t,px,py,pz,qw,qx,qy,qz,vx,vy,vz\n");
  for (const auto& s : d.truth.states) {
    const auto& q = s.T_bw.rotation.quaternion();
    const Vec3& p = s.T_bw.translation;
    fmt::format_to(std::back_inserter(gt),
                   "{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g}\n",
                   s.t, p.x(), p.y(), p.z(), q.w(), q.x(), q.y(), q.z(), s.velocity.x(), s.velocity.y(),
                   s.velocity.z());
  }
  write_text(dir / "groundtruth.csv", fmt::to_string(gt));

  json scene;
  const auto& sc = d.config.scene;
  scene["preset"] = sc.preset;
  scene["roughness"] = sc.roughness;
  scene["feature_count"] = sc.feature_count;
  scene["extent"] = json::array({sc.extent_x, sc.extent_y});
  scene["dropouts"] = json::array();
  for (const auto& poly : sc.dropouts) {
    json verts = json::array();
    for (const auto& v : poly.vertices) verts.push_back(json::array({v.x(), v.y()}));
    scene["dropouts"].push_back(verts);
  }
  scene["profile"] = std::string(to_string(d.config.profile.kind));
  scene["camera_rate"] = d.config.profile.camera_rate;
  scene["imu_rate"] = d.config.profile.imu_rate;
  scene["ground_z"] = d.truth.ground_z;
  scene["noise_px"] = d.config.render.noise_px;
  scene["heteroscedastic"] = d.config.render.heteroscedastic;
  scene["seed"] = d.config.seed;
  scene["gravity"] = vec_json(d.config.gravity);
  json planes = json::array();
  for (const auto& f : d.truth.frames) {
    planes.push_back({{"frame", f.frame}, {"t", f.t}, {"normal", vec_json(f.normal_c)}, {"d", f.d}});
  }
  scene["keyframes"] = planes;
  write_text(dir / "scene.json", scene.dump(2) + "\n");
}

Dataset read_dataset(const fs::path& dir) {
  Dataset d;
  d.config.rig = rig_from_json(read_text(dir / "rig.json"));

  for (const auto& r : read_csv(dir / "imu.csv", 7)) {
    d.imu.push_back({r[0], Vec3(r[1], r[2], r[3]), Vec3(r[4], r[5], r[6])});
  }

  for (const auto& r : read_csv(dir / "features.csv", 7)) {
    const int frame = static_cast<int>(r[0]);
    if (d.frames.empty() || d.frames.back().frame != frame) {
      if (!d.frames.empty() && frame < d.frames.back().frame) {
        throw Error(ErrorKind::kIo, "features.csv must be ordered by frame");
      }
      d.frames.push_back({frame, r[1], {}});
    }
    d.frames.back().features.push_back(
        make_observation(static_cast<int>(r[2]), Vec2(r[3], r[4]), Vec2(r[5], r[6]), d.config.rig));
  }
  for (auto& kf : d.frames) {
    std::sort(kf.features.begin(), kf.features.end(),
              [](const FeatureObservation& a, const FeatureObservation& b) { return a.id < b.id; });
  }

  for (const auto& r : read_csv(dir / "groundtruth.csv", 11)) {
    StateSample s;
    s.t = r[0];
    s.T_bw = Pose{Rotation(Eigen::Quaterniond(r[4], r[5], r[6], r[7])), Vec3(r[1], r[2], r[3]),
                  FrameId::body(), FrameId::world()};
    s.velocity = Vec3(r[8], r[9], r[10]);
    d.truth.states.push_back(s);
  }

  try {
    const json scene = json::parse(read_text(dir / "scene.json"));
    auto& sc = d.config.scene;
    sc.preset = scene.at("preset").get<std::string>();
    sc.roughness = scene.at("roughness").get<double>();
    sc.feature_count = scene.at("feature_count").get<int>();
    sc.extent_x = scene.at("extent")[0].get<double>();
    sc.extent_y = scene.at("extent")[1].get<double>();
    for (const auto& poly : scene.at("dropouts")) {
      Polygon p;
      for (const auto& v : poly) p.vertices.emplace_back(v[0].get<double>(), v[1].get<double>());
      sc.dropouts.push_back(p);
    }
    d.config.profile.kind = profile_from_string(scene.at("profile").get<std::string>());
    d.config.profile.camera_rate = scene.at("camera_rate").get<double>();
    d.config.profile.imu_rate = scene.at("imu_rate").get<double>();
    d.config.render.noise_px = scene.at("noise_px").get<double>();
    d.config.render.heteroscedastic = scene.at("heteroscedastic").get<bool>();
    d.config.seed = scene.at("seed").get<std::uint64_t>();
    const auto& g = scene.at("gravity");
    d.config.gravity = Vec3(g[0].get<double>(), g[1].get<double>(), g[2].get<double>());
    d.truth.profile = d.config.profile;
    d.truth.ground_z = scene.at("ground_z").get<double>();
    for (const auto& k : scene.at("keyframes")) {
      TruthFrame f;
      f.frame = k.at("frame").get<int>();
      f.t = k.at("t").get<double>();
      const auto& n = k.at("normal");
      f.normal_c = Vec3(n[0].get<double>(), n[1].get<double>(), n[2].get<double>());
      f.d = k.at("d").get<double>();
      d.truth.frames.push_back(f);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kIo, std::string("scene.json: ") + e.what());
  } catch (const Error& e) {
    throw Error(ErrorKind::kIo, std::string("scene.json: ") + e.what());
  }

  // Frame states come from the nearest ground-truth sample.
  for (auto& f : d.truth.frames) {
    auto it = std::lower_bound(d.truth.states.begin(), d.truth.states.end(), f.t,
                               [](const StateSample& s, double t) { return s.t < t; });
    if (it == d.truth.states.end()) continue;
    if (it != d.truth.states.begin() && std::abs(std::prev(it)->t - f.t) < std::abs(it->t - f.t)) --it;
    f.T_bw = it->T_bw;
    f.velocity = it->velocity;
    f.T_cw = compose(f.T_bw, d.config.rig.T_cb);
  }
  return d;
}

std::string dataset_digest(const fs::path& dir) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const char* name : kFiles) {
    for (const char c : std::string(name) + '\0' + read_text(dir / name)) {
      h ^= static_cast<unsigned char>(c);
      h *= 0x100000001b3ULL;
    }
  }
  return fmt::format("{:016x}", h);
}

}  // namespace planar_init
