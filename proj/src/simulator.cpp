#include "obstacle_fusion/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include "obstacle_fusion/se3.hpp"

namespace obstacle_fusion {

namespace fs = std::filesystem;

namespace {

constexpr double kCurbWidth = 2.0;
constexpr double kCurbLength = 400.0;

BoxSpec curb_box(const CurbSpec& curb) {
    BoxSpec box;
    const double inner = curb.offset_m;
    const double outer = inner + (inner >= 0.0 ? kCurbWidth : -kCurbWidth);
    box.center = Vec3d(0.5 * (inner + outer), 0.0, 0.5 * curb.height_m);
    box.size = Vec3d(std::abs(outer - inner), kCurbLength, curb.height_m);
    return box;
}

/// Slab-method ray/box intersection; returns the entry distance.
std::optional<double> intersect_box(const Vec3d& origin, const Vec3d& dir, const BoxSpec& box) {
    double t_enter = 0.0;
    double t_exit = std::numeric_limits<double>::infinity();
    const Vec3d lo = box.lo();
    const Vec3d hi = box.hi();
    for (int a = 0; a < 3; ++a) {
        if (dir[a] == 0.0) {
            if (origin[a] < lo[a] || origin[a] > hi[a]) return std::nullopt;
            continue;
        }
        double t0 = (lo[a] - origin[a]) / dir[a];
        double t1 = (hi[a] - origin[a]) / dir[a];
        if (t0 > t1) std::swap(t0, t1);
        t_enter = std::max(t_enter, t0);
        t_exit = std::min(t_exit, t1);
        if (t_enter > t_exit) return std::nullopt;
    }
    if (t_enter <= 0.0) return std::nullopt;  // origin inside or box behind
    return t_enter;
}

std::optional<double> intersect_ground(const Vec3d& origin, const Vec3d& dir) {
    if (dir.z() >= 0.0) return std::nullopt;
    const double t = -origin.z() / dir.z();
    return t > 0.0 ? std::optional<double>(t) : std::nullopt;
}

struct Hit {
    double range;
    int object;  // >= 0 box index, HitObject otherwise
};

std::optional<Hit> nearest_hit(const SceneSpec& scene, const Vec3d& origin, const Vec3d& dir,
                               double max_range) {
    std::optional<Hit> best;
    auto consider = [&](std::optional<double> t, int object) {
        if (!t || *t > max_range) return;
        if (!best || *t < best->range) best = Hit{*t, object};
    };
    consider(intersect_ground(origin, dir), static_cast<int>(HitObject::kGround));
    for (std::size_t b = 0; b < scene.boxes.size(); ++b)
        consider(intersect_box(origin, dir, scene.boxes[b]), static_cast<int>(b));
    for (const auto& curb : scene.curbs)
        consider(intersect_box(origin, dir, curb_box(curb)), static_cast<int>(HitObject::kCurb));
    return best;
}

}  // namespace

LabeledScan raycast_scan_labeled(const SceneSpec& scene, const Posed& sensor_pose) {
    scene.validate();
    LabeledScan out;
    out.scan.ring_elevation_deg = scene.lidar.ring_angles_deg;
    const int steps = static_cast<int>(std::floor(360.0 / scene.lidar.azimuth_res_deg));
    std::mt19937_64 rng(scene.seed ^ (0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(
                                          sensor_pose.frame_id + 1)));
    std::normal_distribution<double> noise(0.0, scene.range_noise_sigma_m);

    for (int r = 0; r < kNumRings; ++r) {
        const double elev = scene.lidar.ring_angles_deg[r] * kDegToRad;
        const double cos_elev = std::cos(elev);
        const double sin_elev = std::sin(elev);
        for (int k = 0; k < steps; ++k) {
            const double az_deg = k * scene.lidar.azimuth_res_deg;
            const double az = az_deg * kDegToRad;
            const Vec3d dir_sensor(cos_elev * std::cos(az), cos_elev * std::sin(az), sin_elev);
            const Vec3d dir_world = sensor_pose.rotation * dir_sensor;
            const auto hit = nearest_hit(scene, sensor_pose.translation, dir_world,
                                         scene.lidar.max_range_m);
            if (!hit) continue;
            double range = hit->range;
            if (scene.range_noise_sigma_m > 0.0) range = std::max(1e-3, range + noise(rng));
            RingPoint p;
            p.azimuth_deg = az_deg;
            p.range_m = range;
            p.position = dir_sensor * range;
            out.scan.rings[r].push_back(p);
            out.object_ids[r].push_back(hit->object);
        }
    }
    return out;
}

RingScan raycast_scan(const SceneSpec& scene, const Posed& sensor_pose) {
    return raycast_scan_labeled(scene, sensor_pose).scan;
}

Posed camera_world_pose(const Posed& sensor_pose, const ExtrinsicsSE3d& xi) {
    // xi maps sensor -> camera; the camera's world pose composes the
    // sensor pose with the inverse mount.
    Posed mount;
    mount.rotation = exp_so3(xi.omega).transpose();
    mount.translation = -(mount.rotation * xi.nu);
    Posed out = sensor_pose.compose(mount);
    out.frame_id = sensor_pose.frame_id;
    return out;
}

SegmentationMask render_ground_truth(const SceneSpec& scene, const Posed& camera_pose,
                                     const CameraModeld& camera) {
    SegmentationMask mask(camera.width, camera.height);
    double road_left = -std::numeric_limits<double>::infinity();
    double road_right = std::numeric_limits<double>::infinity();
    for (const auto& curb : scene.curbs) {
        if (curb.offset_m >= 0.0)
            road_right = std::min(road_right, curb.offset_m);
        else
            road_left = std::max(road_left, curb.offset_m);
    }
    const double far = 10.0 * scene.lidar.max_range_m;
    for (int y = 0; y < camera.height; ++y) {
        for (int x = 0; x < camera.width; ++x) {
            const Vec3d dir_cam((x - camera.cx) / camera.fx, (y - camera.cy) / camera.fy, 1.0);
            const Vec3d dir_world = (camera_pose.rotation * dir_cam).normalized();
            const auto hit = nearest_hit(scene, camera_pose.translation, dir_world, far);
            std::uint8_t label = 0;
            if (hit) {
                if (hit->object >= 0) {
                    label = 2;
                } else if (hit->object == static_cast<int>(HitObject::kGround)) {
                    const Vec3d p = camera_pose.translation + hit->range * dir_world;
                    if (p.x() > road_left && p.x() < road_right) label = 1;
                }
            }
            mask.at(x, y) = label;
        }
    }
    return mask;
}

GrayImage mask_to_image(const SegmentationMask& mask) {
    GrayImage image(mask.width, mask.height);
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) {
            switch (mask.at(x, y)) {
                case 1: image.at(x, y) = 128; break;
                case 2: image.at(x, y) = 255; break;
                default: image.at(x, y) = 64; break;
            }
        }
    }
    return image;
}

std::vector<BoxCrossing> enumerate_box_crossings(const LabeledScan& labeled) {
    std::vector<BoxCrossing> crossings;
    for (int r = 0; r < kNumRings; ++r) {
        const auto& ids = labeled.object_ids[r];
        const auto& ring = labeled.scan.rings[r];
        std::size_t i = 0;
        while (i < ids.size()) {
            if (ids[i] < 0) {
                ++i;
                continue;
            }
            const int box = ids[i];
            std::size_t j = i;
            while (j + 1 < ids.size() && ids[j + 1] == box) ++j;
            BoxCrossing c;
            c.box = box;
            c.ring = r;
            c.first_index = static_cast<int>(i);
            c.last_index = static_cast<int>(j);
            c.azimuth_first_deg = ring[i].azimuth_deg;
            c.azimuth_last_deg = ring[j].azimuth_deg;
            if (i > 0) {
                c.entry_jump_m = std::abs(ring[i].range_m - ring[i - 1].range_m);
                c.entry_from_ground = ids[i - 1] == static_cast<int>(HitObject::kGround);
            }
            if (j + 1 < ids.size()) {
                c.exit_jump_m = std::abs(ring[j + 1].range_m - ring[j].range_m);
                c.exit_to_ground = ids[j + 1] == static_cast<int>(HitObject::kGround);
            }
            crossings.push_back(c);
            i = j + 1;
        }
    }
    return crossings;
}

std::vector<Vec3d> box_hit_points(const LabeledScan& labeled) {
    std::vector<Vec3d> points;
    for (int r = 0; r < kNumRings; ++r) {
        for (std::size_t i = 0; i < labeled.object_ids[r].size(); ++i) {
            if (labeled.object_ids[r][i] >= 0) points.push_back(labeled.scan.rings[r][i].position);
        }
    }
    return points;
}

SceneSpec load_scene_spec(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    SceneSpec scene;
    bool have_trajectory = false;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ParseError(path + ":" + std::to_string(line_no) + ": expected key=value");
        const std::string key = line.substr(0, eq);
        std::istringstream value(line.substr(eq + 1));
        auto bad = [&]() {
            throw ParseError(path + ":" + std::to_string(line_no) + ": bad value for '" + key +
                             "'");
        };
        if (key == "box") {
            BoxSpec box;
            if (!(value >> box.center.x() >> box.center.y() >> box.center.z() >> box.size.x() >>
                  box.size.y() >> box.size.z()))
                bad();
            if (!(box.size.minCoeff() > 0.0)) bad();
            scene.boxes.push_back(box);
        } else if (key == "curb") {
            CurbSpec curb;
            if (!(value >> curb.offset_m >> curb.height_m)) bad();
            scene.curbs.push_back(curb);
        } else if (key == "sensor_height") {
            if (!(value >> scene.sensor_height_m)) bad();
        } else if (key == "azimuth_res") {
            if (!(value >> scene.lidar.azimuth_res_deg) || scene.lidar.azimuth_res_deg <= 0.0)
                bad();
        } else if (key == "max_range") {
            if (!(value >> scene.lidar.max_range_m)) bad();
        } else if (key == "ring_angles") {
            for (int r = 0; r < kNumRings; ++r)
                if (!(value >> scene.lidar.ring_angles_deg[r])) bad();
        } else if (key == "noise_sigma") {
            if (!(value >> scene.range_noise_sigma_m)) bad();
        } else if (key == "image_noise") {
            if (!(value >> scene.image_noise_sigma)) bad();
        } else if (key == "seed") {
            if (!(value >> scene.seed)) bad();
        } else if (key == "camera") {
            if (!(value >> scene.camera.fx >> scene.camera.fy >> scene.camera.cx >>
                  scene.camera.cy >> scene.camera.width >> scene.camera.height))
                bad();
        } else if (key == "camera_xi") {
            for (int i = 0; i < 3; ++i)
                if (!(value >> scene.camera_xi.nu[i])) bad();
            for (int i = 0; i < 3; ++i)
                if (!(value >> scene.camera_xi.omega[i])) bad();
        } else if (key == "trajectory") {
            std::string kind;
            int n = 0;
            double step = 0.0;
            if (!(value >> kind >> n >> step) || kind != "straight" || n < 1)
                throw ParseError(path + ":" + std::to_string(line_no) +
                                 ": trajectory must be 'straight <n> <step>'");
            scene.set_straight_trajectory(n, step);
            have_trajectory = true;
        } else {
            throw ParseError(path + ":" + std::to_string(line_no) + ": unknown key '" + key + "'");
        }
    }
    if (!have_trajectory) scene.set_straight_trajectory(1, 0.0);
    scene.validate();
    return scene;
}

SequenceManifest simulate_sequence(const SceneSpec& scene, const std::string& out_dir) {
    scene.validate();
    fs::create_directories(out_dir);

    std::ofstream frames((fs::path(out_dir) / "frames.txt").string());
    if (!frames) throw IoError("cannot write frames.txt in " + out_dir);
    for (std::size_t k = 0; k < scene.trajectory.size(); ++k) frames << k << "\n";
    frames.close();

    save_calibration(scene.camera, scene.camera_xi,
                     (fs::path(out_dir) / "calib.txt").string());
    save_poses(scene.trajectory, (fs::path(out_dir) / "poses.txt").string());

    for (std::size_t k = 0; k < scene.trajectory.size(); ++k) {
        Posed pose = scene.trajectory[k];
        pose.frame_id = static_cast<int>(k);
        const RingScan scan = raycast_scan(scene, pose);
        char name[32];
        std::snprintf(name, sizeof(name), "scan_%06zu.txt", k);
        save_scan(scan, (fs::path(out_dir) / name).string());

        const Posed cam_pose = camera_world_pose(pose, scene.camera_xi);
        const SegmentationMask mask = render_ground_truth(scene, cam_pose, scene.camera);
        std::snprintf(name, sizeof(name), "mask_%06zu.png", k);
        save_mask(mask, (fs::path(out_dir) / name).string());

        GrayImage image = mask_to_image(mask);
        if (scene.image_noise_sigma > 0.0) {
            std::mt19937_64 rng(scene.seed + 1000003ULL * k);
            std::normal_distribution<double> noise(0.0, scene.image_noise_sigma);
            for (int y = 0; y < image.height; ++y) {
                for (int x = 0; x < image.width; ++x) {
                    const double v = image.at(x, y) + noise(rng);
                    image.at(x, y) = static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
                }
            }
        }
        std::snprintf(name, sizeof(name), "image_%06zu.png", k);
        save_gray_image(image, (fs::path(out_dir) / name).string());
    }
    return load_sequence(out_dir);
}

}  // namespace obstacle_fusion
