#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "obstacle_fusion/image.hpp"
#include "obstacle_fusion/ring_scan.hpp"
#include "obstacle_fusion/scene_io.hpp"
#include "obstacle_fusion/types.hpp"

namespace obstacle_fusion {

/// Axis-aligned box, world frame.
struct BoxSpec {
    Vec3d center = Vec3d::Zero();
    Vec3d size = Vec3d::Zero();  // full extents

    Vec3d lo() const { return center - 0.5 * size; }
    Vec3d hi() const { return center + 0.5 * size; }
};

/// Raised curb modeled as a long box whose inner face sits at `offset_m`
/// laterally (x axis); positive offsets bound the road on the right.
struct CurbSpec {
    double offset_m = 4.0;
    double height_m = 0.2;
};

struct LidarModel {
    std::array<double, kNumRings> ring_angles_deg;  // beam elevations
    double azimuth_res_deg = 0.2;                   // VLP-16 at 10 Hz
    double max_range_m = 100.0;

    LidarModel() {
        for (int r = 0; r < kNumRings; ++r) ring_angles_deg[r] = -15.0 + 2.0 * r;
    }
};

/// Parametric road scene: ground plane z = 0, optional curbs, box obstacles,
/// a sensor trajectory and the camera rig, all analytic.
struct SceneSpec {
    std::vector<BoxSpec> boxes;
    std::vector<CurbSpec> curbs;
    double sensor_height_m = 1.75;
    LidarModel lidar;
    CameraModeld camera{700.0, 700.0, 640.0, 360.0, 1280, 720};
    ExtrinsicsSE3d camera_xi = canonical_mount();
    std::vector<Posed> trajectory;
    double range_noise_sigma_m = 0.0;  // 0 keeps the oracle exact
    double image_noise_sigma = 0.0;    // gray levels on rendered images
    std::uint64_t seed = 1;

    /// LiDAR x right / y forward / z up to camera x right / y down /
    /// z forward: a +90 degree rotation about x, co-located origins.
    static ExtrinsicsSE3d canonical_mount() {
        ExtrinsicsSE3d xi;
        xi.omega = Vec3d(M_PI / 2.0, 0.0, 0.0);
        return xi;
    }

    /// Straight line along +y at the mounted height, identity headings.
    void set_straight_trajectory(int n_frames, double step_m) {
        trajectory.clear();
        for (int k = 0; k < n_frames; ++k) {
            Posed pose;
            pose.translation = Vec3d(0.0, k * step_m, sensor_height_m);
            pose.frame_id = k;
            trajectory.push_back(pose);
        }
    }

    void validate() const {
        camera.validate();
        camera_xi.validate();
        if (trajectory.empty()) throw ConfigError("scene: trajectory must not be empty");
        if (!(lidar.azimuth_res_deg > 0.0)) throw ConfigError("scene: azimuth_res must be > 0");
        for (int r = 1; r < kNumRings; ++r) {
            if (lidar.ring_angles_deg[r] <= lidar.ring_angles_deg[r - 1])
                throw ConfigError("scene: ring angles must be strictly increasing");
        }
        for (const auto& box : boxes) {
            if (!(box.size.minCoeff() > 0.0)) throw ConfigError("scene: box sizes must be > 0");
            if (box.hi().z() >= sensor_height_m)
                throw ConfigError("scene: obstacles must sit below the sensor height");
        }
    }
};

/// Key=value scene description (`box=cx cy cz sx sy sz`, `curb=offset height`,
/// `sensor_height=`, `trajectory=straight n step`, plus camera/lidar keys).
SceneSpec load_scene_spec(const std::string& path);

/// Hit object of one return.
enum class HitObject : int { kGround = -1, kCurb = -2 };

/// Scan plus the object id of each return: >= 0 indexes scene.boxes,
/// negatives are HitObject values.
struct LabeledScan {
    RingScan scan;
    std::array<std::vector<int>, kNumRings> object_ids;
};

/// Exact analytic ray cast of one sweep from the given sensor pose.
/// Misses (no surface within max range) produce no return.
LabeledScan raycast_scan_labeled(const SceneSpec& scene, const Posed& sensor_pose);

RingScan raycast_scan(const SceneSpec& scene, const Posed& sensor_pose);

/// Per-pixel analytic ground truth seen from `camera_pose` (world frame):
/// label 2 where the first hit is a box, 1 on the road plane between curbs,
/// 0 elsewhere (curbs, beyond-curb ground, sky).
SegmentationMask render_ground_truth(const SceneSpec& scene, const Posed& camera_pose,
                                     const CameraModeld& camera);

/// Gray rendering of a mask used as the synthetic camera image:
/// off-road 64, road 128, small obstacle 255.
GrayImage mask_to_image(const SegmentationMask& mask);

/// Camera pose in the world for a given sensor pose and mounting extrinsics.
Posed camera_world_pose(const Posed& sensor_pose, const ExtrinsicsSE3d& xi);

/// A contiguous run of returns from one box on one ring, with the range
/// jumps across its boundaries. Entry/exit jumps are 0 when the
/// neighbouring return is missing.
struct BoxCrossing {
    int box = 0;
    int ring = 0;
    int first_index = 0;
    int last_index = 0;
    double azimuth_first_deg = 0.0;
    double azimuth_last_deg = 0.0;
    double entry_jump_m = 0.0;
    double exit_jump_m = 0.0;
    bool entry_from_ground = false;  // preceding return exists and is ground
    bool exit_to_ground = false;
};

/// Analytic enumeration of which rings cross which boxes at which azimuths.
std::vector<BoxCrossing> enumerate_box_crossings(const LabeledScan& labeled);

/// Sensor-frame points of the returns that hit any box (the oracle's notion
/// of "points on small obstacles").
std::vector<Vec3d> box_hit_points(const LabeledScan& labeled);

/// Writes a full scene_io-loadable sequence (scans, masks, images, poses,
/// calibration, frame index) and returns its manifest.
SequenceManifest simulate_sequence(const SceneSpec& scene, const std::string& out_dir);

}  // namespace obstacle_fusion
