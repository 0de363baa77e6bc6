#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <unistd.h>

#include <cmath>
#include <filesystem>

#include "obstacle_fusion/ring_geometry.hpp"
#include "obstacle_fusion/scene_io.hpp"
#include "obstacle_fusion/simulator.hpp"
#include "obstacle_fusion/temporal.hpp"

using namespace obstacle_fusion;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        static int counter = 0;
        path = fs::temp_directory_path() /
               ("obstacle_fusion_tmp_" + std::to_string(::getpid()) + "_" +
                std::to_string(counter++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

CameraModeld small_camera() { return {100.0, 100.0, 50.0, 50.0, 100, 100}; }

GrayImage flat_image(int w, int h, std::uint8_t value) {
    GrayImage image(w, h);
    image.pixels.setConstant(value);
    return image;
}

GrayImage image_with_rect(int w, int h, int x0, int y0, int rw, int rh) {
    GrayImage image = flat_image(w, h, 128);
    for (int y = y0; y < y0 + rh; ++y)
        for (int x = x0; x < x0 + rw; ++x) image.at(x, y) = 255;
    return image;
}

ObstacleSegment segment_from_points(std::vector<Vec3d> points) {
    ObstacleSegment seg;
    for (const auto& p : points) {
        RingPoint rp;
        rp.position = p;
        rp.range_m = p.norm();
        seg.points.push_back(rp);
    }
    seg.entry.gradient_sign = -1;
    seg.exit.gradient_sign = +1;
    return seg;
}

Posed pose_at(double y, int frame_id) {
    Posed pose;
    pose.translation = Vec3d(0.0, y, 1.75);
    pose.frame_id = frame_id;
    return pose;
}

// A thin narrow box whose face sits at 13.80 m from frame 0. The -7 degree
// ring crosses the face in frames 0-3 (step 0.22 m) with entry jumps above
// 0.45 m; by frame 4 the ray passes over the face and clears the rear top
// edge, so the scan misses the box entirely. The narrow face keeps the
// two-return segment centroid within about a pixel of the silhouette center.
SceneSpec crossing_scene() {
    SceneSpec scene;
    BoxSpec box;
    box.center = Vec3d(0.0, 13.825, 0.075);
    box.size = Vec3d(0.12, 0.05, 0.15);
    scene.boxes.push_back(box);
    scene.set_straight_trajectory(5, 0.22);
    return scene;
}

Vec2d mask_centroid(const SegmentationMask& mask) {
    double cx = 0.0, cy = 0.0;
    long n = 0;
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) {
            if (mask.at(x, y) == static_cast<std::uint8_t>(MaskLabel::kSmallObstacle)) {
                cx += x;
                cy += y;
                ++n;
            }
        }
    }
    REQUIRE(n > 0);
    return {cx / n, cy / n};
}

}  // namespace

TEST_CASE("memory evicts beyond its capacity") {
    DetectionMemory memory(4);
    const CameraModeld camera = small_camera();
    const GrayImage image = flat_image(100, 100, 100);
    for (int f = 0; f < 5; ++f)
        update_memory(memory, {}, image, pose_at(0.1 * f, f), f, camera, {}, {});
    REQUIRE(memory.entries().size() == 4);
    CHECK(memory.entries().front().frame_id == 1);
    CHECK(memory.entries().back().frame_id == 4);
}

TEST_CASE("memory rejects non-increasing frame ids") {
    DetectionMemory memory(4);
    const GrayImage image = flat_image(100, 100, 100);
    update_memory(memory, {}, image, pose_at(0.0, 3), 3, small_camera(), {}, {});
    CHECK_THROWS_AS(update_memory(memory, {}, image, pose_at(0.0, 3), 3, small_camera(), {}, {}),
                    ConfigError);
}

TEST_CASE("a detection at the image border is stored without a template") {
    DetectionMemory memory(4);
    const GrayImage image = image_with_rect(100, 100, 2, 40, 4, 4);
    // centroid projects at x = 10(0.4)/1 .. -> pick a point mapping near x=4
    const auto seg = segment_from_points({Vec3d(-4.6, 0.0, 10.0)});  // pixel (4, 50)
    update_memory(memory, {seg}, image, pose_at(0.0, 0), 0, small_camera(), {}, {});
    REQUIRE(memory.entries().size() == 1);
    REQUIRE(memory.entries()[0].segments.size() == 1);
    CHECK(memory.entries()[0].segments[0].centroid_valid);
    CHECK_FALSE(memory.entries()[0].segments[0].patch.has_value());
}

TEST_CASE("two obstacles in one frame share one entry with two templates") {
    DetectionMemory memory(4);
    const GrayImage image = flat_image(100, 100, 0);
    GrayImage textured = image;
    for (int y = 0; y < 100; ++y)
        for (int x = 0; x < 100; ++x) textured.at(x, y) = static_cast<std::uint8_t>((x * 7 + y * 13) % 251);
    const auto seg_a = segment_from_points({Vec3d(0.0, 0.0, 10.0)});   // center
    const auto seg_b = segment_from_points({Vec3d(1.0, 1.0, 10.0)});   // (60, 60)
    update_memory(memory, {seg_a, seg_b}, textured, pose_at(0.0, 0), 0, small_camera(), {}, {});
    REQUIRE(memory.entries().size() == 1);
    REQUIRE(memory.entries()[0].segments.size() == 2);
    CHECK(memory.entries()[0].segments[0].patch.has_value());
    CHECK(memory.entries()[0].segments[1].patch.has_value());
}

TEST_CASE("forward projection under the identity relative pose reproduces anchors") {
    DetectionMemory memory(4);
    const CameraModeld camera = small_camera();
    const GrayImage image = flat_image(100, 100, 77);
    const auto seg = segment_from_points(
        {Vec3d(0.2, -0.1, 8.0), Vec3d(0.3, 0.0, 9.0), Vec3d(-0.4, 0.2, 7.5)});
    const Posed pose = pose_at(3.0, 0);
    update_memory(memory, {seg}, image, pose, 0, camera, {}, {});

    const ForwardProjection fwd = forward_project(memory, pose, camera, {});
    std::vector<Vec3d> raw;
    for (const auto& p : seg.points) raw.push_back(p.position);
    const ProjectionResult direct = project_points(raw, camera, {});
    REQUIRE(fwd.anchors.size() == direct.pixels.size());
    for (std::size_t i = 0; i < fwd.anchors.size(); ++i) {
        CHECK(std::abs(fwd.anchors[i].x - direct.pixels[i].x) < 1e-9);
        CHECK(std::abs(fwd.anchors[i].y - direct.pixels[i].y) < 1e-9);
    }
    CHECK(fwd.entries_without_pose == 0);
}

TEST_CASE("entries without a pose are skipped and counted") {
    DetectionMemory memory(4);
    const CameraModeld camera = small_camera();
    const GrayImage image = flat_image(100, 100, 77);
    update_memory(memory, {segment_from_points({Vec3d(0, 0, 5)})}, image, std::nullopt, 0, camera,
                  {}, {});
    const ForwardProjection fwd = forward_project(memory, pose_at(0.0, 1), camera, {});
    CHECK(fwd.anchors.empty());
    CHECK(fwd.entries_without_pose == 1);
}

TEST_CASE("forward motion pushes anchors outward from the principal point") {
    // Canonical mount, obstacle ahead; moving toward it magnifies the layout.
    const SceneSpec scene = crossing_scene();
    DetectionMemory memory(4);
    const CameraModeld camera = scene.camera;
    const ExtrinsicsSE3d xi = scene.camera_xi;
    const GrayImage image = flat_image(camera.width, camera.height, 50);

    const Posed past = pose_at(0.0, 0);
    // stored points: box-face hits in the frame-0 sensor frame
    const LabeledScan labeled = raycast_scan_labeled(scene, past);
    auto seg = segment_from_points(box_hit_points(labeled));
    REQUIRE_FALSE(seg.points.empty());
    update_memory(memory, {seg}, image, past, 0, camera, xi, {});

    const ForwardProjection at_past = forward_project(memory, past, camera, xi);
    const ForwardProjection at_closer = forward_project(memory, pose_at(0.48, 1), camera, xi);
    REQUIRE(at_past.anchors.size() == at_closer.anchors.size());
    const Vec2d pp(camera.cx, camera.cy);
    for (std::size_t i = 0; i < at_past.anchors.size(); ++i) {
        const double r_past = (Vec2d(at_past.anchors[i].x, at_past.anchors[i].y) - pp).norm();
        const double r_closer =
            (Vec2d(at_closer.anchors[i].x, at_closer.anchors[i].y) - pp).norm();
        CHECK(r_closer > r_past);
    }
}

TEST_CASE("an obstacle behind the camera culls to zero anchors") {
    DetectionMemory memory(4);
    const CameraModeld camera = small_camera();
    const auto seg = segment_from_points({Vec3d(0.0, 0.0, 10.0)});
    update_memory(memory, {seg}, flat_image(100, 100, 9), pose_at(0.0, 0), 0, camera, {}, {});
    Posed beyond;  // moved 20 along the optical axis: the point is now behind
    beyond.translation = Vec3d(0.0, 0.0, 20.0);
    beyond.frame_id = 1;
    const ForwardProjection fwd = forward_project(memory, beyond, camera, {});
    CHECK(fwd.anchors.empty());
    CHECK(fwd.culled == 1);
}

TEST_CASE("pose transform and projection commute for a static point") {
    const SceneSpec scene = crossing_scene();
    const Posed a = pose_at(0.0, 0), b = pose_at(0.24, 1);
    const Vec3d world(0.05, 13.82, 0.07);  // on the box face
    const Vec3d in_a = a.inverse().apply(world);
    const Vec3d in_b_direct = b.inverse().apply(world);
    const Vec3d in_b_via_rel = b.inverse().compose(a).apply(in_a);
    const auto px_direct = project_points({in_b_direct}, scene.camera, scene.camera_xi);
    const auto px_rel = project_points({in_b_via_rel}, scene.camera, scene.camera_xi);
    REQUIRE(px_direct.pixels.size() == 1);
    REQUIRE(px_rel.pixels.size() == 1);
    CHECK(std::abs(px_direct.pixels[0].x - px_rel.pixels[0].x) < 1e-6);
    CHECK(std::abs(px_direct.pixels[0].y - px_rel.pixels[0].y) < 1e-6);
}

TEST_CASE("template self-match is perfect at the true center") {
    const GrayImage image = image_with_rect(200, 150, 80, 60, 12, 9);
    GrayImage templ(32, 32);
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x) templ.at(x, y) = image.at(70 + x, 50 + y);
    const Vec2d true_center(70 + 15.5, 50 + 15.5);
    const MatchResult match = template_match(templ, image, true_center, 20, 0.6);
    CHECK(match.accepted);
    CHECK(match.score == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(match.center.x() == doctest::Approx(true_center.x()));
    CHECK(match.center.y() == doctest::Approx(true_center.y()));
}

TEST_CASE("constant templates and flat search areas are degenerate") {
    const GrayImage flat = flat_image(100, 100, 200);
    const GrayImage textured = image_with_rect(100, 100, 40, 40, 10, 10);
    GrayImage const_patch(16, 16);
    const_patch.pixels.setConstant(5);
    CHECK_THROWS_AS(template_match(const_patch, textured, {50, 50}, 10, 0.6), NumericError);

    GrayImage varied_patch(16, 16);
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x) varied_patch.at(x, y) = static_cast<std::uint8_t>(x * 16);
    CHECK_THROWS_AS(template_match(varied_patch, flat, {50, 50}, 10, 0.6), NumericError);
}

TEST_CASE("a known shift is recovered exactly on rasters") {
    const GrayImage frame0 = image_with_rect(200, 150, 80, 60, 12, 9);
    const GrayImage frame1 = image_with_rect(200, 150, 87, 63, 12, 9);  // shifted (7, 3)
    GrayImage templ(32, 32);
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x) templ.at(x, y) = frame0.at(70 + x, 50 + y);
    const Vec2d seed(70 + 15.5, 50 + 15.5);
    const MatchResult match = template_match(templ, frame1, seed, 20, 0.6);
    CHECK(match.accepted);
    CHECK(match.center.x() - seed.x() == doctest::Approx(7.0));
    CHECK(match.center.y() - seed.y() == doctest::Approx(3.0));
}

TEST_CASE("simulated motion is matched within one pixel") {
    TempDir dir;
    const SceneSpec scene = crossing_scene();
    const SequenceManifest manifest = simulate_sequence(scene, dir.path.string());
    const GrayImage img0 = load_gray_image(manifest.image_path(0));
    const GrayImage img1 = load_gray_image(manifest.image_path(1));
    const Vec2d c0 = mask_centroid(load_mask(manifest.mask_path(0)));
    const Vec2d c1 = mask_centroid(load_mask(manifest.mask_path(1)));

    GrayImage templ(32, 32);
    const int x0 = static_cast<int>(std::lround(c0.x())) - 16;
    const int y0 = static_cast<int>(std::lround(c0.y())) - 16;
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x) templ.at(x, y) = img0.at(x0 + x, y0 + y);
    const Vec2d seed(x0 + 15.5, y0 + 15.5);
    const MatchResult match = template_match(templ, img1, seed, 48, 0.6);
    CHECK(match.accepted);
    const Vec2d shift = match.center - seed;
    const Vec2d expected = c1 - c0;
    CHECK(std::abs(shift.x() - expected.x()) <= 1.0);
    CHECK(std::abs(shift.y() - expected.y()) <= 1.0);
}

TEST_CASE("empty memory leaves the map untouched") {
    const CameraModeld camera = small_camera();
    ConfidenceMap current(camera.width, camera.height);
    current.at(10, 20) = 0.7;
    const AggregationResult result =
        propagate_and_aggregate(current, DetectionMemory(4), flat_image(100, 100, 3),
                                pose_at(0.0, 0), {}, camera, {}, 5.0, {});
    CHECK((result.map.values == current.values).all());
    CHECK(result.matched == 0);
}

TEST_CASE("temporal aggregation recovers an obstacle the scan missed") {
    TempDir dir;
    const SceneSpec scene = crossing_scene();
    const SequenceManifest manifest = simulate_sequence(scene, dir.path.string());
    const auto [camera, xi] = load_calibration(manifest.calib_path());
    const double sigma = 5.0;

    DetectionMemory memory(4);
    ConfidenceMap last_current;
    AggregationResult last_agg;
    std::vector<std::size_t> detected_per_frame;
    for (std::size_t i = 0; i < manifest.size(); ++i) {
        const int id = manifest.frame_ids[i];
        const RingScan scan = load_scan(manifest.scan_path(id));
        const GrayImage image = load_gray_image(manifest.image_path(id));
        const DetectResult detection = detect_scan(scan, {});
        detected_per_frame.push_back(detection.segments.size());

        std::vector<PixelPoint> anchors;
        for (const auto& seg : detection.segments) {
            std::vector<Vec3d> pts;
            for (const auto& p : seg.points) pts.push_back(p.position);
            const auto proj = project_points(pts, camera, xi);
            anchors.insert(anchors.end(), proj.pixels.begin(), proj.pixels.end());
        }
        const ConfidenceMap current = render_confidence_map(anchors, sigma, camera);
        if (i + 1 == manifest.size()) {
            last_current = current;
            last_agg = propagate_and_aggregate(current, memory, image, manifest.poses[i],
                                               anchors, camera, xi, sigma, {});
        } else {
            update_memory(memory, detection.segments, image, manifest.poses[i], id, camera, xi,
                          {});
        }
    }

    for (int f = 0; f < 4; ++f) CHECK(detected_per_frame[f] >= 1);
    CHECK(detected_per_frame[4] == 0);  // the scan misses the box in frame 4

    // without aggregation the final map is empty there, with it the obstacle
    // centroid region is confidently marked
    CHECK(last_current.values.maxCoeff() == 0.0);
    CHECK(last_agg.matched >= 1);
    const Vec2d truth = mask_centroid(load_mask(manifest.mask_path(4)));
    double best = 0.0;
    for (int dy = -2; dy <= 2; ++dy) {
        for (int dx = -2; dx <= 2; ++dx) {
            const int x = static_cast<int>(std::lround(truth.x())) + dx;
            const int y = static_cast<int>(std::lround(truth.y())) + dy;
            if ((Vec2d(x, y) - truth).norm() > 2.0) continue;
            best = std::max(best, last_agg.map.at(x, y));
        }
    }
    CHECK(best >= 0.9);
    CHECK(last_agg.map.values.maxCoeff() <= 1.0);
}

TEST_CASE("re-detected segments are skipped and the map stays bounded") {
    TempDir dir;
    const SceneSpec scene = crossing_scene();
    const SequenceManifest manifest = simulate_sequence(scene, dir.path.string());
    const auto [camera, xi] = load_calibration(manifest.calib_path());

    DetectionMemory memory(4);
    // frame 0 and frame 1 both detect the box; propagate into frame 1
    const RingScan scan0 = load_scan(manifest.scan_path(0));
    const GrayImage img0 = load_gray_image(manifest.image_path(0));
    const auto det0 = detect_scan(scan0, {});
    REQUIRE(det0.segments.size() >= 1);
    update_memory(memory, det0.segments, img0, manifest.poses[0], 0, camera, xi, {});

    const RingScan scan1 = load_scan(manifest.scan_path(1));
    const GrayImage img1 = load_gray_image(manifest.image_path(1));
    const auto det1 = detect_scan(scan1, {});
    REQUIRE(det1.segments.size() >= 1);
    std::vector<PixelPoint> anchors;
    for (const auto& seg : det1.segments) {
        std::vector<Vec3d> pts;
        for (const auto& p : seg.points) pts.push_back(p.position);
        const auto proj = project_points(pts, camera, xi);
        anchors.insert(anchors.end(), proj.pixels.begin(), proj.pixels.end());
    }
    const ConfidenceMap current = render_confidence_map(anchors, 5.0, camera);
    const AggregationResult agg = propagate_and_aggregate(current, memory, img1,
                                                          manifest.poses[1], anchors, camera, xi,
                                                          5.0, {});
    CHECK(agg.skipped_redetected >= 1);
    CHECK(agg.map.values.maxCoeff() <= 1.0);
    CHECK((agg.map.values - current.values).minCoeff() >= 0.0);  // never decreases
}
