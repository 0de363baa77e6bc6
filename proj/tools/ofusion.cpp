// Command-line frontend: simulate / detect / confmap / calibrate / evaluate
// / pipeline over the obstacle_fusion library. Data goes to files, logs to
// stderr; identical configuration and inputs give byte-identical outputs.

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include "obstacle_fusion/calibration.hpp"
#include "obstacle_fusion/metrics.hpp"
#include "obstacle_fusion/projection.hpp"
#include "obstacle_fusion/ring_geometry.hpp"
#include "obstacle_fusion/scene_io.hpp"
#include "obstacle_fusion/simulator.hpp"
#include "obstacle_fusion/temporal.hpp"

namespace fs = std::filesystem;
using namespace obstacle_fusion;

namespace {

// Exit codes: 0 ok, 2 usage, 3 I/O, 4 data format, 5 numerical/degenerate.
constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;
constexpr int kExitFormat = 4;
constexpr int kExitNumeric = 5;

struct DetectOptions {
    double d_th = 0.4;
    double max_spread_deg = 2.0;
    std::string road_filter = "none";  // none | curb | mask
    double forward_azimuth_deg = 90.0;
    double curb_jump_m = 0.1;
};

void add_detect_options(CLI::App* cmd, DetectOptions& opt) {
    cmd->add_option("--d-th", opt.d_th, "breakpoint range deviation threshold, meters");
    cmd->add_option("--max-spread", opt.max_spread_deg,
                    "maximum azimuthal spread of a small-obstacle segment, degrees");
    cmd->add_option("--road-filter", opt.road_filter, "road filter: none, curb or mask")
        ->check(CLI::IsMember({"none", "curb", "mask"}));
    cmd->add_option("--forward-az", opt.forward_azimuth_deg,
                    "forward azimuth for the curb road band, degrees");
    cmd->add_option("--curb-jump", opt.curb_jump_m,
                    "elevation rise treated as a curb, meters");
}

/// Echo the effective configuration, one commented key=value line per flag.
void print_run_header(const CLI::App& cmd) {
    std::cerr << "# " << cmd.get_name() << " configuration\n";
    for (const CLI::Option* opt : cmd.get_options()) {
        if (opt->get_name().rfind("--", 0) != 0) continue;
        const auto results = opt->results();
        std::string value;
        if (results.empty()) {
            value = opt->get_default_str();
        } else {
            for (std::size_t i = 0; i < results.size(); ++i)
                value += (i ? " " : "") + results[i];
        }
        std::cerr << "# " << opt->get_name() << "=" << value << "\n";
    }
}

DetectResult run_detection(const RingScan& scan, const DetectOptions& opt,
                           const CameraModeld* camera, const ExtrinsicsSE3d* xi,
                           const SegmentationMask* road_mask) {
    DetectParams params;
    params.d_th = opt.d_th;
    params.max_spread_deg = opt.max_spread_deg;
    if (opt.road_filter == "curb") {
        CurbParams curb;
        curb.forward_azimuth_deg = opt.forward_azimuth_deg;
        curb.elevation_jump_m = opt.curb_jump_m;
        params.road = RoadRegion::from_bands(detect_road_region(scan, curb));
    } else if (opt.road_filter == "mask") {
        if (road_mask == nullptr || camera == nullptr || xi == nullptr)
            throw ConfigError("mask road filter needs --road-mask and --calib");
        params.road = RoadRegion::from_mask(*road_mask);
        params.camera = camera;
        params.xi = xi;
    }
    return detect_scan(scan, params);
}

std::vector<PixelPoint> segment_anchors(const std::vector<ObstacleSegment>& segments,
                                        const CameraModeld& camera, const ExtrinsicsSE3d& xi) {
    std::vector<PixelPoint> anchors;
    for (std::size_t s = 0; s < segments.size(); ++s) {
        std::vector<Vec3d> points;
        points.reserve(segments[s].points.size());
        for (const auto& p : segments[s].points) points.push_back(p.position);
        ProjectionResult proj = project_points(points, camera, xi, static_cast<int>(s));
        anchors.insert(anchors.end(), proj.pixels.begin(), proj.pixels.end());
    }
    return anchors;
}

int cmd_simulate(const std::string& scene_path, const std::string& out_dir) {
    const SceneSpec scene = load_scene_spec(scene_path);
    const SequenceManifest manifest = simulate_sequence(scene, out_dir);
    std::cerr << "simulated " << manifest.size() << " frame(s) into " << out_dir << "\n";
    return 0;
}

int cmd_detect(const std::string& scan_path, const std::string& calib_path,
               const std::string& road_mask_path, const std::string& out_path,
               const DetectOptions& opt) {
    const RingScan scan = load_scan(scan_path);
    std::optional<std::pair<CameraModeld, ExtrinsicsSE3d>> calib;
    if (!calib_path.empty()) calib = load_calibration(calib_path);
    std::optional<SegmentationMask> road_mask;
    if (!road_mask_path.empty()) road_mask = load_mask(road_mask_path);
    const DetectResult result = run_detection(
        scan, opt, calib ? &calib->first : nullptr, calib ? &calib->second : nullptr,
        road_mask ? &*road_mask : nullptr);
    save_segment_report(result.segments, out_path);
    std::cerr << result.segments.size() << " segment(s), " << result.degenerate_triplets
              << " degenerate triplet(s); report in " << out_path << "\n";
    return 0;
}

int cmd_confmap(const std::string& scan_path, const std::string& calib_path,
                const std::string& road_mask_path, const std::string& out_path, double sigma,
                const DetectOptions& opt) {
    const RingScan scan = load_scan(scan_path);
    const auto [camera, xi] = load_calibration(calib_path);
    std::optional<SegmentationMask> road_mask;
    if (!road_mask_path.empty()) road_mask = load_mask(road_mask_path);
    const DetectResult result =
        run_detection(scan, opt, &camera, &xi, road_mask ? &*road_mask : nullptr);
    const std::vector<PixelPoint> anchors = segment_anchors(result.segments, camera, xi);
    const ConfidenceMap map = render_confidence_map(anchors, sigma, camera);
    save_confidence_map(map, out_path);
    std::cerr << result.segments.size() << " segment(s), " << anchors.size()
              << " anchor(s); map in " << out_path << "\n";
    return 0;
}

int cmd_calibrate(const std::string& seq_dir, std::vector<int> frame_ids, double lr,
                  int max_iters, double tol, const std::string& out_path,
                  const std::string& trace_path, const DetectOptions& opt) {
    const SequenceManifest manifest = load_sequence(seq_dir);
    const auto [camera, xi0] = load_calibration(manifest.calib_path());
    if (frame_ids.empty()) frame_ids = manifest.frame_ids;

    std::vector<CalibrationFrame> frames;
    for (int id : frame_ids) {
        const auto it = std::find(manifest.frame_ids.begin(), manifest.frame_ids.end(), id);
        if (it == manifest.frame_ids.end())
            throw ConfigError("calibrate: frame " + std::to_string(id) + " not in sequence");
        const std::size_t index = it - manifest.frame_ids.begin();
        if (!manifest.mask_present[index])
            throw ConfigError("calibrate: frame " + std::to_string(id) + " has no mask");
        const RingScan scan = load_scan(manifest.scan_path(id));
        const DetectResult detection = run_detection(scan, opt, &camera, &xi0, nullptr);
        std::vector<Vec3d> points;
        for (const auto& seg : detection.segments)
            for (const auto& p : seg.points) points.push_back(p.position);
        if (points.empty())
            throw NumericError("calibrate: no obstacle points detected in frame " +
                               std::to_string(id));
        frames.emplace_back(id, std::move(points), load_mask(manifest.mask_path(id)));
    }

    RefinementParams params;
    params.lr = lr;
    params.max_iters = max_iters;
    params.tol = tol;
    const RefinementReport report = refine_extrinsics(xi0, frames, camera, params);
    save_calibration(camera, report.final_xi, out_path);
    if (!trace_path.empty()) save_refinement_trace(report, trace_path);
    std::fprintf(stderr, "loss %.6g -> %.6g in %d iteration(s), %s\n", report.initial_loss(),
                 report.final_loss(), report.iterations,
                 report.converged ? "converged" : "stopped at iteration cap");
    return 0;
}

int cmd_evaluate(const std::string& pred_dir, const std::string& gt_dir,
                 const std::string& report_path, const MetricsParams& params) {
    std::vector<std::string> names;
    for (const auto& entry : fs::directory_iterator(gt_dir)) {
        if (entry.path().extension() == ".png") names.push_back(entry.path().filename().string());
    }
    std::sort(names.begin(), names.end());
    if (names.empty()) throw IoError("evaluate: no .png masks in " + gt_dir);

    std::vector<SegmentationMask> pred, gt;
    for (const auto& name : names) {
        const std::string pred_path = (fs::path(pred_dir) / name).string();
        if (!fs::exists(pred_path)) throw IoError("evaluate: missing prediction " + pred_path);
        gt.push_back(load_mask((fs::path(gt_dir) / name).string()));
        pred.push_back(load_mask(pred_path));
    }
    const MetricsReport report = evaluate(pred, gt, params);
    save_metrics_report(report, report_path);
    std::cerr << format_metrics_report(report);
    return 0;
}

struct PipelineOptions {
    std::string seq_dir;
    std::string out_dir;
    DetectOptions detect;
    double sigma = 5.0;
    std::string temporal_mode = "match";  // match | forward | off
    TemporalParams temporal;
    double conf_threshold = 0.5;
    MetricsParams metrics;
    int jobs = 1;
};

struct FrameData {
    int id = -1;
    GrayImage image;
    Posed pose;
    std::vector<ObstacleSegment> segments;
    std::vector<PixelPoint> anchors;
    ConfidenceMap current_map;
    std::optional<SegmentationMask> gt_mask;
};

int cmd_pipeline(const PipelineOptions& opt) {
    const SequenceManifest manifest = load_sequence(opt.seq_dir);
    const auto [camera, xi] = load_calibration(manifest.calib_path());
    fs::create_directories(opt.out_dir);

    // Stage 1, parallel over frames: detect, project, render the per-frame map.
    std::vector<FrameData> frames(manifest.size());
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= manifest.size() || failed.load()) return;
            try {
                FrameData& frame = frames[i];
                frame.id = manifest.frame_ids[i];
                frame.pose = manifest.poses[i];
                frame.image = load_gray_image(manifest.image_path(frame.id));
                const RingScan scan = load_scan(manifest.scan_path(frame.id));
                std::optional<SegmentationMask> road_mask;
                if (opt.detect.road_filter == "mask") {
                    if (!manifest.mask_present[i])
                        throw ConfigError("pipeline: mask road filter needs per-frame masks");
                    road_mask = load_mask(manifest.mask_path(frame.id));
                }
                const DetectResult detection = run_detection(
                    scan, opt.detect, &camera, &xi, road_mask ? &*road_mask : nullptr);
                frame.segments = detection.segments;
                frame.anchors = segment_anchors(frame.segments, camera, xi);
                frame.current_map = render_confidence_map(frame.anchors, opt.sigma, camera);
                if (manifest.mask_present[i])
                    frame.gt_mask = load_mask(manifest.mask_path(frame.id));
            } catch (...) {
                std::lock_guard<std::mutex> lock(failure_mutex);
                failed = true;
                if (!failure) failure = std::current_exception();
            }
        }
    };
    const int jobs = std::max(1, opt.jobs);
    std::vector<std::thread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);

    // Stage 2, sequential: temporal aggregation, outputs, metrics inputs.
    DetectionMemory memory(opt.temporal.k);
    std::vector<SegmentationMask> pred_masks, gt_masks;
    for (FrameData& frame : frames) {
        ConfidenceMap aggregated = frame.current_map;
        if (opt.temporal_mode == "match" && !memory.empty()) {
            AggregationResult agg = propagate_and_aggregate(
                frame.current_map, memory, frame.image, frame.pose, frame.anchors, camera, xi,
                opt.sigma, opt.temporal);
            aggregated = std::move(agg.map);
        } else if (opt.temporal_mode == "forward" && !memory.empty()) {
            const ForwardProjection fwd = forward_project(memory, frame.pose, camera, xi);
            for (const auto& a : fwd.anchors)
                splat_gaussian_max(aggregated, a.x, a.y, opt.sigma);
        }
        if (opt.temporal_mode != "off") {
            update_memory(memory, frame.segments, frame.image, frame.pose, frame.id, camera, xi,
                          opt.temporal);
        }

        save_segment_report(frame.segments,
                            (fs::path(opt.out_dir) /
                             frame_file_name("segments", frame.id, "txt")).string());
        save_confidence_map(aggregated, (fs::path(opt.out_dir) /
                                         frame_file_name("conf", frame.id, "png")).string());

        if (frame.gt_mask) {
            SegmentationMask pred(camera.width, camera.height);
            for (int y = 0; y < camera.height; ++y) {
                for (int x = 0; x < camera.width; ++x) {
                    pred.at(x, y) = aggregated.at(x, y) >= opt.conf_threshold
                                        ? static_cast<std::uint8_t>(MaskLabel::kSmallObstacle)
                                        : static_cast<std::uint8_t>(MaskLabel::kRoad);
                }
            }
            pred_masks.push_back(std::move(pred));
            gt_masks.push_back(*frame.gt_mask);
        }
    }

    if (!gt_masks.empty()) {
        const MetricsReport report = evaluate(pred_masks, gt_masks, opt.metrics);
        save_metrics_report(report, (fs::path(opt.out_dir) / "report.txt").string());
        std::cerr << format_metrics_report(report);
    }
    std::cerr << "pipeline wrote " << frames.size() << " frame(s) to " << opt.out_dir << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "LiDAR-camera small-obstacle toolkit.\n"
        "Exit codes: 0 ok, 2 usage error, 3 I/O error, 4 data-format error,\n"
        "5 numerical/degenerate input."};
    app.require_subcommand(1);
    app.option_defaults()->always_capture_default();

    // simulate
    auto* simulate = app.add_subcommand("simulate", "ray-cast a synthetic scene into a sequence");
    std::string scene_path, sim_out;
    simulate->add_option("--scene", scene_path, "scene spec file")->required();
    simulate->add_option("--out", sim_out, "output sequence directory")->required();

    // detect
    auto* detect = app.add_subcommand("detect", "detect small-obstacle segments in one scan");
    std::string scan_path, calib_path, road_mask_path;
    std::string detect_out = "segments.txt";
    DetectOptions detect_opt;
    detect->add_option("--scan", scan_path, "SCAN v1 file")->required();
    detect->add_option("--calib", calib_path, "calibration file (for the mask road filter)");
    detect->add_option("--road-mask", road_mask_path, "road mask PNG (mask road filter)");
    detect->add_option("--out", detect_out, "segment report path");
    add_detect_options(detect, detect_opt);

    // confmap
    auto* confmap = app.add_subcommand("confmap", "render the confidence map of one scan");
    std::string conf_scan, conf_calib, conf_road_mask;
    std::string conf_out = "confmap.png";
    double conf_sigma = 5.0;
    DetectOptions conf_opt;
    confmap->add_option("--scan", conf_scan, "SCAN v1 file")->required();
    confmap->add_option("--calib", conf_calib, "calibration file")->required();
    confmap->add_option("--road-mask", conf_road_mask, "road mask PNG (mask road filter)");
    confmap->add_option("--out", conf_out, "output 16-bit PNG path");
    confmap->add_option("--sigma", conf_sigma, "Gaussian splat sigma, pixels");
    add_detect_options(confmap, conf_opt);

    // calibrate
    auto* calibrate = app.add_subcommand("calibrate", "refine extrinsics on annotated frames");
    std::string cal_seq, cal_out = "refined_calib.txt", cal_trace;
    std::vector<int> cal_frames;
    double cal_lr = 1e-5, cal_tol = 1e-9;
    int cal_max_iters = 20000;
    DetectOptions cal_opt;
    calibrate->add_option("--seq", cal_seq, "sequence directory")->required();
    calibrate->add_option("--frames", cal_frames, "frame ids to use (default: all)");
    calibrate->add_option("--lr", cal_lr, "Adam learning rate");
    calibrate->add_option("--max-iters", cal_max_iters, "iteration cap");
    calibrate->add_option("--tol", cal_tol, "stop when the loss drops below this");
    calibrate->add_option("--out", cal_out, "refined calibration path");
    calibrate->add_option("--trace", cal_trace, "loss trace path (iteration, loss)");
    add_detect_options(calibrate, cal_opt);

    // evaluate
    auto* evaluate_cmd = app.add_subcommand("evaluate", "score predicted masks against ground truth");
    std::string eval_pred, eval_gt, eval_report = "report.txt";
    MetricsParams eval_params;
    evaluate_cmd->add_option("--pred", eval_pred, "directory of predicted masks")->required();
    evaluate_cmd->add_option("--gt", eval_gt, "directory of ground-truth masks")->required();
    evaluate_cmd->add_option("--report", eval_report, "metrics report path");
    evaluate_cmd->add_option("--min-area", eval_params.min_area, "instance area floor, pixels");
    evaluate_cmd->add_option("--overlap", eval_params.overlap_threshold,
                             "instance overlap threshold");

    // pipeline
    auto* pipeline = app.add_subcommand(
        "pipeline", "detect + confidence maps + temporal aggregation over a sequence");
    PipelineOptions pipe;
    pipeline->add_option("--seq", pipe.seq_dir, "sequence directory")->required();
    pipeline->add_option("--out", pipe.out_dir, "output directory")->required();
    pipeline->add_option("--sigma", pipe.sigma, "Gaussian splat sigma, pixels");
    pipeline->add_option("--temporal", pipe.temporal_mode,
                         "temporal mode: match (template aggregation), forward, off")
        ->check(CLI::IsMember({"match", "forward", "off"}));
    pipeline->add_option("--temporal-k", pipe.temporal.k, "frames of detection memory");
    pipeline->add_option("--template-size", pipe.temporal.template_size,
                         "template patch side, pixels");
    pipeline->add_option("--search-radius", pipe.temporal.search_radius,
                         "template search radius, pixels");
    pipeline->add_option("--ncc-threshold", pipe.temporal.ncc_threshold,
                         "template match acceptance score");
    pipeline->add_option("--merge-radius", pipe.temporal.merge_radius_px,
                         "re-detection suppression radius, pixels");
    pipeline->add_option("--conf-threshold", pipe.conf_threshold,
                         "confidence level labeled small-obstacle in the predicted mask");
    pipeline->add_option("--min-area", pipe.metrics.min_area, "instance area floor, pixels");
    pipeline->add_option("--overlap", pipe.metrics.overlap_threshold,
                         "instance overlap threshold");
    pipeline->add_option("--jobs", pipe.jobs, "worker threads for per-frame stages");
    add_detect_options(pipeline, pipe.detect);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    try {
        if (*simulate) {
            print_run_header(*simulate);
            return cmd_simulate(scene_path, sim_out);
        }
        if (*detect) {
            print_run_header(*detect);
            return cmd_detect(scan_path, calib_path, road_mask_path, detect_out, detect_opt);
        }
        if (*confmap) {
            print_run_header(*confmap);
            return cmd_confmap(conf_scan, conf_calib, conf_road_mask, conf_out, conf_sigma,
                               conf_opt);
        }
        if (*calibrate) {
            print_run_header(*calibrate);
            return cmd_calibrate(cal_seq, cal_frames, cal_lr, cal_max_iters, cal_tol, cal_out,
                                 cal_trace, cal_opt);
        }
        if (*evaluate_cmd) {
            print_run_header(*evaluate_cmd);
            return cmd_evaluate(eval_pred, eval_gt, eval_report, eval_params);
        }
        if (*pipeline) {
            print_run_header(*pipeline);
            return cmd_pipeline(pipe);
        }
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const obstacle_fusion::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitFormat;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    } catch (const NumericError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
