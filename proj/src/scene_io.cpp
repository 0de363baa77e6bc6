#include "obstacle_fusion/scene_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "obstacle_fusion/png_io.hpp"

namespace obstacle_fusion {

namespace fs = std::filesystem;

namespace {

std::string fmt(const char* format, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), format, v);
    return buf;
}

std::ifstream open_text(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    return in;
}

std::ofstream create_text(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    return out;
}

[[noreturn]] void parse_fail(const std::string& path, int line, const std::string& message) {
    throw ParseError(path + ":" + std::to_string(line) + ": " + message);
}

}  // namespace

RingScan load_scan(const std::string& path) {
    std::ifstream in = open_text(path);
    std::string line;
    if (!std::getline(in, line) || line != "#VLP16-SCAN v1")
        parse_fail(path, 1, "malformed header, expected '#VLP16-SCAN v1'");

    struct Parsed {
        RingPoint point;
        int line = 0;
    };
    std::array<std::vector<Parsed>, kNumRings> rings;

    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        // strtod-based split: stream extraction rejects "nan"/"inf", which
        // must reach the finiteness checks below instead.
        double fields[6];
        const char* cursor = line.c_str();
        bool ok = true;
        for (int f = 0; f < 6 && ok; ++f) {
            char* end = nullptr;
            fields[f] = std::strtod(cursor, &end);
            ok = end != cursor;
            cursor = end;
        }
        while (ok && *cursor != '\0') {
            if (!std::isspace(static_cast<unsigned char>(*cursor))) ok = false;
            ++cursor;
        }
        if (!ok) parse_fail(path, line_no, "expected 'ring azimuth range x y z'");
        if (fields[0] != std::floor(fields[0]))
            parse_fail(path, line_no, "ring index must be an integer");
        const int ring = static_cast<int>(fields[0]);
        RingPoint p;
        p.azimuth_deg = fields[1];
        p.range_m = fields[2];
        p.position = Vec3d(fields[3], fields[4], fields[5]);
        if (ring < 0 || ring >= kNumRings)
            parse_fail(path, line_no, "ring index " + std::to_string(ring) + " outside [0,16)");
        if (!std::isfinite(p.range_m) || !(p.range_m > 0.0))
            parse_fail(path, line_no, "range must be finite and positive");
        if (!std::isfinite(p.azimuth_deg) || p.azimuth_deg < 0.0 || p.azimuth_deg >= 360.0)
            parse_fail(path, line_no, "azimuth must lie in [0, 360)");
        if (!p.position.allFinite())
            parse_fail(path, line_no, "non-finite point coordinates");
        if (std::abs(p.position.norm() - p.range_m) > 1e-3)
            parse_fail(path, line_no, "|(x,y,z)| disagrees with range by > 1e-3 m");
        rings[ring].push_back({p, line_no});
    }

    RingScan scan;
    // Default VLP-16 table; rings are -15..+15 degrees in 2-degree steps.
    for (int r = 0; r < kNumRings; ++r) scan.ring_elevation_deg[r] = -15.0 + 2.0 * r;
    for (int r = 0; r < kNumRings; ++r) {
        auto& parsed = rings[r];
        std::stable_sort(parsed.begin(), parsed.end(), [](const Parsed& a, const Parsed& b) {
            return a.point.azimuth_deg < b.point.azimuth_deg;
        });
        for (std::size_t i = 1; i < parsed.size(); ++i) {
            if (parsed[i].point.azimuth_deg == parsed[i - 1].point.azimuth_deg)
                parse_fail(path, parsed[i].line,
                           "duplicate azimuth within ring " + std::to_string(r));
        }
        scan.rings[r].reserve(parsed.size());
        for (const auto& e : parsed) scan.rings[r].push_back(e.point);
    }
    return scan;
}

void save_scan(const RingScan& scan, const std::string& path) {
    std::ofstream out = create_text(path);
    out << "#VLP16-SCAN v1\n";
    char buf[160];
    for (int r = 0; r < kNumRings; ++r) {
        for (const auto& p : scan.rings[r]) {
            std::snprintf(buf, sizeof(buf), "%d %.10g %.10g %.10g %.10g %.10g\n", r,
                          p.azimuth_deg, p.range_m, p.position.x(), p.position.y(),
                          p.position.z());
            out << buf;
        }
    }
    if (!out) throw IoError("failed writing " + path);
}

std::pair<CameraModeld, ExtrinsicsSE3d> load_calibration(const std::string& path) {
    std::ifstream in = open_text(path);
    std::map<std::string, std::string> entries;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) parse_fail(path, line_no, "expected key=value");
        const std::string key = line.substr(0, eq);
        if (entries.count(key)) parse_fail(path, line_no, "duplicate key '" + key + "'");
        entries[key] = line.substr(eq + 1);
    }
    static const char* const kKeys[] = {"fx", "fy", "cx", "cy", "width", "height", "xi"};
    for (const char* key : kKeys) {
        if (!entries.count(key))
            throw ParseError(path + ": missing key '" + std::string(key) + "'");
    }
    for (const auto& [key, value] : entries) {
        bool known = false;
        for (const char* k : kKeys) known = known || key == k;
        if (!known) throw ParseError(path + ": unknown key '" + key + "'");
    }

    auto scalar = [&](const std::string& key) {
        std::istringstream ss(entries[key]);
        double v;
        if (!(ss >> v)) throw ParseError(path + ": key '" + key + "' is not a number");
        return v;
    };

    CameraModeld camera;
    camera.fx = scalar("fx");
    camera.fy = scalar("fy");
    camera.cx = scalar("cx");
    camera.cy = scalar("cy");
    camera.width = static_cast<int>(scalar("width"));
    camera.height = static_cast<int>(scalar("height"));

    ExtrinsicsSE3d xi;
    {
        std::istringstream ss(entries["xi"]);
        for (int i = 0; i < 3; ++i)
            if (!(ss >> xi.nu[i])) throw ParseError(path + ": xi needs 6 numbers");
        for (int i = 0; i < 3; ++i)
            if (!(ss >> xi.omega[i])) throw ParseError(path + ": xi needs 6 numbers");
    }
    camera.validate();
    xi.validate();
    return {camera, xi};
}

void save_calibration(const CameraModeld& camera, const ExtrinsicsSE3d& xi,
                      const std::string& path) {
    std::ofstream out = create_text(path);
    out << "fx=" << fmt("%.17g", camera.fx) << "\n";
    out << "fy=" << fmt("%.17g", camera.fy) << "\n";
    out << "cx=" << fmt("%.17g", camera.cx) << "\n";
    out << "cy=" << fmt("%.17g", camera.cy) << "\n";
    out << "width=" << camera.width << "\n";
    out << "height=" << camera.height << "\n";
    out << "xi=";
    for (int i = 0; i < 3; ++i) out << fmt("%.17g", xi.nu[i]) << (" ");
    for (int i = 0; i < 3; ++i) out << fmt("%.17g", xi.omega[i]) << (i < 2 ? " " : "\n");
    if (!out) throw IoError("failed writing " + path);
}

std::vector<Posed> load_poses(const std::string& path) {
    std::ifstream in = open_text(path);
    std::vector<Posed> poses;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream ss(line);
        Posed pose;
        for (int r = 0; r < 3; ++r) {
            for (int c = 0; c < 4; ++c) {
                double v;
                if (!(ss >> v)) parse_fail(path, line_no, "expected 12 floats per pose line");
                if (c < 3)
                    pose.rotation(r, c) = v;
                else
                    pose.translation(r) = v;
            }
        }
        pose.frame_id = static_cast<int>(poses.size());
        try {
            pose.validate();
        } catch (const ConfigError& e) {
            parse_fail(path, line_no, e.what());
        }
        poses.push_back(pose);
    }
    return poses;
}

void save_poses(const std::vector<Posed>& poses, const std::string& path) {
    std::ofstream out = create_text(path);
    for (const auto& pose : poses) {
        for (int r = 0; r < 3; ++r) {
            for (int c = 0; c < 4; ++c) {
                const double v = c < 3 ? pose.rotation(r, c) : pose.translation(r);
                out << fmt("%.17g", v);
                out << ((r == 2 && c == 3) ? "\n" : " ");
            }
        }
    }
    if (!out) throw IoError("failed writing " + path);
}

SegmentationMask load_mask(const std::string& path) {
    const PngImage png = read_png(path);
    if (png.bit_depth != 8) throw ParseError(path + ": mask must be an 8-bit grayscale PNG");
    SegmentationMask mask(png.width, png.height);
    for (int y = 0; y < png.height; ++y) {
        for (int x = 0; x < png.width; ++x) {
            const std::uint16_t v = png.at(x, y);
            if (v > 2)
                throw ParseError(path + ": pixel (" + std::to_string(x) + "," +
                                 std::to_string(y) + ") has label " + std::to_string(v) +
                                 ", expected {0,1,2}");
            mask.at(x, y) = static_cast<std::uint8_t>(v);
        }
    }
    return mask;
}

void save_mask(const SegmentationMask& mask, const std::string& path) {
    std::vector<std::uint8_t> rows(static_cast<std::size_t>(mask.width) * mask.height);
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) {
            const std::uint8_t v = mask.at(x, y);
            if (v > 2) throw ConfigError("save_mask: label " + std::to_string(v) + " not in {0,1,2}");
            rows[static_cast<std::size_t>(y) * mask.width + x] = v;
        }
    }
    write_png_gray8(path, mask.width, mask.height, rows.data());
}

ConfidenceMap load_confidence_map(const std::string& path) {
    const PngImage png = read_png(path);
    if (png.bit_depth != 16)
        throw ParseError(path + ": confidence map must be a 16-bit grayscale PNG");
    ConfidenceMap map(png.width, png.height);
    for (int y = 0; y < png.height; ++y)
        for (int x = 0; x < png.width; ++x) map.at(x, y) = png.at(x, y) / 65535.0;
    return map;
}

void save_confidence_map(const ConfidenceMap& map, const std::string& path) {
    std::vector<std::uint16_t> rows(static_cast<std::size_t>(map.width) * map.height);
    for (int y = 0; y < map.height; ++y) {
        for (int x = 0; x < map.width; ++x) {
            const double v = map.at(x, y);
            if (!(v >= 0.0) || !(v <= 1.0))
                throw ConfigError("save_confidence_map: value " + std::to_string(v) +
                                  " outside [0,1]");
            rows[static_cast<std::size_t>(y) * map.width + x] =
                static_cast<std::uint16_t>(std::lround(v * 65535.0));
        }
    }
    write_png_gray16(path, map.width, map.height, rows.data());
}

GrayImage load_gray_image(const std::string& path) {
    const PngImage png = read_png(path);
    GrayImage image(png.width, png.height);
    const int shift = png.bit_depth == 16 ? 8 : 0;
    for (int y = 0; y < png.height; ++y)
        for (int x = 0; x < png.width; ++x)
            image.at(x, y) = static_cast<std::uint8_t>(png.at(x, y) >> shift);
    return image;
}

void save_gray_image(const GrayImage& image, const std::string& path) {
    std::vector<std::uint8_t> rows(static_cast<std::size_t>(image.width) * image.height);
    for (int y = 0; y < image.height; ++y)
        for (int x = 0; x < image.width; ++x)
            rows[static_cast<std::size_t>(y) * image.width + x] = image.at(x, y);
    write_png_gray8(path, image.width, image.height, rows.data());
}

std::string frame_file_name(const std::string& stem, int frame_id, const std::string& ext) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "_%06d.", frame_id);
    return stem + buf + ext;
}

std::string SequenceManifest::calib_path() const { return (fs::path(root) / "calib.txt").string(); }
std::string SequenceManifest::poses_path() const { return (fs::path(root) / "poses.txt").string(); }

std::string SequenceManifest::image_path(int frame_id) const {
    return (fs::path(root) / frame_file_name("image", frame_id, "png")).string();
}

std::string SequenceManifest::scan_path(int frame_id) const {
    return (fs::path(root) / frame_file_name("scan", frame_id, "txt")).string();
}

std::string SequenceManifest::mask_path(int frame_id) const {
    return (fs::path(root) / frame_file_name("mask", frame_id, "png")).string();
}

SequenceManifest load_sequence(const std::string& dir) {
    SequenceManifest manifest;
    manifest.root = dir;

    const std::string frames_file = (fs::path(dir) / "frames.txt").string();
    std::ifstream in = open_text(frames_file);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream ss(line);
        int id;
        if (!(ss >> id)) parse_fail(frames_file, line_no, "expected a frame id");
        if (!manifest.frame_ids.empty() && id <= manifest.frame_ids.back())
            parse_fail(frames_file, line_no,
                       "frame ids must be strictly increasing, got " + std::to_string(id) +
                           " after " + std::to_string(manifest.frame_ids.back()));
        manifest.frame_ids.push_back(id);
    }

    if (!fs::exists(manifest.calib_path())) throw IoError(dir + ": missing calib.txt");
    if (!fs::exists(manifest.poses_path())) throw IoError(dir + ": missing poses.txt");
    manifest.poses = load_poses(manifest.poses_path());
    if (manifest.poses.size() != manifest.frame_ids.size())
        throw ParseError(manifest.poses_path() + ": " + std::to_string(manifest.poses.size()) +
                         " poses for " + std::to_string(manifest.frame_ids.size()) + " frames");

    manifest.mask_present.reserve(manifest.frame_ids.size());
    for (std::size_t i = 0; i < manifest.frame_ids.size(); ++i) {
        const int id = manifest.frame_ids[i];
        manifest.poses[i].frame_id = id;
        for (const std::string& path : {manifest.image_path(id), manifest.scan_path(id)}) {
            if (!fs::exists(path))
                throw IoError(dir + ": frame " + std::to_string(id) + " references missing file " +
                              path);
        }
        manifest.mask_present.push_back(fs::exists(manifest.mask_path(id)));
    }
    return manifest;
}

}  // namespace obstacle_fusion
