#pragma once

#include <string>
#include <utility>
#include <vector>

#include "obstacle_fusion/image.hpp"
#include "obstacle_fusion/projection.hpp"
#include "obstacle_fusion/ring_scan.hpp"
#include "obstacle_fusion/types.hpp"

namespace obstacle_fusion {

/// SCAN v1 text format. First line `#VLP16-SCAN v1`, then one point per
/// line: `ring azimuth_deg range_m x y z`, space separated, any order on
/// disk. Loading sorts each ring by ascending azimuth and rejects duplicate
/// azimuths, ring indices outside [0,16), non-finite or non-positive
/// ranges, and points whose |(x,y,z)| disagrees with range by > 1e-3 m.
RingScan load_scan(const std::string& path);
void save_scan(const RingScan& scan, const std::string& path);

/// Calibration text format: `key=value` lines with keys fx, fy, cx, cy,
/// width, height and `xi=vx vy vz wx wy wz`.
std::pair<CameraModeld, ExtrinsicsSE3d> load_calibration(const std::string& path);
void save_calibration(const CameraModeld& camera, const ExtrinsicsSE3d& xi,
                      const std::string& path);

/// KITTI-style pose file: one line per frame, 12 floats (3x4 row-major [R|t]).
std::vector<Posed> load_poses(const std::string& path);
void save_poses(const std::vector<Posed>& poses, const std::string& path);

/// Masks persist as 8-bit grayscale PNG with labels {0,1,2}; any other
/// pixel value is a load error.
SegmentationMask load_mask(const std::string& path);
void save_mask(const SegmentationMask& mask, const std::string& path);

/// Confidence maps persist as 16-bit grayscale PNG, pixel = round(v * 65535).
ConfidenceMap load_confidence_map(const std::string& path);
void save_confidence_map(const ConfidenceMap& map, const std::string& path);

/// 8-bit grayscale view of any PNG (color is reduced to luma).
GrayImage load_gray_image(const std::string& path);
void save_gray_image(const GrayImage& image, const std::string& path);

/// Sequence directory: frames.txt (one id per line, strictly increasing),
/// calib.txt, poses.txt and per-frame image_%06d.png / scan_%06d.txt /
/// optional mask_%06d.png. Loading verifies every referenced file exists.
struct SequenceManifest {
    std::string root;
    std::vector<int> frame_ids;
    std::vector<Posed> poses;         // aligned with frame_ids
    std::vector<bool> mask_present;   // aligned with frame_ids

    std::string calib_path() const;
    std::string poses_path() const;
    std::string image_path(int frame_id) const;
    std::string scan_path(int frame_id) const;
    std::string mask_path(int frame_id) const;

    std::size_t size() const { return frame_ids.size(); }
};

SequenceManifest load_sequence(const std::string& dir);

std::string frame_file_name(const std::string& stem, int frame_id, const std::string& ext);

}  // namespace obstacle_fusion
