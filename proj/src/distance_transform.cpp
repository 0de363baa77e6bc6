#include "obstacle_fusion/distance_transform.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace obstacle_fusion {

namespace {

constexpr double kFar = 1e12;  // stands in for infinity in envelope arithmetic

/// 1D squared-distance lower envelope (Felzenszwalb/Huttenlocher) with
/// argmin tracking.
void envelope_1d(const std::vector<double>& f, std::vector<double>& d, std::vector<int>& arg) {
    const int n = static_cast<int>(f.size());
    std::vector<int> v(n);
    std::vector<double> z(n + 1);
    int k = 0;
    v[0] = 0;
    z[0] = -std::numeric_limits<double>::infinity();
    z[1] = std::numeric_limits<double>::infinity();
    for (int q = 1; q < n; ++q) {
        double s = ((f[q] + double(q) * q) - (f[v[k]] + double(v[k]) * v[k])) /
                   (2.0 * q - 2.0 * v[k]);
        while (s <= z[k]) {
            --k;
            s = ((f[q] + double(q) * q) - (f[v[k]] + double(v[k]) * v[k])) /
                (2.0 * q - 2.0 * v[k]);
        }
        ++k;
        v[k] = q;
        z[k] = s;
        z[k + 1] = std::numeric_limits<double>::infinity();
    }
    k = 0;
    for (int q = 0; q < n; ++q) {
        while (z[k + 1] < q) ++k;
        const double dq = q - v[k];
        d[q] = dq * dq + f[v[k]];
        arg[q] = v[k];
    }
}

}  // namespace

NearestSiteMap build_nearest_sites(const SegmentationMask& mask, MaskLabel label) {
    NearestSiteMap out;
    out.width = mask.width;
    out.height = mask.height;
    const std::size_t n = static_cast<std::size_t>(mask.width) * mask.height;
    out.site_x.assign(n, -1);
    out.site_y.assign(n, -1);

    // Pass 1: nearest seed column within each row.
    std::vector<double> row_dist_sq(n, kFar);
    std::vector<std::int32_t> row_site(n, -1);
    const auto target = static_cast<std::uint8_t>(label);
    for (int y = 0; y < mask.height; ++y) {
        int last = -1;
        for (int x = 0; x < mask.width; ++x) {
            if (mask.at(x, y) == target) last = x;
            if (last >= 0) {
                row_site[static_cast<std::size_t>(y) * mask.width + x] = last;
                out.has_sites = true;
            }
        }
        last = -1;
        for (int x = mask.width - 1; x >= 0; --x) {
            if (mask.at(x, y) == target) last = x;
            const std::size_t idx = static_cast<std::size_t>(y) * mask.width + x;
            if (last >= 0 &&
                (row_site[idx] < 0 || last - x < x - row_site[idx]))
                row_site[idx] = last;
            if (row_site[idx] >= 0) {
                const double dx = x - row_site[idx];
                row_dist_sq[idx] = dx * dx;
            }
        }
    }
    if (!out.has_sites) return out;

    // Pass 2: envelope over rows within each column; the minimizing row
    // carries its row-nearest column along, giving the true nearest site.
    std::vector<double> f(mask.height), d(mask.height);
    std::vector<int> arg(mask.height);
    for (int x = 0; x < mask.width; ++x) {
        for (int y = 0; y < mask.height; ++y)
            f[y] = row_dist_sq[static_cast<std::size_t>(y) * mask.width + x];
        envelope_1d(f, d, arg);
        for (int y = 0; y < mask.height; ++y) {
            const int best_row = arg[y];
            const std::int32_t sx = row_site[static_cast<std::size_t>(best_row) * mask.width + x];
            const std::size_t idx = static_cast<std::size_t>(y) * mask.width + x;
            out.site_x[idx] = sx;
            out.site_y[idx] = best_row;
        }
    }
    return out;
}

MaskDistanceField::MaskDistanceField(const SegmentationMask& mask, MaskLabel label)
    : sites_(build_nearest_sites(mask, label)) {}

double MaskDistanceField::distance(double x, double y) const {
    if (!sites_.has_sites) return kFar;
    const int cx = std::clamp(static_cast<int>(std::lround(x)), 0, sites_.width - 1);
    const int cy = std::clamp(static_cast<int>(std::lround(y)), 0, sites_.height - 1);
    double best_sq = std::numeric_limits<double>::infinity();
    // The 3x3 neighborhood around the rounded query covers nearest-site
    // switches across pixel cells.
    for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
            const int px = cx + dx;
            const int py = cy + dy;
            if (px < 0 || px >= sites_.width || py < 0 || py >= sites_.height) continue;
            const std::int32_t sx = sites_.nearest_x(px, py);
            if (sx < 0) continue;
            const std::int32_t sy = sites_.nearest_y(px, py);
            const double gx = std::max(0.0, std::abs(x - sx) - 0.5);
            const double gy = std::max(0.0, std::abs(y - sy) - 0.5);
            const double dist_sq = gx * gx + gy * gy;
            best_sq = std::min(best_sq, dist_sq);
        }
    }
    return std::sqrt(best_sq);
}

}  // namespace obstacle_fusion
