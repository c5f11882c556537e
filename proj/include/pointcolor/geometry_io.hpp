#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pointcolor/common.hpp"

namespace pointcolor {

// Ordered list of 3-D points in the ego/LiDAR frame (meters). Intensity is
// parsed from disk when present and carried along unused.
struct PointCloud {
    std::vector<Eigen::Vector3d> points;
    std::vector<float> intensity; // empty or same length as points

    std::size_t size() const { return points.size(); }
};

// Camera projection chain: LiDAR -> camera (Tr), rectification (R0), then
// pinhole projection (P2, the left color camera).
struct Calibration {
    Eigen::Matrix<double, 3, 4> P2;
    Eigen::Matrix3d R0_rect;
    Eigen::Matrix<double, 3, 4> Tr_velo_to_cam;
};

// Row-major 8-bit RGB image.
struct ImageBuffer {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels; // 3 * width * height bytes

    Color pixel_at(int u, int v) const {
        const std::size_t base = 3 * (static_cast<std::size_t>(v) * width + u);
        return {pixels[base] / 255.0, pixels[base + 1] / 255.0, pixels[base + 2] / 255.0};
    }
};

struct ColoredPointCloud {
    PointCloud cloud;
    std::vector<Color> colors; // same length as cloud, channels in [0, 1]
};

// Pixel coordinates plus the camera-frame depth used for the division.
struct Projection {
    double u = 0.0;
    double v = 0.0;
    double depth = 0.0;
};

// Decodes KITTI velodyne layout: four little-endian float32 per point
// (x, y, z, intensity). Throws io_error on a length not divisible by 16
// and numeric_error naming the record index on non-finite floats.
PointCloud parse_point_bin(std::span<const std::uint8_t> bytes);

// Inverse of parse_point_bin; missing intensity is written as zero.
std::vector<std::uint8_t> encode_point_bin(const PointCloud& cloud);

// Parses the KITTI calib text layout: "P2:", "R0_rect:" and
// "Tr_velo_to_cam:" lines, in any order. Throws io_error naming the key
// on a missing key or wrong value count.
Calibration parse_calib(const std::string& text);

// Binary PPM (P6), maxval 255 only.
ImageBuffer parse_ppm(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> encode_ppm(const ImageBuffer& image);

// Exact projection of a single point: camera frame via Tr then R0, then
// homogeneous projection by P2. Valid only with depth > 0.
Projection project_point_exact(const Eigen::Vector3d& point, const Calibration& calib);

// Rounded pixel per point, or nullopt when the point is behind the camera
// (depth <= 0) or falls outside [0, width) x [0, height). Rounding is
// nearest-integer with ties toward +inf.
std::vector<std::optional<std::pair<int, int>>>
project_points(const PointCloud& cloud, const Calibration& calib, int width, int height);

// Keeps the points that project into the image and samples the nearest
// pixel for each; survivor order matches the input order.
ColoredPointCloud harvest_colors(const PointCloud& cloud, const ImageBuffer& image,
                                 const Calibration& calib);

} // namespace pointcolor
