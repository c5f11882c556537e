#include "pointcolor/geometry_io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <sstream>

namespace pointcolor {

namespace {

static_assert(std::endian::native == std::endian::little,
              "file formats assume a little-endian host");

float read_f32(const std::uint8_t* p) {
    float v;
    std::memcpy(&v, p, sizeof(v));
    return v;
}

void append_f32(std::vector<std::uint8_t>& out, float v) {
    std::uint8_t buf[4];
    std::memcpy(buf, &v, sizeof(v));
    out.insert(out.end(), buf, buf + 4);
}

} // namespace

PointCloud parse_point_bin(std::span<const std::uint8_t> bytes) {
    if (bytes.size() % 16 != 0) {
        throw io_error("malformed point file: length " + std::to_string(bytes.size()) +
                       " is not a multiple of 16");
    }
    const std::size_t n = bytes.size() / 16;
    PointCloud cloud;
    cloud.points.reserve(n);
    cloud.intensity.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint8_t* rec = bytes.data() + 16 * i;
        const float x = read_f32(rec);
        const float y = read_f32(rec + 4);
        const float z = read_f32(rec + 8);
        const float intensity = read_f32(rec + 12);
        if (!std::isfinite(x) || !std::isfinite(y) || !std::isfinite(z) ||
            !std::isfinite(intensity)) {
            throw numeric_error("malformed point record " + std::to_string(i) +
                                ": non-finite value");
        }
        cloud.points.emplace_back(x, y, z);
        cloud.intensity.push_back(intensity);
    }
    return cloud;
}

std::vector<std::uint8_t> encode_point_bin(const PointCloud& cloud) {
    std::vector<std::uint8_t> bytes;
    bytes.reserve(16 * cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        append_f32(bytes, static_cast<float>(cloud.points[i].x()));
        append_f32(bytes, static_cast<float>(cloud.points[i].y()));
        append_f32(bytes, static_cast<float>(cloud.points[i].z()));
        append_f32(bytes, cloud.intensity.empty() ? 0.0f : cloud.intensity[i]);
    }
    return bytes;
}

namespace {

std::vector<double> parse_key_values(const std::string& text, const std::string& key,
                                     std::size_t expected) {
    std::istringstream lines(text);
    std::string line;
    while (std::getline(lines, line)) {
        const std::string prefix = key + ":";
        if (line.rfind(prefix, 0) != 0) {
            continue;
        }
        std::istringstream fields(line.substr(prefix.size()));
        std::vector<double> values;
        double v;
        while (fields >> v) {
            values.push_back(v);
        }
        if (values.size() != expected) {
            throw io_error("calib key " + key + ": expected " + std::to_string(expected) +
                           " values, got " + std::to_string(values.size()));
        }
        return values;
    }
    throw io_error("calib key " + key + " missing");
}

} // namespace

Calibration parse_calib(const std::string& text) {
    Calibration calib;
    const auto p2 = parse_key_values(text, "P2", 12);
    const auto r0 = parse_key_values(text, "R0_rect", 9);
    const auto tr = parse_key_values(text, "Tr_velo_to_cam", 12);
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 4; ++c) {
            calib.P2(r, c) = p2[4 * r + c];
            calib.Tr_velo_to_cam(r, c) = tr[4 * r + c];
        }
        for (int c = 0; c < 3; ++c) {
            calib.R0_rect(r, c) = r0[3 * r + c];
        }
    }
    if (!calib.P2.allFinite() || !calib.R0_rect.allFinite() ||
        !calib.Tr_velo_to_cam.allFinite()) {
        throw numeric_error("calib contains non-finite values");
    }
    const Eigen::Matrix3d gram = calib.R0_rect.transpose() * calib.R0_rect;
    if ((gram - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > 1e-3) {
        throw io_error("calib key R0_rect is not orthonormal");
    }
    return calib;
}

ImageBuffer parse_ppm(std::span<const std::uint8_t> bytes) {
    std::size_t pos = 0;
    auto at_end = [&] { return pos >= bytes.size(); };
    auto skip_space_and_comments = [&] {
        while (!at_end()) {
            const char c = static_cast<char>(bytes[pos]);
            if (c == '#') {
                while (!at_end() && bytes[pos] != '\n') {
                    ++pos;
                }
            } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
                ++pos;
            } else {
                break;
            }
        }
    };
    auto read_int = [&]() -> long {
        skip_space_and_comments();
        if (at_end() || !std::isdigit(bytes[pos])) {
            throw io_error("ppm: malformed header integer");
        }
        long value = 0;
        while (!at_end() && std::isdigit(bytes[pos])) {
            value = value * 10 + (bytes[pos] - '0');
            ++pos;
        }
        return value;
    };

    if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '6') {
        throw io_error("ppm: wrong magic, expected P6");
    }
    pos = 2;
    const long width = read_int();
    const long height = read_int();
    const long maxval = read_int();
    if (width <= 0 || height <= 0) {
        throw io_error("ppm: non-positive dimensions");
    }
    if (maxval != 255) {
        throw io_error("ppm: unsupported maxval " + std::to_string(maxval));
    }
    if (at_end()) {
        throw io_error("ppm: truncated header");
    }
    ++pos; // single whitespace byte after maxval
    const std::size_t payload = static_cast<std::size_t>(width) * height * 3;
    if (bytes.size() - pos < payload) {
        throw io_error("ppm: truncated payload");
    }
    ImageBuffer image;
    image.width = static_cast<int>(width);
    image.height = static_cast<int>(height);
    image.pixels.assign(bytes.begin() + pos, bytes.begin() + pos + payload);
    return image;
}

std::vector<std::uint8_t> encode_ppm(const ImageBuffer& image) {
    std::string header = "P6\n" + std::to_string(image.width) + " " +
                         std::to_string(image.height) + "\n255\n";
    std::vector<std::uint8_t> bytes(header.begin(), header.end());
    bytes.insert(bytes.end(), image.pixels.begin(), image.pixels.end());
    return bytes;
}

Projection project_point_exact(const Eigen::Vector3d& point, const Calibration& calib) {
    const Eigen::Vector3d cam =
        calib.R0_rect * (calib.Tr_velo_to_cam * point.homogeneous());
    const Eigen::Vector3d uvw = calib.P2 * cam.homogeneous();
    Projection proj;
    proj.depth = uvw.z();
    if (proj.depth != 0.0) {
        proj.u = uvw.x() / proj.depth;
        proj.v = uvw.y() / proj.depth;
    }
    return proj;
}

std::vector<std::optional<std::pair<int, int>>>
project_points(const PointCloud& cloud, const Calibration& calib, int width, int height) {
    std::vector<std::optional<std::pair<int, int>>> result(cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const Projection proj = project_point_exact(cloud.points[i], calib);
        if (proj.depth <= 0.0) {
            continue; // behind (or on) the camera plane
        }
        // Nearest integer, ties toward +inf.
        const int u = static_cast<int>(std::floor(proj.u + 0.5));
        const int v = static_cast<int>(std::floor(proj.v + 0.5));
        if (u >= 0 && u < width && v >= 0 && v < height) {
            result[i] = std::make_pair(u, v);
        }
    }
    return result;
}

ColoredPointCloud harvest_colors(const PointCloud& cloud, const ImageBuffer& image,
                                 const Calibration& calib) {
    const auto pixels = project_points(cloud, calib, image.width, image.height);
    ColoredPointCloud result;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        if (!pixels[i]) {
            continue;
        }
        result.cloud.points.push_back(cloud.points[i]);
        if (!cloud.intensity.empty()) {
            result.cloud.intensity.push_back(cloud.intensity[i]);
        }
        result.colors.push_back(image.pixel_at(pixels[i]->first, pixels[i]->second));
    }
    return result;
}

} // namespace pointcolor
