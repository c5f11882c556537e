#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "pointcolor/geometry_io.hpp"
#include "test_support.hpp"

using namespace pointcolor;
using testsupport::f32le;

TEST_CASE("parse_point_bin decodes one record") {
    const auto bytes = f32le({1.0f, 2.0f, 3.0f, 0.5f});
    const PointCloud cloud = parse_point_bin(bytes);
    REQUIRE(cloud.size() == 1);
    CHECK(testsupport::exact_eq(cloud.points[0], Eigen::Vector3d(1.0, 2.0, 3.0)));
    CHECK(cloud.intensity[0] == 0.5f);
}

TEST_CASE("parse_point_bin handles the empty file") {
    const PointCloud cloud = parse_point_bin(std::span<const std::uint8_t>{});
    CHECK(cloud.size() == 0);
}

TEST_CASE("parse_point_bin recovers a hand-assembled three-point fixture bit-exactly") {
    // Bytes written record by record, independent of encode_point_bin.
    const auto bytes = f32le({-1.5f, 0.25f, 7.0f, 0.0f,    //
                              12.125f, -3.5f, 0.0f, 0.9f,  //
                              0.0f, 100.0f, -42.75f, 1.0f});
    const PointCloud cloud = parse_point_bin(bytes);
    REQUIRE(cloud.size() == 3);
    CHECK(testsupport::exact_eq(cloud.points[0], Eigen::Vector3d(-1.5, 0.25, 7.0)));
    CHECK(testsupport::exact_eq(cloud.points[1], Eigen::Vector3d(12.125, -3.5, 0.0)));
    CHECK(testsupport::exact_eq(cloud.points[2], Eigen::Vector3d(0.0, 100.0, -42.75)));
    CHECK(cloud.intensity[2] == 1.0f);
}

TEST_CASE("parse_point_bin rejects misaligned and non-finite input") {
    const std::vector<std::uint8_t> odd(17, 0);
    CHECK_THROWS_AS((void)parse_point_bin(odd), io_error);

    auto bad = f32le({1.0f, 2.0f, std::numeric_limits<float>::quiet_NaN(), 0.0f});
    CHECK_THROWS_WITH_AS((void)parse_point_bin(bad), doctest::Contains("record 0"),
                         numeric_error);
}

TEST_CASE("parse_point_bin inverts encode_point_bin on random float clouds") {
    CounterRng rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        PointCloud cloud;
        const std::size_t n = rng.next_index(40);
        for (std::size_t i = 0; i < n; ++i) {
            cloud.points.emplace_back(static_cast<float>(rng.next_normal() * 20.0),
                                      static_cast<float>(rng.next_normal() * 20.0),
                                      static_cast<float>(rng.next_normal() * 5.0));
            cloud.intensity.push_back(static_cast<float>(rng.next_double()));
        }
        const PointCloud back = parse_point_bin(encode_point_bin(cloud));
        REQUIRE(back.size() == cloud.size());
        for (std::size_t i = 0; i < n; ++i) {
            CHECK(testsupport::exact_eq(back.points[i], cloud.points[i]));
            CHECK(back.intensity[i] == cloud.intensity[i]);
        }
    }
}

namespace {
const char* kIdentityCalib =
    "P2: 1 0 0 0 0 1 0 0 0 0 1 0\n"
    "R0_rect: 1 0 0 0 1 0 0 0 1\n"
    "Tr_velo_to_cam: 1 0 0 0 0 1 0 0 0 0 1 0\n";
} // namespace

TEST_CASE("parse_calib reads the identity fixture") {
    const Calibration calib = parse_calib(kIdentityCalib);
    CHECK(testsupport::exact_eq(
        calib.P2,
        (Eigen::Matrix<double, 3, 4>() << 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0).finished()));
    CHECK(testsupport::exact_eq(calib.R0_rect, Eigen::Matrix3d::Identity()));
}

TEST_CASE("parse_calib is insensitive to line order and ignores extra keys") {
    const std::string permuted =
        "Tr_velo_to_cam: 1 0 0 0 0 1 0 0 0 0 1 0\n"
        "P0: 9 9 9 9 9 9 9 9 9 9 9 9\n"
        "R0_rect: 1 0 0 0 1 0 0 0 1\n"
        "P2: 1 0 0 0 0 1 0 0 0 0 1 0\n";
    const Calibration a = parse_calib(kIdentityCalib);
    const Calibration b = parse_calib(permuted);
    CHECK(testsupport::exact_eq(a.P2, b.P2));
    CHECK(testsupport::exact_eq(a.R0_rect, b.R0_rect));
    CHECK(testsupport::exact_eq(a.Tr_velo_to_cam, b.Tr_velo_to_cam));
}

TEST_CASE("parse_calib matches a hand-parsed KITTI-style fixture") {
    // Values transcribed by hand from the fixture text below.
    const std::string text =
        "P2: 7.215377e+02 0.000000e+00 6.095593e+02 4.485728e+01 "
        "0.000000e+00 7.215377e+02 1.728540e+02 2.163791e-01 "
        "0.000000e+00 0.000000e+00 1.000000e+00 2.745884e-03\n"
        "R0_rect: 9.999239e-01 9.837760e-03 -7.445048e-03 "
        "-9.869795e-03 9.999421e-01 -4.278459e-03 "
        "7.402527e-03 4.351614e-03 9.999631e-01\n"
        "Tr_velo_to_cam: 7.533745e-03 -9.999714e-01 -6.166020e-04 -4.069766e-03 "
        "1.480249e-02 7.280733e-04 -9.998902e-01 -7.631618e-02 "
        "9.998621e-01 7.523790e-03 1.480755e-02 -2.717806e-01\n";
    const Calibration calib = parse_calib(text);
    CHECK(calib.P2(0, 0) == doctest::Approx(721.5377).epsilon(1e-9));
    CHECK(calib.P2(0, 2) == doctest::Approx(609.5593).epsilon(1e-9));
    CHECK(calib.P2(2, 3) == doctest::Approx(2.745884e-03).epsilon(1e-9));
    CHECK(calib.R0_rect(1, 0) == doctest::Approx(-9.869795e-03).epsilon(1e-9));
    CHECK(calib.Tr_velo_to_cam(0, 1) == doctest::Approx(-9.999714e-01).epsilon(1e-9));
    CHECK(calib.Tr_velo_to_cam(2, 3) == doctest::Approx(-2.717806e-01).epsilon(1e-9));
}

TEST_CASE("parse_calib names the offending key") {
    CHECK_THROWS_WITH_AS((void)parse_calib("P2: 1 0 0 0 0 1 0 0 0 0 1 0\n"
                                           "R0_rect: 1 0 0 0 1 0 0 0 1\n"),
                         doctest::Contains("Tr_velo_to_cam"), io_error);
    CHECK_THROWS_WITH_AS((void)parse_calib("P2: 1 2 3\n"
                                           "R0_rect: 1 0 0 0 1 0 0 0 1\n"
                                           "Tr_velo_to_cam: 1 0 0 0 0 1 0 0 0 0 1 0\n"),
                         doctest::Contains("P2"), io_error);
}

TEST_CASE("parse_ppm reads a 1x1 red image") {
    const std::string header = "P6\n1 1\n255\n";
    std::vector<std::uint8_t> bytes(header.begin(), header.end());
    bytes.insert(bytes.end(), {255, 0, 0});
    const ImageBuffer image = parse_ppm(bytes);
    CHECK(image.width == 1);
    CHECK(image.height == 1);
    CHECK(image.pixel_at(0, 0) == Color{1.0, 0.0, 0.0});
}

TEST_CASE("parse_ppm keeps row-major pixel order on a 2x2 fixture") {
    const std::string header = "P6\n# comment line\n2 2\n255\n";
    std::vector<std::uint8_t> bytes(header.begin(), header.end());
    // (r g b) per pixel: TL, TR, BL, BR.
    bytes.insert(bytes.end(), {10, 11, 12, 20, 21, 22, 30, 31, 32, 40, 41, 42});
    const ImageBuffer image = parse_ppm(bytes);
    REQUIRE(image.pixels.size() == 12);
    CHECK(image.pixel_at(0, 0)[0] == doctest::Approx(10.0 / 255.0));
    CHECK(image.pixel_at(1, 0)[0] == doctest::Approx(20.0 / 255.0));
    CHECK(image.pixel_at(0, 1)[0] == doctest::Approx(30.0 / 255.0));
    CHECK(image.pixel_at(1, 1)[0] == doctest::Approx(40.0 / 255.0));
}

TEST_CASE("parse_ppm rejects malformed input") {
    const std::string truncated_header = "P6\n2 2\n255\n";
    std::vector<std::uint8_t> truncated(truncated_header.begin(), truncated_header.end());
    truncated.insert(truncated.end(), {1, 2, 3});
    CHECK_THROWS_AS((void)parse_ppm(truncated), io_error);

    const std::string p5 = "P5\n1 1\n255\nx";
    CHECK_THROWS_AS(
        (void)parse_ppm(std::span(reinterpret_cast<const std::uint8_t*>(p5.data()), p5.size())),
        io_error);

    const std::string maxval = "P6\n1 1\n65535\n";
    std::vector<std::uint8_t> deep(maxval.begin(), maxval.end());
    deep.insert(deep.end(), {0, 0, 0, 0, 0, 0});
    CHECK_THROWS_AS((void)parse_ppm(deep), io_error);
}

TEST_CASE("project_points follows the pinhole identity example") {
    PointCloud cloud;
    cloud.points.emplace_back(0.0, 0.0, 5.0);

    Calibration calib = parse_calib(kIdentityCalib);
    auto projected = project_points(cloud, calib, 100, 100);
    REQUIRE(projected[0].has_value());
    CHECK(projected[0]->first == 0);
    CHECK(projected[0]->second == 0);

    calib.P2(0, 2) = 50.0; // principal point shift
    calib.P2(1, 2) = 50.0;
    projected = project_points(cloud, calib, 100, 100);
    REQUIRE(projected[0].has_value());
    CHECK(projected[0]->first == 50);
    CHECK(projected[0]->second == 50);
}

TEST_CASE("project_points drops points at or behind the camera") {
    PointCloud cloud;
    cloud.points.emplace_back(0.0, 0.0, -5.0);
    cloud.points.emplace_back(0.0, 0.0, 0.0);
    const Calibration calib = parse_calib(kIdentityCalib);
    const auto projected = project_points(cloud, calib, 100, 100);
    CHECK_FALSE(projected[0].has_value());
    CHECK_FALSE(projected[1].has_value());
}

TEST_CASE("project_point_exact matches a dense homogeneous-chain oracle") {
    CounterRng rng(42);
    const Calibration calib = testsupport::random_calibration(rng);

    // Independent route: one 4x4 homogeneous chain evaluated explicitly.
    Eigen::Matrix4d tr = Eigen::Matrix4d::Identity();
    tr.topRows<3>() = calib.Tr_velo_to_cam;
    Eigen::Matrix4d r0 = Eigen::Matrix4d::Identity();
    r0.topLeftCorner<3, 3>() = calib.R0_rect;
    const Eigen::Matrix<double, 3, 4> chain = calib.P2 * r0 * tr;

    for (int i = 0; i < 5; ++i) {
        const Eigen::Vector3d point(rng.next_normal() * 10.0, rng.next_normal() * 10.0,
                                    rng.next_normal() * 10.0);
        const Eigen::Vector3d uvw = chain * point.homogeneous();
        const Projection proj = project_point_exact(point, calib);
        CHECK(proj.depth == doctest::Approx(uvw.z()).epsilon(1e-9));
        if (uvw.z() > 1e-6) {
            CHECK(proj.u == doctest::Approx(uvw.x() / uvw.z()).epsilon(1e-5));
            CHECK(proj.v == doctest::Approx(uvw.y() / uvw.z()).epsilon(1e-5));
        }
    }
}

TEST_CASE("projection is constant along the ray through the camera center") {
    CounterRng rng(99);
    for (int trial = 0; trial < 20; ++trial) {
        const Calibration calib = testsupport::random_calibration(rng);
        // Camera center C solves P2 [C;1] = 0 in rectified-camera coords.
        const Eigen::Matrix3d m = calib.P2.leftCols<3>();
        const Eigen::Vector3d center_cam = -m.inverse() * calib.P2.col(3);

        const Eigen::Vector3d point(5.0 + rng.next_double() * 10.0, rng.next_normal() * 3.0,
                                    rng.next_normal() * 2.0);
        // Rectified-camera coordinates of the point.
        const Eigen::Vector3d cam =
            calib.R0_rect * (calib.Tr_velo_to_cam * point.homogeneous());
        const Projection base = project_point_exact(point, calib);
        if (base.depth <= 0.1) {
            continue;
        }
        for (double t : {0.25, 0.5, 2.0, 4.0}) {
            const Eigen::Vector3d moved_cam = center_cam + t * (cam - center_cam);
            // Back to the LiDAR frame.
            const Eigen::Matrix3d rot = calib.Tr_velo_to_cam.leftCols<3>();
            const Eigen::Vector3d moved =
                rot.transpose() *
                (calib.R0_rect.transpose() * moved_cam - calib.Tr_velo_to_cam.col(3));
            const Projection proj = project_point_exact(moved, calib);
            if (proj.depth > 1e-6) {
                CHECK(proj.u == doctest::Approx(base.u).epsilon(1e-6));
                CHECK(proj.v == doctest::Approx(base.v).epsilon(1e-6));
            }
        }
    }
}

TEST_CASE("harvest_colors drops out-of-view points and keeps order") {
    const Calibration calib = parse_calib(kIdentityCalib);

    SUBCASE("all points behind the camera give an empty cloud") {
        PointCloud cloud;
        cloud.points.emplace_back(0.0, 0.0, -1.0);
        cloud.points.emplace_back(1.0, 1.0, -2.0);
        ImageBuffer image;
        image.width = image.height = 1;
        image.pixels = {255, 0, 0};
        const ColoredPointCloud colored = harvest_colors(cloud, image, calib);
        CHECK(colored.cloud.size() == 0);
    }

    SUBCASE("one point onto the red 1x1 image") {
        PointCloud cloud;
        cloud.points.emplace_back(0.0, 0.0, 3.0);
        ImageBuffer image;
        image.width = image.height = 1;
        image.pixels = {255, 0, 0};
        const ColoredPointCloud colored = harvest_colors(cloud, image, calib);
        REQUIRE(colored.cloud.size() == 1);
        CHECK(colored.colors[0] == Color{1.0, 0.0, 0.0});
    }
}

TEST_CASE("harvest_colors equals the project-then-index oracle on a synthetic frame") {
    CounterRng rng(2024);
    const Calibration calib = testsupport::random_calibration(rng);
    ImageBuffer image;
    image.width = 64;
    image.height = 48;
    image.pixels.resize(static_cast<std::size_t>(64) * 48 * 3);
    for (auto& p : image.pixels) {
        p = static_cast<std::uint8_t>(rng.next_index(256));
    }
    PointCloud cloud;
    for (int i = 0; i < 500; ++i) {
        cloud.points.emplace_back(rng.next_normal() * 8.0, rng.next_normal() * 8.0,
                                  rng.next_normal() * 8.0);
        cloud.intensity.push_back(static_cast<float>(rng.next_double()));
    }

    const ColoredPointCloud colored = harvest_colors(cloud, image, calib);
    CHECK(colored.cloud.size() <= cloud.size());

    // Oracle: project independently and index pixels by hand.
    const auto projected = project_points(cloud, calib, image.width, image.height);
    std::size_t survivor = 0;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        if (!projected[i]) {
            continue;
        }
        REQUIRE(survivor < colored.cloud.size());
        CHECK(testsupport::exact_eq(colored.cloud.points[survivor], cloud.points[i]));
        const auto [u, v] = *projected[i];
        const std::size_t base = 3 * (static_cast<std::size_t>(v) * image.width + u);
        CHECK(colored.colors[survivor][0] == image.pixels[base] / 255.0);
        CHECK(colored.colors[survivor][1] == image.pixels[base + 1] / 255.0);
        CHECK(colored.colors[survivor][2] == image.pixels[base + 2] / 255.0);
        for (int ch = 0; ch < 3; ++ch) {
            CHECK(colored.colors[survivor][ch] >= 0.0);
            CHECK(colored.colors[survivor][ch] <= 1.0);
        }
        ++survivor;
    }
    CHECK(survivor == colored.cloud.size());
}
