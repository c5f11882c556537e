#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "pointcolor/dataset.hpp"
#include "pointcolor/geometry_io.hpp"
#include "pointcolor/palette.hpp"
#include "pointcolor/pipeline.hpp"
#include "pointcolor/tensor_io.hpp"
#include "test_support.hpp"

using namespace pointcolor;

namespace {

struct RunResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

RunResult run_cli(const std::string& args, const std::filesystem::path& dir) {
    const std::filesystem::path out = dir / "stdout.txt";
    const std::filesystem::path err = dir / "stderr.txt";
    const std::string command = std::string(POINTCOLOR_CLI_PATH) + " " + args + " > " +
                                out.string() + " 2> " + err.string();
    const int status = std::system(command.c_str());
    RunResult result;
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    result.out = read_file_text(out);
    result.err = read_file_text(err);
    return result;
}

// A three-frame KITTI-format fixture: point bins, calib texts, PPM images.
void write_kitti_fixture(const std::filesystem::path& root) {
    const auto data = root / "velodyne";
    const auto calib = root / "calib";
    const auto images = root / "image";
    std::filesystem::create_directories(data);
    std::filesystem::create_directories(calib);
    std::filesystem::create_directories(images);

    const std::string calib_text =
        "P2: 50 0 16 0 0 50 12 0 0 0 1 0\n"
        "R0_rect: 1 0 0 0 1 0 0 0 1\n"
        "Tr_velo_to_cam: 0 -1 0 0 0 0 -1 0 1 0 0 0\n";

    CounterRng rng(3001);
    for (int f = 0; f < 3; ++f) {
        std::ostringstream name;
        name.width(6);
        name.fill('0');
        name << f;

        PointCloud cloud;
        for (int i = 0; i < 200; ++i) {
            // x forward so most points land in front of the camera.
            cloud.points.emplace_back(2.0 + 8.0 * rng.next_double(),
                                      (2.0 * rng.next_double() - 1.0) * 2.0,
                                      (2.0 * rng.next_double() - 1.0) * 1.0);
            cloud.intensity.push_back(static_cast<float>(rng.next_double()));
        }
        write_file_atomic(data / (name.str() + ".bin"), encode_point_bin(cloud));
        write_file_atomic(calib / (name.str() + ".txt"), calib_text);

        ImageBuffer image;
        image.width = 32;
        image.height = 24;
        for (int p = 0; p < 32 * 24 * 3; ++p) {
            image.pixels.push_back(static_cast<std::uint8_t>(rng.next_index(256)));
        }
        write_file_atomic(images / (name.str() + ".ppm"), encode_ppm(image));
    }
}

const std::string kTinySceneSpec =
    "n_boxes = 2\n"
    "points_per_box = 30\n"
    "ground_points = 90\n"
    "palette_size = 4\n"
    "object_colors = 3\n"
    "color_mode = fixed\n"
    "noise_sigma = 0.01\n"
    "rng_seed = 11\n";

} // namespace

TEST_CASE("prepare writes shards, a manifest, and is bit-stable on re-run") {
    testsupport::TempDir dir("cli_prepare");
    write_kitti_fixture(dir.path());
    const std::string dirs = " --data " + (dir.path() / "velodyne").string() + " --calib " +
                             (dir.path() / "calib").string() + " --images " +
                             (dir.path() / "image").string();

    const RunResult first =
        run_cli("prepare" + dirs + " --out " + (dir.path() / "out").string(), dir.path());
    REQUIRE(first.exit_code == 0);
    CHECK(std::filesystem::exists(dir.path() / "out" / "000000.pcf"));
    CHECK(std::filesystem::exists(dir.path() / "out" / "manifest.txt"));

    const auto shard = read_file_bytes(dir.path() / "out" / "000000.pcf");
    const auto manifest = read_file_text(dir.path() / "out" / "manifest.txt");

    const RunResult second =
        run_cli("prepare" + dirs + " --out " + (dir.path() / "out").string(), dir.path());
    REQUIRE(second.exit_code == 0);
    CHECK(read_file_bytes(dir.path() / "out" / "000000.pcf") == shard);
    CHECK(read_file_text(dir.path() / "out" / "manifest.txt") == manifest);

    // The shard colors must match the library's own harvest (ingestion
    // parity between CLI and library paths).
    const PointSample sample = load_colored_frame(dir.path() / "out" / "000000.pcf");
    const PointCloud cloud =
        parse_point_bin(read_file_bytes(dir.path() / "velodyne" / "000000.bin"));
    const Calibration calib =
        parse_calib(read_file_text(dir.path() / "calib" / "000000.txt"));
    const ImageBuffer image = parse_ppm(read_file_bytes(dir.path() / "image" / "000000.ppm"));
    const ColoredPointCloud expected = harvest_colors(cloud, image, calib);
    REQUIRE(sample.size() == expected.cloud.size());
    for (std::size_t i = 0; i < sample.size(); ++i) {
        // Shard coordinates are float32; harvested are float32-sourced.
        CHECK(testsupport::exact_eq(sample.points[i].cast<float>().eval(),
                                    expected.cloud.points[i].cast<float>().eval()));
    }
}

TEST_CASE("prepare skips incomplete frames with a warning and fails on empty input") {
    testsupport::TempDir dir("cli_prepare_skip");
    write_kitti_fixture(dir.path());
    std::filesystem::remove(dir.path() / "calib" / "000001.txt");
    const std::string dirs = " --data " + (dir.path() / "velodyne").string() + " --calib " +
                             (dir.path() / "calib").string() + " --images " +
                             (dir.path() / "image").string();
    const RunResult result =
        run_cli("prepare" + dirs + " --out " + (dir.path() / "out").string(), dir.path());
    REQUIRE(result.exit_code == 0);
    CHECK(result.err.find("000001") != std::string::npos);
    CHECK_FALSE(std::filesystem::exists(dir.path() / "out" / "000001.pcf"));

    testsupport::TempDir empty("cli_prepare_empty");
    std::filesystem::create_directories(empty.path() / "none");
    const RunResult failed = run_cli("prepare --data " + (empty.path() / "none").string() +
                                         " --calib " + (empty.path() / "none").string() +
                                         " --images " + (empty.path() / "none").string() +
                                         " --out " + (empty.path() / "out").string(),
                                     empty.path());
    CHECK(failed.exit_code == 2);
}

TEST_CASE("fit-palette fits and writes a loadable palette") {
    testsupport::TempDir dir("cli_palette");
    write_kitti_fixture(dir.path());
    const RunResult result =
        run_cli("fit-palette --images " + (dir.path() / "image").string() + " --out " +
                    (dir.path() / "pal.bin").string() + " --k 8 --pixels-per-image 200 --seed 4",
                dir.path());
    REQUIRE(result.exit_code == 0);
    const ColorPalette palette = load_palette(dir.path() / "pal.bin");
    CHECK(palette.k() == 8);
}

TEST_CASE("the synth / pretrain / eval / colorize / export-features pipeline holds together") {
    testsupport::TempDir dir("cli_pipeline");
    write_file_atomic(dir.path() / "scene.spec", kTinySceneSpec);

    const RunResult synth = run_cli("synth --spec " + (dir.path() / "scene.spec").string() +
                                        " --out " + (dir.path() / "scenes").string() +
                                        " --count 4",
                                    dir.path());
    REQUIRE(synth.exit_code == 0);
    CHECK(std::filesystem::exists(dir.path() / "scenes" / "000003.bin"));
    CHECK(std::filesystem::exists(dir.path() / "scenes" / "000003.lbl"));
    CHECK(std::filesystem::exists(dir.path() / "scenes" / "palette.pal"));

    const std::string common = " --data " + (dir.path() / "scenes").string() + " --palette " +
                               (dir.path() / "scenes" / "palette.pal").string();
    const RunResult pretrain = run_cli(
        "pretrain" + common + " --out " + (dir.path() / "model.ckpt").string() +
            " --epochs 3 --batch 2 --lr 0.01 --seed-ratio 0.2 --loss bs --seed 7 "
            "--feature-dim 16 --target-points 96 --metrics-log " +
            (dir.path() / "metrics.tsv").string(),
        dir.path());
    REQUIRE(pretrain.exit_code == 0);
    CHECK(std::filesystem::exists(dir.path() / "model.ckpt"));

    // Metrics log: one tab-separated line per epoch.
    std::istringstream log(read_file_text(dir.path() / "metrics.tsv"));
    std::string line;
    int lines = 0;
    while (std::getline(log, line)) {
        CHECK(std::count(line.begin(), line.end(), '\t') == 4);
        ++lines;
    }
    CHECK(lines == 3);

    const RunResult eval = run_cli("eval" + common + " --checkpoint " +
                                       (dir.path() / "model.ckpt").string() +
                                       " --seed-ratio 0.2 --seed 3",
                                   dir.path());
    REQUIRE(eval.exit_code == 0);
    CHECK(eval.out.find("acc_unknown") != std::string::npos);

    // Zero-seed colorize produces one PLY row per point.
    const RunResult colorize = run_cli(
        "colorize --checkpoint " + (dir.path() / "model.ckpt").string() + " --frame " +
            (dir.path() / "scenes" / "000000.bin").string() + " --palette " +
            (dir.path() / "scenes" / "palette.pal").string() + " --out " +
            (dir.path() / "out.ply").string(),
        dir.path());
    REQUIRE(colorize.exit_code == 0);
    const std::string ply = read_file_text(dir.path() / "out.ply");
    const PointSample scene = load_frame_any(dir.path() / "scenes" / "000000.bin");
    CHECK(ply.find("element vertex " + std::to_string(scene.size())) != std::string::npos);

    // Manual seeds steer the named points.
    write_file_atomic(dir.path() / "seeds.txt", std::string("0 2\n5 3\n"));
    const RunResult seeded = run_cli(
        "colorize --checkpoint " + (dir.path() / "model.ckpt").string() + " --frame " +
            (dir.path() / "scenes" / "000000.bin").string() + " --palette " +
            (dir.path() / "scenes" / "palette.pal").string() + " --seeds " +
            (dir.path() / "seeds.txt").string() + " --out " + (dir.path() / "seeded.ply").string(),
        dir.path());
    REQUIRE(seeded.exit_code == 0);

    // A malformed seed line fails with the line number and leaves no file.
    write_file_atomic(dir.path() / "bad_seeds.txt", std::string("0 2\n5 99\n"));
    const RunResult bad = run_cli(
        "colorize --checkpoint " + (dir.path() / "model.ckpt").string() + " --frame " +
            (dir.path() / "scenes" / "000000.bin").string() + " --palette " +
            (dir.path() / "scenes" / "palette.pal").string() + " --seeds " +
            (dir.path() / "bad_seeds.txt").string() + " --out " + (dir.path() / "bad.ply").string(),
        dir.path());
    CHECK(bad.exit_code == 2);
    CHECK(bad.err.find("line 2") != std::string::npos);
    CHECK_FALSE(std::filesystem::exists(dir.path() / "bad.ply"));

    const RunResult features = run_cli(
        "export-features --checkpoint " + (dir.path() / "model.ckpt").string() + " --frame " +
            (dir.path() / "scenes" / "000000.bin").string() + " --out " +
            (dir.path() / "feat.tensor").string(),
        dir.path());
    REQUIRE(features.exit_code == 0);
    const Eigen::MatrixXd exported = load_tensor(dir.path() / "feat.tensor");
    CHECK(exported.rows() == static_cast<Eigen::Index>(scene.size()));
    CHECK(exported.cols() == 3 + 16);
}

TEST_CASE("usage errors exit with code 1, data errors with 2") {
    testsupport::TempDir dir("cli_codes");
    CHECK(run_cli("", dir.path()).exit_code == 1);
    CHECK(run_cli("no-such-command", dir.path()).exit_code == 1);
    CHECK(run_cli("pretrain --data x", dir.path()).exit_code == 1); // missing required flags
    CHECK(run_cli("eval --data /nonexistent --palette /nonexistent --checkpoint /nonexistent",
                  dir.path())
              .exit_code == 2);
}
