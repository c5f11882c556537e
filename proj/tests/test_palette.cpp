#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "pointcolor/palette.hpp"
#include "pointcolor/rng.hpp"
#include "pointcolor/tensor_io.hpp"
#include "test_support.hpp"

using namespace pointcolor;

namespace {

ImageBuffer solid_image(int width, int height, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    ImageBuffer image;
    image.width = width;
    image.height = height;
    image.pixels.reserve(static_cast<std::size_t>(width) * height * 3);
    for (int i = 0; i < width * height; ++i) {
        image.pixels.push_back(r);
        image.pixels.push_back(g);
        image.pixels.push_back(b);
    }
    return image;
}

// Smooth color gradient with enough distinct values to reward a larger
// palette.
ImageBuffer gradient_image(int width, int height) {
    ImageBuffer image;
    image.width = width;
    image.height = height;
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            image.pixels.push_back(static_cast<std::uint8_t>(255 * x / (width - 1)));
            image.pixels.push_back(static_cast<std::uint8_t>(255 * y / (height - 1)));
            image.pixels.push_back(
                static_cast<std::uint8_t>(255 * (x + y) / (width + height - 2)));
        }
    }
    return image;
}

// Exhaustive 2-partition oracle: the best achievable 2-means inertia,
// found by trying every split of the point set.
double best_two_partition_inertia(const std::vector<Color>& pixels) {
    const std::size_t n = pixels.size();
    double best = std::numeric_limits<double>::infinity();
    for (std::uint32_t mask = 1; mask < (1u << n) - 1; ++mask) {
        Color sum_a{0, 0, 0}, sum_b{0, 0, 0};
        int count_a = 0, count_b = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (mask & (1u << i)) {
                for (int ch = 0; ch < 3; ++ch) sum_a[ch] += pixels[i][ch];
                ++count_a;
            } else {
                for (int ch = 0; ch < 3; ++ch) sum_b[ch] += pixels[i][ch];
                ++count_b;
            }
        }
        double inertia = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const Color& sum = (mask & (1u << i)) ? sum_a : sum_b;
            const int count = (mask & (1u << i)) ? count_a : count_b;
            for (int ch = 0; ch < 3; ++ch) {
                const double d = pixels[i][ch] - sum[ch] / count;
                inertia += d * d;
            }
        }
        best = std::min(best, inertia);
    }
    return best;
}

double mean_channel_error(const ColorPalette& palette, const std::vector<Color>& pixels) {
    const std::vector<int> labels = assign_labels(palette, pixels);
    const std::vector<Color> back = reconstruct_colors(palette, labels);
    double total = 0.0;
    for (std::size_t i = 0; i < pixels.size(); ++i) {
        for (int ch = 0; ch < 3; ++ch) {
            total += std::abs(pixels[i][ch] - back[i][ch]);
        }
    }
    return total / (3.0 * static_cast<double>(pixels.size()));
}

std::vector<Color> image_pixels(const ImageBuffer& image) {
    std::vector<Color> pixels;
    for (int y = 0; y < image.height; ++y) {
        for (int x = 0; x < image.width; ++x) {
            pixels.push_back(image.pixel_at(x, y));
        }
    }
    return pixels;
}

} // namespace

TEST_CASE("sample_training_pixels draws the documented counts") {
    std::vector<ImageBuffer> images = {gradient_image(16, 16), solid_image(4, 4, 1, 2, 3),
                                       gradient_image(8, 8)};
    const auto pixels = sample_training_pixels(images, 1000, 5);
    CHECK(pixels.size() == 3000);
}

TEST_CASE("sample_training_pixels repeats the single pixel of a 1x1 image") {
    std::vector<ImageBuffer> images = {solid_image(1, 1, 10, 20, 30)};
    const auto pixels = sample_training_pixels(images, 5, 0);
    REQUIRE(pixels.size() == 5);
    for (const Color& c : pixels) {
        CHECK(c == Color{10 / 255.0, 20 / 255.0, 30 / 255.0});
    }
}

TEST_CASE("sample_training_pixels is deterministic per seed") {
    std::vector<ImageBuffer> images = {gradient_image(32, 32)};
    const auto a = sample_training_pixels(images, 100, 77);
    const auto b = sample_training_pixels(images, 100, 77);
    CHECK(a == b);
    const auto c = sample_training_pixels(images, 100, 78);
    CHECK(a != c);
}

TEST_CASE("sample_training_pixels rejects an empty image list") {
    CHECK_THROWS_AS((void)sample_training_pixels({}, 10, 0), data_error);
}

TEST_CASE("fit_kmeans with K distinct pixels and K clusters hits zero inertia") {
    std::vector<Color> pixels = {{0.1, 0.1, 0.1}, {0.9, 0.1, 0.2}, {0.2, 0.8, 0.3},
                                 {0.4, 0.4, 0.9}};
    const KMeansResult result = fit_kmeans(pixels, 4, {});
    CHECK(result.inertia == doctest::Approx(0.0).epsilon(1e-12));
    std::vector<Color> sorted = result.palette.centroids;
    std::sort(sorted.begin(), sorted.end());
    std::sort(pixels.begin(), pixels.end());
    CHECK(sorted == pixels);
}

TEST_CASE("fit_kmeans with K=1 returns the component-wise mean") {
    CounterRng rng(3);
    std::vector<Color> pixels;
    Color mean{0, 0, 0};
    for (int i = 0; i < 57; ++i) {
        Color c{rng.next_double(), rng.next_double(), rng.next_double()};
        for (int ch = 0; ch < 3; ++ch) mean[ch] += c[ch];
        pixels.push_back(c);
    }
    for (int ch = 0; ch < 3; ++ch) mean[ch] /= 57.0;
    const KMeansResult result = fit_kmeans(pixels, 1, {});
    for (int ch = 0; ch < 3; ++ch) {
        CHECK(result.palette.centroids[0][ch] == doctest::Approx(mean[ch]).epsilon(1e-9));
    }
}

TEST_CASE("fit_kmeans K=2 matches the exhaustive-partition oracle on a separated set") {
    // 20 colors embedded on a line through RGB space, two groups.
    std::vector<Color> pixels;
    CounterRng rng(11);
    for (int i = 0; i < 10; ++i) {
        const double t = 0.05 + 0.01 * rng.next_double();
        pixels.push_back({t, t * 0.5, t * 0.25});
    }
    for (int i = 0; i < 10; ++i) {
        const double t = 0.85 + 0.01 * rng.next_double();
        pixels.push_back({t, t * 0.5, t * 0.25});
    }
    const KMeansResult result = fit_kmeans(pixels, 2, {});
    const double oracle = best_two_partition_inertia(pixels);
    CHECK(result.inertia == doctest::Approx(oracle).epsilon(1e-9));
}

TEST_CASE("fit_kmeans inertia never increases between iterations") {
    CounterRng rng(15);
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<Color> pixels;
        const int n = 50 + static_cast<int>(rng.next_index(200));
        for (int i = 0; i < n; ++i) {
            pixels.push_back({rng.next_double(), rng.next_double(), rng.next_double()});
        }
        KMeansOptions opts;
        opts.rng_seed = static_cast<std::uint64_t>(trial);
        const KMeansResult result = fit_kmeans(pixels, 8, opts);
        for (std::size_t t = 1; t < result.inertia_history.size(); ++t) {
            CHECK(result.inertia_history[t] <= result.inertia_history[t - 1] + 1e-9);
        }
    }
}

TEST_CASE("fit_kmeans rejects fewer pixels than clusters") {
    std::vector<Color> pixels = {{0.5, 0.5, 0.5}};
    CHECK_THROWS_AS((void)fit_kmeans(pixels, 2, {}), data_error);
}

TEST_CASE("fit_kmeans is deterministic per seed") {
    CounterRng rng(8);
    std::vector<Color> pixels;
    for (int i = 0; i < 300; ++i) {
        pixels.push_back({rng.next_double(), rng.next_double(), rng.next_double()});
    }
    KMeansOptions opts;
    opts.rng_seed = 123;
    const KMeansResult a = fit_kmeans(pixels, 16, opts);
    const KMeansResult b = fit_kmeans(pixels, 16, opts);
    CHECK(a.palette.centroids == b.palette.centroids);
}

TEST_CASE("assign_labels maps centroids to their own index") {
    ColorPalette palette;
    palette.centroids = {{0.1, 0.2, 0.3}, {0.7, 0.1, 0.1}, {0.3, 0.9, 0.5}};
    for (int j = 1; j <= 3; ++j) {
        CHECK(assign_label(palette, palette.centroids[j - 1]) == j);
    }
    const std::vector<int> all = assign_labels(palette, palette.centroids);
    CHECK(all == std::vector<int>{1, 2, 3});
}

TEST_CASE("assign_labels breaks ties toward the lowest index") {
    ColorPalette palette;
    palette.centroids = {{0.2, 0.2, 0.2}, {0.4, 0.4, 0.4}};
    const Color midpoint{0.3, 0.3, 0.3};
    CHECK(assign_label(palette, midpoint) == 1);
}

TEST_CASE("assign_labels equals a linear-scan oracle on random colors") {
    CounterRng rng(21);
    ColorPalette palette;
    for (int c = 0; c < 9; ++c) {
        palette.centroids.push_back({rng.next_double(), rng.next_double(), rng.next_double()});
    }
    for (int i = 0; i < 100; ++i) {
        const Color color{rng.next_double(), rng.next_double(), rng.next_double()};
        // Independent nearest-neighbor scan.
        int expected = 0;
        double best = std::numeric_limits<double>::infinity();
        for (int c = 0; c < palette.k(); ++c) {
            double d = 0.0;
            for (int ch = 0; ch < 3; ++ch) {
                const double diff = color[ch] - palette.centroids[c][ch];
                d += diff * diff;
            }
            if (d < best) {
                best = d;
                expected = c + 1;
            }
        }
        CHECK(assign_label(palette, color) == expected);
    }
}

TEST_CASE("assign/reconstruct reach a fixed point") {
    CounterRng rng(31);
    ColorPalette palette;
    for (int c = 0; c < 12; ++c) {
        palette.centroids.push_back({rng.next_double(), rng.next_double(), rng.next_double()});
    }
    std::vector<Color> colors;
    for (int i = 0; i < 200; ++i) {
        colors.push_back({rng.next_double(), rng.next_double(), rng.next_double()});
    }
    const std::vector<int> labels = assign_labels(palette, colors);
    const std::vector<Color> reconstructed = reconstruct_colors(palette, labels);
    CHECK(assign_labels(palette, reconstructed) == labels);
}

TEST_CASE("reconstruct_colors on an empty label list is empty") {
    ColorPalette palette;
    palette.centroids = {{0.5, 0.5, 0.5}};
    CHECK(reconstruct_colors(palette, std::vector<int>{}).empty());
}

TEST_CASE("a K=128 palette reconstructs the fixture image better than K=16") {
    const ImageBuffer image = gradient_image(64, 64);
    const std::vector<Color> pixels = image_pixels(image);
    KMeansOptions opts;
    opts.rng_seed = 5;
    const KMeansResult small = fit_kmeans(pixels, 16, opts);
    const KMeansResult large = fit_kmeans(pixels, 128, opts);
    CHECK(mean_channel_error(large.palette, pixels) < mean_channel_error(small.palette, pixels));
}

TEST_CASE("palette save/load round-trips bit-exactly") {
    testsupport::TempDir dir("palette");
    CounterRng rng(41);
    ColorPalette palette;
    for (int c = 0; c < 128; ++c) {
        // float32-representable channels, as every palette written by the
        // fitting pipeline has after a save.
        palette.centroids.push_back({f32_round(rng.next_double()),
                                     f32_round(rng.next_double()),
                                     f32_round(rng.next_double())});
    }
    const auto path = dir.path() / "palette.pal";
    save_palette(palette, path);

    // Documented size: 5-byte magic + version byte + u32 K + K * 3 * 4.
    CHECK(std::filesystem::file_size(path) == 10 + 128 * 12);

    const ColorPalette loaded = load_palette(path);
    CHECK(loaded.centroids == palette.centroids);

    save_palette(loaded, dir.path() / "palette2.pal");
    CHECK(read_file_bytes(path) == read_file_bytes(dir.path() / "palette2.pal"));
}

TEST_CASE("load_palette rejects corrupted input") {
    testsupport::TempDir dir("palette_bad");
    const auto path = dir.path() / "bad.pal";
    write_file_atomic(path, std::string("XXPALxxxxxxxxxxx"));
    CHECK_THROWS_AS((void)load_palette(path), io_error);

    ColorPalette palette;
    palette.centroids = {{0.5, 0.25, 0.125}};
    const auto good = dir.path() / "good.pal";
    save_palette(palette, good);
    auto bytes = read_file_bytes(good);
    bytes.resize(bytes.size() - 3); // truncate payload
    write_file_atomic(good, bytes);
    CHECK_THROWS_AS((void)load_palette(good), io_error);
}
