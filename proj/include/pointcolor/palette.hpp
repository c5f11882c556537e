#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "pointcolor/common.hpp"
#include "pointcolor/geometry_io.hpp"

namespace pointcolor {

// K quantized RGB centroids. Labels are 1-based: label j maps to
// centroids[j - 1].
struct ColorPalette {
    std::vector<Color> centroids;

    int k() const { return static_cast<int>(centroids.size()); }
};

struct KMeansOptions {
    int max_iters = 100;
    double tol = 1e-4;
    std::uint64_t rng_seed = 0;
};

struct KMeansResult {
    ColorPalette palette;
    std::vector<double> inertia_history; // one entry per Lloyd iteration
    double inertia = 0.0;                // final sum of squared distances
};

// Uniform pixel sampling with replacement, pixels_per_image draws per
// image, deterministic under rng_seed. Throws data_error on an empty
// image list.
std::vector<Color> sample_training_pixels(std::span<const ImageBuffer> images,
                                          int pixels_per_image, std::uint64_t rng_seed);

// Lloyd's algorithm with k-means++ initialization. Empty clusters are
// re-seeded to the point currently farthest from its assigned centroid.
// Throws data_error when there are fewer pixels than K.
KMeansResult fit_kmeans(std::span<const Color> pixels, int k, const KMeansOptions& opts = {});

// Index of the nearest centroid by squared Euclidean distance, 1-based;
// ties break toward the lowest index.
std::vector<int> assign_labels(const ColorPalette& palette, std::span<const Color> colors);
int assign_label(const ColorPalette& palette, const Color& color);

// Label j maps back to centroid j.
std::vector<Color> reconstruct_colors(const ColorPalette& palette, std::span<const int> labels);

// Binary palette file: magic "PCPAL", version byte, K as u32 LE, then
// K x 3 float32 LE. Round-trip is bit-exact.
void save_palette(const ColorPalette& palette, const std::filesystem::path& path);
ColorPalette load_palette(const std::filesystem::path& path);

} // namespace pointcolor
