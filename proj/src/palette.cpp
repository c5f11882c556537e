#include "pointcolor/palette.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "pointcolor/rng.hpp"
#include "pointcolor/tensor_io.hpp"

namespace pointcolor {

namespace {

double sq_dist(const Color& a, const Color& b) {
    const double d0 = a[0] - b[0];
    const double d1 = a[1] - b[1];
    const double d2 = a[2] - b[2];
    return d0 * d0 + d1 * d1 + d2 * d2;
}

// k-means++ seeding: first centroid uniform, the rest with probability
// proportional to the squared distance to the nearest chosen centroid.
std::vector<Color> kmeanspp_init(std::span<const Color> pixels, int k, CounterRng& rng) {
    const std::size_t n = pixels.size();
    std::vector<Color> centroids;
    centroids.reserve(k);
    centroids.push_back(pixels[rng.next_index(n)]);

    std::vector<double> d2(n);
    for (std::size_t i = 0; i < n; ++i) {
        d2[i] = sq_dist(pixels[i], centroids[0]);
    }
    while (static_cast<int>(centroids.size()) < k) {
        double total = 0.0;
        for (double d : d2) {
            total += d;
        }
        std::size_t chosen;
        if (total <= 0.0) {
            // All mass already covered (duplicate-heavy input): fall back
            // to a uniform draw.
            chosen = rng.next_index(n);
        } else {
            const double target = rng.next_double() * total;
            double cum = 0.0;
            chosen = n - 1;
            for (std::size_t i = 0; i < n; ++i) {
                cum += d2[i];
                if (cum > target) {
                    chosen = i;
                    break;
                }
            }
        }
        centroids.push_back(pixels[chosen]);
        for (std::size_t i = 0; i < n; ++i) {
            d2[i] = std::min(d2[i], sq_dist(pixels[i], centroids.back()));
        }
    }
    return centroids;
}

} // namespace

std::vector<Color> sample_training_pixels(std::span<const ImageBuffer> images,
                                          int pixels_per_image, std::uint64_t rng_seed) {
    if (images.empty()) {
        throw data_error("sample_training_pixels: empty image list");
    }
    if (pixels_per_image < 1) {
        throw data_error("sample_training_pixels: pixels_per_image must be >= 1");
    }
    std::vector<Color> pixels;
    pixels.reserve(images.size() * static_cast<std::size_t>(pixels_per_image));
    for (std::size_t img = 0; img < images.size(); ++img) {
        CounterRng rng(rng_stream(rng_seed, rng_stream(streams::kPixelSample, img)));
        const std::size_t count =
            static_cast<std::size_t>(images[img].width) * images[img].height;
        for (int s = 0; s < pixels_per_image; ++s) {
            const std::size_t p = rng.next_index(count);
            pixels.push_back(images[img].pixel_at(static_cast<int>(p % images[img].width),
                                                  static_cast<int>(p / images[img].width)));
        }
    }
    return pixels;
}

KMeansResult fit_kmeans(std::span<const Color> pixels, int k, const KMeansOptions& opts) {
    if (k < 1) {
        throw data_error("fit_kmeans: k must be >= 1");
    }
    if (pixels.size() < static_cast<std::size_t>(k)) {
        throw data_error("fit_kmeans: " + std::to_string(pixels.size()) +
                         " pixels is fewer than k = " + std::to_string(k));
    }
    const std::size_t n = pixels.size();
    CounterRng rng(rng_stream(opts.rng_seed, streams::kPaletteInit));
    std::vector<Color> centroids = kmeanspp_init(pixels, k, rng);

    KMeansResult result;
    std::vector<int> assignment(n, 0);
    for (int iter = 0; iter < opts.max_iters; ++iter) {
        // Assignment step; inertia is measured against the centroids the
        // assignment was made with.
        double inertia = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            int best_c = 0;
            for (int c = 0; c < k; ++c) {
                const double d = sq_dist(pixels[i], centroids[c]);
                if (d < best) {
                    best = d;
                    best_c = c;
                }
            }
            assignment[i] = best_c;
            inertia += best;
        }
        result.inertia_history.push_back(inertia);
        result.inertia = inertia;

        // Update step.
        std::vector<Color> sums(k, Color{0.0, 0.0, 0.0});
        std::vector<std::size_t> counts(k, 0);
        for (std::size_t i = 0; i < n; ++i) {
            for (int ch = 0; ch < 3; ++ch) {
                sums[assignment[i]][ch] += pixels[i][ch];
            }
            ++counts[assignment[i]];
        }
        double shift = 0.0;
        for (int c = 0; c < k; ++c) {
            if (counts[c] == 0) {
                // Re-seed an empty cluster to the point farthest from its
                // assigned centroid.
                std::size_t farthest = 0;
                double far_d = -1.0;
                for (std::size_t i = 0; i < n; ++i) {
                    const double d = sq_dist(pixels[i], centroids[assignment[i]]);
                    if (d > far_d) {
                        far_d = d;
                        farthest = i;
                    }
                }
                shift = std::max(shift, std::sqrt(sq_dist(centroids[c], pixels[farthest])));
                centroids[c] = pixels[farthest];
                assignment[farthest] = c;
                continue;
            }
            Color mean;
            for (int ch = 0; ch < 3; ++ch) {
                mean[ch] = sums[c][ch] / static_cast<double>(counts[c]);
            }
            shift = std::max(shift, std::sqrt(sq_dist(centroids[c], mean)));
            centroids[c] = mean;
        }
        if (shift < opts.tol) {
            break;
        }
    }

    // Final inertia against the converged centroids.
    double inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (int c = 0; c < k; ++c) {
            best = std::min(best, sq_dist(pixels[i], centroids[c]));
        }
        inertia += best;
    }
    result.inertia_history.push_back(inertia);
    result.inertia = inertia;
    result.palette.centroids = std::move(centroids);
    return result;
}

int assign_label(const ColorPalette& palette, const Color& color) {
    double best = std::numeric_limits<double>::infinity();
    int best_label = 1;
    for (int c = 0; c < palette.k(); ++c) {
        const double d = sq_dist(color, palette.centroids[c]);
        if (d < best) {
            best = d;
            best_label = c + 1;
        }
    }
    return best_label;
}

std::vector<int> assign_labels(const ColorPalette& palette, std::span<const Color> colors) {
    std::vector<int> labels(colors.size());
    for (std::size_t i = 0; i < colors.size(); ++i) {
        labels[i] = assign_label(palette, colors[i]);
    }
    return labels;
}

std::vector<Color> reconstruct_colors(const ColorPalette& palette, std::span<const int> labels) {
    std::vector<Color> colors;
    colors.reserve(labels.size());
    for (int label : labels) {
        if (label < 1 || label > palette.k()) {
            throw data_error("reconstruct_colors: label " + std::to_string(label) +
                             " outside {1.." + std::to_string(palette.k()) + "}");
        }
        colors.push_back(palette.centroids[label - 1]);
    }
    return colors;
}

namespace {
constexpr char kPaletteMagic[5] = {'P', 'C', 'P', 'A', 'L'};
constexpr std::uint8_t kPaletteVersion = 1;
} // namespace

void save_palette(const ColorPalette& palette, const std::filesystem::path& path) {
    std::string bytes;
    bytes.append(kPaletteMagic, sizeof(kPaletteMagic));
    bytes.push_back(static_cast<char>(kPaletteVersion));
    const std::uint32_t k = static_cast<std::uint32_t>(palette.k());
    bytes.append(reinterpret_cast<const char*>(&k), 4);
    for (const Color& c : palette.centroids) {
        for (int ch = 0; ch < 3; ++ch) {
            const float v = static_cast<float>(c[ch]);
            bytes.append(reinterpret_cast<const char*>(&v), 4);
        }
    }
    write_file_atomic(path, bytes);
}

ColorPalette load_palette(const std::filesystem::path& path) {
    const std::vector<std::uint8_t> bytes = read_file_bytes(path);
    if (bytes.size() < 10 || std::memcmp(bytes.data(), kPaletteMagic, 5) != 0) {
        throw io_error("palette file " + path.string() + ": bad magic");
    }
    if (bytes[5] != kPaletteVersion) {
        throw io_error("palette file " + path.string() + ": unsupported version " +
                       std::to_string(bytes[5]));
    }
    std::uint32_t k;
    std::memcpy(&k, bytes.data() + 6, 4);
    if (k == 0 || bytes.size() != 10 + static_cast<std::size_t>(k) * 12) {
        throw io_error("palette file " + path.string() + ": truncated or inconsistent size");
    }
    ColorPalette palette;
    palette.centroids.resize(k);
    for (std::uint32_t c = 0; c < k; ++c) {
        for (int ch = 0; ch < 3; ++ch) {
            float v;
            std::memcpy(&v, bytes.data() + 10 + 12 * c + 4 * ch, 4);
            palette.centroids[c][ch] = v;
        }
    }
    return palette;
}

} // namespace pointcolor
