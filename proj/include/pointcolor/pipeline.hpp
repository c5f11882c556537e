#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "pointcolor/synth.hpp"
#include "pointcolor/trainer.hpp"

namespace pointcolor {

// CLI subcommand bodies, factored out so tests drive them directly.

struct PrepareReport {
    std::vector<std::string> written; // frame ids
    std::vector<std::string> skipped; // ids missing a counterpart file
};

// For each frame id present in all three directories, harvests per-point
// colors and writes a colored-frame shard plus a manifest of ids and
// point counts. Skipped ids get a warning entry; an empty result is an
// error.
PrepareReport prepare_frames(const std::filesystem::path& data_dir,
                             const std::filesystem::path& calib_dir,
                             const std::filesystem::path& image_dir,
                             const std::filesystem::path& out_dir, int threads = 1);

// Uniformly samples up to images_per_dataset PPM images (without
// replacement), draws pixels_per_image pixels from each, fits the
// K-means palette, and writes it.
KMeansResult fit_palette_dir(const std::filesystem::path& image_dir, int k,
                             int images_per_dataset, int pixels_per_image,
                             std::uint64_t rng_seed, const std::filesystem::path& out_path);

// Seed spec for manual colorization: one "index label" pair per line,
// 0-based point index, 1-based label. Throws data_error naming the line
// on malformed input or out-of-range values.
std::vector<std::pair<int, int>> parse_seed_spec(const std::string& text, std::size_t num_points,
                                                 int num_classes);

// Runs the forward pass with seeds from seed_spec (no file = zero seeds)
// and writes predicted labels and reconstructed RGB as a text PLY.
void colorize_frame(const std::filesystem::path& checkpoint_path,
                    const std::filesystem::path& frame_path,
                    const std::filesystem::path& palette_path,
                    const std::optional<std::filesystem::path>& seed_spec_path,
                    const std::filesystem::path& out_path);

// Writes the N x (3 + D) coordinate/feature matrix in the tensor format.
void export_features_file(const std::filesystem::path& checkpoint_path,
                          const std::filesystem::path& frame_path,
                          const std::filesystem::path& out_path);

// Generates `count` scenes (scene i reseeded by spec.rng_seed + i), writes
// point files, label sidecars, the scene palette, and a manifest.
void synth_scenes(const SceneSpec& spec, const std::filesystem::path& out_dir, int count);

// Loads a frame from a velodyne .bin or a .pcf shard.
PointSample load_frame_any(const std::filesystem::path& frame_path);

std::string render_ply(const PointSample& sample, const std::vector<int>& labels,
                       const ColorPalette& palette);

} // namespace pointcolor
