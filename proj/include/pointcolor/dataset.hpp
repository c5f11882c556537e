#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pointcolor/augment.hpp"
#include "pointcolor/palette.hpp"

namespace pointcolor {

// Colored-frame shard: magic "PCFRAME1", u32 point count, N x 3 float32
// coordinates, then N x 3 u8 RGB.
void save_colored_frame(const PointSample& sample, const std::filesystem::path& path);
PointSample load_colored_frame(const std::filesystem::path& path);
std::vector<std::uint8_t> encode_colored_frame(const PointSample& sample);

// Label/instance sidecar for synthetic scenes: little-endian u16 pairs
// (label, instance id) per point.
void save_label_sidecar(const std::vector<int>& labels, const std::vector<int>& instance_ids,
                        const std::filesystem::path& path);
void load_label_sidecar(const std::filesystem::path& path, std::vector<int>& labels,
                        std::vector<int>& instance_ids);

// Loads every frame of a prepared or synthesized dataset directory:
// <id>.pcf shards, or <id>.bin point files with <id>.lbl sidecars.
// Frames are ordered by id. Throws data_error when the directory holds
// no frames.
std::vector<PointSample> load_dataset(const std::filesystem::path& dir);

// Frame ids (file stems) present in the directory, sorted.
std::vector<std::string> list_frame_ids(const std::filesystem::path& dir,
                                        const std::string& extension);

} // namespace pointcolor
