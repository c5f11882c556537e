#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pointcolor/augment.hpp"
#include "pointcolor/palette.hpp"

namespace pointcolor {

enum class ColorMode { Fixed, Variant };

// Procedural scene recipe: a gray ground plane plus axis-aligned boxes at
// non-overlapping random poses. In fixed mode a box's color is a
// deterministic function of its geometry; in variant mode it is drawn
// uniformly from the object sub-palette, independently of geometry.
struct SceneSpec {
    int n_boxes = 6;
    int points_per_box = 100;
    int ground_points = 600;
    int palette_size = 8;     // total scene palette entries (>= 2)
    int object_colors = 4;    // sub-palette size for boxes (labels 2..1+object_colors)
    ColorMode color_mode = ColorMode::Variant;
    double noise_sigma = 0.01; // meters
    std::uint64_t rng_seed = 0;
    std::uint64_t color_seed = 0; // variant-mode color draws; 0 = follow rng_seed

    void validate() const;
};

// Scene palette shared by every scene of a spec: label 1 is the ground
// gray, labels 2..1+object_colors are the object sub-palette, remaining
// entries pad the label space. Channels are float32-representable so the
// palette survives a save/load round trip unchanged.
ColorPalette scene_palette(int palette_size);

// Points, colors, 1-based labels, and instance ids (ground = 0, boxes
// numbered from 1). Throws data_error when boxes cannot be placed without
// overlap after bounded retries.
PointSample generate_scene(const SceneSpec& spec);

// Best achievable unknown-point label accuracy without hints: ground
// points are predictable (1.0); variant-mode box points at
// 1 / object_colors; weighted by point counts.
double bayes_accuracy(const SceneSpec& spec);

ColorMode parse_color_mode(const std::string& name);
std::string color_mode_name(ColorMode mode);

// Flat key=value scene-spec text format used by the CLI.
SceneSpec parse_scene_spec(const std::string& text);

} // namespace pointcolor
