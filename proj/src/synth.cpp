#include "pointcolor/synth.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace pointcolor {

namespace {

// Scene extents and box-size ranges (meters).
constexpr double kGroundHalfExtent = 20.0;
constexpr double kPlacementMargin = 3.0;
constexpr double kBoxGap = 0.5;
constexpr double kBoxSizeLo = 0.8;
constexpr double kBoxSizeHi = 2.5;
constexpr double kBoxHeightLo = 0.5;
constexpr double kBoxHeightHi = 2.0;
constexpr int kPlacementAttempts = 200;

struct Box {
    double cx, cy;
    double sx, sy, sz;

    double half_x() const { return sx / 2.0; }
    double half_y() const { return sy / 2.0; }

    bool overlaps(const Box& other) const {
        return std::abs(cx - other.cx) < half_x() + other.half_x() + kBoxGap &&
               std::abs(cy - other.cy) < half_y() + other.half_y() + kBoxGap;
    }

    bool contains_xy(double x, double y) const {
        return std::abs(x - cx) <= half_x() && std::abs(y - cy) <= half_y();
    }
};

Color hsv_to_rgb(double h, double s, double v) {
    const double c = v * s;
    const double hp = h * 6.0;
    const double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
    double r = 0.0, g = 0.0, b = 0.0;
    if (hp < 1.0) {
        r = c, g = x;
    } else if (hp < 2.0) {
        r = x, g = c;
    } else if (hp < 3.0) {
        g = c, b = x;
    } else if (hp < 4.0) {
        g = x, b = c;
    } else if (hp < 5.0) {
        r = x, b = c;
    } else {
        r = c, b = x;
    }
    const double m = v - c;
    return {r + m, g + m, b + m};
}

Color round_f32(const Color& c) {
    return {f32_round(c[0]), f32_round(c[1]), f32_round(c[2])};
}

} // namespace

void SceneSpec::validate() const {
    if (n_boxes < 0 || points_per_box < 0 || ground_points < 0) {
        throw data_error("scene spec: counts must be >= 0");
    }
    if (palette_size < 2) {
        throw data_error("scene spec: palette_size must be >= 2");
    }
    if (object_colors < 1 || object_colors > palette_size - 1) {
        throw data_error("scene spec: object_colors must be in [1, palette_size - 1]");
    }
    if (noise_sigma < 0.0) {
        throw data_error("scene spec: noise_sigma must be >= 0");
    }
}

ColorPalette scene_palette(int palette_size) {
    if (palette_size < 2) {
        throw data_error("scene_palette: palette_size must be >= 2");
    }
    ColorPalette palette;
    palette.centroids.push_back(round_f32({0.5, 0.5, 0.5})); // ground gray
    for (int j = 1; j < palette_size; ++j) {
        const double hue = static_cast<double>(j - 1) / (palette_size - 1);
        palette.centroids.push_back(round_f32(hsv_to_rgb(hue, 0.85, 0.9)));
    }
    return palette;
}

PointSample generate_scene(const SceneSpec& spec) {
    spec.validate();
    const ColorPalette palette = scene_palette(spec.palette_size);
    const std::uint64_t color_key = spec.color_seed != 0 ? spec.color_seed : spec.rng_seed;

    CounterRng geom(rng_stream(spec.rng_seed, streams::kSceneGeometry));
    CounterRng noise(rng_stream(spec.rng_seed, streams::kSceneNoise));
    CounterRng color(rng_stream(color_key, streams::kSceneColor));

    // Place boxes without xy overlap.
    std::vector<Box> boxes;
    for (int b = 0; b < spec.n_boxes; ++b) {
        bool placed = false;
        for (int attempt = 0; attempt < kPlacementAttempts && !placed; ++attempt) {
            Box box;
            const double lo = -kGroundHalfExtent + kPlacementMargin;
            const double hi = kGroundHalfExtent - kPlacementMargin;
            box.cx = lo + geom.next_double() * (hi - lo);
            box.cy = lo + geom.next_double() * (hi - lo);
            box.sx = kBoxSizeLo + geom.next_double() * (kBoxSizeHi - kBoxSizeLo);
            box.sy = kBoxSizeLo + geom.next_double() * (kBoxSizeHi - kBoxSizeLo);
            box.sz = kBoxHeightLo + geom.next_double() * (kBoxHeightHi - kBoxHeightLo);
            placed = true;
            for (const Box& other : boxes) {
                if (box.overlaps(other)) {
                    placed = false;
                    break;
                }
            }
            if (placed) {
                boxes.push_back(box);
            }
        }
        if (!placed) {
            throw data_error("generate_scene: could not place box " + std::to_string(b) +
                             " without overlap");
        }
    }

    // Box color labels (1-based palette labels; ground is label 1).
    std::vector<int> box_labels(boxes.size());
    for (std::size_t b = 0; b < boxes.size(); ++b) {
        if (spec.color_mode == ColorMode::Fixed) {
            // Deterministic function of the box pose: its bearing from the
            // origin picks the sub-palette bucket.
            const double angle01 =
                (std::atan2(boxes[b].cy, boxes[b].cx) + std::numbers::pi) /
                (2.0 * std::numbers::pi);
            const int bucket = std::min(spec.object_colors - 1,
                                        static_cast<int>(spec.object_colors * angle01));
            box_labels[b] = 2 + bucket;
        } else {
            box_labels[b] = 2 + static_cast<int>(color.next_index(spec.object_colors));
        }
    }

    PointSample scene;
    auto push_point = [&](double x, double y, double z, int label, int instance) {
        scene.points.emplace_back(x + spec.noise_sigma * noise.next_normal(),
                                  y + spec.noise_sigma * noise.next_normal(),
                                  z + spec.noise_sigma * noise.next_normal());
        scene.labels.push_back(label);
        scene.colors.push_back(palette.centroids[static_cast<std::size_t>(label - 1)]);
        scene.instance_ids.push_back(instance);
    };

    // Ground plane, keeping clear of box footprints.
    for (int g = 0; g < spec.ground_points; ++g) {
        double x = 0.0, y = 0.0;
        for (int attempt = 0; attempt < 64; ++attempt) {
            x = (2.0 * geom.next_double() - 1.0) * kGroundHalfExtent;
            y = (2.0 * geom.next_double() - 1.0) * kGroundHalfExtent;
            bool inside = false;
            for (const Box& box : boxes) {
                if (box.contains_xy(x, y)) {
                    inside = true;
                    break;
                }
            }
            if (!inside) {
                break;
            }
        }
        push_point(x, y, 0.0, 1, 0);
    }

    // Box surfaces: four sides plus the top, chosen by area.
    for (std::size_t b = 0; b < boxes.size(); ++b) {
        const Box& box = boxes[b];
        const double area_x = box.sy * box.sz; // faces normal to x (two of them)
        const double area_y = box.sx * box.sz;
        const double area_top = box.sx * box.sy;
        const double total = 2.0 * area_x + 2.0 * area_y + area_top;
        for (int p = 0; p < spec.points_per_box; ++p) {
            const double pick = geom.next_double() * total;
            const double u = geom.next_double();
            const double v = geom.next_double();
            double x, y, z;
            if (pick < 2.0 * area_x) {
                const double side = pick < area_x ? -1.0 : 1.0;
                x = box.cx + side * box.half_x();
                y = box.cy + (u - 0.5) * box.sy;
                z = v * box.sz;
            } else if (pick < 2.0 * area_x + 2.0 * area_y) {
                const double side = pick < 2.0 * area_x + area_y ? -1.0 : 1.0;
                x = box.cx + (u - 0.5) * box.sx;
                y = box.cy + side * box.half_y();
                z = v * box.sz;
            } else {
                x = box.cx + (u - 0.5) * box.sx;
                y = box.cy + (v - 0.5) * box.sy;
                z = box.sz;
            }
            push_point(x, y, z, box_labels[b], static_cast<int>(b) + 1);
        }
    }
    return scene;
}

double bayes_accuracy(const SceneSpec& spec) {
    spec.validate();
    const double ground = static_cast<double>(spec.ground_points);
    const double box = static_cast<double>(spec.n_boxes) * spec.points_per_box;
    if (ground + box <= 0.0) {
        throw data_error("bayes_accuracy: scene has no points");
    }
    if (spec.color_mode == ColorMode::Fixed) {
        return 1.0;
    }
    return (ground + box / static_cast<double>(spec.object_colors)) / (ground + box);
}

ColorMode parse_color_mode(const std::string& name) {
    if (name == "fixed") return ColorMode::Fixed;
    if (name == "variant") return ColorMode::Variant;
    throw data_error("unknown color mode '" + name + "' (expected fixed or variant)");
}

std::string color_mode_name(ColorMode mode) {
    return mode == ColorMode::Fixed ? "fixed" : "variant";
}

SceneSpec parse_scene_spec(const std::string& text) {
    SceneSpec spec;
    std::istringstream lines(text);
    std::string line;
    int line_no = 0;
    while (std::getline(lines, line)) {
        ++line_no;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) {
            line = line.substr(0, hash);
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            if (line.find_first_not_of(" \t\r") != std::string::npos) {
                throw data_error("scene spec line " + std::to_string(line_no) +
                                 ": expected key=value");
            }
            continue;
        }
        auto trim = [](std::string s) {
            const auto a = s.find_first_not_of(" \t\r");
            const auto b = s.find_last_not_of(" \t\r");
            return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        try {
            if (key == "n_boxes") {
                spec.n_boxes = std::stoi(value);
            } else if (key == "points_per_box") {
                spec.points_per_box = std::stoi(value);
            } else if (key == "ground_points") {
                spec.ground_points = std::stoi(value);
            } else if (key == "palette_size") {
                spec.palette_size = std::stoi(value);
            } else if (key == "object_colors") {
                spec.object_colors = std::stoi(value);
            } else if (key == "color_mode") {
                spec.color_mode = parse_color_mode(value);
            } else if (key == "noise_sigma") {
                spec.noise_sigma = std::stod(value);
            } else if (key == "rng_seed") {
                spec.rng_seed = std::stoull(value);
            } else if (key == "color_seed") {
                spec.color_seed = std::stoull(value);
            } else {
                throw data_error("scene spec line " + std::to_string(line_no) +
                                 ": unknown key '" + key + "'");
            }
        } catch (const std::invalid_argument&) {
            throw data_error("scene spec line " + std::to_string(line_no) + ": bad value '" +
                             value + "'");
        }
    }
    spec.validate();
    return spec;
}

} // namespace pointcolor
