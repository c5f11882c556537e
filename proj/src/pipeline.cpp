#include "pointcolor/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <sstream>
#include <thread>

#include "pointcolor/dataset.hpp"
#include "pointcolor/geometry_io.hpp"
#include "pointcolor/tensor_io.hpp"

namespace pointcolor {

PrepareReport prepare_frames(const std::filesystem::path& data_dir,
                             const std::filesystem::path& calib_dir,
                             const std::filesystem::path& image_dir,
                             const std::filesystem::path& out_dir, int threads) {
    const std::vector<std::string> bins = list_frame_ids(data_dir, ".bin");
    PrepareReport report;
    std::vector<std::string> ready;
    for (const std::string& id : bins) {
        if (std::filesystem::exists(calib_dir / (id + ".txt")) &&
            std::filesystem::exists(image_dir / (id + ".ppm"))) {
            ready.push_back(id);
        } else {
            report.skipped.push_back(id);
        }
    }
    if (ready.empty()) {
        throw data_error("prepare: no frame id present in all three directories");
    }
    std::filesystem::create_directories(out_dir);

    std::vector<std::size_t> counts(ready.size(), 0);
    std::mutex error_mutex;
    std::exception_ptr first_error;
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next.fetch_add(1); i < ready.size(); i = next.fetch_add(1)) {
            try {
                const std::string& id = ready[i];
                const PointCloud cloud =
                    parse_point_bin(read_file_bytes(data_dir / (id + ".bin")));
                const Calibration calib =
                    parse_calib(read_file_text(calib_dir / (id + ".txt")));
                const ImageBuffer image =
                    parse_ppm(read_file_bytes(image_dir / (id + ".ppm")));
                const ColoredPointCloud colored = harvest_colors(cloud, image, calib);
                PointSample sample;
                sample.points = colored.cloud.points;
                sample.colors = colored.colors;
                counts[i] = sample.size();
                save_colored_frame(sample, out_dir / (id + ".pcf"));
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) {
                    first_error = std::current_exception();
                }
                return;
            }
        }
    };
    const int worker_count = std::max(1, std::min<int>(threads, static_cast<int>(ready.size())));
    if (worker_count == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(worker_count));
        for (int t = 0; t < worker_count; ++t) {
            pool.emplace_back(worker);
        }
        for (auto& t : pool) {
            t.join();
        }
    }
    if (first_error) {
        std::rethrow_exception(first_error);
    }

    std::ostringstream manifest;
    for (std::size_t i = 0; i < ready.size(); ++i) {
        manifest << ready[i] << " " << counts[i] << "\n";
        report.written.push_back(ready[i]);
    }
    write_file_atomic(out_dir / "manifest.txt", manifest.str());
    return report;
}

KMeansResult fit_palette_dir(const std::filesystem::path& image_dir, int k,
                             int images_per_dataset, int pixels_per_image,
                             std::uint64_t rng_seed, const std::filesystem::path& out_path) {
    const std::vector<std::string> ids = list_frame_ids(image_dir, ".ppm");
    if (ids.empty()) {
        throw data_error("fit-palette: no .ppm images in " + image_dir.string());
    }
    if (images_per_dataset < 1 || pixels_per_image < 1) {
        throw data_error("fit-palette: image and pixel counts must be >= 1");
    }
    // Uniform image subset without replacement.
    std::vector<std::string> chosen = ids;
    if (ids.size() > static_cast<std::size_t>(images_per_dataset)) {
        CounterRng rng(rng_stream(rng_seed, streams::kPixelSample));
        chosen.clear();
        for (std::size_t i :
             rng.sample_without_replacement(ids.size(), static_cast<std::size_t>(images_per_dataset))) {
            chosen.push_back(ids[i]);
        }
        std::sort(chosen.begin(), chosen.end());
    }
    std::vector<ImageBuffer> images;
    images.reserve(chosen.size());
    for (const std::string& id : chosen) {
        images.push_back(parse_ppm(read_file_bytes(image_dir / (id + ".ppm"))));
    }
    const std::vector<Color> pixels = sample_training_pixels(images, pixels_per_image, rng_seed);
    KMeansOptions opts;
    opts.rng_seed = rng_seed;
    KMeansResult result = fit_kmeans(pixels, k, opts);
    save_palette(result.palette, out_path);
    return result;
}

std::vector<std::pair<int, int>> parse_seed_spec(const std::string& text, std::size_t num_points,
                                                 int num_classes) {
    std::vector<std::pair<int, int>> seeds;
    std::istringstream lines(text);
    std::string line;
    int line_no = 0;
    while (std::getline(lines, line)) {
        ++line_no;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) {
            line = line.substr(0, hash);
        }
        std::istringstream fields(line);
        long index, label;
        if (!(fields >> index)) {
            continue; // blank line
        }
        std::string trailing;
        if (!(fields >> label) || (fields >> trailing)) {
            throw data_error("seed spec line " + std::to_string(line_no) +
                             ": expected 'index label'");
        }
        if (index < 0 || static_cast<std::size_t>(index) >= num_points) {
            throw data_error("seed spec line " + std::to_string(line_no) + ": point index " +
                             std::to_string(index) + " out of range [0, " +
                             std::to_string(num_points) + ")");
        }
        if (label < 1 || label > num_classes) {
            throw data_error("seed spec line " + std::to_string(line_no) + ": label " +
                             std::to_string(label) + " outside {1.." +
                             std::to_string(num_classes) + "}");
        }
        seeds.emplace_back(static_cast<int>(index), static_cast<int>(label));
    }
    return seeds;
}

PointSample load_frame_any(const std::filesystem::path& frame_path) {
    if (frame_path.extension() == ".pcf") {
        return load_colored_frame(frame_path);
    }
    const PointCloud cloud = parse_point_bin(read_file_bytes(frame_path));
    PointSample sample;
    sample.points = cloud.points;
    const std::filesystem::path sidecar =
        frame_path.parent_path() / (frame_path.stem().string() + ".lbl");
    if (std::filesystem::exists(sidecar)) {
        load_label_sidecar(sidecar, sample.labels, sample.instance_ids);
    }
    return sample;
}

std::string render_ply(const PointSample& sample, const std::vector<int>& labels,
                       const ColorPalette& palette) {
    if (labels.size() != sample.size()) {
        throw data_error("render_ply: label count mismatch");
    }
    std::ostringstream out;
    out << "ply\nformat ascii 1.0\nelement vertex " << sample.size()
        << "\nproperty float x\nproperty float y\nproperty float z\n"
           "property uchar red\nproperty uchar green\nproperty uchar blue\n"
           "property int label\nend_header\n";
    for (std::size_t i = 0; i < sample.size(); ++i) {
        const Color c = palette.centroids[static_cast<std::size_t>(labels[i] - 1)];
        out << static_cast<float>(sample.points[i].x()) << " "
            << static_cast<float>(sample.points[i].y()) << " "
            << static_cast<float>(sample.points[i].z()) << " "
            << static_cast<int>(std::lround(c[0] * 255.0)) << " "
            << static_cast<int>(std::lround(c[1] * 255.0)) << " "
            << static_cast<int>(std::lround(c[2] * 255.0)) << " " << labels[i] << "\n";
    }
    return out.str();
}

void colorize_frame(const std::filesystem::path& checkpoint_path,
                    const std::filesystem::path& frame_path,
                    const std::filesystem::path& palette_path,
                    const std::optional<std::filesystem::path>& seed_spec_path,
                    const std::filesystem::path& out_path) {
    const Checkpoint ckpt = load_checkpoint(checkpoint_path);
    const ColorPalette palette = load_palette(palette_path);
    if (ckpt.params.config().hint_dim != palette.k()) {
        throw data_error("colorize: checkpoint hint width " +
                         std::to_string(ckpt.params.config().hint_dim) +
                         " != palette size " + std::to_string(palette.k()));
    }
    const PointSample sample = load_frame_any(frame_path);
    if (sample.size() == 0) {
        throw data_error("colorize: frame is empty");
    }

    Eigen::MatrixXd hints = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(sample.size()),
                                                  palette.k());
    if (seed_spec_path) {
        const auto seeds =
            parse_seed_spec(read_file_text(*seed_spec_path), sample.size(), palette.k());
        for (const auto& [index, label] : seeds) {
            hints.row(index).setZero();
            hints(index, label - 1) = 1.0;
        }
    }
    const LogitMatrix logits = forward(ckpt.params, sample.points, hints);
    write_file_atomic(out_path, render_ply(sample, predict(logits), palette));
}

void export_features_file(const std::filesystem::path& checkpoint_path,
                          const std::filesystem::path& frame_path,
                          const std::filesystem::path& out_path) {
    const Checkpoint ckpt = load_checkpoint(checkpoint_path);
    const PointSample sample = load_frame_any(frame_path);
    if (sample.size() == 0) {
        throw data_error("export-features: frame is empty");
    }
    save_tensor(export_features(ckpt.params, sample.points), out_path, TensorDType::F32);
}

void synth_scenes(const SceneSpec& spec, const std::filesystem::path& out_dir, int count) {
    spec.validate();
    if (count < 1) {
        throw data_error("synth: count must be >= 1");
    }
    std::filesystem::create_directories(out_dir);
    save_palette(scene_palette(spec.palette_size), out_dir / "palette.pal");
    std::ostringstream manifest;
    for (int i = 0; i < count; ++i) {
        SceneSpec scene_spec = spec;
        scene_spec.rng_seed = spec.rng_seed + static_cast<std::uint64_t>(i);
        if (spec.color_seed != 0) {
            scene_spec.color_seed = spec.color_seed + static_cast<std::uint64_t>(i);
        }
        const PointSample scene = generate_scene(scene_spec);
        std::ostringstream name;
        name.width(6);
        name.fill('0');
        name << i;
        PointCloud cloud;
        cloud.points = scene.points;
        write_file_atomic(out_dir / (name.str() + ".bin"), encode_point_bin(cloud));
        save_label_sidecar(scene.labels, scene.instance_ids, out_dir / (name.str() + ".lbl"));
        manifest << name.str() << " " << scene.size() << "\n";
    }
    write_file_atomic(out_dir / "manifest.txt", manifest.str());
}

} // namespace pointcolor
