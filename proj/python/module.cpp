#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "pointcolor/dataset.hpp"
#include "pointcolor/pipeline.hpp"
#include "pointcolor/synth.hpp"
#include "pointcolor/tensor_io.hpp"
#include "pointcolor/trainer.hpp"

namespace py = pybind11;
using namespace pointcolor;

namespace {

std::vector<Eigen::Vector3d> to_points(const Eigen::MatrixXd& array) {
    if (array.cols() != 3) {
        throw data_error("points array must be N x 3");
    }
    std::vector<Eigen::Vector3d> points(static_cast<std::size_t>(array.rows()));
    for (Eigen::Index i = 0; i < array.rows(); ++i) {
        points[static_cast<std::size_t>(i)] = array.row(i).transpose();
    }
    return points;
}

Eigen::MatrixXd from_points(const std::vector<Eigen::Vector3d>& points) {
    Eigen::MatrixXd array(static_cast<Eigen::Index>(points.size()), 3);
    for (std::size_t i = 0; i < points.size(); ++i) {
        array.row(static_cast<Eigen::Index>(i)) = points[i].transpose();
    }
    return array;
}

std::vector<Color> to_colors(const Eigen::MatrixXd& array) {
    if (array.cols() != 3) {
        throw data_error("colors array must be N x 3");
    }
    std::vector<Color> colors(static_cast<std::size_t>(array.rows()));
    for (Eigen::Index i = 0; i < array.rows(); ++i) {
        colors[static_cast<std::size_t>(i)] = {array(i, 0), array(i, 1), array(i, 2)};
    }
    return colors;
}

Eigen::MatrixXd from_colors(const std::vector<Color>& colors) {
    Eigen::MatrixXd array(static_cast<Eigen::Index>(colors.size()), 3);
    for (std::size_t i = 0; i < colors.size(); ++i) {
        for (int ch = 0; ch < 3; ++ch) {
            array(static_cast<Eigen::Index>(i), ch) = colors[i][ch];
        }
    }
    return array;
}

ColorPalette to_palette(const Eigen::MatrixXd& centroids) {
    ColorPalette palette;
    palette.centroids = to_colors(centroids);
    return palette;
}

PointSample dict_to_sample(const py::dict& frame) {
    PointSample sample;
    sample.points = to_points(frame["points"].cast<Eigen::MatrixXd>());
    if (frame.contains("colors")) {
        sample.colors = to_colors(frame["colors"].cast<Eigen::MatrixXd>());
    }
    if (frame.contains("labels")) {
        sample.labels = frame["labels"].cast<std::vector<int>>();
    }
    sample.check_consistent();
    return sample;
}

std::vector<PointSample> frames_to_samples(const py::list& frames) {
    std::vector<PointSample> samples;
    samples.reserve(frames.size());
    for (const auto& frame : frames) {
        samples.push_back(dict_to_sample(frame.cast<py::dict>()));
    }
    return samples;
}

py::dict metrics_to_dict(const Metrics& metrics) {
    py::dict d;
    d["mean_loss"] = metrics.mean_loss;
    d["accuracy_all"] = metrics.accuracy_all;
    d["accuracy_unknown"] = metrics.accuracy_unknown;
    d["per_class_accuracy"] = metrics.per_class_accuracy;
    d["per_class_count"] = metrics.per_class_count;
    d["points_seen"] = metrics.points_seen;
    d["per_frame_unknown_accuracy"] = metrics.per_frame_unknown_accuracy;
    d["per_class_mean_accuracy"] = metrics.per_class_mean_accuracy();
    return d;
}

TrainConfig dict_to_train_config(const py::dict& d) {
    TrainConfig config;
    if (d.contains("epochs")) config.epochs = d["epochs"].cast<int>();
    if (d.contains("batch_size")) config.batch_size = d["batch_size"].cast<int>();
    if (d.contains("max_lr")) config.max_lr = d["max_lr"].cast<double>();
    if (d.contains("weight_decay")) config.weight_decay = d["weight_decay"].cast<double>();
    if (d.contains("seed_ratio")) config.seed_ratio = d["seed_ratio"].cast<double>();
    if (d.contains("seed_strategy"))
        config.seed_strategy = d["seed_strategy"].cast<std::string>() == "balanced"
                                   ? SeedStrategy::Balanced
                                   : SeedStrategy::Uniform;
    if (d.contains("loss")) config.loss = parse_loss_kind(d["loss"].cast<std::string>());
    if (d.contains("alpha_epsilon")) config.alpha_epsilon = d["alpha_epsilon"].cast<double>();
    if (d.contains("rng_seed")) config.rng_seed = d["rng_seed"].cast<std::uint64_t>();
    if (d.contains("augment")) config.augment_enabled = d["augment"].cast<bool>();
    if (d.contains("target_points")) config.augment.target_points = d["target_points"].cast<int>();
    if (d.contains("range_m")) config.augment.range_m = d["range_m"].cast<double>();
    return config;
}

} // namespace

PYBIND11_MODULE(pointcolor, m) {
    m.doc() = "LiDAR point-cloud colorization pre-training: ingestion, quantization, "
              "hinted training, and feature export";

    py::register_exception<io_error>(m, "IoError");
    py::register_exception<data_error>(m, "DataError");
    py::register_exception<numeric_error>(m, "NumericError");

    // geometry
    py::class_<Calibration>(m, "Calibration")
        .def_readonly("P2", &Calibration::P2)
        .def_readonly("R0_rect", &Calibration::R0_rect)
        .def_readonly("Tr_velo_to_cam", &Calibration::Tr_velo_to_cam);

    py::class_<ImageBuffer>(m, "ImageBuffer")
        .def(py::init([](int width, int height, py::bytes pixels) {
                 ImageBuffer image;
                 image.width = width;
                 image.height = height;
                 const std::string raw = pixels;
                 image.pixels.assign(raw.begin(), raw.end());
                 if (image.pixels.size() != static_cast<std::size_t>(width) * height * 3) {
                     throw data_error("pixel buffer size != 3 * width * height");
                 }
                 return image;
             }),
             py::arg("width"), py::arg("height"), py::arg("pixels"))
        .def_readonly("width", &ImageBuffer::width)
        .def_readonly("height", &ImageBuffer::height)
        .def_property_readonly("pixels", [](const ImageBuffer& image) {
            return py::bytes(reinterpret_cast<const char*>(image.pixels.data()),
                             image.pixels.size());
        });

    m.def("parse_point_bin", [](py::bytes data) {
        const std::string raw = data;
        const PointCloud cloud = parse_point_bin(
            std::span(reinterpret_cast<const std::uint8_t*>(raw.data()), raw.size()));
        return py::make_tuple(from_points(cloud.points), cloud.intensity);
    });
    m.def(
        "encode_point_bin",
        [](const Eigen::MatrixXd& points, const std::vector<float>& intensity) {
            PointCloud cloud;
            cloud.points = to_points(points);
            cloud.intensity = intensity;
            const auto bytes = encode_point_bin(cloud);
            return py::bytes(reinterpret_cast<const char*>(bytes.data()), bytes.size());
        },
        py::arg("points"), py::arg("intensity") = std::vector<float>{});
    m.def("parse_calib", &parse_calib);
    m.def("parse_ppm", [](py::bytes data) {
        const std::string raw = data;
        return parse_ppm(std::span(reinterpret_cast<const std::uint8_t*>(raw.data()), raw.size()));
    });
    m.def("project_points",
          [](const Eigen::MatrixXd& points, const Calibration& calib, int width, int height) {
              PointCloud cloud;
              cloud.points = to_points(points);
              const auto projected = project_points(cloud, calib, width, height);
              Eigen::MatrixXi pixels =
                  Eigen::MatrixXi::Constant(static_cast<Eigen::Index>(projected.size()), 2, -1);
              std::vector<bool> valid(projected.size(), false);
              for (std::size_t i = 0; i < projected.size(); ++i) {
                  if (projected[i]) {
                      pixels(static_cast<Eigen::Index>(i), 0) = projected[i]->first;
                      pixels(static_cast<Eigen::Index>(i), 1) = projected[i]->second;
                      valid[i] = true;
                  }
              }
              return py::make_tuple(pixels, valid);
          });
    m.def("harvest_colors",
          [](const Eigen::MatrixXd& points, const ImageBuffer& image, const Calibration& calib) {
              PointCloud cloud;
              cloud.points = to_points(points);
              const ColoredPointCloud colored = harvest_colors(cloud, image, calib);
              return py::make_tuple(from_points(colored.cloud.points),
                                    from_colors(colored.colors));
          });

    // palette
    m.def(
        "fit_kmeans",
        [](const Eigen::MatrixXd& pixels, int k, int max_iters, double tol,
           std::uint64_t rng_seed) {
            KMeansOptions opts;
            opts.max_iters = max_iters;
            opts.tol = tol;
            opts.rng_seed = rng_seed;
            const KMeansResult result = fit_kmeans(to_colors(pixels), k, opts);
            return py::make_tuple(from_colors(result.palette.centroids), result.inertia,
                                  result.inertia_history);
        },
        py::arg("pixels"), py::arg("k"), py::arg("max_iters") = 100, py::arg("tol") = 1e-4,
        py::arg("rng_seed") = 0);
    m.def("assign_labels", [](const Eigen::MatrixXd& centroids, const Eigen::MatrixXd& colors) {
        return assign_labels(to_palette(centroids), to_colors(colors));
    });
    m.def("reconstruct_colors",
          [](const Eigen::MatrixXd& centroids, const std::vector<int>& labels) {
              return from_colors(reconstruct_colors(to_palette(centroids), labels));
          });
    m.def("save_palette", [](const Eigen::MatrixXd& centroids, const std::filesystem::path& path) {
        save_palette(to_palette(centroids), path);
    });
    m.def("load_palette", [](const std::filesystem::path& path) {
        return from_colors(load_palette(path).centroids);
    });
    m.def(
        "sample_training_pixels",
        [](const std::vector<ImageBuffer>& images, int pixels_per_image, std::uint64_t rng_seed) {
            return from_colors(sample_training_pixels(images, pixels_per_image, rng_seed));
        },
        py::arg("images"), py::arg("pixels_per_image"), py::arg("rng_seed") = 0);

    // hints
    m.def(
        "make_hints",
        [](const std::vector<int>& labels, double seed_ratio, const std::string& strategy,
           std::uint64_t rng_seed) {
            CounterRng rng(rng_seed);
            return make_hints(labels, seed_ratio,
                              strategy == "balanced" ? SeedStrategy::Balanced
                                                     : SeedStrategy::Uniform,
                              rng);
        },
        py::arg("labels"), py::arg("seed_ratio"), py::arg("strategy") = "uniform",
        py::arg("rng_seed") = 0);
    m.def("encode_hints", [](const std::vector<int>& labels, const std::vector<bool>& mask,
                             int num_classes) { return encode_hints(labels, mask, num_classes); });

    // augmentation
    m.def(
        "compose_augment",
        [](const py::dict& frame, const py::dict& config, std::uint64_t rng_seed) {
            AugmentConfig aug;
            if (config.contains("flip_prob")) aug.flip_prob = config["flip_prob"].cast<double>();
            if (config.contains("rot_range")) aug.rot_range = config["rot_range"].cast<double>();
            if (config.contains("scale_lo")) aug.scale_lo = config["scale_lo"].cast<double>();
            if (config.contains("scale_hi")) aug.scale_hi = config["scale_hi"].cast<double>();
            if (config.contains("target_points"))
                aug.target_points = config["target_points"].cast<int>();
            if (config.contains("range_m")) aug.range_m = config["range_m"].cast<double>();
            if (config.contains("shuffle")) aug.shuffle = config["shuffle"].cast<bool>();
            const PointSample out = compose(dict_to_sample(frame), aug, rng_seed);
            py::dict result;
            result["points"] = from_points(out.points);
            if (!out.colors.empty()) result["colors"] = from_colors(out.colors);
            if (!out.labels.empty()) result["labels"] = out.labels;
            return result;
        },
        py::arg("frame"), py::arg("config") = py::dict(), py::arg("rng_seed") = 0);

    // model
    py::class_<ModelParams>(m, "Model")
        .def_property_readonly("parameter_count", &ModelParams::parameter_count)
        .def_property_readonly("num_classes",
                               [](const ModelParams& p) { return p.config().num_classes; })
        .def_property_readonly("feature_dim",
                               [](const ModelParams& p) { return p.config().feature_dim; })
        .def_property_readonly("values",
                               [](const ModelParams& p) { return p.values(); })
        .def("forward",
             [](const ModelParams& params, const Eigen::MatrixXd& points,
                const Eigen::MatrixXd& hints) {
                 return forward(params, to_points(points), hints);
             })
        .def("backbone_forward",
             [](const ModelParams& params, const Eigen::MatrixXd& points) {
                 return backbone_forward(params, to_points(points));
             })
        .def("backward",
             [](ModelParams& params, const Eigen::MatrixXd& points, const Eigen::MatrixXd& hints,
                const Eigen::MatrixXd& loss_grad) {
                 backward(params, to_points(points), hints, loss_grad);
                 return params.grads();
             })
        .def("export_features", [](const ModelParams& params, const Eigen::MatrixXd& points) {
            return export_features(params, to_points(points));
        });

    m.def(
        "init_model",
        [](int num_classes, int feature_dim, const std::vector<int>& encoder_widths,
           int global_width, const std::vector<int>& decoder_hidden, bool regression,
           std::uint64_t rng_seed) {
            const ModelConfig config =
                regression ? make_regression_config(num_classes, feature_dim, encoder_widths,
                                                    global_width, decoder_hidden)
                           : make_classification_config(num_classes, feature_dim, encoder_widths,
                                                        global_width, decoder_hidden);
            return init_params(config, rng_seed);
        },
        py::arg("num_classes"), py::arg("feature_dim") = 128,
        py::arg("encoder_widths") = std::vector<int>{3, 64, 128}, py::arg("global_width") = 128,
        py::arg("decoder_hidden") = std::vector<int>{128}, py::arg("regression") = false,
        py::arg("rng_seed") = 0);
    m.def("predict", [](const Eigen::MatrixXd& logits) { return predict(logits); });

    // losses
    m.def(
        "batch_class_weights",
        [](const std::vector<int>& labels, int num_classes, double epsilon) {
            return batch_class_weights(labels, num_classes, epsilon).alpha;
        },
        py::arg("labels"), py::arg("num_classes"), py::arg("epsilon") = 0.1);
    m.def("balanced_softmax_loss",
          [](const Eigen::MatrixXd& logits, const std::vector<int>& labels,
             const Eigen::VectorXd& alpha) {
              ClassWeights weights;
              weights.alpha = alpha;
              const LossResult result = balanced_softmax_loss(logits, labels, weights);
              return py::make_tuple(result.value, result.grad);
          });
    m.def("cross_entropy_loss",
          [](const Eigen::MatrixXd& logits, const std::vector<int>& labels) {
              const LossResult result = cross_entropy_loss(logits, labels);
              return py::make_tuple(result.value, result.grad);
          });
    m.def("mse_loss", [](const Eigen::MatrixXd& predicted, const Eigen::MatrixXd& target) {
        const LossResult result = mse_loss(predicted, target);
        return py::make_tuple(result.value, result.grad);
    });
    m.def(
        "smooth_l1_loss",
        [](const Eigen::MatrixXd& predicted, const Eigen::MatrixXd& target, double beta) {
            const LossResult result = smooth_l1_loss(predicted, target, beta);
            return py::make_tuple(result.value, result.grad);
        },
        py::arg("predicted"), py::arg("target"), py::arg("beta") = 1.0);

    // trainer
    m.def("cosine_lr", &cosine_lr);
    m.def(
        "train",
        [](const py::list& frames, const Eigen::MatrixXd& centroids, const py::dict& config,
           int feature_dim, const std::vector<int>& encoder_widths, int global_width,
           const std::vector<int>& decoder_hidden) {
            const std::vector<PointSample> dataset = frames_to_samples(frames);
            const ColorPalette palette = to_palette(centroids);
            const TrainConfig train_config = dict_to_train_config(config);
            const ModelConfig model_config =
                is_regression_loss(train_config.loss)
                    ? make_regression_config(palette.k(), feature_dim, encoder_widths,
                                             global_width, decoder_hidden)
                    : make_classification_config(palette.k(), feature_dim, encoder_widths,
                                                 global_width, decoder_hidden);
            TrainResult result = train(dataset, palette, model_config, train_config);
            py::list epochs;
            for (const EpochStats& e : result.epochs) {
                py::dict d = metrics_to_dict(e.metrics);
                d["epoch"] = e.epoch;
                d["lr"] = e.lr;
                epochs.append(d);
            }
            return py::make_tuple(std::move(result.params), epochs);
        },
        py::arg("frames"), py::arg("palette"), py::arg("config") = py::dict(),
        py::arg("feature_dim") = 128, py::arg("encoder_widths") = std::vector<int>{3, 64, 128},
        py::arg("global_width") = 128, py::arg("decoder_hidden") = std::vector<int>{128});
    m.def(
        "evaluate",
        [](const ModelParams& params, const py::list& frames, const Eigen::MatrixXd& centroids,
           double seed_ratio, std::uint64_t rng_seed) {
            return metrics_to_dict(evaluate(params, frames_to_samples(frames),
                                            to_palette(centroids), seed_ratio, rng_seed));
        },
        py::arg("model"), py::arg("frames"), py::arg("palette"), py::arg("seed_ratio") = 0.2,
        py::arg("rng_seed") = 0);

    // synthetic scenes
    m.def(
        "generate_scene",
        [](const py::dict& d) {
            SceneSpec spec;
            if (d.contains("n_boxes")) spec.n_boxes = d["n_boxes"].cast<int>();
            if (d.contains("points_per_box")) spec.points_per_box = d["points_per_box"].cast<int>();
            if (d.contains("ground_points")) spec.ground_points = d["ground_points"].cast<int>();
            if (d.contains("palette_size")) spec.palette_size = d["palette_size"].cast<int>();
            if (d.contains("object_colors")) spec.object_colors = d["object_colors"].cast<int>();
            if (d.contains("color_mode"))
                spec.color_mode = parse_color_mode(d["color_mode"].cast<std::string>());
            if (d.contains("noise_sigma")) spec.noise_sigma = d["noise_sigma"].cast<double>();
            if (d.contains("rng_seed")) spec.rng_seed = d["rng_seed"].cast<std::uint64_t>();
            if (d.contains("color_seed")) spec.color_seed = d["color_seed"].cast<std::uint64_t>();
            const PointSample scene = generate_scene(spec);
            py::dict result;
            result["points"] = from_points(scene.points);
            result["colors"] = from_colors(scene.colors);
            result["labels"] = scene.labels;
            result["instance_ids"] = scene.instance_ids;
            return result;
        },
        py::arg("spec"));
    m.def("bayes_accuracy", [](const py::dict& d) {
        SceneSpec spec;
        if (d.contains("n_boxes")) spec.n_boxes = d["n_boxes"].cast<int>();
        if (d.contains("points_per_box")) spec.points_per_box = d["points_per_box"].cast<int>();
        if (d.contains("ground_points")) spec.ground_points = d["ground_points"].cast<int>();
        if (d.contains("palette_size")) spec.palette_size = d["palette_size"].cast<int>();
        if (d.contains("object_colors")) spec.object_colors = d["object_colors"].cast<int>();
        if (d.contains("color_mode"))
            spec.color_mode = parse_color_mode(d["color_mode"].cast<std::string>());
        if (d.contains("noise_sigma")) spec.noise_sigma = d["noise_sigma"].cast<double>();
        return bayes_accuracy(spec);
    });
    m.def("scene_palette",
          [](int palette_size) { return from_colors(scene_palette(palette_size).centroids); });

    // checkpoints
    m.def("save_checkpoint",
          [](const ModelParams& params, const std::filesystem::path& path) {
              Checkpoint ckpt;
              ckpt.params = params;
              ckpt.optimizer.m.assign(params.parameter_count(), 0.0);
              ckpt.optimizer.v.assign(params.parameter_count(), 0.0);
              save_checkpoint(ckpt, path);
          });
    m.def("load_checkpoint", [](const std::filesystem::path& path) {
        return load_checkpoint(path).params;
    });
}
