#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "pointcolor/dataset.hpp"
#include "pointcolor/pipeline.hpp"
#include "pointcolor/tensor_io.hpp"
#include "pointcolor/trainer.hpp"

namespace fs = std::filesystem;
using namespace pointcolor;

namespace {

// Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric error.
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

struct PretrainArgs {
    std::string data_dir;
    std::string palette_path;
    std::string out_path;
    std::string config_path;
    std::string metrics_log;
    std::string resume_path;
    std::optional<int> epochs;
    std::optional<int> batch;
    std::optional<double> lr;
    std::optional<double> weight_decay;
    std::optional<double> seed_ratio;
    std::optional<std::string> seed_strategy;
    std::optional<std::string> loss;
    std::optional<std::uint64_t> seed;
    std::optional<double> alpha_eps;
    std::optional<int> feature_dim;
    std::optional<int> target_points;
    std::optional<double> range_m;
    std::optional<bool> augment;
};

// Run-config file: flat key=value lines mirroring the training fields;
// CLI flags override file values.
void apply_config_file(TrainConfig& config, int& feature_dim, const std::string& path) {
    std::istringstream lines(read_file_text(path));
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
                throw data_error("config line " + std::to_string(line_no) +
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
        if (key == "epochs") config.epochs = std::stoi(value);
        else if (key == "batch_size") config.batch_size = std::stoi(value);
        else if (key == "max_lr") config.max_lr = std::stod(value);
        else if (key == "weight_decay") config.weight_decay = std::stod(value);
        else if (key == "beta1") config.beta1 = std::stod(value);
        else if (key == "beta2") config.beta2 = std::stod(value);
        else if (key == "adam_eps") config.adam_eps = std::stod(value);
        else if (key == "seed_ratio") config.seed_ratio = std::stod(value);
        else if (key == "seed_strategy")
            config.seed_strategy = value == "balanced" ? SeedStrategy::Balanced
                                                       : SeedStrategy::Uniform;
        else if (key == "loss") config.loss = parse_loss_kind(value);
        else if (key == "alpha_epsilon") config.alpha_epsilon = std::stod(value);
        else if (key == "rng_seed") config.rng_seed = std::stoull(value);
        else if (key == "augment") config.augment_enabled = value == "on" || value == "1" || value == "true";
        else if (key == "flip_prob") config.augment.flip_prob = std::stod(value);
        else if (key == "rot_range") config.augment.rot_range = std::stod(value);
        else if (key == "scale_lo") config.augment.scale_lo = std::stod(value);
        else if (key == "scale_hi") config.augment.scale_hi = std::stod(value);
        else if (key == "target_points") config.augment.target_points = std::stoi(value);
        else if (key == "range_m") config.augment.range_m = std::stod(value);
        else if (key == "shuffle") config.augment.shuffle = value == "on" || value == "1" || value == "true";
        else if (key == "feature_dim") feature_dim = std::stoi(value);
        else
            throw data_error("config line " + std::to_string(line_no) + ": unknown key '" +
                             key + "'");
    }
}

void write_metrics_log(const std::vector<EpochStats>& epochs, const std::string& path) {
    std::ostringstream out;
    for (const EpochStats& e : epochs) {
        out << e.epoch << "\t" << e.lr << "\t" << e.metrics.mean_loss << "\t"
            << e.metrics.accuracy_all << "\t" << e.metrics.accuracy_unknown << "\n";
    }
    write_file_atomic(path, out.str());
}

int run_pretrain(const PretrainArgs& args) {
    TrainConfig config;
    int feature_dim = 128;
    if (!args.config_path.empty()) {
        apply_config_file(config, feature_dim, args.config_path);
    }
    if (args.epochs) config.epochs = *args.epochs;
    if (args.batch) config.batch_size = *args.batch;
    if (args.lr) config.max_lr = *args.lr;
    if (args.weight_decay) config.weight_decay = *args.weight_decay;
    if (args.seed_ratio) config.seed_ratio = *args.seed_ratio;
    if (args.seed_strategy)
        config.seed_strategy = *args.seed_strategy == "balanced" ? SeedStrategy::Balanced
                                                                 : SeedStrategy::Uniform;
    if (args.loss) config.loss = parse_loss_kind(*args.loss);
    if (args.seed) config.rng_seed = *args.seed;
    if (args.alpha_eps) config.alpha_epsilon = *args.alpha_eps;
    if (args.feature_dim) feature_dim = *args.feature_dim;
    if (args.target_points) config.augment.target_points = *args.target_points;
    if (args.range_m) config.augment.range_m = *args.range_m;
    if (args.augment) config.augment_enabled = *args.augment;

    const ColorPalette palette = load_palette(args.palette_path);
    const std::vector<PointSample> dataset = load_dataset(args.data_dir);

    const ModelConfig model_config =
        is_regression_loss(config.loss)
            ? make_regression_config(palette.k(), feature_dim)
            : make_classification_config(palette.k(), feature_dim);

    TrainResult result;
    if (!args.resume_path.empty()) {
        const Checkpoint start = load_checkpoint(args.resume_path);
        result = train(dataset, palette, model_config, config, std::nullopt, &start);
    } else {
        result = train(dataset, palette, model_config, config);
    }

    Checkpoint ckpt;
    ckpt.params = result.params;
    ckpt.optimizer = result.optimizer;
    ckpt.train_config = args.resume_path.empty() ? config
                                                 : load_checkpoint(args.resume_path).train_config;
    ckpt.epochs_completed = result.epochs_completed;
    ckpt.steps_completed = result.steps_completed;
    ckpt.total_steps = result.total_steps;
    save_checkpoint(ckpt, args.out_path);

    if (!args.metrics_log.empty()) {
        write_metrics_log(result.epochs, args.metrics_log);
    }
    for (const EpochStats& e : result.epochs) {
        std::cout << "epoch " << e.epoch << "\tlr " << e.lr << "\tloss " << e.metrics.mean_loss
                  << "\tacc_all " << e.metrics.accuracy_all << "\tacc_unknown "
                  << e.metrics.accuracy_unknown << "\n";
    }
    std::cout << "checkpoint written to " << args.out_path << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"LiDAR point-cloud colorization pre-training toolkit"};
    app.require_subcommand(1);

    // prepare
    auto* prepare = app.add_subcommand("prepare", "Project LiDAR frames into images and "
                                                  "harvest per-point colors");
    std::string prep_data, prep_calib, prep_images, prep_out;
    int prep_threads = 1;
    prepare->add_option("--data", prep_data, "Directory of velodyne .bin files")->required();
    prepare->add_option("--calib", prep_calib, "Directory of calib .txt files")->required();
    prepare->add_option("--images", prep_images, "Directory of .ppm images")->required();
    prepare->add_option("--out", prep_out, "Output directory for .pcf shards")->required();
    prepare->add_option("--threads", prep_threads, "Worker threads (default 1)");

    // fit-palette
    auto* fitpal = app.add_subcommand("fit-palette", "Learn the K-means color quantization");
    std::string pal_images, pal_out;
    int pal_k = 128, pal_images_n = 3000, pal_pixels = 1000;
    std::uint64_t pal_seed = 0;
    fitpal->add_option("--images", pal_images, "Directory of .ppm images")->required();
    fitpal->add_option("--out", pal_out, "Output palette file")->required();
    fitpal->add_option("--k", pal_k, "Number of color classes (default 128)");
    fitpal->add_option("--images-per-dataset", pal_images_n,
                       "Images sampled from the directory (default 3000)");
    fitpal->add_option("--pixels-per-image", pal_pixels, "Pixels sampled per image (default 1000)");
    fitpal->add_option("--seed", pal_seed, "RNG seed");

    // pretrain
    auto* pretrain = app.add_subcommand("pretrain", "Hint-grounded colorization pre-training");
    PretrainArgs pt;
    pretrain->add_option("--data", pt.data_dir, "Prepared or synthesized frame directory")
        ->required();
    pretrain->add_option("--palette", pt.palette_path, "Palette file")->required();
    pretrain->add_option("--out", pt.out_path, "Output checkpoint")->required();
    pretrain->add_option("--config", pt.config_path, "Run-config file (key=value lines)");
    pretrain->add_option("--metrics-log", pt.metrics_log, "Per-epoch TSV metrics log");
    pretrain->add_option("--resume", pt.resume_path, "Checkpoint to resume from");
    pretrain->add_option("--epochs", pt.epochs, "Training epochs (default 80)");
    pretrain->add_option("--batch", pt.batch, "Batch size in frames (default 16)");
    pretrain->add_option("--lr", pt.lr, "Maximum learning rate (default 0.001)");
    pretrain->add_option("--weight-decay", pt.weight_decay, "AdamW weight decay (default 0.01)");
    pretrain->add_option("--seed-ratio", pt.seed_ratio, "Seed fraction (default 0.2)");
    pretrain->add_option("--seed-strategy", pt.seed_strategy, "uniform or balanced")
        ->check(CLI::IsMember({"uniform", "balanced"}));
    pretrain->add_option("--loss", pt.loss, "bs, ce, mse, or sl1 (default bs)")
        ->check(CLI::IsMember({"bs", "ce", "mse", "sl1"}));
    pretrain->add_option("--seed", pt.seed, "RNG seed");
    pretrain->add_option("--alpha-eps", pt.alpha_eps, "Class-count smoothing (default 0.1)");
    pretrain->add_option("--feature-dim", pt.feature_dim, "Backbone feature width (default 128)");
    pretrain->add_option("--target-points", pt.target_points,
                         "Points sampled per frame (default 16384)");
    pretrain->add_option("--range", pt.range_m, "Range cut in meters (default 40)");
    pretrain->add_flag("--augment,!--no-augment", pt.augment, "Toggle augmentation");

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a frame directory");
    std::string ev_data, ev_palette, ev_ckpt;
    double ev_ratio = 0.2;
    std::uint64_t ev_seed = 0;
    eval_cmd->add_option("--data", ev_data, "Frame directory")->required();
    eval_cmd->add_option("--palette", ev_palette, "Palette file")->required();
    eval_cmd->add_option("--checkpoint", ev_ckpt, "Checkpoint file")->required();
    eval_cmd->add_option("--seed-ratio", ev_ratio, "Eval seed fraction (default 0.2)");
    eval_cmd->add_option("--seed", ev_seed, "RNG seed");

    // colorize
    auto* colorize = app.add_subcommand("colorize", "Predict colors for one frame and write a PLY");
    std::string col_ckpt, col_frame, col_palette, col_out, col_seeds;
    colorize->add_option("--checkpoint", col_ckpt, "Checkpoint file")->required();
    colorize->add_option("--frame", col_frame, "Frame file (.bin or .pcf)")->required();
    colorize->add_option("--palette", col_palette, "Palette file")->required();
    colorize->add_option("--out", col_out, "Output PLY path")->required();
    colorize->add_option("--seeds", col_seeds,
                         "Seed spec file: one '0-based-index 1-based-label' pair per line");

    // export-features
    auto* exportf = app.add_subcommand("export-features",
                                       "Write per-point [xyz | feature] rows for one frame");
    std::string ex_ckpt, ex_frame, ex_out;
    exportf->add_option("--checkpoint", ex_ckpt, "Checkpoint file")->required();
    exportf->add_option("--frame", ex_frame, "Frame file (.bin or .pcf)")->required();
    exportf->add_option("--out", ex_out, "Output tensor file")->required();

    // synth
    auto* synth = app.add_subcommand("synth", "Generate procedural scenes");
    std::string sy_spec, sy_out;
    int sy_count = 1;
    synth->add_option("--spec", sy_spec, "Scene spec file (key=value lines)")->required();
    synth->add_option("--out", sy_out, "Output directory")->required();
    synth->add_option("--count", sy_count, "Number of scenes (default 1)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : kExitUsage;
    }

    try {
        if (*prepare) {
            const PrepareReport report =
                prepare_frames(prep_data, prep_calib, prep_images, prep_out, prep_threads);
            for (const std::string& id : report.skipped) {
                std::cerr << "warning: frame " << id << " skipped (missing counterpart file)\n";
            }
            std::cout << report.written.size() << " frames written to " << prep_out << "\n";
        } else if (*fitpal) {
            const KMeansResult result =
                fit_palette_dir(pal_images, pal_k, pal_images_n, pal_pixels, pal_seed, pal_out);
            std::cout << "palette with k=" << pal_k << " written to " << pal_out
                      << " (inertia " << result.inertia << ")\n";
        } else if (*pretrain) {
            return run_pretrain(pt);
        } else if (*eval_cmd) {
            const Checkpoint ckpt = load_checkpoint(ev_ckpt);
            const ColorPalette palette = load_palette(ev_palette);
            const std::vector<PointSample> dataset = load_dataset(ev_data);
            const Metrics metrics =
                evaluate(ckpt.params, dataset, palette, ev_ratio, ev_seed,
                         ckpt.train_config.loss, ckpt.train_config.alpha_epsilon,
                         ckpt.train_config.seed_strategy);
            std::cout << "loss " << metrics.mean_loss << "\nacc_all " << metrics.accuracy_all
                      << "\nacc_unknown " << metrics.accuracy_unknown << "\nper_class_mean "
                      << metrics.per_class_mean_accuracy() << "\npoints " << metrics.points_seen
                      << "\n";
        } else if (*colorize) {
            std::optional<fs::path> seeds;
            if (!col_seeds.empty()) {
                seeds = fs::path(col_seeds);
            }
            colorize_frame(col_ckpt, col_frame, col_palette, seeds, col_out);
            std::cout << "colorized cloud written to " << col_out << "\n";
        } else if (*exportf) {
            export_features_file(ex_ckpt, ex_frame, ex_out);
            std::cout << "features written to " << ex_out << "\n";
        } else if (*synth) {
            const SceneSpec spec = parse_scene_spec(read_file_text(sy_spec));
            synth_scenes(spec, sy_out, sy_count);
            std::cout << sy_count << " scenes written to " << sy_out << "\n";
        }
    } catch (const numeric_error& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const io_error& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const data_error& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }
    return 0;
}
