#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "biolite/clahe.hpp"
#include "biolite/errors.hpp"
#include "biolite/image_io.hpp"
#include "biolite/infer.hpp"
#include "biolite/metrics.hpp"
#include "biolite/optim.hpp"
#include "biolite/synth.hpp"
#include "biolite/version.hpp"
#include "biolite/weights.hpp"

namespace fs = std::filesystem;
using namespace biolite;

namespace {

// BIOLITE_OUT_DIR overrides any output directory argument.
fs::path resolve_out_dir(const std::string& flag_value) {
    if (const char* env = std::getenv("BIOLITE_OUT_DIR"); env && *env) return fs::path(env);
    return fs::path(flag_value);
}

std::string iso_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

// Written before long-running work starts; enough to reproduce the run.
void write_run_manifest(const fs::path& dir, const std::string& command,
                        const nlohmann::json& resolved_config, uint64_t seed,
                        const std::vector<std::string>& outputs) {
    fs::create_directories(dir);
    nlohmann::json j;
    j["command"] = command;
    j["version"] = kVersion;
    j["seed"] = seed;
    j["timestamp"] = iso_timestamp();
    j["config"] = resolved_config;
    j["outputs"] = outputs;
    std::ofstream os(dir / ("run_" + command + ".json"));
    if (!os) throw DataError("cannot write run manifest in " + dir.string());
    os << j.dump(2) << "\n";
}

// Plain key-value config file; unknown keys are data errors so typos surface.
void apply_config_file(const fs::path& path, TrainConfig& config) {
    std::ifstream is(path);
    if (!is) throw DataError("cannot read config file: " + path.string());
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const auto eq = line.find('=');
        if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
        if (eq == std::string::npos) {
            throw FormatError("config " + path.string() + ":" + std::to_string(lineno) +
                              ": expected key = value");
        }
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r\n");
            const auto e = s.find_last_not_of(" \t\r\n");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        try {
            if (key == "lr") config.lr = std::stof(value);
            else if (key == "weight_decay") config.weight_decay = std::stof(value);
            else if (key == "batch_size") config.batch_size = std::stoi(value);
            else if (key == "max_epochs") config.max_epochs = std::stoi(value);
            else if (key == "plateau_patience") config.plateau_patience = std::stoi(value);
            else if (key == "plateau_factor") config.plateau_factor = std::stof(value);
            else if (key == "plateau_min_delta") config.plateau_min_delta = std::stof(value);
            else if (key == "lr_min") config.lr_min = std::stof(value);
            else if (key == "early_stop_patience") config.early_stop_patience = std::stoi(value);
            else if (key == "augment") config.augment = (value == "1" || value == "true");
            else if (key == "clahe") config.apply_clahe = (value == "1" || value == "true");
            else if (key == "input_size") config.input_size = std::stoi(value);
            else throw DataError("config " + path.string() + ": unknown key '" + key + "'");
        } catch (const std::invalid_argument&) {
            throw FormatError("config " + path.string() + ":" + std::to_string(lineno) +
                              ": bad value for '" + key + "'");
        }
    }
}

nlohmann::json train_config_json(const TrainConfig& c) {
    return {{"lr", c.lr},
            {"weight_decay", c.weight_decay},
            {"batch_size", c.batch_size},
            {"max_epochs", c.max_epochs},
            {"adam_beta1", c.adam_beta1},
            {"adam_beta2", c.adam_beta2},
            {"adam_eps", c.adam_eps},
            {"plateau_patience", c.plateau_patience},
            {"plateau_factor", c.plateau_factor},
            {"plateau_min_delta", c.plateau_min_delta},
            {"lr_min", c.lr_min},
            {"early_stop_patience", c.early_stop_patience},
            {"seed", c.seed},
            {"augment", c.augment},
            {"clahe", c.apply_clahe},
            {"input_size", c.input_size}};
}

std::vector<LabeledFrame> frames_for_split(const fs::path& data_dir, const std::string& split) {
    const fs::path manifest = data_dir / "manifest.txt";
    if (!fs::exists(manifest)) {
        throw DataError("no manifest.txt in " + data_dir.string() +
                        " (generate data with `biolite synth` or provide a manifest)");
    }
    std::vector<LabeledFrame> frames;
    for (const auto& entry : read_manifest(manifest)) {
        if (entry.split == split) frames.push_back(load_frame(entry));
    }
    if (frames.empty()) {
        throw DataError("manifest " + manifest.string() + " has no '" + split + "' frames");
    }
    return frames;
}

int cmd_synth(int n, const std::string& difficulty, uint64_t seed, const std::string& out,
              int size) {
    const fs::path out_dir = resolve_out_dir(out);
    const Difficulty tier = difficulty_from_string(difficulty);
    write_run_manifest(out_dir, "synth",
                       {{"n", n}, {"difficulty", difficulty}, {"size", size}}, seed,
                       {"images/", "masks/", "manifest.txt"});
    auto frames = generate_dataset(n, tier, seed, size, size);
    write_dataset(out_dir, frames, seed);
    std::cout << "wrote " << frames.size() << " " << difficulty << "-tier frames to "
              << out_dir.string() << "\n";
    return 0;
}

int cmd_train(const std::string& data, const std::string& config_file, uint64_t seed,
              const std::string& out, const TrainConfig& flag_overrides,
              const std::map<std::string, bool>& flag_set) {
    TrainConfig config;
    if (!config_file.empty()) apply_config_file(config_file, config);
    // flags win over the config file
    if (flag_set.at("lr")) config.lr = flag_overrides.lr;
    if (flag_set.at("batch_size")) config.batch_size = flag_overrides.batch_size;
    if (flag_set.at("epochs")) config.max_epochs = flag_overrides.max_epochs;
    if (flag_set.at("weight_decay")) config.weight_decay = flag_overrides.weight_decay;
    if (flag_set.at("input_size")) config.input_size = flag_overrides.input_size;
    if (flag_set.at("no_augment")) config.augment = false;
    if (flag_set.at("no_clahe")) config.apply_clahe = false;
    config.seed = seed;
    config.validate();

    const fs::path out_dir = resolve_out_dir(out);
    const fs::path weights_path = out_dir / "weights.blu";
    const fs::path log_path = out_dir / "train_log.csv";
    write_run_manifest(out_dir, "train", train_config_json(config), seed,
                       {weights_path.string(), log_path.string()});

    auto train_frames = frames_for_split(data, "train");
    auto val_frames = frames_for_split(data, "val");
    std::cout << "training on " << train_frames.size() << " frames, validating on "
              << val_frames.size() << "\n";

    ModelParams model = build_params(ArchConfig{}, derive_seed(seed, "model-seed"));
    TrainResult result = train(train_frames, val_frames, std::move(model), config,
                               [](const EpochLog& e) {
                                   std::cout << "epoch " << e.epoch << ": train_loss "
                                             << e.train_loss << ", val_loss " << e.val_loss
                                             << ", val_dice " << e.val_dice << ", val_miou "
                                             << e.val_miou << ", lr " << e.lr << "\n";
                               });

    save_weights(weights_path, result.best_params);
    result.log.write_csv(log_path);
    std::cout << "best val dice " << result.log.best_val_dice << " at epoch "
              << result.log.best_epoch << "; saved " << weights_path.string() << "\n";
    return 0;
}

int cmd_eval(const std::string& data, const std::string& split, const std::string& weights,
             const std::string& out, bool self_test, bool no_clahe) {
    auto frames = frames_for_split(data, split);
    ConfusionMatrix cm;
    if (self_test) {
        // ground truth fed back as the prediction: metrics must be exactly 1
        for (const auto& f : frames) cm.accumulate(f.mask, f.mask);
    } else {
        LoadedModel model = load_weights(weights);
        InferOptions opts;
        opts.apply_clahe = !no_clahe;
        opts.norm = model.norm;
        for (const auto& f : frames) {
            const Mask pred = infer(f.image, model.params, opts);
            cm.accumulate(pred, f.mask);
        }
    }
    EvalReport report = EvalReport::from_confusion(cm);
    std::cout << report.to_kv();
    if (!out.empty()) {
        const fs::path out_dir = resolve_out_dir(out);
        fs::create_directories(out_dir);
        std::ofstream kv(out_dir / "eval_report.txt");
        kv << report.to_kv();
        std::ofstream csv(out_dir / "eval.csv");
        csv << EvalReport::csv_header() << "\n"
            << report.to_csv_row("biolite_unet") << "\n";
    }
    return 0;
}

int cmd_infer(const std::string& weights, const std::string& image_path,
              const std::string& out, const std::string& overlay, bool explicit_softmax,
              bool no_clahe) {
    LoadedModel model = load_weights(weights);
    const ImageU8 image = read_image(image_path);
    InferOptions opts;
    opts.apply_clahe = !no_clahe;
    opts.explicit_softmax = explicit_softmax;
    opts.norm = model.norm;
    const Mask mask = infer(image, model.params, opts);
    write_mask_png(out, mask);
    if (!overlay.empty()) write_overlay_png(overlay, image, mask);
    std::cout << "wrote mask " << out << "\n";
    return 0;
}

int cmd_bench(const std::string& weights, int frames, int warmup, int threads,
              uint64_t seed, const std::string& out, bool no_clahe) {
    LoadedModel model = load_weights(weights);
    // synthetic frames at a camera-like source resolution
    auto synth = generate_dataset(std::min(frames, 16), Difficulty::medium, seed, 240, 320);
    std::vector<ImageU8> images;
    for (auto& f : synth) images.push_back(std::move(f.frame.image));
    InferOptions opts;
    opts.apply_clahe = !no_clahe;
    opts.norm = model.norm;
    LatencyReport report = benchmark(model.params, images, frames, warmup, threads, opts);
    std::cout << report.to_csv();
    if (!out.empty()) {
        std::ofstream os(resolve_out_dir(out));
        os << report.to_csv();
    }
    return 0;
}

int cmd_describe(const std::string& weights, int size, const std::string& csv_out) {
    ArchConfig config;
    if (!weights.empty()) config = load_weights(weights).params.config;
    ComplexityReport report = describe(config, size, size);
    std::cout << report.to_text();
    if (!csv_out.empty()) {
        std::ofstream os(resolve_out_dir(csv_out));
        os << report.to_csv();
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"BioLite U-Net: training and embedded inference for bioprinting segmentation"};
    app.set_version_flag("--version", std::string(kVersion));
    app.require_subcommand(1);

    uint64_t seed = 0;
    app.add_option("--seed", seed, "Master seed; all randomness derives from it");

    // synth
    auto* synth = app.add_subcommand("synth", "Generate a synthetic labeled dataset");
    int synth_n = 200, synth_size = 256;
    std::string synth_difficulty = "easy", synth_out;
    synth->add_option("--n", synth_n, "Number of frames")->check(CLI::PositiveNumber);
    synth->add_option("--difficulty", synth_difficulty, "easy|medium|hard");
    synth->add_option("--size", synth_size, "Frame size in pixels");
    synth->add_option("--out", synth_out, "Output directory")->required();

    // train
    auto* tr = app.add_subcommand("train", "Train on a dataset directory");
    std::string tr_data, tr_config, tr_out;
    TrainConfig tr_flags;
    bool tr_no_augment = false, tr_no_clahe = false;
    tr->add_option("--data", tr_data, "Dataset directory (with manifest.txt)")->required();
    tr->add_option("--config", tr_config, "Key-value config file (flags win)");
    tr->add_option("--out", tr_out, "Output directory")->required();
    auto* o_lr = tr->add_option("--lr", tr_flags.lr, "Learning rate");
    auto* o_bs = tr->add_option("--batch-size", tr_flags.batch_size, "Mini-batch size");
    auto* o_ep = tr->add_option("--epochs", tr_flags.max_epochs, "Max epochs");
    auto* o_wd = tr->add_option("--weight-decay", tr_flags.weight_decay, "Weight decay");
    auto* o_is = tr->add_option("--input-size", tr_flags.input_size, "Network input size");
    tr->add_flag("--no-augment", tr_no_augment, "Disable training augmentation");
    tr->add_flag("--no-clahe", tr_no_clahe, "Disable CLAHE preprocessing");

    // eval
    auto* ev = app.add_subcommand("eval", "Evaluate weights on a dataset split");
    std::string ev_data, ev_split = "test", ev_weights, ev_out;
    bool ev_self_test = false, ev_no_clahe = false;
    ev->add_option("--data", ev_data, "Dataset directory")->required();
    ev->add_option("--split", ev_split, "train|val|test");
    ev->add_option("--weights", ev_weights, "Weights file (.blu)");
    ev->add_option("--out", ev_out, "Directory for eval_report.txt / eval.csv");
    ev->add_flag("--self-test", ev_self_test, "Score ground truth against itself");
    ev->add_flag("--no-clahe", ev_no_clahe, "Disable CLAHE preprocessing");

    // infer
    auto* in = app.add_subcommand("infer", "Segment one image");
    std::string in_weights, in_image, in_out, in_overlay;
    bool in_softmax = false, in_no_clahe = false;
    in->add_option("--weights", in_weights, "Weights file (.blu)")->required();
    in->add_option("--image", in_image, "Input image (PNG/JPEG)")->required();
    in->add_option("--out", in_out, "Output mask PNG")->required();
    in->add_option("--overlay", in_overlay, "Optional color-overlay PNG");
    in->add_flag("--explicit-softmax", in_softmax, "Run the softmax step explicitly");
    in->add_flag("--no-clahe", in_no_clahe, "Disable CLAHE preprocessing");

    // bench
    auto* be = app.add_subcommand("bench", "Measure inference latency");
    std::string be_weights, be_out;
    int be_frames = 100, be_warmup = 10, be_threads = 1;
    be->add_option("--weights", be_weights, "Weights file (.blu)")->required();
    be->add_option("--frames", be_frames, "Timed frames")->check(CLI::PositiveNumber);
    be->add_option("--warmup", be_warmup, "Warmup frames (untimed)");
    be->add_option("--threads", be_threads, "Worker threads")->check(CLI::PositiveNumber);
    be->add_option("--out", be_out, "CSV output path");
    bool be_no_clahe = false;
    be->add_flag("--no-clahe", be_no_clahe, "Disable CLAHE preprocessing");

    // describe
    auto* de = app.add_subcommand("describe", "Report per-layer parameters and FLOPs");
    std::string de_weights, de_csv;
    int de_size = 256;
    de->add_option("--weights", de_weights, "Weights file (defaults to the stock config)");
    de->add_option("--size", de_size, "Input size for FLOP accounting");
    de->add_option("--csv", de_csv, "CSV output path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e); // --help / --version
        app.exit(e);
        return 2;
    }

    try {
        if (synth->parsed()) {
            return cmd_synth(synth_n, synth_difficulty, seed, synth_out, synth_size);
        }
        if (tr->parsed()) {
            std::map<std::string, bool> set = {
                {"lr", o_lr->count() > 0},       {"batch_size", o_bs->count() > 0},
                {"epochs", o_ep->count() > 0},   {"weight_decay", o_wd->count() > 0},
                {"input_size", o_is->count() > 0}, {"no_augment", tr_no_augment},
                {"no_clahe", tr_no_clahe}};
            return cmd_train(tr_data, tr_config, seed, tr_out, tr_flags, set);
        }
        if (ev->parsed()) {
            if (!ev_self_test && ev_weights.empty()) {
                std::cerr << "error: category=usage msg=\"eval needs --weights or --self-test\"\n";
                return 2;
            }
            return cmd_eval(ev_data, ev_split, ev_weights, ev_out, ev_self_test, ev_no_clahe);
        }
        if (in->parsed()) {
            return cmd_infer(in_weights, in_image, in_out, in_overlay, in_softmax, in_no_clahe);
        }
        if (be->parsed()) {
            return cmd_bench(be_weights, be_frames, be_warmup, be_threads, seed, be_out,
                             be_no_clahe);
        }
        if (de->parsed()) {
            return cmd_describe(de_weights, de_size, de_csv);
        }
    } catch (const Error& e) {
        std::cerr << "error: category=" << e.category() << " msg=\"" << e.what() << "\"\n";
        switch (e.kind()) {
            case ErrorKind::data: return 3;
            case ErrorKind::format: return 4;
            default: return 5;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: category=internal msg=\"" << e.what() << "\"\n";
        return 5;
    }
    return 0;
}
