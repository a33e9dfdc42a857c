// Command-line front end: train/eval/ablate/gen-data/report over the
// synthetic perspective-shift benchmark.
#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "pptformer/experiment.hpp"
#include "pptformer/serialize.hpp"

namespace fs = std::filesystem;
using namespace ppt;

namespace {

int cmd_train(const std::string& config_path, const std::string& out_dir) {
    exp::ExperimentConfig cfg = exp::load_config_file(config_path);
    fs::create_directories(out_dir);

    model::TrainState state;
    exp::RunReport rep = exp::train_and_evaluate(cfg, &state);

    exp::write_reports_jsonl({rep}, out_dir + "/report.jsonl");
    exp::write_reports_csv({rep}, out_dir + "/report.csv");
    model::save_checkpoint_file(state, out_dir + "/model.ckpt");
    io::write_file(out_dir + "/config.json",
                   [&] {
                       std::string s = exp::config_to_json(cfg);
                       return std::vector<uint8_t>(s.begin(), s.end());
                   }());
    std::printf("trained %s for %d steps: test mIoU %.4f (train %.4f)\n", cfg.name.c_str(),
                cfg.steps, rep.miou, rep.train_miou);
    std::printf("artifacts in %s: report.jsonl report.csv model.ckpt config.json\n",
                out_dir.c_str());
    return 0;
}

int cmd_eval(const std::string& ckpt_path, const std::string& split,
             const std::string& config_path) {
    if (split != "train" && split != "test")
        throw ConfigError("unknown split: " + split + " (expected train or test)");
    model::TrainState state = model::load_checkpoint_file(ckpt_path);
    exp::ExperimentConfig cfg;
    if (!config_path.empty()) {
        cfg = exp::load_config_file(config_path);
    } else {
        cfg.model = state.cfg;
    }
    cfg.model = state.cfg;  // the checkpoint owns the architecture
    std::vector<data::SegSample> raw = exp::make_split(cfg, split == "test");
    std::vector<model::Sample> samples;
    for (const auto& s : raw) samples.push_back(exp::to_model_sample(s));
    metrics::IouResult iou = exp::evaluate(state, samples);
    std::printf("split %s: %zu samples, mIoU %.4f\n", split.c_str(), samples.size(), iou.mean);
    for (size_t k = 0; k < iou.per_class.size(); ++k)
        std::printf("  class %zu: %s IoU %.4f\n", k, iou.present[k] ? "present" : "absent ",
                    iou.per_class[k]);
    return 0;
}

int cmd_ablate(const std::string& axis, const std::vector<double>& values,
               const std::vector<uint64_t>& seeds, const std::string& config_path,
               const std::string& out_dir) {
    exp::ExperimentConfig base =
        config_path.empty() ? exp::ExperimentConfig{} : exp::load_config_file(config_path);
    fs::create_directories(out_dir);
    std::vector<exp::RunReport> reports = exp::run_ablation(base, axis, values, seeds);
    exp::write_reports_jsonl(reports, out_dir + "/ablation_" + axis + ".jsonl");
    exp::write_reports_csv(reports, out_dir + "/ablation_" + axis + ".csv");
    int failures = 0;
    for (const auto& r : reports) {
        if (r.ok()) {
            std::printf("%s: mIoU %.4f\n", r.name.c_str(), r.miou);
        } else {
            std::printf("%s: FAILED (%s)\n", r.name.c_str(), r.error.c_str());
            ++failures;
        }
    }
    return failures == 0 ? 0 : 1;
}

int cmd_gen_data(int count, uint64_t seed, const std::string& out_dir, int size, int classes,
                 uint64_t texture_seed) {
    fs::create_directories(out_dir);
    Rng pose_rng(fnv1a(&seed, sizeof(seed)));
    for (int i = 0; i < count; ++i) {
        data::Viewpoint vp;
        vp.s = pose_rng.uniform(0.9, 1.3);
        vp.theta = pose_rng.uniform(-30.0, 30.0);
        vp.phi = pose_rng.uniform(0.0, 30.0);
        uint64_t mix[2] = {seed, (uint64_t)i};
        data::SegSample s =
            data::synth_scene(fnv1a(mix, sizeof(mix)), vp, size, classes, texture_seed);
        char name[64];
        std::snprintf(name, sizeof(name), "/sample_%05d.ppts", i);
        data::save_sample(s, out_dir + name);
    }
    std::printf("wrote %d samples to %s\n", count, out_dir.c_str());
    return 0;
}

int cmd_report(const std::string& dir) {
    // Parameter-count comparison between the full model and the plain
    // baseline, plus a summary of any reports found in the directory.
    model::ModelConfig cfg;
    Rng rng(1);
    model::ModelParams params = model::ModelParams::init(cfg, rng);
    long long total = params.parameter_count();
    long long codec = params.codec_parameter_count();
    long long plain = total - codec;
    std::printf("parameter count (full model):   %lld\n", total);
    std::printf("parameter count (plain blocks): %lld\n", plain);
    std::printf("perspective overhead:           %lld (%.2f%%)\n", codec,
                100.0 * (double)codec / (double)plain);

    if (!dir.empty() && fs::exists(dir)) {
        for (const auto& entry : fs::directory_iterator(dir)) {
            if (entry.path().extension() == ".csv")
                std::printf("report file: %s\n", entry.path().string().c_str());
        }
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Perspective-aware segmentation benchmark"};
    app.require_subcommand(1);

    std::string config_path, out_dir = "out", ckpt_path, split = "test", axis, report_dir;
    std::vector<double> values;
    std::vector<uint64_t> seeds = {1, 2, 3};
    int count = 64, size = 64, classes = 5;
    uint64_t seed = 1, texture_seed = 7;

    CLI::App* train = app.add_subcommand("train", "Train a model from a JSON config");
    train->add_option("--config", config_path, "Experiment config file")->required();
    train->add_option("--out", out_dir, "Output directory");

    CLI::App* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a split");
    eval->add_option("--checkpoint", ckpt_path, "Checkpoint file")->required();
    eval->add_option("--split", split, "train or test");
    eval->add_option("--config", config_path, "Optional config for the data split");

    CLI::App* ablate = app.add_subcommand("ablate", "Sweep one axis across seeds");
    ablate->add_option("--axis", axis,
                       "contourlet_T | prototypes_N | calib_layers | pmp_M | augmentation")
        ->required();
    ablate->add_option("--values", values, "Axis values")->required();
    ablate->add_option("--seeds", seeds, "Seeds per value");
    ablate->add_option("--config", config_path, "Base config file");
    ablate->add_option("--out", out_dir, "Output directory");

    CLI::App* gen = app.add_subcommand("gen-data", "Render synthetic samples to disk");
    gen->add_option("--count", count, "Number of samples")->required();
    gen->add_option("--seed", seed, "Master seed")->required();
    gen->add_option("--out", out_dir, "Output directory")->required();
    gen->add_option("--size", size, "Image extent");
    gen->add_option("--classes", classes, "Class count");
    gen->add_option("--texture-seed", texture_seed, "Texture seed");

    CLI::App* report = app.add_subcommand("report", "Print parameter counts and report files");
    report->add_option("--dir", report_dir, "Directory holding run reports");

    CLI11_PARSE(app, argc, argv);

    try {
        if (train->parsed()) return cmd_train(config_path, out_dir);
        if (eval->parsed()) return cmd_eval(ckpt_path, split, config_path);
        if (ablate->parsed()) return cmd_ablate(axis, values, seeds, config_path, out_dir);
        if (gen->parsed())
            return cmd_gen_data(count, seed, out_dir, size, classes, texture_seed);
        if (report->parsed()) return cmd_report(report_dir);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
