#include "pptformer/experiment.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "pptformer/serialize.hpp"

namespace ppt::exp {

using ordered_json = nlohmann::ordered_json;

void ExperimentConfig::validate() const {
    model.validate();
    if (batch_size < 1) throw ConfigError("experiment: batch_size must be positive");
    if (steps < 1) throw ConfigError("experiment: steps must be positive");
    if (data.train_scenes < 1 || data.test_scenes < 1 || data.views_per_scene < 1)
        throw ConfigError("experiment: split sizes must be positive");
    if (augment != "none") data::augment_kind_from_name(augment);
}

namespace {

uint64_t derive_seed(uint64_t seed, const char* tag, uint64_t i) {
    uint64_t h = fnv1a(&seed, sizeof(seed));
    h = fnv1a(tag, std::char_traits<char>::length(tag), h);
    return fnv1a(&i, sizeof(i), h);
}

}  // namespace

std::vector<data::SegSample> make_split(const ExperimentConfig& cfg, bool test) {
    int scenes = test ? cfg.data.test_scenes : cfg.data.train_scenes;
    const char* tag = test ? "test-scene" : "train-scene";
    Rng pose_rng(derive_seed(cfg.data.seed, test ? "test-pose" : "train-pose", 0));
    std::vector<data::SegSample> out;
    for (int i = 0; i < scenes; ++i) {
        uint64_t scene_seed = derive_seed(cfg.data.seed, tag, (uint64_t)i);
        for (int v = 0; v < cfg.data.views_per_scene; ++v) {
            data::Viewpoint vp;
            vp.s = pose_rng.uniform(0.9, 1.3);
            vp.theta = pose_rng.uniform(-30.0, 30.0);
            vp.phi = test ? pose_rng.uniform(20.0, 30.0) : pose_rng.uniform(0.0, 15.0);
            out.push_back(data::synth_scene(scene_seed, vp, cfg.model.image_size,
                                            cfg.model.num_classes, cfg.data.texture_seed));
        }
    }
    return out;
}

model::Sample to_model_sample(const data::SegSample& s) {
    return model::Sample{s.image, s.labels};
}

metrics::IouResult evaluate(const model::TrainState& state,
                            const std::vector<model::Sample>& samples) {
    if (samples.empty()) throw DataError("evaluate: no samples");
    int H = samples[0].labels.dim(0), W = samples[0].labels.dim(1);
    Tensor preds({H * (int)samples.size(), W});
    Tensor labels({H * (int)samples.size(), W});
    for (size_t i = 0; i < samples.size(); ++i) {
        Tensor lg = model::predict_logits(state, samples[i].image);
        Tensor p = metrics::argmax_classes(lg);
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                preds.at((int)i * H + y, x) = p.at(y, x);
                labels.at((int)i * H + y, x) = samples[i].labels.at(y, x);
            }
    }
    return metrics::miou(preds, labels, state.cfg.num_classes);
}

RunReport train_and_evaluate(const ExperimentConfig& cfg, model::TrainState* out_state) {
    cfg.validate();
    auto t0 = std::chrono::steady_clock::now();
    RunReport rep;
    rep.name = cfg.name;
    rep.seed = cfg.data.seed;
    rep.config_hash = config_hash(cfg);

    std::vector<data::SegSample> train_raw = make_split(cfg, false);
    std::vector<data::SegSample> test_raw = make_split(cfg, true);

    model::ModelConfig mcfg = cfg.model;
    mcfg.max_iterations = cfg.steps;
    model::TrainState state = model::TrainState::init(mcfg, cfg.data.seed);
    rep.param_count = state.params.parameter_count();
    rep.codec_param_count = state.params.codec_parameter_count();

    bool do_augment = cfg.augment != "none";
    data::AugmentKind kind =
        do_augment ? data::augment_kind_from_name(cfg.augment) : data::AugmentKind::kRotate;
    Rng order_rng(derive_seed(cfg.data.seed, "order", 0));
    Rng aug_rng(derive_seed(cfg.data.seed, "augment", 0));

    for (int step = 0; step < cfg.steps; ++step) {
        std::vector<model::Sample> batch;
        for (int b = 0; b < cfg.batch_size; ++b) {
            const data::SegSample& raw = train_raw[order_rng.uniform_int((int)train_raw.size())];
            // Augment half the draws so the clean training distribution stays
            // represented alongside the warped one.
            if (do_augment && aug_rng.uniform(0.0, 1.0) < 0.5) {
                batch.push_back(to_model_sample(data::classic_augment(raw, kind, aug_rng)));
            } else {
                batch.push_back(to_model_sample(raw));
            }
        }
        model::StepResult r = model::train_step(state, batch);
        rep.loss_curve.push_back(r.total);
    }
    rep.iterations = state.iteration;

    std::vector<model::Sample> test;
    for (const auto& s : test_raw) test.push_back(to_model_sample(s));
    metrics::IouResult iou = evaluate(state, test);
    rep.miou = iou.mean;
    rep.per_class_iou = iou.per_class;

    std::vector<model::Sample> train;
    for (const auto& s : train_raw) train.push_back(to_model_sample(s));
    rep.train_miou = evaluate(state, train).mean;

    if (out_state) *out_state = std::move(state);
    rep.wall_clock_sec =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rep;
}

ExperimentConfig apply_axis(const ExperimentConfig& base, const std::string& axis,
                            double value) {
    ExperimentConfig cfg = base;
    if (axis == "contourlet_T") {
        cfg.model.T = (int)value;
    } else if (axis == "prototypes_N") {
        cfg.model.prototypes = (int)value;
    } else if (axis == "calib_layers") {
        cfg.model.L_cal = (int)value;
    } else if (axis == "pmp_M") {
        cfg.model.M = (int)value;
    } else if (axis == "augmentation") {
        // 0 plain/no-augment, 1..5 plain + classic kind, 6 full model.
        int v = (int)value;
        if (v == 6) {
            cfg.model.use_pmp = true;
            cfg.augment = "none";
        } else {
            cfg.model.use_pmp = false;
            if (v == 0) {
                cfg.augment = "none";
            } else if (v >= 1 && v <= 5) {
                cfg.augment = data::augment_kind_name((data::AugmentKind)(v - 1));
            } else {
                throw ConfigError("augmentation axis value out of range");
            }
        }
    } else {
        throw ConfigError("unknown ablation axis: " + axis);
    }
    return cfg;
}

std::vector<RunReport> run_ablation(const ExperimentConfig& base, const std::string& axis,
                                    const std::vector<double>& values,
                                    const std::vector<uint64_t>& seeds) {
    if (values.empty() || seeds.empty())
        throw ConfigError("run_ablation: need at least one value and one seed");
    std::vector<RunReport> out;
    for (double v : values) {
        for (uint64_t s : seeds) {
            char val[32];
            std::snprintf(val, sizeof(val), "%g", v);
            ExperimentConfig cfg = apply_axis(base, axis, v);
            cfg.data.seed = s;
            cfg.name = axis + "=" + val + "_seed" + std::to_string(s);
            try {
                out.push_back(train_and_evaluate(cfg));
            } catch (const std::exception& e) {
                RunReport fail;
                fail.name = cfg.name;
                fail.seed = s;
                fail.error = e.what();
                out.push_back(std::move(fail));
            }
        }
    }
    return out;
}

std::string RunReport::to_json(bool include_wall_clock) const {
    ordered_json j;
    j["name"] = name;
    j["ok"] = ok();
    if (!ok()) j["error"] = error;
    j["config_hash"] = config_hash;
    j["seed"] = seed;
    j["iterations"] = iterations;
    j["param_count"] = param_count;
    j["codec_param_count"] = codec_param_count;
    j["train_miou"] = train_miou;
    j["miou"] = miou;
    j["per_class_iou"] = per_class_iou;
    j["loss_curve"] = loss_curve;
    if (include_wall_clock) j["wall_clock_sec"] = wall_clock_sec;
    return j.dump();
}

void write_reports_jsonl(const std::vector<RunReport>& reports, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open for writing: " + path);
    for (const RunReport& r : reports) out << r.to_json(true) << "\n";
    if (!out) throw DataError("short write: " + path);
}

void write_reports_csv(const std::vector<RunReport>& reports, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open for writing: " + path);
    out << "name,ok,seed,iterations,param_count,codec_param_count,train_miou,miou,"
           "final_loss,wall_clock_sec\n";
    for (const RunReport& r : reports) {
        double final_loss = r.loss_curve.empty() ? 0.0 : r.loss_curve.back();
        char line[512];
        std::snprintf(line, sizeof(line), "%s,%d,%llu,%lld,%lld,%lld,%.17g,%.17g,%.17g,%.3f\n",
                      r.name.c_str(), r.ok() ? 1 : 0, (unsigned long long)r.seed,
                      r.iterations, r.param_count, r.codec_param_count, r.train_miou, r.miou,
                      final_loss, r.wall_clock_sec);
        out << line;
    }
    if (!out) throw DataError("short write: " + path);
}

namespace {

void check_keys(const ordered_json& j, std::initializer_list<const char*> allowed,
                const char* ctx) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool known = false;
        for (const char* a : allowed)
            if (it.key() == a) known = true;
        if (!known)
            throw ConfigError(std::string("unknown config key '") + it.key() + "' in " + ctx);
    }
}

template <typename T>
void read_field(const ordered_json& j, const char* key, T& target) {
    if (j.contains(key)) target = j.at(key).get<T>();
}

}  // namespace

ExperimentConfig config_from_json(const std::string& text) {
    ordered_json j;
    try {
        j = ordered_json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("config is not valid JSON: ") + e.what(), e.byte);
    }
    if (!j.is_object()) throw ConfigError("config root must be an object");
    check_keys(j, {"name", "batch_size", "steps", "augment", "model", "data"}, "root");

    ExperimentConfig cfg;
    read_field(j, "name", cfg.name);
    read_field(j, "batch_size", cfg.batch_size);
    read_field(j, "steps", cfg.steps);
    read_field(j, "augment", cfg.augment);

    if (j.contains("model")) {
        const ordered_json& m = j.at("model");
        check_keys(m,
                   {"image_size", "in_channels", "num_classes", "embed_dim", "block_channels",
                    "patch_kernel", "patch_stride", "plain_layers", "mlp_mult", "head_hidden",
                    "M", "L_cal", "prototypes", "T", "z", "descriptor_dim", "alpha",
                    "pseudo_eta", "pseudo_stochastic", "lambda_rec", "warmup_fraction", "lr", "momentum", "grad_clip", "max_iterations",
                    "use_pmp"},
                   "model");
        model::ModelConfig& c = cfg.model;
        read_field(m, "image_size", c.image_size);
        read_field(m, "in_channels", c.in_channels);
        read_field(m, "num_classes", c.num_classes);
        read_field(m, "embed_dim", c.embed_dim);
        read_field(m, "block_channels", c.block_channels);
        read_field(m, "patch_kernel", c.patch_kernel);
        read_field(m, "patch_stride", c.patch_stride);
        read_field(m, "plain_layers", c.plain_layers);
        read_field(m, "mlp_mult", c.mlp_mult);
        read_field(m, "head_hidden", c.head_hidden);
        read_field(m, "M", c.M);
        read_field(m, "L_cal", c.L_cal);
        read_field(m, "prototypes", c.prototypes);
        read_field(m, "T", c.T);
        read_field(m, "z", c.z);
        read_field(m, "descriptor_dim", c.descriptor_dim);
        read_field(m, "alpha", c.alpha);
        read_field(m, "lambda_rec", c.lambda_rec);
        read_field(m, "warmup_fraction", c.warmup_fraction);
        read_field(m, "lr", c.lr);
        read_field(m, "momentum", c.momentum);
        read_field(m, "grad_clip", c.grad_clip);
        read_field(m, "pseudo_eta", c.pseudo_eta);
        read_field(m, "pseudo_stochastic", c.pseudo_stochastic);
        read_field(m, "max_iterations", c.max_iterations);
        read_field(m, "use_pmp", c.use_pmp);
    }
    if (j.contains("data")) {
        const ordered_json& d = j.at("data");
        check_keys(d, {"train_scenes", "test_scenes", "views_per_scene", "seed", "texture_seed"},
                   "data");
        read_field(d, "train_scenes", cfg.data.train_scenes);
        read_field(d, "test_scenes", cfg.data.test_scenes);
        read_field(d, "views_per_scene", cfg.data.views_per_scene);
        read_field(d, "seed", cfg.data.seed);
        read_field(d, "texture_seed", cfg.data.texture_seed);
    }
    cfg.validate();
    return cfg;
}

ExperimentConfig load_config_file(const std::string& path) {
    std::vector<uint8_t> bytes = io::read_file(path);
    return config_from_json(std::string(bytes.begin(), bytes.end()));
}

std::string config_to_json(const ExperimentConfig& cfg) {
    ordered_json j;
    j["name"] = cfg.name;
    j["batch_size"] = cfg.batch_size;
    j["steps"] = cfg.steps;
    j["augment"] = cfg.augment;
    const model::ModelConfig& c = cfg.model;
    j["model"] = {{"image_size", c.image_size},
                  {"in_channels", c.in_channels},
                  {"num_classes", c.num_classes},
                  {"embed_dim", c.embed_dim},
                  {"block_channels", c.block_channels},
                  {"patch_kernel", c.patch_kernel},
                  {"patch_stride", c.patch_stride},
                  {"plain_layers", c.plain_layers},
                  {"mlp_mult", c.mlp_mult},
                  {"head_hidden", c.head_hidden},
                  {"M", c.M},
                  {"L_cal", c.L_cal},
                  {"prototypes", c.prototypes},
                  {"T", c.T},
                  {"z", c.z},
                  {"descriptor_dim", c.descriptor_dim},
                  {"alpha", c.alpha},
                  {"lambda_rec", c.lambda_rec},
                  {"warmup_fraction", c.warmup_fraction},
                  {"lr", c.lr},
                  {"momentum", c.momentum},
                  {"grad_clip", c.grad_clip},
                  {"pseudo_eta", c.pseudo_eta},
                  {"pseudo_stochastic", c.pseudo_stochastic},
                  {"max_iterations", c.max_iterations},
                  {"use_pmp", c.use_pmp}};
    j["data"] = {{"train_scenes", cfg.data.train_scenes},
                 {"test_scenes", cfg.data.test_scenes},
                 {"views_per_scene", cfg.data.views_per_scene},
                 {"seed", cfg.data.seed},
                 {"texture_seed", cfg.data.texture_seed}};
    return j.dump(2);
}

uint64_t config_hash(const ExperimentConfig& cfg) {
    std::string s = config_to_json(cfg);
    return fnv1a(s.data(), s.size());
}

}  // namespace ppt::exp
