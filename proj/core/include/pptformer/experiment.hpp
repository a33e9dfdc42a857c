#pragma once

#include <string>
#include <vector>

#include "pptformer/augment.hpp"
#include "pptformer/dataset.hpp"
#include "pptformer/metrics.hpp"
#include "pptformer/model.hpp"

namespace ppt::exp {

// Perspective-shift split: train poses pitch in [0, 15] deg, test poses pitch
// in [20, 30] deg, disjoint scene seed ranges.
struct DataConfig {
    int train_scenes = 24;
    int test_scenes = 12;
    int views_per_scene = 2;
    uint64_t seed = 1;         // drives scene seeds, poses, and model init
    uint64_t texture_seed = 7; // class textures shared across scenes
};

struct ExperimentConfig {
    std::string name = "run";
    model::ModelConfig model;
    DataConfig data;
    int batch_size = 2;
    int steps = 400;
    std::string augment = "none";  // none | rotate | scale | persp_* | combo

    void validate() const;
};

struct RunReport {
    std::string name;
    std::string error;  // empty on success
    uint64_t config_hash = 0;
    uint64_t seed = 0;
    long long iterations = 0;
    long long param_count = 0;
    long long codec_param_count = 0;
    double train_miou = 0;
    double miou = 0;
    std::vector<double> per_class_iou;
    std::vector<double> loss_curve;  // one total-loss entry per step
    double wall_clock_sec = 0;       // excluded from the deterministic payload

    bool ok() const { return error.empty(); }
    // Canonical JSON; wall-clock only when include_wall_clock.
    std::string to_json(bool include_wall_clock) const;
};

std::vector<data::SegSample> make_split(const ExperimentConfig& cfg, bool test);
model::Sample to_model_sample(const data::SegSample& s);

// Full train + held-out evaluation; deterministic given the config. The final
// training state lands in *out_state when provided (for checkpointing).
RunReport train_and_evaluate(const ExperimentConfig& cfg,
                             model::TrainState* out_state = nullptr);
// Aggregate mIoU over a sample list with one global confusion matrix.
metrics::IouResult evaluate(const model::TrainState& state,
                            const std::vector<model::Sample>& samples);

// axis in {contourlet_T, prototypes_N, calib_layers, pmp_M, augmentation};
// augmentation values index (0 none, 1 rotate, 2 scale, 3 persp_vertical,
// 4 persp_horizontal, 5 combo) and switch the model to the plain baseline.
ExperimentConfig apply_axis(const ExperimentConfig& base, const std::string& axis,
                            double value);
std::vector<RunReport> run_ablation(const ExperimentConfig& base, const std::string& axis,
                                    const std::vector<double>& values,
                                    const std::vector<uint64_t>& seeds);

void write_reports_jsonl(const std::vector<RunReport>& reports, const std::string& path);
void write_reports_csv(const std::vector<RunReport>& reports, const std::string& path);

// Strict JSON config: unknown keys are ConfigError, malformed text ParseError.
ExperimentConfig config_from_json(const std::string& text);
ExperimentConfig load_config_file(const std::string& path);
std::string config_to_json(const ExperimentConfig& cfg);
uint64_t config_hash(const ExperimentConfig& cfg);

}  // namespace ppt::exp
