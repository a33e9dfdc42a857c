#pragma once

#include <array>
#include <string>
#include <vector>

#include "pptformer/attention.hpp"
#include "pptformer/autograd.hpp"
#include "pptformer/codec.hpp"
#include "pptformer/prototype_bank.hpp"
#include "pptformer/rng.hpp"

namespace ppt::model {

// Desk-scale network: one plain transformer block over a stride-4 patch grid,
// then three perspective-aware blocks sharing one codec and prototype bank.
struct ModelConfig {
    int image_size = 64;
    int in_channels = 1;
    int num_classes = 5;  // K
    int embed_dim = 32;       // plain-block width
    int block_channels = 48;  // perspective-block width
    int patch_kernel = 5;
    int patch_stride = 4;
    int plain_layers = 2;
    int mlp_mult = 2;     // transformer MLP hidden = mult * width
    int head_hidden = 64;
    int M = 4;            // fusion chain length
    int L_cal = 2;        // calibration chain length
    int prototypes = 64;  // bank capacity N
    int T = 2;            // contourlet levels
    int z = 3;            // directional tree depth
    int descriptor_dim = 8;
    double alpha = 0.5;   // pseudo modulation blend
    double pseudo_eta = 0.25;       // stochastic nudge toward a sampled prototype
    bool pseudo_stochastic = true;  // training-time pseudo diversity
    double lambda_rec = 0.4;
    double warmup_fraction = 0.3;
    double lr = 5e-3;
    double momentum = 0.98;
    double grad_clip = 1.0;  // global-norm ceiling; 0 disables clipping
    int max_iterations = 5000;
    bool use_pmp = true;  // false: plain self-attention everywhere, no codec

    int grid1() const { return image_size / patch_stride; }
    // Blocks 2..4 run at scales (1, 1/2, 1/2) of the patch grid.
    int block_grid(int i) const { return i == 0 ? grid1() : grid1() / 2; }
    codec::CodecConfig codec_config() const;
    int bank_dim() const;
    void validate() const;  // ConfigError on violated invariants
};

// One pre-norm self-attention + MLP transformer layer with learned
// projections (plain block only; the perspective chain is projection-free).
struct AttnLayerParams {
    Tensor ln1_g, ln1_b, wq, bq, wk, bk, wv, bv, wo, bo;
    Tensor ln2_g, ln2_b, mw1, mb1, mw2, mb2;
};

// Transition conv into the block plus the post-fusion feed-forward.
struct PptBlockParams {
    Tensor t_w, t_b;  // 3x3 conv; stride 2 entering block 3
    Tensor ln_g, ln_b, fw1, fb1, fw2, fb2;
};

struct ModelParams {
    Tensor patch_w, patch_b;
    std::vector<AttnLayerParams> plain;
    std::array<PptBlockParams, 3> blocks;
    codec::CodecParams codec;
    Tensor head_ln_g, head_ln_b, head_w1, head_b1, head_w2, head_b2;

    static ModelParams init(const ModelConfig& cfg, Rng& rng);
    void for_each(const std::function<void(const std::string&, Tensor&)>& fn);
    long long parameter_count() const;        // full model
    long long codec_parameter_count() const;  // perspective-specific overhead
};

// Named parameter handles on one tape, in for_each order.
struct VarMap {
    std::vector<std::pair<std::string, ag::Var>> entries;
    ag::Var at(const std::string& name) const;  // StateError if unknown
};
VarMap leaf_params(ag::Tape& tape, ModelParams& params, bool requires_grad);

struct TrainState {
    ModelConfig cfg;
    ModelParams params;
    PrototypeBank bank;
    std::vector<Tensor> velocity;  // for_each order
    long long iteration = 0;

    static TrainState init(const ModelConfig& cfg, uint64_t seed);
    long long warmup_iterations() const;
    bool in_warmup() const { return iteration < warmup_iterations(); }
};

struct ForwardResult {
    ag::Var logits;    // (H, W, K)
    ag::Var rec_loss;  // scalar, summed over the three perspective blocks
    long long pseudo_used = 0;  // fusion steps that consumed a pseudo feature
};

// train_mode feeds every block's pooled descriptor to the bank.
// pseudo_rng drives the stochastic prototype nudge; without it the pseudo
// path falls back to plain affinity modulation (the eval-time behavior).
ForwardResult forward(ag::Tape& tape, const ModelConfig& cfg, const VarMap& vars,
                      PrototypeBank& bank, const Tensor& image, bool train_mode,
                      bool warmup, attention::Probe* probe = nullptr,
                      Rng* pseudo_rng = nullptr);

// total = L_seg + lambda * L_rec; labels (H,W) ids with 255 ignored.
ag::Var total_loss(const ModelConfig& cfg, ag::Var logits, const Tensor& labels,
                   ag::Var rec_loss);

// Grad-free forward (bank untouched, pseudo path active unless warmup).
Tensor predict_logits(const TrainState& state, const Tensor& image);

struct Sample {
    Tensor image;   // (H, W, C)
    Tensor labels;  // (H, W)
};

struct StepResult {
    double total = 0, seg = 0, rec = 0;
    bool warmup = false;
    long long pseudo_used = 0;
};

// Forward/backward on the batch mean, SGD-momentum update, bank observation,
// iteration increment. NumericError with loss diagnostics on non-finite values.
StepResult train_step(TrainState& state, const std::vector<Sample>& batch);

// Versioned container: config, parameters, momentum buffers, iteration, bank.
std::vector<uint8_t> save_checkpoint(const TrainState& state);
TrainState load_checkpoint(const std::vector<uint8_t>& bytes);
void save_checkpoint_file(const TrainState& state, const std::string& path);
TrainState load_checkpoint_file(const std::string& path);

}  // namespace ppt::model
