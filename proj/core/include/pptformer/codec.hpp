#pragma once

#include <string>
#include <vector>

#include "pptformer/autograd.hpp"
#include "pptformer/contourlet.hpp"
#include "pptformer/rng.hpp"

namespace ppt::codec {

enum class BankPooling { kFlatten, kAvgPool2x2 };

struct CodecConfig {
    int channels = 48;       // block feature channels (input and reconstruction)
    int T = 2;               // contourlet levels
    int z = 3;               // directional tree depth
    int descriptor_dim = 8;  // D
    int head_kernel = 3;
    int head_stride = 2;
    int decoder_hidden_mult = 4;  // hidden width = mult * (D+1)
    BankPooling pooling = BankPooling::kAvgPool2x2;

    int texture_channels() const { return T == 0 ? channels : T * (1 << z); }
    int combined_channels() const { return descriptor_dim + 1; }
    int decoder_hidden() const { return decoder_hidden_mult * combined_channels(); }
};

// Encoder heads (point-ness + descriptor) and the per-pixel MLP decoder.
struct CodecParams {
    Tensor w_sp, b_sp;                    // (k,k,tex,1)
    Tensor w_sd, b_sd;                    // (k,k,tex,D)
    Tensor dec_w1, dec_b1;                // (D+1, hidden)
    Tensor dec_w2, dec_b2;                // (hidden, hidden)
    Tensor dec_w3, dec_b3;                // (hidden, channels)

    static CodecParams init(const CodecConfig& cfg, Rng& rng);
    void for_each(const std::function<void(const std::string&, Tensor&)>& fn);
    long long parameter_count() const;
};

// Same params hoisted onto a tape for one forward pass.
struct CodecVars {
    ag::Var w_sp, b_sp, w_sd, b_sd;
    ag::Var dec_w1, dec_b1, dec_w2, dec_b2, dec_w3, dec_b3;
    static CodecVars leaf(ag::Tape& tape, CodecParams& p, bool requires_grad);
};

struct Perspective {
    ag::Var pointness;    // (h, w, 1) in [0,1]
    ag::Var descriptors;  // (h, w, D), unit L2 per pixel
    ag::Var combined;     // (h, w, D+1)
};

// Contourlet texture -> channel-grouped reduction -> two parallel heads.
Perspective encode_perspective(const CodecConfig& cfg, const CodecVars& vars, ag::Var F);

// Per-pixel all-MLP decoder; (h,w,D+1) -> (stride*h, stride*w, channels).
ag::Var decode_perspective(const CodecConfig& cfg, const CodecVars& vars, ag::Var p_map);

// Euclidean norm of D_p(p) - F over all elements.
ag::Var reconstruction_loss(const CodecConfig& cfg, const CodecVars& vars, ag::Var F,
                            const Perspective& p);

// Descriptor vector handed to the prototype bank, still on the tape.
ag::Var bank_vector(const CodecConfig& cfg, const Perspective& p);
int bank_vector_length(const CodecConfig& cfg, int grid_h, int grid_w);

// Tensor-level wrappers (no gradients).
Perspective encode_perspective(ag::Tape& tape, const CodecConfig& cfg, CodecParams& params,
                               const Tensor& F);
Tensor decode_perspective(const CodecConfig& cfg, CodecParams& params, const Tensor& p_map);
double reconstruction_loss(const CodecConfig& cfg, CodecParams& params, const Tensor& F);

}  // namespace ppt::codec
