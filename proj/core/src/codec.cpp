#include "pptformer/codec.hpp"

#include <cmath>

namespace ppt::codec {

CodecParams CodecParams::init(const CodecConfig& cfg, Rng& rng) {
    CodecParams p;
    int tex = cfg.texture_channels();
    int k = cfg.head_kernel;
    int D = cfg.descriptor_dim;
    int hid = cfg.decoder_hidden();
    double head_std = 1.0 / std::sqrt((double)(k * k * tex));
    p.w_sp = rng.normal_tensor({k, k, tex, 1}, head_std);
    p.b_sp = Tensor({1});
    p.w_sd = rng.normal_tensor({k, k, tex, D}, head_std);
    p.b_sd = Tensor({D});
    p.dec_w1 = rng.normal_tensor({D + 1, hid}, 1.0 / std::sqrt((double)(D + 1)));
    p.dec_b1 = Tensor({hid});
    p.dec_w2 = rng.normal_tensor({hid, hid}, 1.0 / std::sqrt((double)hid));
    p.dec_b2 = Tensor({hid});
    p.dec_w3 = rng.normal_tensor({hid, cfg.channels}, 1.0 / std::sqrt((double)hid));
    p.dec_b3 = Tensor({cfg.channels});
    return p;
}

void CodecParams::for_each(const std::function<void(const std::string&, Tensor&)>& fn) {
    fn("w_sp", w_sp);
    fn("b_sp", b_sp);
    fn("w_sd", w_sd);
    fn("b_sd", b_sd);
    fn("dec_w1", dec_w1);
    fn("dec_b1", dec_b1);
    fn("dec_w2", dec_w2);
    fn("dec_b2", dec_b2);
    fn("dec_w3", dec_w3);
    fn("dec_b3", dec_b3);
}

long long CodecParams::parameter_count() const {
    long long n = 0;
    const_cast<CodecParams*>(this)->for_each(
        [&](const std::string&, Tensor& t) { n += t.size(); });
    return n;
}

CodecVars CodecVars::leaf(ag::Tape& tape, CodecParams& p, bool rg) {
    return CodecVars{tape.leaf(p.w_sp, rg),   tape.leaf(p.b_sp, rg),
                     tape.leaf(p.w_sd, rg),   tape.leaf(p.b_sd, rg),
                     tape.leaf(p.dec_w1, rg), tape.leaf(p.dec_b1, rg),
                     tape.leaf(p.dec_w2, rg), tape.leaf(p.dec_b2, rg),
                     tape.leaf(p.dec_w3, rg), tape.leaf(p.dec_b3, rg)};
}

Perspective encode_perspective(const CodecConfig& cfg, const CodecVars& vars, ag::Var F) {
    if (F.value().rank() != 3) throw ShapeError("encode_perspective: expected (H,W,C)");
    if (F.value().dim(2) != cfg.channels)
        throw ShapeError("encode_perspective: channel mismatch with codec config");
    ag::Var tex = contourlet::contourlet_texture(F, cfg.T, cfg.z);
    ag::Var red = cfg.T == 0 ? tex : ag::channel_group_mean(tex, cfg.texture_channels());
    ag::Var sp = ag::sigmoid(ag::add_channel_bias(
        ag::conv2d_same(red, vars.w_sp, cfg.head_stride), vars.b_sp));
    ag::Var sd = ag::l2_normalize_channels(ag::add_channel_bias(
        ag::conv2d_same(red, vars.w_sd, cfg.head_stride), vars.b_sd));
    return Perspective{sp, sd, ag::concat_channels({sp, sd})};
}

ag::Var decode_perspective(const CodecConfig& cfg, const CodecVars& vars, ag::Var p_map) {
    const Tensor& pv = p_map.value();
    if (pv.rank() != 3 || pv.dim(2) != cfg.combined_channels())
        throw ShapeError("decode_perspective: descriptor dimensionality mismatch");
    int h = pv.dim(0), w = pv.dim(1);
    ag::Var x = ag::reshape(p_map, {h * w, cfg.combined_channels()});
    ag::Var h1 = ag::tanh_op(ag::linear(x, vars.dec_w1, vars.dec_b1));
    ag::Var h2 = ag::tanh_op(ag::linear(h1, vars.dec_w2, vars.dec_b2));
    ag::Var y = ag::linear(h2, vars.dec_w3, vars.dec_b3);
    ag::Var map = ag::reshape(y, {h, w, cfg.channels});
    return ag::bilinear_resize(map, h * cfg.head_stride, w * cfg.head_stride);
}

ag::Var reconstruction_loss(const CodecConfig& cfg, const CodecVars& vars, ag::Var F,
                            const Perspective& p) {
    ag::Var rec = decode_perspective(cfg, vars, p.combined);
    if (!rec.value().same_shape(F.value()))
        throw ShapeError("reconstruction_loss: decoded shape differs from F");
    return ag::sqrt_scalar(ag::sum_sq_diff(rec, F));
}

ag::Var bank_vector(const CodecConfig& cfg, const Perspective& p) {
    const Tensor& pv = p.combined.value();
    int h = pv.dim(0), w = pv.dim(1), c = pv.dim(2);
    if (cfg.pooling == BankPooling::kAvgPool2x2 && h % 2 == 0 && w % 2 == 0 && h > 2 && w > 2) {
        return ag::reshape(ag::avgpool_blocks(p.combined, 2, 2), {4 * c});
    }
    if (cfg.pooling == BankPooling::kAvgPool2x2) {
        // Grids at or below 2x2 are already bank-sized.
        if (h == 2 && w == 2) return ag::reshape(p.combined, {4 * c});
        return ag::reshape(ag::bilinear_resize(p.combined, 2, 2), {4 * c});
    }
    return ag::reshape(p.combined, {h * w * c});
}

int bank_vector_length(const CodecConfig& cfg, int grid_h, int grid_w) {
    int c = cfg.combined_channels();
    if (cfg.pooling == BankPooling::kAvgPool2x2) return 4 * c;
    return grid_h * grid_w * c;
}

Perspective encode_perspective(ag::Tape& tape, const CodecConfig& cfg, CodecParams& params,
                               const Tensor& F) {
    CodecVars vars = CodecVars::leaf(tape, params, false);
    return encode_perspective(cfg, vars, tape.leaf(F));
}

Tensor decode_perspective(const CodecConfig& cfg, CodecParams& params, const Tensor& p_map) {
    ag::Tape tape(false);
    CodecVars vars = CodecVars::leaf(tape, params, false);
    return decode_perspective(cfg, vars, tape.leaf(p_map)).value();
}

double reconstruction_loss(const CodecConfig& cfg, CodecParams& params, const Tensor& F) {
    ag::Tape tape(false);
    CodecVars vars = CodecVars::leaf(tape, params, false);
    ag::Var f = tape.leaf(F);
    Perspective p = encode_perspective(cfg, vars, f);
    return reconstruction_loss(cfg, vars, f, p).value()[0];
}

}  // namespace ppt::codec
