#include "pptformer/model.hpp"

#include <cmath>
#include <cstring>
#include <sstream>

#include "pptformer/contourlet.hpp"
#include "pptformer/serialize.hpp"

namespace ppt::model {

codec::CodecConfig ModelConfig::codec_config() const {
    codec::CodecConfig c;
    c.channels = block_channels;
    c.T = T;
    c.z = z;
    c.descriptor_dim = descriptor_dim;
    return c;
}

int ModelConfig::bank_dim() const {
    return codec::bank_vector_length(codec_config(), block_grid(1), block_grid(1));
}

void ModelConfig::validate() const {
    if (image_size < 8) throw ConfigError("model: image_size too small");
    if (patch_stride < 1 || image_size % patch_stride != 0)
        throw ConfigError("model: image_size must be a multiple of patch_stride");
    if (grid1() % 2 != 0) throw ConfigError("model: patch grid must have even extent");
    if (in_channels < 1) throw ConfigError("model: in_channels must be positive");
    if (num_classes < 2) throw ConfigError("model: need at least two classes");
    if (embed_dim < 1 || block_channels < 1) throw ConfigError("model: widths must be positive");
    if (patch_kernel < 1 || patch_kernel % 2 == 0)
        throw ConfigError("model: patch_kernel must be odd");
    if (plain_layers < 1) throw ConfigError("model: need at least one plain layer");
    if (M < 1) throw ConfigError("model: fusion chain length must be >= 1");
    if (L_cal < 0) throw ConfigError("model: calibration length must be >= 0");
    if (prototypes < 1) throw ConfigError("model: need at least one prototype");
    if (T < 0) throw ConfigError("model: contourlet levels must be >= 0");
    if (T > 0 && (z < 1 || z > 4)) throw ConfigError("model: tree depth out of range");
    if (descriptor_dim < 1) throw ConfigError("model: descriptor_dim must be positive");
    if (alpha < 0 || alpha > 1) throw ConfigError("model: alpha must lie in [0,1]");
    if (pseudo_eta < 0 || pseudo_eta > 1)
        throw ConfigError("model: pseudo_eta must lie in [0,1]");
    if (lambda_rec < 0) throw ConfigError("model: lambda_rec must be >= 0");
    if (warmup_fraction < 0 || warmup_fraction > 1)
        throw ConfigError("model: warmup_fraction must lie in [0,1]");
    if (lr <= 0) throw ConfigError("model: lr must be positive");
    if (momentum < 0 || momentum >= 1) throw ConfigError("model: momentum must lie in [0,1)");
    if (grad_clip < 0) throw ConfigError("model: grad_clip must be >= 0");
    if (max_iterations < 1) throw ConfigError("model: max_iterations must be positive");
    if (use_pmp && T > 0)
        contourlet::check_depth(block_grid(1), block_grid(1), T);
}

namespace {

Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }

Tensor ones(std::vector<int> shape) { return Tensor(std::move(shape), 1.0); }

AttnLayerParams init_attn_layer(int c, int hid, Rng& rng) {
    double s = 1.0 / std::sqrt((double)c);
    AttnLayerParams p;
    p.ln1_g = ones({c});
    p.ln1_b = zeros({c});
    p.wq = rng.normal_tensor({c, c}, s);
    p.bq = zeros({c});
    p.wk = rng.normal_tensor({c, c}, s);
    p.bk = zeros({c});
    p.wv = rng.normal_tensor({c, c}, s);
    p.bv = zeros({c});
    p.wo = rng.normal_tensor({c, c}, s);
    p.bo = zeros({c});
    p.ln2_g = ones({c});
    p.ln2_b = zeros({c});
    p.mw1 = rng.normal_tensor({c, hid}, s);
    p.mb1 = zeros({hid});
    p.mw2 = rng.normal_tensor({hid, c}, 1.0 / std::sqrt((double)hid));
    p.mb2 = zeros({c});
    return p;
}

}  // namespace

ModelParams ModelParams::init(const ModelConfig& cfg, Rng& rng) {
    cfg.validate();
    ModelParams p;
    int e = cfg.embed_dim, c = cfg.block_channels;
    p.patch_w = rng.normal_tensor({cfg.patch_kernel, cfg.patch_kernel, cfg.in_channels, e},
                                  1.0 / std::sqrt((double)(cfg.patch_kernel * cfg.patch_kernel *
                                                           cfg.in_channels)));
    p.patch_b = zeros({e});
    for (int l = 0; l < cfg.plain_layers; ++l)
        p.plain.push_back(init_attn_layer(e, cfg.mlp_mult * e, rng));
    for (int i = 0; i < 3; ++i) {
        int in_c = i == 0 ? e : c;
        PptBlockParams& b = p.blocks[i];
        b.t_w = rng.normal_tensor({3, 3, in_c, c}, 1.0 / std::sqrt(9.0 * in_c));
        b.t_b = zeros({c});
        b.ln_g = ones({c});
        b.ln_b = zeros({c});
        b.fw1 = rng.normal_tensor({c, cfg.mlp_mult * c}, 1.0 / std::sqrt((double)c));
        b.fb1 = zeros({cfg.mlp_mult * c});
        b.fw2 = rng.normal_tensor({cfg.mlp_mult * c, c},
                                  1.0 / std::sqrt((double)(cfg.mlp_mult * c)));
        b.fb2 = zeros({c});
    }
    Rng crng = rng.fork(0xC0DEC);
    p.codec = codec::CodecParams::init(cfg.codec_config(), crng);
    int cat = e + 3 * c;
    p.head_ln_g = ones({cat});
    p.head_ln_b = zeros({cat});
    p.head_w1 = rng.normal_tensor({cat, cfg.head_hidden}, 1.0 / std::sqrt((double)cat));
    p.head_b1 = zeros({cfg.head_hidden});
    p.head_w2 = rng.normal_tensor({cfg.head_hidden, cfg.num_classes},
                                  1.0 / std::sqrt((double)cfg.head_hidden));
    p.head_b2 = zeros({cfg.num_classes});
    return p;
}

void ModelParams::for_each(const std::function<void(const std::string&, Tensor&)>& fn) {
    fn("patch_w", patch_w);
    fn("patch_b", patch_b);
    for (size_t l = 0; l < plain.size(); ++l) {
        std::string pre = "plain" + std::to_string(l) + ".";
        AttnLayerParams& a = plain[l];
        fn(pre + "ln1_g", a.ln1_g);
        fn(pre + "ln1_b", a.ln1_b);
        fn(pre + "wq", a.wq);
        fn(pre + "bq", a.bq);
        fn(pre + "wk", a.wk);
        fn(pre + "bk", a.bk);
        fn(pre + "wv", a.wv);
        fn(pre + "bv", a.bv);
        fn(pre + "wo", a.wo);
        fn(pre + "bo", a.bo);
        fn(pre + "ln2_g", a.ln2_g);
        fn(pre + "ln2_b", a.ln2_b);
        fn(pre + "mw1", a.mw1);
        fn(pre + "mb1", a.mb1);
        fn(pre + "mw2", a.mw2);
        fn(pre + "mb2", a.mb2);
    }
    for (size_t i = 0; i < blocks.size(); ++i) {
        std::string pre = "block" + std::to_string(i) + ".";
        PptBlockParams& b = blocks[i];
        fn(pre + "t_w", b.t_w);
        fn(pre + "t_b", b.t_b);
        fn(pre + "ln_g", b.ln_g);
        fn(pre + "ln_b", b.ln_b);
        fn(pre + "fw1", b.fw1);
        fn(pre + "fb1", b.fb1);
        fn(pre + "fw2", b.fw2);
        fn(pre + "fb2", b.fb2);
    }
    codec.for_each([&](const std::string& n, Tensor& t) { fn("codec." + n, t); });
    fn("head_ln_g", head_ln_g);
    fn("head_ln_b", head_ln_b);
    fn("head_w1", head_w1);
    fn("head_b1", head_b1);
    fn("head_w2", head_w2);
    fn("head_b2", head_b2);
}

long long ModelParams::parameter_count() const {
    long long n = 0;
    const_cast<ModelParams*>(this)->for_each(
        [&](const std::string&, Tensor& t) { n += t.size(); });
    return n;
}

long long ModelParams::codec_parameter_count() const { return codec.parameter_count(); }

ag::Var VarMap::at(const std::string& name) const {
    for (const auto& [n, v] : entries)
        if (n == name) return v;
    throw StateError("unknown parameter: " + name);
}

VarMap leaf_params(ag::Tape& tape, ModelParams& params, bool requires_grad) {
    VarMap vm;
    params.for_each([&](const std::string& n, Tensor& t) {
        vm.entries.emplace_back(n, tape.leaf(t, requires_grad));
    });
    return vm;
}

namespace {

// Mixture affinity of the bank frozen at call time; exact analytic backward.
ag::Var mixture_affinity_op(ag::Var v, const PrototypeBank& bank) {
    PrototypeBank snap = bank;
    double g = snap.mixture_affinity(v.value().raw());
    return v.tape()->make(
        Tensor::from_data({1}, {g}), [v, snap](ag::Tape& tp, const Tensor& gr) {
            std::vector<double> d = snap.mixture_affinity_grad(v.value().raw());
            Tensor gx(v.value().shape());
            for (long long i = 0; i < gx.size(); ++i) gx[i] = gr[0] * d[i];
            tp.accumulate(v, gx);
        });
}

ag::Var plain_attention_layer(ag::Var x, const VarMap& vm, const std::string& pre, int c,
                              attention::Probe* probe) {
    ag::Var h = ag::layer_norm(x, vm.at(pre + "ln1_g"), vm.at(pre + "ln1_b"));
    ag::Var q = ag::linear(h, vm.at(pre + "wq"), vm.at(pre + "bq"));
    ag::Var k = ag::linear(h, vm.at(pre + "wk"), vm.at(pre + "bk"));
    ag::Var v = ag::linear(h, vm.at(pre + "wv"), vm.at(pre + "bv"));
    ag::Var a = ag::softmax_rows(ag::scale(ag::matmul_nt(q, k), 1.0 / std::sqrt((double)c)));
    if (probe) probe->record(a.value());
    ag::Var attn = ag::linear(ag::matmul(a, v), vm.at(pre + "wo"), vm.at(pre + "bo"));
    x = ag::add(x, attn);
    ag::Var h2 = ag::layer_norm(x, vm.at(pre + "ln2_g"), vm.at(pre + "ln2_b"));
    ag::Var m = ag::linear(ag::tanh_op(ag::linear(h2, vm.at(pre + "mw1"), vm.at(pre + "mb1"))),
                           vm.at(pre + "mw2"), vm.at(pre + "mb2"));
    return ag::add(x, m);
}

ag::Var token_ffn(ag::Var x, const VarMap& vm, const std::string& pre) {
    ag::Var h = ag::layer_norm(x, vm.at(pre + "ln_g"), vm.at(pre + "ln_b"));
    ag::Var m = ag::linear(ag::tanh_op(ag::linear(h, vm.at(pre + "fw1"), vm.at(pre + "fb1"))),
                           vm.at(pre + "fw2"), vm.at(pre + "fb2"));
    return ag::add(x, m);
}

}  // namespace

ForwardResult forward(ag::Tape& tape, const ModelConfig& cfg, const VarMap& vars,
                      PrototypeBank& bank, const Tensor& image, bool train_mode, bool warmup,
                      attention::Probe* probe, Rng* pseudo_rng) {
    if (image.rank() != 3 || image.dim(0) != cfg.image_size || image.dim(1) != cfg.image_size ||
        image.dim(2) != cfg.in_channels)
        throw ShapeError("forward: image extents do not match the configured size");

    codec::CodecConfig ccfg = cfg.codec_config();
    codec::CodecVars cvars;
    if (cfg.use_pmp)
        cvars = codec::CodecVars{
            vars.at("codec.w_sp"),   vars.at("codec.b_sp"),   vars.at("codec.w_sd"),
            vars.at("codec.b_sd"),   vars.at("codec.dec_w1"), vars.at("codec.dec_b1"),
            vars.at("codec.dec_w2"), vars.at("codec.dec_b2"), vars.at("codec.dec_w3"),
            vars.at("codec.dec_b3")};

    // Plain block: patch embedding plus projection-based transformer layers.
    int g1 = cfg.grid1(), e = cfg.embed_dim, c = cfg.block_channels;
    ag::Var img = tape.leaf(image);
    ag::Var emb = ag::add_channel_bias(
        ag::conv2d_same(img, vars.at("patch_w"), cfg.patch_stride), vars.at("patch_b"));
    ag::Var x = ag::reshape(emb, {g1 * g1, e});
    for (int l = 0; l < cfg.plain_layers; ++l)
        x = plain_attention_layer(x, vars, "plain" + std::to_string(l) + ".", e, probe);
    ag::Var f1_map = ag::reshape(x, {g1, g1, e});

    ForwardResult out;
    out.rec_loss = tape.leaf(Tensor({1}));
    ag::Var prev_map = f1_map;
    std::array<ag::Var, 3> block_maps;
    for (int i = 0; i < 3; ++i) {
        std::string pre = "block" + std::to_string(i) + ".";
        int stride = i == 1 ? 2 : 1;
        ag::Var fmap = ag::add_channel_bias(
            ag::conv2d_same(prev_map, vars.at(pre + "t_w"), stride), vars.at(pre + "t_b"));
        int g = fmap.value().dim(0);
        ag::Var a = ag::reshape(fmap, {g * g, c});

        ag::Var fused;
        if (cfg.use_pmp) {
            codec::Perspective p = codec::encode_perspective(ccfg, cvars, fmap);
            ag::Var bvec = codec::bank_vector(ccfg, p);
            if (train_mode) bank.observe(bvec.value().raw());
            out.rec_loss =
                ag::add(out.rec_loss, codec::reconstruction_loss(ccfg, cvars, fmap, p));
            if (!warmup && bank.total_observations() > 0) {
                ag::Var pvec = bvec;
                ag::Var pmap = p.combined;
                if (cfg.pseudo_stochastic && pseudo_rng && cfg.pseudo_eta > 0) {
                    // Nudge toward a pi-sampled prototype so the pseudo branch
                    // sees genuinely different perspectives during training.
                    std::vector<double> proto = bank.sample_prototype(*pseudo_rng);
                    double eta = cfg.pseudo_eta;
                    std::vector<double> scaled(proto);
                    for (double& x : scaled) x *= eta;
                    Tensor pv = Tensor::from_data({(int)proto.size()}, scaled);
                    pvec = ag::add(ag::scale(bvec, 1.0 - eta), tape.leaf(pv));
                    int ph = p.combined.value().dim(0), pw = p.combined.value().dim(1);
                    int dch = p.combined.value().dim(2);
                    Tensor pm(std::vector<int>{2, 2, dch});
                    for (long long j = 0; j < pm.size(); ++j) pm[j] = proto[j];
                    ag::Var proto_map = ag::bilinear_resize(tape.leaf(pm), ph, pw);
                    pmap = ag::add(ag::scale(p.combined, 1.0 - eta),
                                   ag::scale(proto_map, eta));
                }
                ag::Var g_aff = mixture_affinity_op(pvec, bank);
                ag::Var mod = ag::affine_scalar(g_aff, cfg.alpha, 1.0 - cfg.alpha);
                ag::Var pseudo_map = ag::broadcast_mul(pmap, mod);
                ag::Var f_pseudo = codec::decode_perspective(ccfg, cvars, pseudo_map);
                ag::Var b = ag::reshape(f_pseudo, {g * g, c});
                fused = attention::pmp_chain(a, b, cfg.M, probe);
                fused = attention::calibrate(a, fused, cfg.L_cal, probe);
                out.pseudo_used += 1;
            } else {
                fused = attention::attention_step(a, a, probe);
            }
        } else {
            fused = attention::attention_step(a, a, probe);
        }
        ag::Var tok = ag::add(a, fused);
        tok = token_ffn(tok, vars, pre);
        block_maps[i] = ag::reshape(tok, {g, g, c});
        prev_map = block_maps[i];
    }

    // Multi-scale fusion on the patch grid, then the all-MLP class head.
    ag::Var up3 = ag::bilinear_resize(block_maps[1], g1, g1);
    ag::Var up4 = ag::bilinear_resize(block_maps[2], g1, g1);
    ag::Var cat = ag::concat_channels({f1_map, block_maps[0], up3, up4});
    int cat_c = e + 3 * c;
    ag::Var flat = ag::reshape(cat, {g1 * g1, cat_c});
    // Normalizing the concatenated features keeps the tanh hidden layer out of
    // saturation across the wide dynamic range the blocks can produce.
    flat = ag::layer_norm(flat, vars.at("head_ln_g"), vars.at("head_ln_b"));
    ag::Var h = ag::tanh_op(ag::linear(flat, vars.at("head_w1"), vars.at("head_b1")));
    ag::Var logits_grid = ag::linear(h, vars.at("head_w2"), vars.at("head_b2"));
    ag::Var logits_map = ag::reshape(logits_grid, {g1, g1, cfg.num_classes});
    out.logits = ag::bilinear_resize(logits_map, cfg.image_size, cfg.image_size);
    return out;
}

ag::Var total_loss(const ModelConfig& cfg, ag::Var logits, const Tensor& labels,
                   ag::Var rec_loss) {
    ag::Var seg = ag::cross_entropy(logits, labels, cfg.num_classes);
    return ag::add(seg, ag::scale(rec_loss, cfg.lambda_rec));
}

TrainState TrainState::init(const ModelConfig& cfg, uint64_t seed) {
    cfg.validate();
    TrainState s;
    s.cfg = cfg;
    Rng rng(seed);
    s.params = ModelParams::init(cfg, rng);
    s.bank = PrototypeBank(cfg.prototypes, cfg.bank_dim());
    s.params.for_each(
        [&](const std::string&, Tensor& t) { s.velocity.push_back(Tensor(t.shape())); });
    return s;
}

long long TrainState::warmup_iterations() const {
    return (long long)std::floor(cfg.warmup_fraction * cfg.max_iterations);
}

Tensor predict_logits(const TrainState& state, const Tensor& image) {
    ag::Tape tape(false);
    ModelParams& params = const_cast<ModelParams&>(state.params);
    VarMap vm = leaf_params(tape, params, false);
    PrototypeBank bank = state.bank;
    ForwardResult fr =
        forward(tape, state.cfg, vm, bank, image, false, state.in_warmup(), nullptr);
    return fr.logits.value();
}

StepResult train_step(TrainState& state, const std::vector<Sample>& batch) {
    if (batch.empty()) throw DataError("train_step: empty batch");
    ag::Tape tape;
    VarMap vm = leaf_params(tape, state.params, true);
    bool warmup = state.in_warmup();

    StepResult res;
    res.warmup = warmup;
    uint64_t it = (uint64_t)state.iteration;
    Rng pseudo_rng(fnv1a(&it, sizeof(it)));
    ag::Var total;
    for (const Sample& s : batch) {
        ForwardResult fr = forward(tape, state.cfg, vm, state.bank, s.image, true, warmup,
                                   nullptr, &pseudo_rng);
        ag::Var seg = ag::cross_entropy(fr.logits, s.labels, state.cfg.num_classes);
        ag::Var one = ag::add(seg, ag::scale(fr.rec_loss, state.cfg.lambda_rec));
        total = total.valid() ? ag::add(total, one) : one;
        res.seg += seg.value()[0];
        res.rec += fr.rec_loss.value()[0];
        res.pseudo_used += fr.pseudo_used;
    }
    double inv = 1.0 / (double)batch.size();
    total = ag::scale(total, inv);
    res.seg *= inv;
    res.rec *= inv;
    res.total = total.value()[0];

    if (!std::isfinite(res.total)) {
        std::ostringstream msg;
        msg << "train_step: non-finite loss at iteration " << state.iteration
            << " (seg=" << res.seg << ", rec=" << res.rec << ")";
        throw NumericError(msg.str());
    }

    tape.backward(total);

    size_t i = 0;
    double lr = state.cfg.lr, mu = state.cfg.momentum;
    state.params.for_each([&](const std::string& name, Tensor& t) {
        const Tensor& g = vm.entries[i].second.grad();
        Tensor& v = state.velocity[i++];
        if (g.empty()) {
            for (long long j = 0; j < v.size(); ++j) v[j] *= mu;
        } else {
            // Per-tensor norm clipping keeps the high-momentum optimizer
            // stable on the unnormalized reconstruction term without letting
            // its large codec gradients shrink the segmentation gradients.
            double clip_scale = 1.0;
            if (state.cfg.grad_clip > 0) {
                double norm = std::sqrt(sum_sq(g));
                if (norm > state.cfg.grad_clip) clip_scale = state.cfg.grad_clip / norm;
            }
            for (long long j = 0; j < v.size(); ++j) v[j] = mu * v[j] + clip_scale * g[j];
        }
        for (long long j = 0; j < t.size(); ++j) t[j] -= lr * v[j];
        if (!t.all_finite()) {
            std::ostringstream msg;
            msg << "train_step: non-finite parameter " << name << " at iteration "
                << state.iteration;
            throw NumericError(msg.str());
        }
    });
    state.iteration += 1;
    return res;
}

namespace {

constexpr uint32_t kCkptMagic = 0x43545050;  // "PPTC"
constexpr uint32_t kCkptVersion = 1;

void put_config(std::vector<uint8_t>& out, const ModelConfig& c) {
    for (int v : {c.image_size, c.in_channels, c.num_classes, c.embed_dim, c.block_channels,
                  c.patch_kernel, c.patch_stride, c.plain_layers, c.mlp_mult, c.head_hidden,
                  c.M, c.L_cal, c.prototypes, c.T, c.z, c.descriptor_dim, c.max_iterations})
        io::put(out, (int32_t)v);
    for (double v : {c.alpha, c.pseudo_eta, c.lambda_rec, c.warmup_fraction, c.lr, c.momentum,
                     c.grad_clip})
        io::put(out, v);
    io::put(out, (uint8_t)(c.pseudo_stochastic ? 1 : 0));
    io::put(out, (uint8_t)(c.use_pmp ? 1 : 0));
}

ModelConfig take_config(const std::vector<uint8_t>& in, size_t& off) {
    ModelConfig c;
    c.image_size = io::take<int32_t>(in, off, "image_size");
    c.in_channels = io::take<int32_t>(in, off, "in_channels");
    c.num_classes = io::take<int32_t>(in, off, "num_classes");
    c.embed_dim = io::take<int32_t>(in, off, "embed_dim");
    c.block_channels = io::take<int32_t>(in, off, "block_channels");
    c.patch_kernel = io::take<int32_t>(in, off, "patch_kernel");
    c.patch_stride = io::take<int32_t>(in, off, "patch_stride");
    c.plain_layers = io::take<int32_t>(in, off, "plain_layers");
    c.mlp_mult = io::take<int32_t>(in, off, "mlp_mult");
    c.head_hidden = io::take<int32_t>(in, off, "head_hidden");
    c.M = io::take<int32_t>(in, off, "M");
    c.L_cal = io::take<int32_t>(in, off, "L_cal");
    c.prototypes = io::take<int32_t>(in, off, "prototypes");
    c.T = io::take<int32_t>(in, off, "T");
    c.z = io::take<int32_t>(in, off, "z");
    c.descriptor_dim = io::take<int32_t>(in, off, "descriptor_dim");
    c.max_iterations = io::take<int32_t>(in, off, "max_iterations");
    c.alpha = io::take<double>(in, off, "alpha");
    c.pseudo_eta = io::take<double>(in, off, "pseudo_eta");
    c.lambda_rec = io::take<double>(in, off, "lambda_rec");
    c.warmup_fraction = io::take<double>(in, off, "warmup_fraction");
    c.lr = io::take<double>(in, off, "lr");
    c.momentum = io::take<double>(in, off, "momentum");
    c.grad_clip = io::take<double>(in, off, "grad_clip");
    c.pseudo_stochastic = io::take<uint8_t>(in, off, "pseudo_stochastic") != 0;
    c.use_pmp = io::take<uint8_t>(in, off, "use_pmp") != 0;
    return c;
}

}  // namespace

std::vector<uint8_t> save_checkpoint(const TrainState& state) {
    std::vector<uint8_t> out;
    io::put(out, kCkptMagic);
    io::put(out, kCkptVersion);
    put_config(out, state.cfg);
    io::put(out, (int64_t)state.iteration);
    std::vector<std::pair<std::string, const Tensor*>> named;
    const_cast<ModelParams&>(state.params)
        .for_each([&](const std::string& n, Tensor& t) { named.emplace_back(n, &t); });
    io::put(out, (uint32_t)named.size());
    for (auto& [n, t] : named) {
        io::put_string(out, n);
        io::put_tensor(out, *t);
    }
    io::put(out, (uint32_t)state.velocity.size());
    for (const Tensor& v : state.velocity) io::put_tensor(out, v);
    std::vector<uint8_t> bank = state.bank.snapshot();
    io::put(out, (uint64_t)bank.size());
    out.insert(out.end(), bank.begin(), bank.end());
    return out;
}

TrainState load_checkpoint(const std::vector<uint8_t>& bytes) {
    size_t off = 0;
    if (io::take<uint32_t>(bytes, off, "magic") != kCkptMagic)
        throw ParseError("not a checkpoint container", 0);
    if (io::take<uint32_t>(bytes, off, "version") != kCkptVersion)
        throw ParseError("unsupported checkpoint version", 4);
    ModelConfig cfg = take_config(bytes, off);
    cfg.validate();
    TrainState s = TrainState::init(cfg, 0);
    s.iteration = io::take<int64_t>(bytes, off, "iteration");
    uint32_t n_params = io::take<uint32_t>(bytes, off, "parameter count");
    size_t idx = 0;
    s.params.for_each([&](const std::string& name, Tensor& t) {
        if (idx++ >= n_params) throw ParseError("missing parameter: " + name, off);
        std::string got = io::take_string(bytes, off, "parameter name");
        if (got != name) throw ParseError("parameter order mismatch: " + got, off);
        Tensor loaded = io::take_tensor(bytes, off, name.c_str());
        if (!loaded.same_shape(t)) throw ParseError("parameter shape mismatch: " + name, off);
        t = std::move(loaded);
    });
    if (idx != n_params) throw ParseError("extra parameters in checkpoint", off);
    uint32_t n_vel = io::take<uint32_t>(bytes, off, "velocity count");
    if (n_vel != s.velocity.size()) throw ParseError("velocity count mismatch", off);
    for (Tensor& v : s.velocity) {
        Tensor loaded = io::take_tensor(bytes, off, "velocity");
        if (!loaded.same_shape(v)) throw ParseError("velocity shape mismatch", off);
        v = std::move(loaded);
    }
    uint64_t bank_len = io::take<uint64_t>(bytes, off, "bank length");
    if (off + bank_len > bytes.size()) throw ParseError("truncated bank snapshot", off);
    std::vector<uint8_t> bank_bytes(bytes.begin() + off, bytes.begin() + off + bank_len);
    off += bank_len;
    s.bank = PrototypeBank::restore(bank_bytes);
    if (off != bytes.size()) throw ParseError("trailing bytes in checkpoint", off);
    return s;
}

void save_checkpoint_file(const TrainState& state, const std::string& path) {
    io::write_file(path, save_checkpoint(state));
}

TrainState load_checkpoint_file(const std::string& path) {
    return load_checkpoint(io::read_file(path));
}

}  // namespace ppt::model
