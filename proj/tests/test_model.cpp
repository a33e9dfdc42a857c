#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "pptformer/model.hpp"
#include "pptformer/numerics.hpp"

using namespace ppt;
using namespace ppt::model;

namespace {

ModelConfig tiny_config() {
    ModelConfig cfg;
    cfg.image_size = 32;
    cfg.in_channels = 1;
    cfg.num_classes = 3;
    cfg.embed_dim = 8;
    cfg.block_channels = 16;
    cfg.plain_layers = 1;
    cfg.head_hidden = 16;
    cfg.M = 2;
    cfg.L_cal = 1;
    cfg.prototypes = 8;
    cfg.T = 1;
    cfg.z = 2;
    cfg.descriptor_dim = 4;
    cfg.max_iterations = 100;
    return cfg;
}

Sample random_sample(const ModelConfig& cfg, uint64_t seed) {
    Rng rng(seed);
    Sample s;
    s.image = rng.normal_tensor({cfg.image_size, cfg.image_size, cfg.in_channels}, 1.0);
    s.labels = Tensor({cfg.image_size, cfg.image_size});
    for (long long i = 0; i < s.labels.size(); ++i)
        s.labels[i] = rng.uniform() < 0.05 ? 255 : rng.uniform_int(cfg.num_classes);
    return s;
}

// Loss of a frozen state on one sample: bank untouched, pseudo path decided by
// the bank contents, no warmup.
double frozen_loss(TrainState& state, const Sample& s) {
    ag::Tape tape(false);
    VarMap vm = leaf_params(tape, state.params, false);
    PrototypeBank bank = state.bank;
    ForwardResult fr = forward(tape, state.cfg, vm, bank, s.image, false, false);
    return total_loss(state.cfg, fr.logits, s.labels, fr.rec_loss).value()[0];
}

double fd_entry(const std::function<double()>& f, double& slot, double h = 1e-5) {
    double saved = slot;
    slot = saved + h;
    double up = f();
    slot = saved - h;
    double down = f();
    slot = saved;
    return (up - down) / (2 * h);
}

}  // namespace

TEST_CASE("forward produces full-resolution logits deterministically") {
    ModelConfig cfg = tiny_config();
    Sample s = random_sample(cfg, 1);
    TrainState a = TrainState::init(cfg, 42);
    TrainState b = TrainState::init(cfg, 42);
    Tensor la = predict_logits(a, s.image);
    Tensor lb = predict_logits(b, s.image);
    REQUIRE(la.shape() == std::vector<int>{32, 32, 3});
    CHECK(max_abs_diff(la, lb) == 0.0);
    TrainState c = TrainState::init(cfg, 43);
    CHECK(max_abs_diff(la, predict_logits(c, s.image)) > 0.0);
}

TEST_CASE("warmup forward keeps the pseudo path cold") {
    ModelConfig cfg = tiny_config();
    Sample s = random_sample(cfg, 2);
    TrainState state = TrainState::init(cfg, 7);
    ag::Tape tape(false);
    VarMap vm = leaf_params(tape, state.params, false);
    attention::Probe probe;
    ForwardResult fr = forward(tape, cfg, vm, state.bank, s.image, true, true, &probe);
    CHECK(fr.pseudo_used == 0);
    CHECK(fr.logits.value().all_finite());
    CHECK(fr.rec_loss.value()[0] >= 0.0);
    CHECK(probe.matrices > 0);
    CHECK(probe.min_row_sum > 1.0 - 1e-9);
    CHECK(probe.max_row_sum < 1.0 + 1e-9);
    // The three observed descriptors seeded the bank.
    CHECK(state.bank.total_observations() == 3);
}

TEST_CASE("uniform logits cost ln K and rec weight is exact") {
    ModelConfig cfg = tiny_config();
    ag::Tape tape;
    ag::Var logits = tape.leaf(Tensor({4, 4, 3}));
    Tensor labels({4, 4});
    Rng rng(3);
    for (long long i = 0; i < labels.size(); ++i) labels[i] = rng.uniform_int(3);
    ag::Var zero_rec = tape.leaf(Tensor({1}));
    CHECK(total_loss(cfg, logits, labels, zero_rec).value()[0] ==
          doctest::Approx(std::log(3.0)).epsilon(1e-14));

    ag::Var rec = tape.leaf(Tensor::from_data({1}, {1.75}));
    double with_rec = total_loss(cfg, logits, labels, rec).value()[0];
    CHECK(with_rec == doctest::Approx(std::log(3.0) + 0.4 * 1.75).epsilon(1e-14));
}

TEST_CASE("total loss matches a naive loop cross-entropy") {
    ModelConfig cfg = tiny_config();
    Rng rng(5);
    Tensor lg = rng.normal_tensor({5, 5, 3}, 2.0);
    Tensor labels({5, 5});
    for (long long i = 0; i < labels.size(); ++i)
        labels[i] = rng.uniform() < 0.2 ? 255 : rng.uniform_int(3);
    double rec_v = 0.63;

    double hand = 0;
    long long counted = 0;
    for (int y = 0; y < 5; ++y)
        for (int x = 0; x < 5; ++x) {
            int lab = (int)labels.at(y, x);
            if (lab == 255) continue;
            double denom = 0;
            for (int k = 0; k < 3; ++k) denom += std::exp(lg.at(y, x, k));
            hand += -std::log(std::exp(lg.at(y, x, lab)) / denom);
            ++counted;
        }
    hand = hand / counted + 0.4 * rec_v;

    ag::Tape tape;
    ag::Var logits = tape.leaf(lg);
    ag::Var rec = tape.leaf(Tensor::from_data({1}, {rec_v}));
    CHECK(total_loss(cfg, logits, labels, rec).value()[0] ==
          doctest::Approx(hand).epsilon(1e-12));
}

TEST_CASE("phase switch happens exactly at floor of the warmup fraction") {
    ModelConfig cfg = tiny_config();
    cfg.max_iterations = 17;  // floor(0.3 * 17) = 5
    TrainState state = TrainState::init(cfg, 9);
    CHECK(state.warmup_iterations() == 5);
    std::vector<Sample> batch = {random_sample(cfg, 11)};
    for (int it = 0; it < 7; ++it) {
        StepResult r = train_step(state, batch);
        CHECK(r.warmup == (it < 5));
        CHECK(r.pseudo_used == (it < 5 ? 0 : 3));
    }
}

TEST_CASE("first optimizer step is momentum-free and matches the gradient") {
    ModelConfig cfg = tiny_config();
    cfg.warmup_fraction = 0.0;
    std::vector<Sample> batch = {random_sample(cfg, 21)};

    TrainState a = TrainState::init(cfg, 31);
    TrainState b = TrainState::init(cfg, 31);
    b.cfg.momentum = 0.0;
    train_step(a, batch);
    train_step(b, batch);
    // v starts at zero, so the first update is -lr*g for any momentum.
    double diff = 0;
    size_t i = 0;
    a.params.for_each([&](const std::string& n, Tensor& ta) {
        Tensor* tb = nullptr;
        size_t j = 0;
        b.params.for_each([&](const std::string&, Tensor& t) {
            if (j++ == i) tb = &t;
        });
        diff = std::max(diff, max_abs_diff(ta, *tb));
        ++i;
    });
    CHECK(diff == 0.0);

    // From the second step on the momentum buffer separates the trajectories.
    train_step(a, batch);
    train_step(b, batch);
    double diff2 = 0;
    i = 0;
    a.params.for_each([&](const std::string&, Tensor& ta) {
        size_t j = 0;
        b.params.for_each([&](const std::string&, Tensor& t) {
            if (j++ == i) diff2 = std::max(diff2, max_abs_diff(ta, t));
        });
        ++i;
    });
    CHECK(diff2 > 0.0);
}

TEST_CASE("a small-lr step decreases the loss on a single sample") {
    ModelConfig cfg = tiny_config();
    cfg.warmup_fraction = 0.0;
    cfg.lr = 1e-3;
    TrainState state = TrainState::init(cfg, 77);
    Sample s = random_sample(cfg, 78);
    // Seed the bank so frozen evaluation uses the same (pseudo) path as training.
    std::vector<Sample> batch = {s};
    double before = -1, after = -1;
    StepResult r0 = train_step(state, batch);
    before = r0.total;
    StepResult r1 = train_step(state, batch);
    after = r1.total;
    CHECK(after < before);
}

TEST_CASE("model gradients match finite differences on sampled parameters") {
    ModelConfig cfg = tiny_config();
    cfg.warmup_fraction = 0.0;
    TrainState state = TrainState::init(cfg, 55);
    Sample s = random_sample(cfg, 56);
    // Populate the bank, then freeze it for both gradient routes.
    {
        ag::Tape warm(false);
        VarMap vm = leaf_params(warm, state.params, false);
        forward(warm, cfg, vm, state.bank, s.image, true, false);
    }

    ag::Tape tape;
    VarMap vm = leaf_params(tape, state.params, true);
    PrototypeBank bank = state.bank;
    ForwardResult fr = forward(tape, cfg, vm, bank, s.image, false, false);
    ag::Var loss = total_loss(cfg, fr.logits, s.labels, fr.rec_loss);
    REQUIRE(fr.pseudo_used == 3);
    tape.backward(loss);

    auto frozen = [&]() { return frozen_loss(state, s); };
    Rng pick(99);
    auto check_entries = [&](const std::string& name, int count) {
        Tensor* target = nullptr;
        state.params.for_each([&](const std::string& n, Tensor& t) {
            if (n == name) target = &t;
        });
        REQUIRE(target != nullptr);
        const Tensor& g = vm.at(name).grad();
        REQUIRE(!g.empty());
        for (int k = 0; k < count; ++k) {
            long long idx = pick.uniform_int((int)target->size());
            double fd = fd_entry(frozen, (*target)[idx]);
            double an = g[idx];
            double denom = std::max({std::fabs(fd), std::fabs(an), 1e-6});
            CHECK(std::fabs(fd - an) / denom < 1e-4);
        }
    };
    check_entries("plain0.wq", 3);
    check_entries("block1.t_w", 3);
    check_entries("codec.w_sd", 3);
    check_entries("codec.dec_w1", 3);
    check_entries("head_w2", 3);
}

TEST_CASE("checkpoint round-trip restores bit-identical behavior") {
    ModelConfig cfg = tiny_config();
    TrainState state = TrainState::init(cfg, 13);
    std::vector<Sample> batch = {random_sample(cfg, 14), random_sample(cfg, 15)};
    for (int i = 0; i < 4; ++i) train_step(state, batch);

    std::vector<uint8_t> bytes = save_checkpoint(state);
    TrainState back = load_checkpoint(bytes);
    CHECK(back.iteration == state.iteration);
    CHECK(back.bank == state.bank);
    Tensor probe_img = random_sample(cfg, 16).image;
    CHECK(max_abs_diff(predict_logits(state, probe_img), predict_logits(back, probe_img)) ==
          0.0);

    // Continued training stays bit-identical too.
    train_step(state, batch);
    train_step(back, batch);
    CHECK(max_abs_diff(predict_logits(state, probe_img), predict_logits(back, probe_img)) ==
          0.0);
}

TEST_CASE("checkpoint loader rejects corrupt containers") {
    ModelConfig cfg = tiny_config();
    TrainState state = TrainState::init(cfg, 4);
    std::vector<uint8_t> bytes = save_checkpoint(state);
    std::vector<uint8_t> bad = bytes;
    bad[0] ^= 0xFF;
    CHECK_THROWS_AS(load_checkpoint(bad), ParseError);
    std::vector<uint8_t> cut(bytes.begin(), bytes.begin() + bytes.size() / 3);
    CHECK_THROWS_AS(load_checkpoint(cut), ParseError);
    std::vector<uint8_t> padded = bytes;
    padded.push_back(0);
    CHECK_THROWS_AS(load_checkpoint(padded), ParseError);
}

TEST_CASE("perspective machinery adds less than five percent parameters") {
    ModelConfig cfg;  // full desk-scale defaults
    Rng rng(1);
    ModelParams params = ModelParams::init(cfg, rng);
    long long total = params.parameter_count();
    long long overhead = params.codec_parameter_count();
    long long plain_only = total - overhead;
    CHECK((double)overhead / (double)plain_only < 0.05);
}

TEST_CASE("forward rejects images of the wrong extent") {
    ModelConfig cfg = tiny_config();
    TrainState state = TrainState::init(cfg, 6);
    Tensor wrong({16, 16, 1});
    CHECK_THROWS_AS(predict_logits(state, wrong), ShapeError);
}
