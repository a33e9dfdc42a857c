#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <map>
#include <set>

#include "pptformer/experiment.hpp"
#include "pptformer/serialize.hpp"

using namespace ppt;
using namespace ppt::data;
using namespace ppt::exp;

namespace {

ExperimentConfig tiny_experiment() {
    ExperimentConfig cfg;
    cfg.model.image_size = 32;
    cfg.model.num_classes = 4;
    cfg.model.embed_dim = 8;
    cfg.model.block_channels = 16;
    cfg.model.plain_layers = 1;
    cfg.model.head_hidden = 16;
    cfg.model.M = 2;
    cfg.model.L_cal = 1;
    cfg.model.prototypes = 8;
    cfg.model.T = 1;
    cfg.model.z = 2;
    cfg.model.descriptor_dim = 4;
    cfg.data.train_scenes = 3;
    cfg.data.test_scenes = 2;
    cfg.data.views_per_scene = 2;
    cfg.batch_size = 1;
    cfg.steps = 6;
    return cfg;
}

std::map<int, int> label_histogram(const Tensor& labels) {
    std::map<int, int> h;
    for (long long i = 0; i < labels.size(); ++i) h[(int)labels[i]] += 1;
    return h;
}

std::set<int> class_inventory(const Tensor& labels) {
    std::set<int> s;
    for (long long i = 0; i < labels.size(); ++i)
        if ((int)labels[i] != 255) s.insert((int)labels[i]);
    return s;
}

}  // namespace

TEST_CASE("identity viewpoint renders the untransformed scene raster") {
    int n = 48;
    SegSample s = synth_scene(9, Viewpoint{1.0, 0.0, 0.0}, n, 5, 7);
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) {
            double u = 2.0 * (x + 0.5) / n - 1.0;
            double v = 2.0 * (y + 0.5) / n - 1.0;
            CHECK((int)s.labels.at(y, x) == scene_class_at(9, 5, u, v));
        }
}

TEST_CASE("out-of-range viewpoints are rejected") {
    CHECK_THROWS_AS(synth_scene(1, Viewpoint{0.4, 0, 0}, 16, 3, 7), ConfigError);
    CHECK_THROWS_AS(synth_scene(1, Viewpoint{1, 50.0, 0}, 16, 3, 7), ConfigError);
    CHECK_THROWS_AS(synth_scene(1, Viewpoint{1, 0, 35.0}, 16, 3, 7), ConfigError);
    CHECK_THROWS_AS(synth_scene(1, Viewpoint{1, 0, -1.0}, 16, 3, 7), ConfigError);
}

TEST_CASE("fixed-seed render matches the committed histogram fixture") {
    SegSample s = synth_scene(77, Viewpoint{1.1, 12.0, 8.0}, 64, 5, 7);
    std::map<int, int> h = label_histogram(s.labels);
    CHECK(h[0] == 3108);
    CHECK(h[1] == 48);
    CHECK(h[2] == 25);
    CHECK(h[3] == 46);
    CHECK(h[4] == 58);
    CHECK(h[255] == 811);
}

TEST_CASE("viewpoint changes preserve the class inventory") {
    std::set<int> base = class_inventory(synth_scene(5, Viewpoint{1, 0, 0}, 64, 5, 7).labels);
    REQUIRE(base == std::set<int>{0, 1, 2, 3, 4});
    for (double phi : {0.0, 10.0, 20.0, 30.0})
        for (double sc : {0.9, 1.1, 1.3})
            for (double th : {-30.0, 0.0, 25.0}) {
                SegSample s = synth_scene(5, Viewpoint{sc, th, phi}, 64, 5, 7);
                CHECK(class_inventory(s.labels) == base);
            }
}

TEST_CASE("sample container round-trips bit-exactly and rejects damage") {
    SegSample s = synth_scene(3, Viewpoint{1.2, -8.0, 4.0}, 24, 4, 11);
    std::vector<uint8_t> bytes = encode_sample(s);
    SegSample back = decode_sample(bytes);
    CHECK(max_abs_diff(back.image, s.image) == 0.0);
    CHECK(max_abs_diff(back.labels, s.labels) == 0.0);
    CHECK(back.viewpoint.s == s.viewpoint.s);
    CHECK(back.viewpoint.theta == s.viewpoint.theta);
    CHECK(back.viewpoint.phi == s.viewpoint.phi);

    std::vector<uint8_t> bad = bytes;
    bad[1] ^= 0x40;
    CHECK_THROWS_AS(decode_sample(bad), ParseError);
    std::vector<uint8_t> cut(bytes.begin(), bytes.end() - 3);
    CHECK_THROWS_AS(decode_sample(cut), ParseError);
    bytes.push_back(7);
    CHECK_THROWS_AS(decode_sample(bytes), ParseError);
}

TEST_CASE("zero-magnitude warps are exact identities") {
    SegSample s = synth_scene(21, Viewpoint{1, 5, 3}, 20, 4, 7);
    SegSample r = warp_sample(s, rotation_h(0.0));
    CHECK(max_abs_diff(r.image, s.image) == 0.0);
    CHECK(max_abs_diff(r.labels, s.labels) == 0.0);
    SegSample sc = warp_sample(s, scaling_h(1.0));
    CHECK(max_abs_diff(sc.image, s.image) == 0.0);
    CHECK(max_abs_diff(sc.labels, s.labels) == 0.0);
    SegSample pe = warp_sample(s, perspective_h(0.0, 0.0));
    CHECK(max_abs_diff(pe.labels, s.labels) == 0.0);
}

TEST_CASE("two quarter turns equal a half turn on the label raster") {
    SegSample s = synth_scene(22, Viewpoint{1, 0, 0}, 20, 4, 7);
    SegSample twice = warp_sample(warp_sample(s, rotation_h(90.0)), rotation_h(90.0));
    SegSample once = warp_sample(s, rotation_h(180.0));
    CHECK(max_abs_diff(twice.labels, once.labels) == 0.0);
}

TEST_CASE("a quarter turn lands on the transposed-and-flipped raster") {
    SegSample s = synth_scene(23, Viewpoint{1, 0, 0}, 16, 4, 7);
    SegSample r = warp_sample(s, rotation_h(90.0));
    int n = 16;
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x)
            CHECK((int)r.labels.at(y, x) == (int)s.labels.at(n - 1 - x, y));
}

TEST_CASE("classic augmentation keeps image and labels aligned") {
    SegSample s = synth_scene(31, Viewpoint{1, 10, 6}, 32, 5, 7);
    Rng rng(4);
    for (auto kind : {AugmentKind::kRotate, AugmentKind::kScale, AugmentKind::kPerspVertical,
                      AugmentKind::kPerspHorizontal, AugmentKind::kCombo}) {
        SegSample a = classic_augment(s, kind, rng);
        metrics::IouResult self = metrics::miou(a.labels, a.labels, 5);
        CHECK(self.mean == 1.0);
        CHECK(a.labels.same_shape(s.labels));
    }
    CHECK_THROWS_AS(augment_kind_from_name("mystery"), ConfigError);
}

TEST_CASE("miou matches a naive confusion-matrix loop") {
    Rng rng(12);
    Tensor preds({8, 8}), labels({8, 8});
    for (long long i = 0; i < preds.size(); ++i) {
        preds[i] = rng.uniform_int(3);
        labels[i] = rng.uniform() < 0.1 ? 255 : rng.uniform_int(3);
    }
    metrics::IouResult r = metrics::miou(preds, labels, 3);

    for (int k = 0; k < 3; ++k) {
        long long inter = 0, uni = 0;
        for (long long i = 0; i < preds.size(); ++i) {
            if ((int)labels[i] == 255) continue;
            bool in_p = (int)preds[i] == k, in_l = (int)labels[i] == k;
            if (in_p && in_l) ++inter;
            if (in_p || in_l) ++uni;
        }
        if (uni > 0) {
            CHECK(r.present[k]);
            CHECK(r.per_class[k] == doctest::Approx((double)inter / uni).epsilon(1e-15));
        }
    }
    CHECK(metrics::miou(labels, labels, 3).mean == 1.0);

    Tensor a({2, 2}), b({2, 2});
    a[0] = a[1] = a[2] = a[3] = 0;
    b[0] = b[1] = b[2] = b[3] = 1;
    CHECK(metrics::miou(a, b, 2).mean == 0.0);
}

TEST_CASE("miou is symmetric under class relabeling") {
    Rng rng(13);
    Tensor preds({10, 10}), labels({10, 10});
    for (long long i = 0; i < preds.size(); ++i) {
        preds[i] = rng.uniform_int(4);
        labels[i] = rng.uniform_int(4);
    }
    metrics::IouResult base = metrics::miou(preds, labels, 4);
    int perm[4] = {2, 0, 3, 1};
    Tensor pp({10, 10}), pl({10, 10});
    for (long long i = 0; i < preds.size(); ++i) {
        pp[i] = perm[(int)preds[i]];
        pl[i] = perm[(int)labels[i]];
    }
    metrics::IouResult rel = metrics::miou(pp, pl, 4);
    CHECK(rel.mean == doctest::Approx(base.mean).epsilon(1e-15));
    for (int k = 0; k < 4; ++k)
        CHECK(rel.per_class[perm[k]] == doctest::Approx(base.per_class[k]).epsilon(1e-15));
}

TEST_CASE("config JSON round-trips and rejects unknown keys") {
    ExperimentConfig cfg = tiny_experiment();
    cfg.name = "roundtrip";
    std::string text = config_to_json(cfg);
    ExperimentConfig back = config_from_json(text);
    CHECK(config_hash(back) == config_hash(cfg));
    CHECK(back.model.image_size == 32);
    CHECK(back.data.train_scenes == 3);

    CHECK_THROWS_AS(config_from_json("{\"mystery\": 1}"), ConfigError);
    CHECK_THROWS_AS(config_from_json("{\"model\": {\"depth\": 3}}"), ConfigError);
    CHECK_THROWS_AS(config_from_json("{\"batch_size\": 0}"), ConfigError);
    CHECK_THROWS_AS(config_from_json("not json"), ParseError);
}

TEST_CASE("splits respect the perspective-shift protocol") {
    ExperimentConfig cfg = tiny_experiment();
    std::vector<SegSample> train = make_split(cfg, false);
    std::vector<SegSample> test = make_split(cfg, true);
    CHECK(train.size() == 6);
    CHECK(test.size() == 4);
    for (const SegSample& s : train) {
        CHECK(s.viewpoint.phi >= 0.0);
        CHECK(s.viewpoint.phi <= 15.0);
    }
    for (const SegSample& s : test) {
        CHECK(s.viewpoint.phi >= 20.0);
        CHECK(s.viewpoint.phi <= 30.0);
    }
}

TEST_CASE("training runs are deterministic end to end") {
    ExperimentConfig cfg = tiny_experiment();
    cfg.name = "det";
    RunReport a = train_and_evaluate(cfg);
    RunReport b = train_and_evaluate(cfg);
    CHECK(a.to_json(false) == b.to_json(false));
    CHECK((int)a.loss_curve.size() == cfg.steps);
    CHECK(a.miou >= 0.0);
    CHECK(a.miou <= 1.0);
    CHECK(a.iterations == cfg.steps);
    CHECK(a.ok());
}

TEST_CASE("ablation sweep records failures instead of aborting") {
    ExperimentConfig cfg = tiny_experiment();
    cfg.steps = 2;
    std::vector<RunReport> reports = run_ablation(cfg, "contourlet_T", {1, 9}, {1});
    REQUIRE(reports.size() == 2);
    CHECK(reports[0].ok());
    CHECK(!reports[1].ok());
    CHECK(!reports[1].error.empty());
    CHECK_THROWS_AS(run_ablation(cfg, "nonsense", {1}, {1}), ConfigError);
}

TEST_CASE("report files carry one record per run") {
    ExperimentConfig cfg = tiny_experiment();
    cfg.steps = 2;
    std::vector<RunReport> reports = run_ablation(cfg, "calib_layers", {0, 1}, {1});
    std::string jsonl = "/tmp/ppt_reports_test.jsonl";
    std::string csv = "/tmp/ppt_reports_test.csv";
    write_reports_jsonl(reports, jsonl);
    write_reports_csv(reports, csv);
    std::vector<uint8_t> jb = io::read_file(jsonl);
    std::vector<uint8_t> cb = io::read_file(csv);
    CHECK(std::count(jb.begin(), jb.end(), '\n') == 2);
    CHECK(std::count(cb.begin(), cb.end(), '\n') == 3);  // header + 2 rows
    std::remove(jsonl.c_str());
    std::remove(csv.c_str());
}
