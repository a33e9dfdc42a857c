#include "pptformer/dataset.hpp"

#include <cmath>

#include "pptformer/errors.hpp"
#include "pptformer/serialize.hpp"

namespace ppt::data {

namespace {

constexpr double kPi = 3.14159265358979323846;

struct Polygon {
    int cls = 0;
    std::vector<double> vx, vy;  // simple star-shaped ring around its center
};

// Layout is a pure function of the scene seed: one polygon per foreground
// class, centers spread around a ring with jitter. Extents stay within radius
// ~0.48 of the origin so every class remains visible across the split pose
// ranges (worst case: scale 0.9, pitch 30 deg shrinks the view to ~0.59).
std::vector<Polygon> scene_layout(uint64_t scene_seed, int num_classes) {
    Rng rng(fnv1a(&scene_seed, sizeof(scene_seed)));
    std::vector<Polygon> polys;
    int k = num_classes - 1;
    for (int i = 0; i < k; ++i) {
        double ang = 2 * kPi * i / k + rng.uniform(-0.25, 0.25);
        double ring = rng.uniform(0.15, 0.30);
        double cx = ring * std::cos(ang), cy = ring * std::sin(ang);
        int verts = 5 + rng.uniform_int(4);
        double base_r = rng.uniform(0.12, 0.18);
        double phase = rng.uniform(0, 2 * kPi);
        Polygon p;
        p.cls = i + 1;
        for (int v = 0; v < verts; ++v) {
            double a = phase + 2 * kPi * v / verts;
            double r = base_r * rng.uniform(0.75, 1.0);
            p.vx.push_back(cx + r * std::cos(a));
            p.vy.push_back(cy + r * std::sin(a));
        }
        polys.push_back(std::move(p));
    }
    return polys;
}

// Even-odd ray crossing; exact enough away from edges, and edges only decide
// single boundary pixels.
bool inside_polygon(const Polygon& p, double x, double y) {
    int n = (int)p.vx.size();
    bool in = false;
    for (int i = 0, j = n - 1; i < n; j = i++) {
        bool crosses = (p.vy[i] > y) != (p.vy[j] > y);
        if (crosses &&
            x < (p.vx[j] - p.vx[i]) * (y - p.vy[i]) / (p.vy[j] - p.vy[i]) + p.vx[i])
            in = !in;
    }
    return in;
}

struct ClassTexture {
    double base, amp, fx, fy, px, py;
};

ClassTexture class_texture(uint64_t texture_seed, int cls, int num_classes) {
    uint64_t mix[2] = {texture_seed, (uint64_t)cls};
    Rng rng(fnv1a(mix, sizeof(mix)));
    ClassTexture t;
    t.base = (cls + 0.5) / num_classes;
    t.amp = 0.15;
    t.fx = rng.uniform(4.0, 9.0);
    t.fy = rng.uniform(4.0, 9.0);
    t.px = rng.uniform(0, 2 * kPi);
    t.py = rng.uniform(0, 2 * kPi);
    return t;
}

double texture_value(const ClassTexture& t, double x, double y) {
    double v = t.base + t.amp * std::sin(t.fx * x + t.px) * std::sin(t.fy * y + t.py);
    return std::min(1.0, std::max(0.0, v));
}

constexpr double kPitchFactor = 0.9;  // foreshortening strength
constexpr double kShadeFactor = 0.3;   // oblique-view intensity falloff

// Image (u, v) in [-1, 1]^2 back-projected to the world plane: undo yaw, apply
// the pitch foreshortening divisor, widen by the altitude scale. Identity pose
// maps (u, v) to itself. Returns the rotated vertical coordinate so shading
// can follow the foreshortening axis.
double image_to_world(const Viewpoint& vp, double u, double v, double& wx, double& wy) {
    double th = vp.theta * kPi / 180.0;
    double a = std::cos(th) * u + std::sin(th) * v;
    double b = -std::sin(th) * u + std::cos(th) * v;
    double kappa = std::tan(vp.phi * kPi / 180.0);
    double d = 1.0 - kPitchFactor * kappa * b;
    wx = vp.s * a / d;
    wy = vp.s * b / d;
    return b;
}

// Oblique views darken toward the compressed edge; identity pitch is unshaded.
double pitch_shade(const Viewpoint& vp, double b) {
    double kappa = std::tan(vp.phi * kPi / 180.0);
    return 1.0 - kShadeFactor * kappa * (b + 1.0) / 2.0;
}

}  // namespace

void check_viewpoint(const Viewpoint& vp) {
    if (vp.s < 0.5 || vp.s > 2.0) throw ConfigError("viewpoint: scale outside [0.5, 2]");
    if (vp.theta < -45.0 || vp.theta > 45.0)
        throw ConfigError("viewpoint: yaw outside [-45, 45] degrees");
    if (vp.phi < 0.0 || vp.phi > 30.0)
        throw ConfigError("viewpoint: pitch outside [0, 30] degrees");
}

int scene_class_at(uint64_t scene_seed, int num_classes, double x, double y) {
    std::vector<Polygon> polys = scene_layout(scene_seed, num_classes);
    int cls = 0;
    for (const Polygon& p : polys)
        if (inside_polygon(p, x, y)) cls = p.cls;  // later polygons draw on top
    return cls;
}

SegSample synth_scene(uint64_t scene_seed, const Viewpoint& vp, int size, int num_classes,
                      uint64_t texture_seed) {
    check_viewpoint(vp);
    if (size < 4) throw ConfigError("synth_scene: image size too small");
    if (num_classes < 2) throw ConfigError("synth_scene: need at least two classes");

    std::vector<Polygon> polys = scene_layout(scene_seed, num_classes);
    std::vector<ClassTexture> tex;
    for (int c = 0; c < num_classes; ++c) tex.push_back(class_texture(texture_seed, c, num_classes));

    SegSample out;
    out.viewpoint = vp;
    out.image = Tensor({size, size, 1});
    out.labels = Tensor({size, size});
    for (int yy = 0; yy < size; ++yy)
        for (int xx = 0; xx < size; ++xx) {
            double u = 2.0 * (xx + 0.5) / size - 1.0;
            double v = 2.0 * (yy + 0.5) / size - 1.0;
            double wx, wy;
            double b = image_to_world(vp, u, v, wx, wy);
            if (std::fabs(wx) > 1.0 || std::fabs(wy) > 1.0) {
                out.labels.at(yy, xx) = 255;
                out.image.at(yy, xx, 0) = 0.0;
                continue;
            }
            int cls = 0;
            for (const Polygon& p : polys)
                if (inside_polygon(p, wx, wy)) cls = p.cls;
            out.labels.at(yy, xx) = cls;
            out.image.at(yy, xx, 0) = pitch_shade(vp, b) * texture_value(tex[cls], wx, wy);
        }
    return out;
}

namespace {
constexpr uint32_t kSampleMagic = 0x53545050;  // "PPTS"
constexpr uint32_t kSampleVersion = 1;
}  // namespace

std::vector<uint8_t> encode_sample(const SegSample& s) {
    if (s.image.rank() != 3 || s.labels.rank() != 2)
        throw ShapeError("encode_sample: unexpected tensor ranks");
    std::vector<uint8_t> out;
    io::put(out, kSampleMagic);
    io::put(out, kSampleVersion);
    io::put(out, s.viewpoint.s);
    io::put(out, s.viewpoint.theta);
    io::put(out, s.viewpoint.phi);
    io::put_tensor(out, s.image);
    io::put(out, (uint32_t)s.labels.dim(0));
    io::put(out, (uint32_t)s.labels.dim(1));
    for (long long i = 0; i < s.labels.size(); ++i) io::put(out, (uint8_t)s.labels[i]);
    return out;
}

SegSample decode_sample(const std::vector<uint8_t>& bytes) {
    size_t off = 0;
    if (io::take<uint32_t>(bytes, off, "magic") != kSampleMagic)
        throw ParseError("not a sample container", 0);
    if (io::take<uint32_t>(bytes, off, "version") != kSampleVersion)
        throw ParseError("unsupported sample version", 4);
    SegSample s;
    s.viewpoint.s = io::take<double>(bytes, off, "scale");
    s.viewpoint.theta = io::take<double>(bytes, off, "yaw");
    s.viewpoint.phi = io::take<double>(bytes, off, "pitch");
    s.image = io::take_tensor(bytes, off, "image");
    uint32_t h = io::take<uint32_t>(bytes, off, "label rows");
    uint32_t w = io::take<uint32_t>(bytes, off, "label cols");
    if (h == 0 || w == 0) throw ParseError("empty label raster", off);
    s.labels = Tensor({(int)h, (int)w});
    for (long long i = 0; i < s.labels.size(); ++i)
        s.labels[i] = io::take<uint8_t>(bytes, off, "labels");
    if (off != bytes.size()) throw ParseError("trailing bytes in sample", off);
    return s;
}

void save_sample(const SegSample& s, const std::string& path) {
    io::write_file(path, encode_sample(s));
}

SegSample load_sample(const std::string& path) { return decode_sample(io::read_file(path)); }

}  // namespace ppt::data
