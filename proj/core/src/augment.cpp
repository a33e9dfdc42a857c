#include "pptformer/augment.hpp"

#include <cmath>

#include "pptformer/errors.hpp"

namespace ppt::data {

namespace {
constexpr double kPi = 3.14159265358979323846;

// Applies h to (x, y, 1) with projective division.
void apply_h(const Homography& h, double x, double y, double& ox, double& oy) {
    double w = h[6] * x + h[7] * y + h[8];
    ox = (h[0] * x + h[1] * y + h[2]) / w;
    oy = (h[3] * x + h[4] * y + h[5]) / w;
}

Homography invert(const Homography& m) {
    // Adjugate over determinant; homographies here are well conditioned.
    Homography a;
    a[0] = m[4] * m[8] - m[5] * m[7];
    a[1] = m[2] * m[7] - m[1] * m[8];
    a[2] = m[1] * m[5] - m[2] * m[4];
    a[3] = m[5] * m[6] - m[3] * m[8];
    a[4] = m[0] * m[8] - m[2] * m[6];
    a[5] = m[2] * m[3] - m[0] * m[5];
    a[6] = m[3] * m[7] - m[4] * m[6];
    a[7] = m[1] * m[6] - m[0] * m[7];
    a[8] = m[0] * m[4] - m[1] * m[3];
    double det = m[0] * a[0] + m[1] * a[3] + m[2] * a[6];
    if (std::fabs(det) < 1e-12) throw NumericError("warp: singular homography");
    for (double& v : a) v /= det;
    return a;
}

}  // namespace

AugmentKind augment_kind_from_name(const std::string& name) {
    if (name == "rotate") return AugmentKind::kRotate;
    if (name == "scale") return AugmentKind::kScale;
    if (name == "persp_vertical") return AugmentKind::kPerspVertical;
    if (name == "persp_horizontal") return AugmentKind::kPerspHorizontal;
    if (name == "combo") return AugmentKind::kCombo;
    throw ConfigError("unknown augmentation kind: " + name);
}

std::string augment_kind_name(AugmentKind kind) {
    switch (kind) {
        case AugmentKind::kRotate: return "rotate";
        case AugmentKind::kScale: return "scale";
        case AugmentKind::kPerspVertical: return "persp_vertical";
        case AugmentKind::kPerspHorizontal: return "persp_horizontal";
        case AugmentKind::kCombo: return "combo";
    }
    throw ConfigError("unknown augmentation kind");
}

Homography rotation_h(double degrees) {
    double r = degrees * kPi / 180.0, c = std::cos(r), s = std::sin(r);
    return {c, -s, 0, s, c, 0, 0, 0, 1};
}

Homography scaling_h(double factor) {
    if (factor <= 0) throw ConfigError("scaling_h: factor must be positive");
    return {factor, 0, 0, 0, factor, 0, 0, 0, 1};
}

Homography perspective_h(double kx, double ky) { return {1, 0, 0, 0, 1, 0, kx, ky, 1}; }

Homography compose(const Homography& a, const Homography& b) {
    Homography out{};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            for (int k = 0; k < 3; ++k) out[3 * i + j] += a[3 * i + k] * b[3 * k + j];
    return out;
}

SegSample warp_sample(const SegSample& s, const Homography& h) {
    int H = s.labels.dim(0), W = s.labels.dim(1), C = s.image.dim(2);
    Homography inv = invert(h);
    SegSample out;
    out.viewpoint = s.viewpoint;
    out.image = Tensor({H, W, C});
    out.labels = Tensor({H, W});
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            double u = 2.0 * (x + 0.5) / W - 1.0;
            double v = 2.0 * (y + 0.5) / H - 1.0;
            double su, sv;
            apply_h(inv, u, v, su, sv);
            double sx = (su + 1.0) * W / 2.0 - 0.5;
            double sy = (sv + 1.0) * H / 2.0 - 0.5;
            // Snap coordinates that are a rounding error away from a pixel
            // center so zero-magnitude warps stay exact identities.
            if (std::fabs(sx - std::lround(sx)) < 1e-9) sx = (double)std::lround(sx);
            if (std::fabs(sy - std::lround(sy)) < 1e-9) sy = (double)std::lround(sy);
            int nx = (int)std::lround(sx), ny = (int)std::lround(sy);
            if (nx < 0 || nx >= W || ny < 0 || ny >= H) {
                out.labels.at(y, x) = 255;
                continue;
            }
            out.labels.at(y, x) = s.labels.at(ny, nx);
            int x0 = (int)std::floor(sx), y0 = (int)std::floor(sy);
            double fx = sx - x0, fy = sy - y0;
            for (int c = 0; c < C; ++c) {
                double acc = 0;
                for (int dy = 0; dy < 2; ++dy)
                    for (int dx = 0; dx < 2; ++dx) {
                        int px = std::min(W - 1, std::max(0, x0 + dx));
                        int py = std::min(H - 1, std::max(0, y0 + dy));
                        double wgt = (dx ? fx : 1 - fx) * (dy ? fy : 1 - fy);
                        acc += wgt * s.image.at(py, px, c);
                    }
                out.image.at(y, x, c) = acc;
            }
        }
    return out;
}

SegSample classic_augment(const SegSample& s, AugmentKind kind, Rng& rng) {
    switch (kind) {
        case AugmentKind::kRotate:
            return warp_sample(s, rotation_h(rng.uniform(-20.0, 20.0)));
        case AugmentKind::kScale:
            return warp_sample(s, scaling_h(rng.uniform(0.8, 1.25)));
        case AugmentKind::kPerspVertical:
            return warp_sample(s, perspective_h(0.0, rng.uniform(-0.25, 0.25)));
        case AugmentKind::kPerspHorizontal:
            return warp_sample(s, perspective_h(rng.uniform(-0.25, 0.25), 0.0));
        case AugmentKind::kCombo: {
            Homography h = rotation_h(rng.uniform(-20.0, 20.0));
            h = compose(scaling_h(rng.uniform(0.8, 1.25)), h);
            h = compose(perspective_h(rng.uniform(-0.25, 0.25), rng.uniform(-0.25, 0.25)), h);
            return warp_sample(s, h);
        }
    }
    throw ConfigError("unknown augmentation kind");
}

}  // namespace ppt::data
