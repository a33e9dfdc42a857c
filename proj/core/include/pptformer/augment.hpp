#pragma once

#include <array>
#include <string>

#include "pptformer/dataset.hpp"

namespace ppt::data {

enum class AugmentKind { kRotate, kScale, kPerspVertical, kPerspHorizontal, kCombo };

AugmentKind augment_kind_from_name(const std::string& name);  // ConfigError if unknown
std::string augment_kind_name(AugmentKind kind);

// Joint 2-D warp of image (bilinear) and labels (nearest) by the inverse of a
// 3x3 homography over centered [-1, 1] pixel coordinates. Uncovered pixels get
// label 255 / intensity 0.
using Homography = std::array<double, 9>;  // row-major
SegSample warp_sample(const SegSample& s, const Homography& h);

Homography rotation_h(double degrees);
Homography scaling_h(double factor);
// Perspective coefficient row: x' and y' divided by (1 + kx*x + ky*y).
Homography perspective_h(double kx, double ky);
Homography compose(const Homography& a, const Homography& b);  // a after b

// Parameterized baselines; rng draws the transform magnitude.
SegSample classic_augment(const SegSample& s, AugmentKind kind, Rng& rng);

}  // namespace ppt::data
