#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pptformer/rng.hpp"
#include "pptformer/tensor.hpp"

namespace ppt::data {

// Camera pose over the flat scene: altitude scale, yaw (deg), pitch (deg).
struct Viewpoint {
    double s = 1.0;
    double theta = 0.0;
    double phi = 0.0;
};

struct SegSample {
    Tensor image;   // (H, W, 1) in [0, 1]
    Tensor labels;  // (H, W) class ids; 255 outside the world rectangle
    Viewpoint viewpoint;
};

// Valid pose box: s in [0.5, 2], theta in [-45, 45], phi in [0, 30].
void check_viewpoint(const Viewpoint& vp);  // ConfigError outside the box

// Deterministic flat world of num_classes-1 convex polygons over a textured
// background, rendered under the viewpoint homography. Same scene_seed +
// different viewpoint = same semantic scene from another perspective; textures
// depend only on (texture_seed, class id) so they are shared across scenes.
SegSample synth_scene(uint64_t scene_seed, const Viewpoint& vp, int size, int num_classes,
                      uint64_t texture_seed);

// World-plane class id at (x, y); drives both rendering routes.
int scene_class_at(uint64_t scene_seed, int num_classes, double x, double y);

// Versioned one-sample container ("PPTS").
std::vector<uint8_t> encode_sample(const SegSample& s);
SegSample decode_sample(const std::vector<uint8_t>& bytes);
void save_sample(const SegSample& s, const std::string& path);
SegSample load_sample(const std::string& path);

}  // namespace ppt::data
