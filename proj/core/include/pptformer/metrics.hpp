#pragma once

#include <vector>

#include "pptformer/tensor.hpp"

namespace ppt::metrics {

struct IouResult {
    std::vector<double> per_class;  // NaN-free; absent classes carry 0 and present=false
    std::vector<bool> present;      // union > 0
    double mean = 0.0;              // over present classes only
};

// IoU_k = TP / (TP + FP + FN), pixels labeled 255 ignored entirely.
IouResult miou(const Tensor& preds, const Tensor& labels, int num_classes);

// (H, W, K) logits -> (H, W) argmax ids; ties resolve to the lowest id.
Tensor argmax_classes(const Tensor& logits);

}  // namespace ppt::metrics
