#include "pptformer/metrics.hpp"

#include "pptformer/errors.hpp"

namespace ppt::metrics {

IouResult miou(const Tensor& preds, const Tensor& labels, int num_classes) {
    if (preds.rank() != 2 || !preds.same_shape(labels))
        throw ShapeError("miou: prediction/label rasters must share a (H,W) shape");
    if (num_classes < 1) throw ConfigError("miou: need at least one class");
    std::vector<long long> tp(num_classes, 0), fp(num_classes, 0), fn(num_classes, 0);
    for (long long i = 0; i < preds.size(); ++i) {
        int lab = (int)labels[i];
        if (lab == 255) continue;
        int pred = (int)preds[i];
        if (lab < 0 || lab >= num_classes) throw DataError("miou: label out of range");
        if (pred < 0 || pred >= num_classes) throw DataError("miou: prediction out of range");
        if (pred == lab) {
            tp[lab] += 1;
        } else {
            fp[pred] += 1;
            fn[lab] += 1;
        }
    }
    IouResult r;
    r.per_class.assign(num_classes, 0.0);
    r.present.assign(num_classes, false);
    double sum = 0;
    int n_present = 0;
    for (int k = 0; k < num_classes; ++k) {
        long long uni = tp[k] + fp[k] + fn[k];
        if (uni == 0) continue;
        r.present[k] = true;
        r.per_class[k] = (double)tp[k] / (double)uni;
        sum += r.per_class[k];
        ++n_present;
    }
    r.mean = n_present == 0 ? 0.0 : sum / n_present;
    return r;
}

Tensor argmax_classes(const Tensor& logits) {
    if (logits.rank() != 3) throw ShapeError("argmax_classes: expected (H,W,K)");
    int H = logits.dim(0), W = logits.dim(1), K = logits.dim(2);
    Tensor out({H, W});
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            int best = 0;
            for (int k = 1; k < K; ++k)
                if (logits.at(y, x, k) > logits.at(y, x, best)) best = k;
            out.at(y, x) = best;
        }
    return out;
}

}  // namespace ppt::metrics
