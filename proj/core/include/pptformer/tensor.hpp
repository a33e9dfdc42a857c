#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "pptformer/errors.hpp"

namespace ppt {

// Dense row-major array of float64. Rank-3 image tensors use (H, W, C) order,
// rank-2 token matrices use (rows, cols).
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<int> shape, double fill = 0.0)
        : shape_(std::move(shape)) {
        for (int d : shape_)
            if (d <= 0) throw ShapeError("tensor extents must be positive");
        data_.assign(count(shape_), fill);
    }

    static Tensor from_data(std::vector<int> shape, std::vector<double> data) {
        Tensor t;
        for (int d : shape)
            if (d <= 0) throw ShapeError("tensor extents must be positive");
        if (count(shape) != (long long)data.size())
            throw ShapeError("data length does not match shape");
        t.shape_ = std::move(shape);
        t.data_ = std::move(data);
        return t;
    }

    const std::vector<int>& shape() const { return shape_; }
    int rank() const { return (int)shape_.size(); }
    int dim(int i) const { return shape_[i]; }
    long long size() const { return (long long)data_.size(); }
    bool empty() const { return data_.empty(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& raw() { return data_; }
    const std::vector<double>& raw() const { return data_; }

    double& operator[](long long i) { return data_[i]; }
    double operator[](long long i) const { return data_[i]; }

    double& at(int i, int j) { return data_[(long long)i * shape_[1] + j]; }
    double at(int i, int j) const { return data_[(long long)i * shape_[1] + j]; }

    double& at(int i, int j, int k) {
        return data_[((long long)i * shape_[1] + j) * shape_[2] + k];
    }
    double at(int i, int j, int k) const {
        return data_[((long long)i * shape_[1] + j) * shape_[2] + k];
    }

    double& at(int i, int j, int k, int l) {
        return data_[(((long long)i * shape_[1] + j) * shape_[2] + k) * shape_[3] + l];
    }
    double at(int i, int j, int k, int l) const {
        return data_[(((long long)i * shape_[1] + j) * shape_[2] + k) * shape_[3] + l];
    }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    Tensor reshaped(std::vector<int> new_shape) const {
        if (count(new_shape) != size()) throw ShapeError("reshape changes element count");
        Tensor t = *this;
        t.shape_ = std::move(new_shape);
        return t;
    }

    bool all_finite() const {
        for (double v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    void require_finite(const char* ctx) const {
        if (!all_finite()) throw NumericError(std::string("non-finite value in ") + ctx);
    }

    static long long count(const std::vector<int>& shape) {
        long long n = 1;
        for (int d : shape) n *= d;
        return n;
    }

private:
    std::vector<int> shape_;
    std::vector<double> data_;
};

inline double dot(const Tensor& a, const Tensor& b) {
    double s = 0;
    for (long long i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double sum_sq(const Tensor& a) { return dot(a, a); }

inline double l2_norm(const Tensor& a) { return std::sqrt(sum_sq(a)); }

inline double max_abs(const Tensor& a) {
    double m = 0;
    for (long long i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i]));
    return m;
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) throw ShapeError("max_abs_diff: shape mismatch");
    double m = 0;
    for (long long i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
    return m;
}

}  // namespace ppt
