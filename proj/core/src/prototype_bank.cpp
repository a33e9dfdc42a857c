#include "pptformer/prototype_bank.hpp"

#include <cmath>
#include <cstring>
#include <limits>

#include "pptformer/errors.hpp"
#include "pptformer/serialize.hpp"

namespace ppt {

PrototypeBank::PrototypeBank(int capacity, int dim) : N_(capacity), dim_(dim) {
    if (capacity < 1) throw ConfigError("PrototypeBank: capacity must be positive");
    if (dim < 1) throw ConfigError("PrototypeBank: dim must be positive");
    protos_.assign(N_, std::vector<double>(dim_, 0.0));
    counts_.assign(N_, 0);
    m2_.assign(N_, 0.0);
    pi_.assign(N_, 0.0);
}

double PrototypeBank::sq_dist(const std::vector<double>& a, const std::vector<double>& b) const {
    double s = 0;
    for (int i = 0; i < dim_; ++i) {
        double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

void PrototypeBank::refresh_weights() {
    if (total_ == 0) return;
    for (int n = 0; n < N_; ++n) pi_[n] = (double)counts_[n] / (double)total_;
}

int PrototypeBank::observe(const std::vector<double>& p) {
    if ((int)p.size() != dim_) throw ShapeError("PrototypeBank::observe: dimension mismatch");
    int slot;
    if (init_ < N_) {
        slot = init_++;
        protos_[slot] = p;
        counts_[slot] = 1;
        m2_[slot] = 0.0;
    } else {
        slot = 0;
        double best = std::numeric_limits<double>::infinity();
        for (int n = 0; n < N_; ++n) {
            double d = sq_dist(p, protos_[n]);
            if (d < best) {
                best = d;
                slot = n;
            }
        }
        counts_[slot] += 1;
        double c = (double)counts_[slot];
        // Welford: m2 += (p - P_old) . (p - P_new)
        double acc = 0;
        for (int i = 0; i < dim_; ++i) {
            double delta_old = p[i] - protos_[slot][i];
            protos_[slot][i] += delta_old / c;
            acc += delta_old * (p[i] - protos_[slot][i]);
        }
        m2_[slot] += acc;
    }
    total_ += 1;
    refresh_weights();
    return slot;
}

double PrototypeBank::slot_variance(int n) const {
    if (counts_[n] >= 2) return std::max(kVarianceFloor, m2_[n] / (double)counts_[n]);
    // Warm slot: fall back to the mean variance of populated slots.
    double acc = 0;
    int k = 0;
    for (int m = 0; m < N_; ++m)
        if (counts_[m] >= 2) {
            acc += m2_[m] / (double)counts_[m];
            ++k;
        }
    return k > 0 ? std::max(kVarianceFloor, acc / k) : kVarianceFloor;
}

double PrototypeBank::mixture_affinity(const std::vector<double>& p, bool raw_density) const {
    if ((int)p.size() != dim_) throw ShapeError("mixture_affinity: dimension mismatch");
    if (init_ == 0) throw StateError("mixture_affinity: bank has no initialized prototypes");
    double g = 0;
    for (int n = 0; n < init_; ++n) {
        double var = slot_variance(n);
        double kern = std::exp(-sq_dist(p, protos_[n]) / (2.0 * var));
        if (raw_density)
            kern *= std::pow(2.0 * M_PI * var, -0.5 * dim_);
        g += pi_[n] * kern;
    }
    return g;
}

std::vector<double> PrototypeBank::mixture_affinity_grad(const std::vector<double>& p,
                                                         bool raw_density) const {
    if ((int)p.size() != dim_) throw ShapeError("mixture_affinity_grad: dimension mismatch");
    if (init_ == 0) throw StateError("mixture_affinity_grad: bank has no initialized prototypes");
    std::vector<double> grad(dim_, 0.0);
    for (int n = 0; n < init_; ++n) {
        double var = slot_variance(n);
        double kern = std::exp(-sq_dist(p, protos_[n]) / (2.0 * var));
        if (raw_density)
            kern *= std::pow(2.0 * M_PI * var, -0.5 * dim_);
        double w = pi_[n] * kern / var;
        for (int i = 0; i < dim_; ++i) grad[i] += w * (protos_[n][i] - p[i]);
    }
    return grad;
}

std::vector<double> PrototypeBank::generate_pseudo(const std::vector<double>& p, double alpha,
                                                   bool raw_density) const {
    if (alpha < 0.0 || alpha >= 1.0 + 1e-12)
        throw ConfigError("generate_pseudo: alpha must be in [0, 1]");
    double s = alpha + (1.0 - alpha) * mixture_affinity(p, raw_density);
    std::vector<double> out(p);
    for (double& v : out) v *= s;
    return out;
}

std::vector<double> PrototypeBank::sample_prototype(Rng& rng) const {
    if (init_ == 0) throw StateError("sample_prototype: empty bank");
    double u = rng.uniform();
    int pick = init_ - 1;
    double acc = 0;
    for (int n = 0; n < init_; ++n) {
        acc += pi_[n];
        if (u < acc) {
            pick = n;
            break;
        }
    }
    return protos_[pick];
}

std::vector<double> PrototypeBank::generate_pseudo_stochastic(const std::vector<double>& p,
                                                              double alpha, double eta,
                                                              Rng& rng) const {
    std::vector<double> proto = sample_prototype(rng);
    std::vector<double> nudged(p);
    for (int i = 0; i < dim_; ++i) nudged[i] += eta * (proto[i] - p[i]);
    return generate_pseudo(nudged, alpha);
}

namespace {

constexpr uint32_t kMagic = 0x42545050;  // "PPTB"
constexpr uint32_t kVersion = 1;

using io::put;
using io::take;

}  // namespace

std::vector<uint8_t> PrototypeBank::snapshot() const {
    std::vector<uint8_t> out;
    put(out, kMagic);
    put(out, kVersion);
    put(out, (uint32_t)N_);
    put(out, (uint32_t)dim_);
    put(out, (uint32_t)init_);
    put(out, total_);
    for (int n = 0; n < N_; ++n)
        for (int i = 0; i < dim_; ++i) put(out, protos_[n][i]);
    for (int n = 0; n < N_; ++n) put(out, m2_[n]);
    for (int n = 0; n < N_; ++n) put(out, pi_[n]);
    for (int n = 0; n < N_; ++n) put(out, counts_[n]);
    return out;
}

PrototypeBank PrototypeBank::restore(const std::vector<uint8_t>& bytes) {
    size_t off = 0;
    if (take<uint32_t>(bytes, off, "magic") != kMagic)
        throw ParseError("bad snapshot magic", 0);
    uint32_t ver = take<uint32_t>(bytes, off, "version");
    if (ver != kVersion) throw ParseError("unsupported snapshot version", 4);
    uint32_t n = take<uint32_t>(bytes, off, "capacity");
    uint32_t dim = take<uint32_t>(bytes, off, "dim");
    if (n == 0 || dim == 0 || n > (1u << 20) || dim > (1u << 24))
        throw ParseError("implausible snapshot header", 8);
    PrototypeBank b((int)n, (int)dim);
    b.init_ = (int)take<uint32_t>(bytes, off, "initialized");
    if (b.init_ > b.N_) throw ParseError("initialized exceeds capacity", off - 4);
    b.total_ = take<uint64_t>(bytes, off, "total");
    for (int s = 0; s < b.N_; ++s)
        for (int i = 0; i < b.dim_; ++i) b.protos_[s][i] = take<double>(bytes, off, "prototypes");
    for (int s = 0; s < b.N_; ++s) b.m2_[s] = take<double>(bytes, off, "second moments");
    for (int s = 0; s < b.N_; ++s) b.pi_[s] = take<double>(bytes, off, "weights");
    for (int s = 0; s < b.N_; ++s) b.counts_[s] = take<uint64_t>(bytes, off, "counts");
    if (off != bytes.size()) throw ParseError("trailing bytes after snapshot", off);
    return b;
}

bool PrototypeBank::operator==(const PrototypeBank& o) const {
    return N_ == o.N_ && dim_ == o.dim_ && init_ == o.init_ && total_ == o.total_ &&
           protos_ == o.protos_ && counts_ == o.counts_ && m2_ == o.m2_ && pi_ == o.pi_;
}

}  // namespace ppt
