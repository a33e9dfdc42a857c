#pragma once

#include <cstdint>
#include <vector>

#include "pptformer/rng.hpp"
#include "pptformer/tensor.hpp"

namespace ppt {

// Online sequential clustering of perspective descriptors. The first N
// observations initialize the slots; afterwards each descriptor moves its
// nearest prototype by 1/c_n and updates that slot's running variance.
class PrototypeBank {
public:
    PrototypeBank() = default;
    PrototypeBank(int capacity, int dim);

    int capacity() const { return N_; }
    int dim() const { return dim_; }
    int initialized() const { return init_; }
    uint64_t total_observations() const { return total_; }

    const std::vector<double>& prototype(int n) const { return protos_[n]; }
    uint64_t count(int n) const { return counts_[n]; }
    double weight(int n) const { return pi_[n]; }
    // Running second-moment accumulator of slot n (sum of squared deviations).
    double second_moment(int n) const { return m2_[n]; }
    // Isotropic variance used by the mixture, with warm-slot fallback + floor.
    double slot_variance(int n) const;

    // Returns the assigned slot index.
    int observe(const std::vector<double>& p);

    // Unnormalized mixture affinity G in (0, 1]. With raw_density, each kernel
    // carries its (2*pi*Sigma)^(-dim/2) normalizer instead (tiny in high dim).
    double mixture_affinity(const std::vector<double>& p, bool raw_density = false) const;

    // d(G)/d(p); same length as p.
    std::vector<double> mixture_affinity_grad(const std::vector<double>& p,
                                              bool raw_density = false) const;

    // p' = p * (alpha + (1-alpha) * G(P, p)).
    std::vector<double> generate_pseudo(const std::vector<double>& p, double alpha = 0.5,
                                        bool raw_density = false) const;

    // Draws one initialized prototype from the pi-categorical distribution.
    std::vector<double> sample_prototype(Rng& rng) const;

    // Stochastic variant: nudges p toward a pi-sampled prototype by step eta
    // before modulation.
    std::vector<double> generate_pseudo_stochastic(const std::vector<double>& p, double alpha,
                                                   double eta, Rng& rng) const;

    std::vector<uint8_t> snapshot() const;
    static PrototypeBank restore(const std::vector<uint8_t>& bytes);

    bool operator==(const PrototypeBank& o) const;

    static constexpr double kVarianceFloor = 1e-6;

private:
    int N_ = 0;
    int dim_ = 0;
    int init_ = 0;
    uint64_t total_ = 0;
    std::vector<std::vector<double>> protos_;
    std::vector<uint64_t> counts_;
    std::vector<double> m2_;
    std::vector<double> pi_;

    void refresh_weights();
    double sq_dist(const std::vector<double>& a, const std::vector<double>& b) const;
};

}  // namespace ppt
