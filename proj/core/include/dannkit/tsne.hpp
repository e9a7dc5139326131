#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "dannkit/error.hpp"

namespace dannkit {

struct TsneConfig {
    double perplexity = 30.0;
    std::size_t iterations = 1000;
    std::uint64_t seed = 0;
    double learning_rate = 200.0;
    double early_exaggeration = 12.0;
    std::size_t exaggeration_iters = 250;
    std::size_t momentum_switch_iter = 250;
    double momentum_initial = 0.5;
    double momentum_final = 0.8;
};

// Per-row Gaussian bandwidth calibration by bisection on the precision beta:
// |H(P_i) - log(perplexity)| <= 1e-2 nats within at most 64 steps.
struct TsneAffinities {
    std::size_t n = 0;
    std::vector<double> conditional;   // n*n row-major P_{j|i}, rows sum to 1
    std::vector<double> joint;         // symmetrized (P_{j|i}+P_{i|j})/(2n)
    std::vector<double> achieved_entropy; // per-row H in nats (= log achieved perplexity)
};

TsneAffinities tsne_affinities(const std::vector<std::vector<double>>& points, double perplexity);

struct TsneResult {
    std::vector<std::array<double, 2>> coords;
    double initial_kl = 0.0; // KL(P||Q) right after initialization (plain P)
    double final_kl = 0.0;
};

// Exact O(n^2) t-SNE: Student-t low-dimensional affinities, gradient descent
// with momentum, adaptive per-coordinate gains and early exaggeration.
// Deterministic per seed (initial coords from seeded Gaussian, sigma 1e-4).
TsneResult tsne(const std::vector<std::vector<double>>& points, const TsneConfig& config = {});

} // namespace dannkit
