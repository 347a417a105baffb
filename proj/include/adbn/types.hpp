#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include <Eigen/Dense>

namespace adbn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Every stochastic routine draws from this engine type so that results are a
// function of (seed, call sequence) only.
using Rng = std::mt19937_64;

// Derives an independent stream seed from a base seed and a stream tag.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag) noexcept;

inline double sigmoid(double x) noexcept { return 1.0 / (1.0 + std::exp(-x)); }

// log(1 + exp(x)) without overflow.
inline double softplus(double x) noexcept {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

// Process-wide bound on worker threads for data-parallel inference loops.
// Results never depend on this value.
void set_worker_count(unsigned workers) noexcept;
unsigned worker_count() noexcept;

}  // namespace adbn
