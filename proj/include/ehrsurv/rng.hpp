#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace ehrsurv {

using Rng = std::mt19937_64;

inline double uniform01(Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

inline double gamma_draw(Rng& rng, double shape, double scale) {
  return std::gamma_distribution<double>(shape, scale)(rng);
}

inline std::vector<double> gamma_vector(Rng& rng, std::size_t n, double shape, double scale) {
  std::vector<double> out(n);
  for (auto& v : out) v = gamma_draw(rng, shape, scale);
  return out;
}

// Dirichlet draw as normalized gammas.
inline std::vector<double> dirichlet_draw(Rng& rng, std::span<const double> concentration) {
  std::vector<double> out(concentration.size());
  double total = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = gamma_draw(rng, concentration[i], 1.0);
    total += out[i];
  }
  if (total <= 0.0) {
    // All gamma draws underflowed (extremely small concentrations); fall back
    // to a one-hot on a uniformly drawn index so the result stays a distribution.
    std::uniform_int_distribution<std::size_t> pick(0, out.size() - 1);
    out.assign(out.size(), 0.0);
    out[pick(rng)] = 1.0;
    return out;
  }
  for (auto& v : out) v /= total;
  return out;
}

// Inverse-CDF categorical draw over unnormalized weights.
inline std::size_t categorical_draw(Rng& rng, std::span<const double> weights, double weight_sum) {
  double u = uniform01(rng) * weight_sum;
  double acc = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    acc += weights[i];
    if (u <= acc) return i;
  }
  return weights.size() - 1;
}

}  // namespace ehrsurv
