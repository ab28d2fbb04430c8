#pragma once

#include <cstdint>
#include <vector>

#include "ehrsurv/matrix.hpp"

namespace ehrsurv {

struct EmConfig {
  double tol = 1e-8;        // relative log-likelihood change
  int max_iters = 500;
  double sigma_floor = 1e-3;
  double pi_floor = 1e-6;   // epsilon floor for prior entries
};

struct PoissonMixtureFit {
  double rho0 = 0.0;   // background rate
  double rho1 = 0.0;   // foreground rate, > rho0 after relabeling
  double weight = 0.5; // shared foreground mixing weight
  std::vector<double> responsibilities;  // P(foreground | u), per input point
  bool degenerate = false;
  std::vector<double> loglik_trace;
};

struct GaussianMixtureFit {
  double mu0 = 0.0;
  double mu1 = 0.0;    // > mu0 after relabeling
  double sigma0 = 0.0;
  double sigma1 = 0.0;
  double weight = 0.5;
  std::vector<double> responsibilities;
  bool degenerate = false;
  std::vector<double> loglik_trace;
};

// log(u) + 1 is undefined at the zero counts that dominate EHR data; the
// transform used throughout is log(u + 1).
double count_transform(std::int64_t count);

PoissonMixtureFit fit_poisson_mixture(const std::vector<std::int64_t>& counts,
                                      const EmConfig& config = {});

GaussianMixtureFit fit_gaussian_mixture(const std::vector<std::int64_t>& counts,
                                        const EmConfig& config = {});
// Same fitter on already-transformed values (tests, symmetry properties).
GaussianMixtureFit fit_gaussian_mixture_values(const std::vector<double>& values,
                                               const EmConfig& config = {});

// Per-topic prior parameters, serializable and applicable to new counts.
struct ColumnPrior {
  bool binary = false;  // degenerate column: fall back to the observed/absent rule
  double rho0 = 0.0, rho1 = 0.0, poisson_weight = 0.5;
  double mu0 = 0.0, mu1 = 0.0, sigma0 = 0.0, sigma1 = 0.0, gaussian_weight = 0.5;
};

enum class PriorKind { uniform, binary, mixture };

struct PriorModel {
  PriorKind kind = PriorKind::uniform;
  double floor = 1e-6;
  std::vector<ColumnPrior> columns;  // mixture kind only

  // Evaluates pi for a count matrix with the same column layout.
  Matrix apply(const Matrix& u) const;
  // Single-row variant for held-out patients.
  std::vector<double> apply_row(std::span<const double> u_row) const;
};

// Fits both mixtures per column and stores their parameters.
PriorModel fit_prior_model(const Matrix& u, const EmConfig& config = {});

// pi_jk = (poisson + gaussian responsibilities) / 2, clamped to [floor, 1];
// columns where both fits are degenerate use the binary rule.
Matrix compute_prior(const Matrix& u, const EmConfig& config = {});

// pi_jk = 1 if u_jk > 0 else floor.
Matrix binary_prior(const Matrix& u, double floor = 1e-6);

}  // namespace ehrsurv
