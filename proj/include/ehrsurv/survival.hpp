#pragma once

#include <span>
#include <vector>

#include "ehrsurv/corpus.hpp"
#include "ehrsurv/matrix.hpp"

namespace ehrsurv {

struct CoxConfig {
  double tol = 1e-7;      // max coefficient change across a cycle
  int max_cycles = 10000;
};

struct CoxFit {
  std::vector<double> w;
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  int n_iter = 0;
  bool converged = false;
  std::vector<double> objective_trace;  // penalized objective after each cycle
};

// Right-continuous step function H0(t), zero before the first event time.
struct BaselineHazard {
  std::vector<double> times;       // strictly increasing distinct event times
  std::vector<double> cumulative;  // H0 at those times, nondecreasing

  double at(double t) const;
  bool empty() const { return times.empty(); }
};

// Breslow partial log-likelihood of w (ties share the risk-set denominator).
double cox_partial_loglik(const Matrix& features, const std::vector<SurvivalOutcome>& outcomes,
                          std::span<const double> w);

// Analytic score (gradient) of the partial log-likelihood.
std::vector<double> cox_score(const Matrix& features, const std::vector<SurvivalOutcome>& outcomes,
                              std::span<const double> w);

// Maximizes cox_partial_loglik(w) - lambda2*||w||_2^2 - lambda1*||w||_1 by
// cyclic coordinate descent on a quadratic approximation, with step halving so
// the penalized objective never decreases across cycles.
CoxFit fit_cox_elastic_net(const Matrix& features, const std::vector<SurvivalOutcome>& outcomes,
                           double lambda1, double lambda2, const CoxConfig& config = {});

// H0 steps d_i / sum_{T_j >= t_i} exp(w'x_j) at each distinct event time.
BaselineHazard breslow_baseline(const Matrix& features,
                                const std::vector<SurvivalOutcome>& outcomes,
                                std::span<const double> w);

// exp(w'zbar) with the inner product clipped to +-700.
double hazard_ratio(std::span<const double> w, std::span<const double> zbar);

// S(t) = exp(-H0(t) * hr)
struct SurvivalFunction {
  BaselineHazard baseline;
  double hr = 1.0;
  double operator()(double t) const;
};

}  // namespace ehrsurv
