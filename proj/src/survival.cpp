#include "ehrsurv/survival.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "ehrsurv/errors.hpp"

namespace ehrsurv {

namespace {

// Patients sorted by observed time, with distinct event times grouped for
// Breslow tie handling.
struct RiskLayout {
  std::vector<std::size_t> order;       // patient indices, time ascending
  std::vector<double> event_times;      // distinct, ascending
  std::vector<double> event_counts;     // d_i per distinct event time
  std::size_t n_events = 0;
};

RiskLayout build_layout(const std::vector<SurvivalOutcome>& outcomes) {
  RiskLayout layout;
  layout.order.resize(outcomes.size());
  std::iota(layout.order.begin(), layout.order.end(), std::size_t{0});
  std::stable_sort(layout.order.begin(), layout.order.end(),
                   [&](std::size_t a, std::size_t b) { return outcomes[a].time < outcomes[b].time; });
  for (std::size_t idx : layout.order) {
    const auto& o = outcomes[idx];
    if (!o.event) continue;
    ++layout.n_events;
    if (!layout.event_times.empty() && layout.event_times.back() == o.time) {
      layout.event_counts.back() += 1.0;
    } else {
      layout.event_times.push_back(o.time);
      layout.event_counts.push_back(1.0);
    }
  }
  return layout;
}

// S0(t_i) = sum over the risk set {T_j >= t_i} of exp(eta_j), per distinct
// event time, computed in one descending pass.
std::vector<double> risk_sums(const RiskLayout& layout,
                              const std::vector<SurvivalOutcome>& outcomes,
                              const std::vector<double>& exp_eta) {
  std::vector<double> s0(layout.event_times.size(), 0.0);
  double acc = 0.0;
  std::size_t pos = layout.order.size();
  for (std::size_t i = layout.event_times.size(); i-- > 0;) {
    const double t = layout.event_times[i];
    while (pos > 0 && outcomes[layout.order[pos - 1]].time >= t) {
      acc += exp_eta[layout.order[pos - 1]];
      --pos;
    }
    s0[i] = acc;
  }
  return s0;
}

std::vector<double> linear_predictor(const Matrix& features, std::span<const double> w) {
  std::vector<double> eta(features.rows(), 0.0);
  for (std::size_t j = 0; j < features.rows(); ++j) {
    const auto row = features.row(j);
    double dot = 0.0;
    for (std::size_t k = 0; k < row.size(); ++k) dot += row[k] * w[k];
    eta[j] = dot;
  }
  return eta;
}

double soft_threshold(double z, double lambda) {
  if (z > lambda) return z - lambda;
  if (z < -lambda) return z + lambda;
  return 0.0;
}

double penalized_objective(const Matrix& features, const std::vector<SurvivalOutcome>& outcomes,
                           std::span<const double> w, double lambda1, double lambda2) {
  double penalty = 0.0;
  for (double v : w) penalty += lambda2 * v * v + lambda1 * std::abs(v);
  return cox_partial_loglik(features, outcomes, w) - penalty;
}

}  // namespace

double BaselineHazard::at(double t) const {
  auto it = std::upper_bound(times.begin(), times.end(), t);
  if (it == times.begin()) return 0.0;
  return cumulative[static_cast<std::size_t>(it - times.begin()) - 1];
}

double SurvivalFunction::operator()(double t) const {
  return std::exp(-baseline.at(t) * hr);
}

double cox_partial_loglik(const Matrix& features, const std::vector<SurvivalOutcome>& outcomes,
                          std::span<const double> w) {
  const auto layout = build_layout(outcomes);
  const auto eta = linear_predictor(features, w);
  std::vector<double> exp_eta(eta.size());
  for (std::size_t j = 0; j < eta.size(); ++j) exp_eta[j] = std::exp(eta[j]);
  const auto s0 = risk_sums(layout, outcomes, exp_eta);

  double ll = 0.0;
  for (std::size_t j = 0; j < outcomes.size(); ++j) {
    if (outcomes[j].event) ll += eta[j];
  }
  for (std::size_t i = 0; i < s0.size(); ++i) {
    ll -= layout.event_counts[i] * std::log(s0[i]);
  }
  return ll;
}

std::vector<double> cox_score(const Matrix& features, const std::vector<SurvivalOutcome>& outcomes,
                              std::span<const double> w) {
  const std::size_t K = features.cols();
  const auto layout = build_layout(outcomes);
  const auto eta = linear_predictor(features, w);
  std::vector<double> exp_eta(eta.size());
  for (std::size_t j = 0; j < eta.size(); ++j) exp_eta[j] = std::exp(eta[j]);

  std::vector<double> score(K, 0.0);
  for (std::size_t j = 0; j < outcomes.size(); ++j) {
    if (!outcomes[j].event) continue;
    const auto row = features.row(j);
    for (std::size_t k = 0; k < K; ++k) score[k] += row[k];
  }
  // descending accumulation of S1_k over risk sets
  std::vector<double> s1(K, 0.0);
  double s0 = 0.0;
  std::size_t pos = layout.order.size();
  for (std::size_t i = layout.event_times.size(); i-- > 0;) {
    const double t = layout.event_times[i];
    while (pos > 0 && outcomes[layout.order[pos - 1]].time >= t) {
      const std::size_t j = layout.order[pos - 1];
      const auto row = features.row(j);
      s0 += exp_eta[j];
      for (std::size_t k = 0; k < K; ++k) s1[k] += row[k] * exp_eta[j];
      --pos;
    }
    const double d = layout.event_counts[i];
    for (std::size_t k = 0; k < K; ++k) score[k] -= d * s1[k] / s0;
  }
  return score;
}

CoxFit fit_cox_elastic_net(const Matrix& features, const std::vector<SurvivalOutcome>& outcomes,
                           double lambda1, double lambda2, const CoxConfig& config) {
  if (features.rows() != outcomes.size()) {
    throw DataError("cox fit: feature rows and outcome count differ");
  }
  const auto layout = build_layout(outcomes);
  if (layout.n_events == 0) throw DataError("cox fit: no events");
  const std::size_t P = features.rows();
  const std::size_t K = features.cols();

  CoxFit fit;
  fit.w.assign(K, 0.0);
  fit.lambda1 = lambda1;
  fit.lambda2 = lambda2;

  double objective = penalized_objective(features, outcomes, fit.w, lambda1, lambda2);
  if (!std::isfinite(objective)) throw NumericalError("cox fit: non-finite objective at w = 0");

  std::vector<double> eta(P, 0.0), exp_eta(P, 1.0);
  std::vector<double> grad(P), hess(P);
  std::vector<double> w_prev(K), w_round(K);

  for (int cycle = 0; cycle < config.max_cycles; ++cycle) {
    // Quadratic approximation at the current w: per-patient gradient and
    // diagonal Hessian of the partial log-likelihood in eta.
    for (std::size_t j = 0; j < P; ++j) exp_eta[j] = std::exp(eta[j]);
    const auto s0 = risk_sums(layout, outcomes, exp_eta);
    std::vector<double> lam1_at(P, 0.0), lam2_at(P, 0.0);
    {
      // cumulative sums of d_i/S0 and d_i/S0^2 up to each patient's time
      double c1 = 0.0, c2 = 0.0;
      std::size_t ev = 0;
      for (std::size_t pos = 0; pos < layout.order.size(); ++pos) {
        const std::size_t j = layout.order[pos];
        while (ev < layout.event_times.size() && layout.event_times[ev] <= outcomes[j].time) {
          c1 += layout.event_counts[ev] / s0[ev];
          c2 += layout.event_counts[ev] / (s0[ev] * s0[ev]);
          ++ev;
        }
        lam1_at[j] = c1;
        lam2_at[j] = c2;
      }
    }
    for (std::size_t j = 0; j < P; ++j) {
      const double mu = exp_eta[j] * lam1_at[j];
      grad[j] = (outcomes[j].event ? 1.0 : 0.0) - mu;
      hess[j] = std::max(mu - exp_eta[j] * exp_eta[j] * lam2_at[j], 1e-12);
    }

    w_prev = fit.w;
    w_round = fit.w;
    // residual r_j tracks grad_j - hess_j * x_j'(w - w_prev)
    std::vector<double> resid = grad;
    for (int inner = 0; inner < 100; ++inner) {
      double max_delta = 0.0;
      for (std::size_t k = 0; k < K; ++k) {
        double score = 0.0, curv = 0.0;
        for (std::size_t j = 0; j < P; ++j) {
          const double x = features(j, k);
          if (x == 0.0) continue;
          score += x * resid[j];
          curv += hess[j] * x * x;
        }
        if (curv <= 0.0) continue;
        const double cur = w_round[k];
        const double v = soft_threshold(curv * cur + score, lambda1) / (curv + 2.0 * lambda2);
        const double delta = v - cur;
        if (delta != 0.0) {
          for (std::size_t j = 0; j < P; ++j) {
            const double x = features(j, k);
            if (x != 0.0) resid[j] -= hess[j] * x * delta;
          }
          w_round[k] = v;
          max_delta = std::max(max_delta, std::abs(delta));
        }
      }
      if (max_delta < config.tol) break;
    }

    // Step halving keeps the penalized objective non-decreasing.
    double step = 1.0;
    double new_objective = -std::numeric_limits<double>::infinity();
    std::vector<double> w_try(K);
    for (int half = 0; half < 40; ++half) {
      for (std::size_t k = 0; k < K; ++k) {
        w_try[k] = w_prev[k] + step * (w_round[k] - w_prev[k]);
      }
      new_objective = penalized_objective(features, outcomes, w_try, lambda1, lambda2);
      if (std::isfinite(new_objective) && new_objective >= objective - 1e-12 * std::abs(objective)) {
        break;
      }
      step *= 0.5;
    }
    if (!std::isfinite(new_objective)) throw NumericalError("cox fit: non-finite objective");

    fit.w = w_try;
    objective = std::max(objective, new_objective);
    fit.objective_trace.push_back(objective);
    fit.n_iter = cycle + 1;

    double max_change = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      max_change = std::max(max_change, std::abs(fit.w[k] - w_prev[k]));
    }
    eta = linear_predictor(features, fit.w);
    if (max_change < config.tol) {
      fit.converged = true;
      break;
    }
  }
  return fit;
}

BaselineHazard breslow_baseline(const Matrix& features,
                                const std::vector<SurvivalOutcome>& outcomes,
                                std::span<const double> w) {
  const auto layout = build_layout(outcomes);
  BaselineHazard baseline;
  if (layout.n_events == 0) return baseline;  // H0 identically zero
  const auto eta = linear_predictor(features, w);
  std::vector<double> exp_eta(eta.size());
  for (std::size_t j = 0; j < eta.size(); ++j) exp_eta[j] = std::exp(eta[j]);
  const auto s0 = risk_sums(layout, outcomes, exp_eta);

  baseline.times = layout.event_times;
  baseline.cumulative.resize(s0.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < s0.size(); ++i) {
    acc += layout.event_counts[i] / s0[i];
    baseline.cumulative[i] = acc;
  }
  return baseline;
}

double hazard_ratio(std::span<const double> w, std::span<const double> zbar) {
  if (w.size() != zbar.size()) throw DataError("hazard_ratio: dimension mismatch");
  double dot = 0.0;
  for (std::size_t k = 0; k < w.size(); ++k) dot += w[k] * zbar[k];
  return std::exp(std::clamp(dot, -700.0, 700.0));
}

}  // namespace ehrsurv
