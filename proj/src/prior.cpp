#include "ehrsurv/prior.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ehrsurv/errors.hpp"

namespace ehrsurv {

namespace {

constexpr double kRateFloor = 1e-8;

double percentile(std::vector<double> values, double q) {
  std::sort(values.begin(), values.end());
  const std::size_t idx = static_cast<std::size_t>(q * static_cast<double>(values.size() - 1));
  return values[idx];
}

double log_poisson(double u, double rate, double lgamma_u1) {
  return u * std::log(rate) - rate - lgamma_u1;
}

double log_normal(double x, double mu, double sigma) {
  const double z = (x - mu) / sigma;
  return -0.5 * z * z - std::log(sigma) - 0.5 * std::log(2.0 * M_PI);
}

// log(exp(a) + exp(b)) without overflow
double log_add(double a, double b) {
  if (a < b) std::swap(a, b);
  return a + std::log1p(std::exp(b - a));
}

bool all_identical(const std::vector<double>& v) {
  for (const auto& x : v) {
    if (x != v.front()) return false;
  }
  return true;
}

}  // namespace

double count_transform(std::int64_t count) {
  return std::log(static_cast<double>(count) + 1.0);
}

PoissonMixtureFit fit_poisson_mixture(const std::vector<std::int64_t>& counts,
                                      const EmConfig& config) {
  PoissonMixtureFit fit;
  const std::size_t n = counts.size();
  fit.responsibilities.assign(n, 0.5);
  if (n == 0) {
    fit.degenerate = true;
    return fit;
  }

  std::vector<double> u(n), lg(n);
  for (std::size_t i = 0; i < n; ++i) {
    u[i] = static_cast<double>(counts[i]);
    lg[i] = std::lgamma(u[i] + 1.0);
  }
  if (all_identical(u)) {
    fit.degenerate = true;
    fit.rho0 = fit.rho1 = std::max(u.front(), kRateFloor);
    return fit;
  }

  double rho0 = percentile(u, 0.25) + 0.1;
  double rho1 = percentile(u, 0.90) + 0.1;
  if (rho1 <= rho0) rho1 = rho0 + 0.1;
  double weight = 0.5;

  double prev_ll = -std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < config.max_iters; ++iter) {
    double ll = 0.0;
    double sum_r = 0.0, sum_ru = 0.0, sum_q = 0.0, sum_qu = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double l1 = std::log(weight) + log_poisson(u[i], rho1, lg[i]);
      const double l0 = std::log1p(-weight) + log_poisson(u[i], rho0, lg[i]);
      const double norm = log_add(l1, l0);
      const double r = std::exp(l1 - norm);
      fit.responsibilities[i] = r;
      ll += norm;
      sum_r += r;
      sum_ru += r * u[i];
      sum_q += 1.0 - r;
      sum_qu += (1.0 - r) * u[i];
    }
    fit.loglik_trace.push_back(ll);
    rho1 = std::max(sum_r > 0 ? sum_ru / sum_r : rho1, kRateFloor);
    rho0 = std::max(sum_q > 0 ? sum_qu / sum_q : rho0, kRateFloor);
    weight = std::min(std::max(sum_r / static_cast<double>(n), 1e-12), 1.0 - 1e-12);
    if (std::isfinite(prev_ll) &&
        std::abs(ll - prev_ll) < config.tol * (std::abs(prev_ll) + 1.0)) {
      break;
    }
    prev_ll = ll;
  }

  if (rho0 > rho1) {
    std::swap(rho0, rho1);
    weight = 1.0 - weight;
    for (auto& r : fit.responsibilities) r = 1.0 - r;
  }
  fit.rho0 = rho0;
  fit.rho1 = rho1;
  fit.weight = weight;
  return fit;
}

GaussianMixtureFit fit_gaussian_mixture_values(const std::vector<double>& values,
                                               const EmConfig& config) {
  GaussianMixtureFit fit;
  const std::size_t n = values.size();
  fit.responsibilities.assign(n, 0.5);

  std::vector<double> distinct(values);
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.size() < 2) {
    fit.degenerate = true;
    if (!values.empty()) fit.mu0 = fit.mu1 = values.front();
    fit.sigma0 = fit.sigma1 = config.sigma_floor;
    return fit;
  }

  double mu0 = percentile(values, 0.25);
  double mu1 = percentile(values, 0.90);
  if (mu1 <= mu0) mu1 = mu0 + 1e-3;
  double mean = 0.0;
  for (double x : values) mean += x;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double x : values) var += (x - mean) * (x - mean);
  var /= static_cast<double>(n);
  double sigma0 = std::max(std::sqrt(var), config.sigma_floor);
  double sigma1 = sigma0;
  double weight = 0.5;

  double prev_ll = -std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < config.max_iters; ++iter) {
    double ll = 0.0;
    double sum_r = 0.0, sum_rx = 0.0, sum_q = 0.0, sum_qx = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double l1 = std::log(weight) + log_normal(values[i], mu1, sigma1);
      const double l0 = std::log1p(-weight) + log_normal(values[i], mu0, sigma0);
      const double norm = log_add(l1, l0);
      const double r = std::exp(l1 - norm);
      fit.responsibilities[i] = r;
      ll += norm;
      sum_r += r;
      sum_rx += r * values[i];
      sum_q += 1.0 - r;
      sum_qx += (1.0 - r) * values[i];
    }
    fit.loglik_trace.push_back(ll);
    const double new_mu1 = sum_r > 0 ? sum_rx / sum_r : mu1;
    const double new_mu0 = sum_q > 0 ? sum_qx / sum_q : mu0;
    double s1 = 0.0, s0 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = fit.responsibilities[i];
      s1 += r * (values[i] - new_mu1) * (values[i] - new_mu1);
      s0 += (1.0 - r) * (values[i] - new_mu0) * (values[i] - new_mu0);
    }
    mu1 = new_mu1;
    mu0 = new_mu0;
    sigma1 = std::max(sum_r > 0 ? std::sqrt(s1 / sum_r) : sigma1, config.sigma_floor);
    sigma0 = std::max(sum_q > 0 ? std::sqrt(s0 / sum_q) : sigma0, config.sigma_floor);
    weight = std::min(std::max(sum_r / static_cast<double>(n), 1e-12), 1.0 - 1e-12);
    if (std::isfinite(prev_ll) &&
        std::abs(ll - prev_ll) < config.tol * (std::abs(prev_ll) + 1.0)) {
      break;
    }
    prev_ll = ll;
  }

  if (mu0 > mu1) {
    std::swap(mu0, mu1);
    std::swap(sigma0, sigma1);
    weight = 1.0 - weight;
    for (auto& r : fit.responsibilities) r = 1.0 - r;
  }
  fit.mu0 = mu0;
  fit.mu1 = mu1;
  fit.sigma0 = sigma0;
  fit.sigma1 = sigma1;
  fit.weight = weight;
  return fit;
}

GaussianMixtureFit fit_gaussian_mixture(const std::vector<std::int64_t>& counts,
                                        const EmConfig& config) {
  std::vector<double> values(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) values[i] = count_transform(counts[i]);
  return fit_gaussian_mixture_values(values, config);
}

Matrix PriorModel::apply(const Matrix& u) const {
  Matrix pi(u.rows(), kind == PriorKind::mixture ? columns.size() : u.cols());
  if (kind == PriorKind::mixture && columns.size() != u.cols()) {
    throw DataError("prior model has " + std::to_string(columns.size()) +
                    " columns but count matrix has " + std::to_string(u.cols()));
  }
  for (std::size_t j = 0; j < u.rows(); ++j) {
    auto row = apply_row(u.row(j));
    for (std::size_t k = 0; k < row.size(); ++k) pi(j, k) = row[k];
  }
  return pi;
}

std::vector<double> PriorModel::apply_row(std::span<const double> u_row) const {
  std::vector<double> pi(u_row.size());
  switch (kind) {
    case PriorKind::uniform: {
      const double v = 1.0 / static_cast<double>(u_row.size());
      std::fill(pi.begin(), pi.end(), v);
      return pi;
    }
    case PriorKind::binary: {
      for (std::size_t k = 0; k < u_row.size(); ++k) pi[k] = u_row[k] > 0 ? 1.0 : floor;
      return pi;
    }
    case PriorKind::mixture:
      break;
  }
  if (columns.size() != u_row.size()) {
    throw DataError("prior model column count mismatch");
  }
  for (std::size_t k = 0; k < u_row.size(); ++k) {
    const auto& c = columns[k];
    const double u = u_row[k];
    if (c.binary) {
      pi[k] = u > 0 ? 1.0 : floor;
      continue;
    }
    const double lgu = std::lgamma(u + 1.0);
    const double p1 = std::log(c.poisson_weight) + log_poisson(u, c.rho1, lgu);
    const double p0 = std::log1p(-c.poisson_weight) + log_poisson(u, c.rho0, lgu);
    const double r_poisson = std::exp(p1 - log_add(p1, p0));
    const double x = count_transform(static_cast<std::int64_t>(u));
    const double g1 = std::log(c.gaussian_weight) + log_normal(x, c.mu1, c.sigma1);
    const double g0 = std::log1p(-c.gaussian_weight) + log_normal(x, c.mu0, c.sigma0);
    const double r_gauss = std::exp(g1 - log_add(g1, g0));
    pi[k] = std::clamp(0.5 * (r_poisson + r_gauss), floor, 1.0);
  }
  return pi;
}

PriorModel fit_prior_model(const Matrix& u, const EmConfig& config) {
  if (u.cols() == 0) throw DataError("phecode count matrix has no columns");
  PriorModel model;
  model.kind = PriorKind::mixture;
  model.floor = config.pi_floor;
  model.columns.resize(u.cols());
  const std::size_t P = u.rows();
  std::vector<std::int64_t> column(P);
  for (std::size_t k = 0; k < u.cols(); ++k) {
    for (std::size_t j = 0; j < P; ++j) column[j] = static_cast<std::int64_t>(u(j, k));
    auto poisson = fit_poisson_mixture(column, config);
    auto gauss = fit_gaussian_mixture(column, config);
    auto& c = model.columns[k];
    if (poisson.degenerate && gauss.degenerate) {
      c.binary = true;
      continue;
    }
    c.rho0 = poisson.rho0;
    c.rho1 = poisson.rho1;
    c.poisson_weight = poisson.weight;
    c.mu0 = gauss.mu0;
    c.mu1 = gauss.mu1;
    c.sigma0 = gauss.sigma0;
    c.sigma1 = gauss.sigma1;
    c.gaussian_weight = gauss.weight;
    if (poisson.degenerate) {
      // Neutralize the degenerate side: rates equal makes its responsibility
      // constant 0.5 for every count, so the average is driven by the other fit.
      c.rho0 = c.rho1 = std::max(c.rho0, kRateFloor);
      c.poisson_weight = 0.5;
    }
    if (gauss.degenerate) {
      c.mu0 = c.mu1;
      c.sigma0 = c.sigma1 = config.sigma_floor;
      c.gaussian_weight = 0.5;
    }
  }
  return model;
}

Matrix compute_prior(const Matrix& u, const EmConfig& config) {
  return fit_prior_model(u, config).apply(u);
}

Matrix binary_prior(const Matrix& u, double floor) {
  Matrix pi(u.rows(), u.cols());
  for (std::size_t j = 0; j < u.rows(); ++j) {
    for (std::size_t k = 0; k < u.cols(); ++k) {
      pi(j, k) = u(j, k) > 0 ? 1.0 : floor;
    }
  }
  return pi;
}

}  // namespace ehrsurv
