#include "ehrsurv/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "ehrsurv/errors.hpp"

namespace ehrsurv {

namespace {

double normal_sf(double z) {  // P(Z > z)
  return 0.5 * std::erfc(z / std::sqrt(2.0));
}

}  // namespace

std::optional<double> dynamic_auc_brute(const std::vector<SurvivalOutcome>& outcomes,
                                        std::span<const double> hr, double t,
                                        const AucOptions& options) {
  const std::size_t P = outcomes.size();
  std::size_t n_cases = 0, n_controls = 0;
  double num = 0.0;
  for (std::size_t i = 0; i < P; ++i) {
    if (outcomes[i].time > t) continue;  // i ranges over cases
    ++n_cases;
    for (std::size_t j = 0; j < P; ++j) {
      if (outcomes[j].time <= t) continue;  // j ranges over controls
      if (hr[j] < hr[i]) {
        num += 1.0;
      } else if (hr[j] == hr[i]) {
        num += options.tie_half ? 0.5 : 1.0;
      }
    }
  }
  for (std::size_t j = 0; j < P; ++j) {
    if (outcomes[j].time > t) ++n_controls;
  }
  if (n_cases == 0 || n_controls == 0) return std::nullopt;
  return num / (static_cast<double>(n_cases) * static_cast<double>(n_controls));
}

std::optional<double> dynamic_auc(const std::vector<SurvivalOutcome>& outcomes,
                                  std::span<const double> hr, double t,
                                  const AucOptions& options) {
  std::vector<double> control_hr;
  std::vector<double> case_hr;
  for (std::size_t j = 0; j < outcomes.size(); ++j) {
    (outcomes[j].time > t ? control_hr : case_hr).push_back(hr[j]);
  }
  if (case_hr.empty() || control_hr.empty()) return std::nullopt;
  std::sort(control_hr.begin(), control_hr.end());
  double num = 0.0;
  for (double h : case_hr) {
    if (options.tie_half) {
      const auto lo = std::lower_bound(control_hr.begin(), control_hr.end(), h);
      const auto hi = std::upper_bound(lo, control_hr.end(), h);
      num += static_cast<double>(lo - control_hr.begin()) + 0.5 * static_cast<double>(hi - lo);
    } else {
      const auto hi = std::upper_bound(control_hr.begin(), control_hr.end(), h);
      num += static_cast<double>(hi - control_hr.begin());
    }
  }
  return num / (static_cast<double>(case_hr.size()) * static_cast<double>(control_hr.size()));
}

DynamicAucCurve dynamic_auc_curve(const std::vector<SurvivalOutcome>& outcomes,
                                  std::span<const double> hr, const std::vector<double>& grid,
                                  const AucOptions& options) {
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (grid[i] <= grid[i - 1]) throw DataError("dynamic_auc_curve: grid must be increasing");
  }
  DynamicAucCurve curve;
  curve.times = grid;
  double total = 0.0;
  std::size_t defined = 0;
  for (double t : grid) {
    auto v = dynamic_auc(outcomes, hr, t, options);
    curve.auc_at_t.push_back(v);
    if (v) {
      total += *v;
      ++defined;
    }
  }
  if (defined == 0) throw DataError("dynamic_auc_curve: degenerate grid, no defined points");
  curve.mean_auc = total / static_cast<double>(defined);
  return curve;
}

std::vector<double> uniform_time_grid(const std::vector<SurvivalOutcome>& outcomes, int n_points) {
  if (outcomes.empty() || n_points < 1) throw DataError("uniform_time_grid: empty input");
  double lo = outcomes.front().time, hi = outcomes.front().time;
  for (const auto& o : outcomes) {
    lo = std::min(lo, o.time);
    hi = std::max(hi, o.time);
  }
  std::vector<double> grid(n_points);
  if (n_points == 1) {
    grid[0] = hi;
    return grid;
  }
  for (int i = 0; i < n_points; ++i) {
    grid[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n_points - 1);
  }
  // guard against duplicate collapse when all times equal
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (grid[i] <= grid[i - 1]) grid[i] = std::nextafter(grid[i - 1], 1e300);
  }
  return grid;
}

RocCurve coefficient_roc(std::span<const double> w_est, const std::vector<bool>& support,
                         bool signed_scores) {
  if (w_est.size() != support.size()) throw DataError("coefficient_roc: dimension mismatch");
  std::size_t positives = 0;
  for (bool s : support) positives += s ? 1 : 0;
  const std::size_t negatives = support.size() - positives;
  if (positives == 0 || negatives == 0) {
    throw DataError("coefficient_roc: degenerate support (needs both classes)");
  }
  std::vector<std::size_t> order(w_est.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto score = [&](std::size_t i) { return signed_scores ? w_est[i] : std::abs(w_est[i]); };
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return score(a) > score(b); });

  RocCurve roc;
  roc.fpr.push_back(0.0);
  roc.tpr.push_back(0.0);
  double tp = 0.0, fp = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    // advance through a tie block so tied scores enter together
    const double s = score(order[i]);
    while (i < order.size() && score(order[i]) == s) {
      if (support[order[i]]) {
        tp += 1.0;
      } else {
        fp += 1.0;
      }
      ++i;
    }
    roc.fpr.push_back(fp / static_cast<double>(negatives));
    roc.tpr.push_back(tp / static_cast<double>(positives));
  }
  double area = 0.0;
  for (std::size_t p = 1; p < roc.fpr.size(); ++p) {
    area += 0.5 * (roc.tpr[p] + roc.tpr[p - 1]) * (roc.fpr[p] - roc.fpr[p - 1]);
  }
  roc.area = area;
  return roc;
}

KmCurve kaplan_meier(const std::vector<SurvivalOutcome>& outcomes) {
  if (outcomes.empty()) throw DataError("kaplan_meier: empty input");
  std::vector<std::size_t> order(outcomes.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return outcomes[a].time < outcomes[b].time;
  });

  KmCurve curve;
  double s = 1.0;
  double at_risk = static_cast<double>(outcomes.size());
  std::size_t pos = 0;
  while (pos < order.size()) {
    const double t = outcomes[order[pos]].time;
    double events = 0.0, leaving = 0.0;
    while (pos < order.size() && outcomes[order[pos]].time == t) {
      events += outcomes[order[pos]].event ? 1.0 : 0.0;
      leaving += 1.0;
      ++pos;
    }
    if (events > 0.0) {
      curve.times.push_back(t);
      curve.at_risk.push_back(at_risk);
      s *= 1.0 - events / at_risk;
      curve.survival.push_back(s);
    }
    at_risk -= leaving;
  }
  return curve;
}

LogRankResult log_rank_test(const std::vector<SurvivalOutcome>& group_a,
                            const std::vector<SurvivalOutcome>& group_b) {
  if (group_a.empty() || group_b.empty()) throw DataError("log_rank_test: empty group");
  std::size_t total_events = 0;
  for (const auto& o : group_a) total_events += o.event;
  for (const auto& o : group_b) total_events += o.event;
  if (total_events == 0) throw DataError("log_rank_test: zero events");

  // pooled distinct event times
  std::map<double, std::pair<double, double>> events_at;  // t -> (d_a, d_b)
  for (const auto& o : group_a) {
    if (o.event) events_at[o.time].first += 1.0;
  }
  for (const auto& o : group_b) {
    if (o.event) events_at[o.time].second += 1.0;
  }

  double observed_a = 0.0, expected_a = 0.0, variance = 0.0;
  for (const auto& [t, d] : events_at) {
    double n_a = 0.0, n_b = 0.0;
    for (const auto& o : group_a) {
      if (o.time >= t) n_a += 1.0;
    }
    for (const auto& o : group_b) {
      if (o.time >= t) n_b += 1.0;
    }
    const double n = n_a + n_b;
    const double d_total = d.first + d.second;
    observed_a += d.first;
    expected_a += d_total * n_a / n;
    if (n > 1.0) {
      variance += d_total * (n_a / n) * (n_b / n) * (n - d_total) / (n - 1.0);
    }
  }

  LogRankResult result;
  if (variance <= 0.0) {
    result.chi_square = 0.0;
    result.p_value_one_sided = 1.0;
    result.p_value_two_sided = 1.0;
    return result;
  }
  const double z = (observed_a - expected_a) / std::sqrt(variance);
  result.chi_square = z * z;
  result.p_value_one_sided = normal_sf(z);
  result.p_value_two_sided = std::erfc(std::abs(z) / std::sqrt(2.0));
  return result;
}

GroupSplit group_split_by_topic(const Matrix& theta, std::size_t k, double quantile) {
  if (k >= theta.cols()) throw DataError("group_split_by_topic: topic out of range");
  const std::size_t P = theta.rows();
  std::vector<double> column(P);
  for (std::size_t j = 0; j < P; ++j) column[j] = theta(j, k);
  std::vector<double> sorted(column);
  std::sort(sorted.begin(), sorted.end());
  if (sorted.front() == sorted.back()) {
    throw DataError("group_split_by_topic: no split, all values equal");
  }
  std::size_t idx = static_cast<std::size_t>(quantile * static_cast<double>(P));
  idx = std::min(idx, P - 1);
  GroupSplit split;
  split.threshold = sorted[idx];
  for (std::size_t j = 0; j < P; ++j) {
    (column[j] >= split.threshold ? split.high : split.low).push_back(j);
  }
  return split;
}

Matrix mutual_information(const Corpus& corpus, int modality, const std::vector<int>& features) {
  if (modality < 0 || modality >= corpus.num_modalities()) {
    throw DataError("mutual_information: unknown modality");
  }
  const std::size_t P = corpus.num_patients();
  const std::size_t F = features.size();
  // presence indicators
  std::vector<std::vector<bool>> present(F, std::vector<bool>(P, false));
  for (std::size_t j = 0; j < P; ++j) {
    for (const auto& tg : corpus.patients[j].tokens[modality]) {
      for (std::size_t f = 0; f < F; ++f) {
        if (tg.feature == features[f]) present[f][j] = true;
      }
    }
  }
  Matrix mi(F, F, 0.0);
  if (P == 0) return mi;
  const double n = static_cast<double>(P);
  for (std::size_t a = 0; a < F; ++a) {
    for (std::size_t b = a + 1; b < F; ++b) {
      double joint[2][2] = {{0, 0}, {0, 0}};
      for (std::size_t j = 0; j < P; ++j) {
        joint[present[a][j] ? 1 : 0][present[b][j] ? 1 : 0] += 1.0;
      }
      double value = 0.0;
      for (int x = 0; x < 2; ++x) {
        for (int y = 0; y < 2; ++y) {
          const double pxy = joint[x][y] / n;
          const double px = (joint[x][0] + joint[x][1]) / n;
          const double py = (joint[0][y] + joint[1][y]) / n;
          if (pxy > 0.0) value += pxy * std::log(pxy / (px * py));
        }
      }
      // plug-in MI is nonnegative up to float dust
      value = std::max(value, 0.0);
      mi(a, b) = value;
      mi(b, a) = value;
    }
  }
  (void)xlogx;
  return mi;
}

std::vector<RankedFeature> top_features(const Matrix& phi, const Vocabulary& vocab, std::size_t k,
                                        std::size_t n) {
  if (k >= phi.rows()) throw DataError("top_features: topic out of range");
  const std::size_t V = phi.cols();
  std::vector<std::size_t> order(V);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (phi(k, a) != phi(k, b)) return phi(k, a) > phi(k, b);
    return vocab.feature_ids[a] < vocab.feature_ids[b];
  });
  std::vector<RankedFeature> out;
  for (std::size_t i = 0; i < std::min(n, V); ++i) {
    out.push_back({vocab.feature_ids[order[i]], phi(k, order[i])});
  }
  return out;
}

}  // namespace ehrsurv
