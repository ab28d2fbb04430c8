#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ehrsurv/corpus.hpp"
#include "ehrsurv/matrix.hpp"

namespace ehrsurv {

struct DynamicAucCurve {
  std::vector<double> times;
  std::vector<std::optional<double>> auc_at_t;  // absent where a group is empty
  double mean_auc = 0.0;                        // over defined points
};

struct KmCurve {
  std::vector<double> times;     // distinct event times, ascending
  std::vector<double> survival;  // product-limit S at those times
  std::vector<double> at_risk;   // risk-set size just before each time
};

struct LogRankResult {
  double chi_square = 0.0;
  double p_value_one_sided = 1.0;  // direction: group A has the higher hazard
  double p_value_two_sided = 1.0;
  int degrees_of_freedom = 1;
};

struct AucOptions {
  bool tie_half = false;  // score HR ties 0.5 instead of the printed full credit
};

// Cumulative/dynamic AUC at time t: cases {T <= t} vs controls {T > t},
// concordant when HR_control <= HR_case. Absent when either group is empty.
// O(P log P); must agree exactly with dynamic_auc_brute.
std::optional<double> dynamic_auc(const std::vector<SurvivalOutcome>& outcomes,
                                  std::span<const double> hr, double t,
                                  const AucOptions& options = {});

// O(P^2) reference used by tests and the acceptance suite.
std::optional<double> dynamic_auc_brute(const std::vector<SurvivalOutcome>& outcomes,
                                        std::span<const double> hr, double t,
                                        const AucOptions& options = {});

DynamicAucCurve dynamic_auc_curve(const std::vector<SurvivalOutcome>& outcomes,
                                  std::span<const double> hr, const std::vector<double>& grid,
                                  const AucOptions& options = {});

// Uniform grid of n points ending at the max observed time (the step-by-step
// evaluation protocol); starts at min time.
std::vector<double> uniform_time_grid(const std::vector<SurvivalOutcome>& outcomes, int n_points);

struct RocCurve {
  std::vector<double> fpr;
  std::vector<double> tpr;
  double area = 0.0;
};

// Threshold sweep over |w_est| (or signed values with signed=true) against the
// boolean support.
RocCurve coefficient_roc(std::span<const double> w_est, const std::vector<bool>& support,
                         bool signed_scores = false);

KmCurve kaplan_meier(const std::vector<SurvivalOutcome>& outcomes);

LogRankResult log_rank_test(const std::vector<SurvivalOutcome>& group_a,
                            const std::vector<SurvivalOutcome>& group_b);

// Patients with theta[.,k] >= the q-quantile of the column go high.
struct GroupSplit {
  std::vector<std::size_t> high;
  std::vector<std::size_t> low;
  double threshold = 0.0;
};
GroupSplit group_split_by_topic(const Matrix& theta, std::size_t k, double quantile = 0.70);

// Pairwise mutual information (nats) of presence/absence indicators across
// patients; diagonal masked to 0.
Matrix mutual_information(const Corpus& corpus, int modality, const std::vector<int>& features);

struct RankedFeature {
  std::string feature_id;
  double weight = 0.0;
};
// Top-n features of one topic row by probability, ties broken lexicographically.
std::vector<RankedFeature> top_features(const Matrix& phi, const Vocabulary& vocab, std::size_t k,
                                        std::size_t n);

}  // namespace ehrsurv
