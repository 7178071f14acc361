#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "telesim/stats/score_table.hpp"

namespace telesim::stats {

/// OLS with the study arm plus scenario and actor fixed effects. Dummies drop
/// the reference arm and the alphabetically first scenario and actor.
struct OlsFit {
  std::vector<std::string> names;  // "(Intercept)", "arm:<a>", "scenario:<s>", "actor:<p>"
  Eigen::VectorXd coefficients;
  Eigen::MatrixXd covariance;
  double sigma2 = 0;  // residual variance
  double rss = 0;
  int n = 0;
  int df = 0;
  std::string reference_arm;
  std::vector<std::string> arms;  // every arm in the fit, sorted

  std::optional<double> coefficient(const std::string& name) const;
  /// Arm effect relative to the reference arm (0 for the reference itself).
  double arm_effect(const std::string& arm) const;
};

/// Throws Error(EmptyInput) for an absent category, Error(UnknownArm) when
/// the reference arm has no rows, Error(RankDeficient) when the design is
/// not full rank, Error(InsufficientData) when df <= 0.
OlsFit fit_ols_fixed_effects(const ScoreTable& table, const std::string& category,
                             const std::string& reference_arm);

/// Design matrix and response used by the fit, exposed for independent checks.
struct Design {
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
  std::vector<std::string> names;
};
Design build_design(const std::vector<ScoreRow>& rows, const std::string& reference_arm);

struct Contrast {
  double estimate = 0;
  double standard_error = 0;
  double t = 0;
  double p_value = 1;
  int df = 0;
};

/// armA - armB with a two-sided t test on the fit's df. Throws
/// Error(UnknownArm).
Contrast pairwise_contrast(const OlsFit& fit, const std::string& arm_a, const std::string& arm_b);

/// Two-sided p-value for a t statistic.
double t_test_p_value(double t, int df);

struct BootstrapCi {
  double estimate = 0;  // sample mean
  double lower = 0;
  double upper = 0;
  double level = 0.95;
  int n_resamples = 0;
  std::uint64_t seed = 0;
};

/// Percentile interval of resample means. Resample b draws from its own
/// generator seeded with derive_seed(seed, b), so the result depends only on
/// (values, n_resamples, level, seed). Throws Error(EmptyInput).
BootstrapCi bootstrap_mean_ci(std::span<const double> values, int n_resamples = 10000,
                              double level = 0.95, std::uint64_t seed = 0);

/// Linear-interpolation sample quantile (type 7) of sorted data.
double quantile_sorted(std::span<const double> sorted, double q);

struct TauResult {
  double tau_b = 0;
  std::int64_t n_pairs = 0;
};

/// Kendall's tau-b in O(n log n). Throws Error(LengthMismatch),
/// Error(InsufficientData) for n < 2 and Error(TauUndefined) when either
/// vector is entirely tied.
TauResult kendall_tau_b(std::span<const double> x, std::span<const double> y);

struct GapMap {
  std::string arm_a;
  std::string arm_b;
  std::vector<std::string> scenarios;
  std::vector<std::string> domains;
  std::vector<std::vector<double>> values;  // [scenario][domain]
};

/// Mean item score (0-2) of arm A minus arm B per scenario and domain, from
/// the item_mean:<Domain> categories. Throws Error(MissingArm).
GapMap gap_map(const ScoreTable& table, const std::string& arm_a, const std::string& arm_b);
std::string to_csv(const GapMap& map);

/// Per category, two vectors aligned on (scenario, arm), one per actor
/// position. Scenarios are sorted; arms follow `arms`; the first actor is
/// the one named first in `actor_order` (alphabetical when absent).
/// Rubric categories are percents, universal ones raw ratings.
struct PairedVectors {
  std::vector<double> first;
  std::vector<double> second;
  std::vector<std::pair<std::string, std::string>> keys;  // (scenario, arm)
};
std::map<std::string, PairedVectors> replication_pairs(
    const ScoreTable& table, const std::vector<std::string>& replicated_scenarios,
    const std::vector<std::string>& arms = {"human", "coclinician", "comparator_realtime"},
    const std::map<std::string, std::pair<std::string, std::string>>& actor_order = {});

/// True for the categories replication_pairs reports on.
bool is_tau_category(const std::string& category);

}  // namespace telesim::stats
