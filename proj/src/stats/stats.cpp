#include "telesim/stats/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include <boost/math/distributions/students_t.hpp>

#include "telesim/common/error.hpp"
#include "telesim/common/rng.hpp"

namespace telesim::stats {

// ---- OLS ----

std::optional<double> OlsFit::coefficient(const std::string& name) const {
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return coefficients(static_cast<Eigen::Index>(i));
  return std::nullopt;
}

double OlsFit::arm_effect(const std::string& arm) const {
  if (arm == reference_arm) return 0.0;
  auto c = coefficient("arm:" + arm);
  if (!c) throw Error(ErrorCode::UnknownArm, "arm '" + arm + "' not in fit");
  return *c;
}

Design build_design(const std::vector<ScoreRow>& rows, const std::string& reference_arm) {
  std::set<std::string> arms, scenarios, actors;
  for (const auto& r : rows) {
    arms.insert(r.arm);
    scenarios.insert(r.scenario);
    actors.insert(r.actor);
  }
  Design d;
  d.names.push_back("(Intercept)");
  std::map<std::string, Eigen::Index> col;
  for (const auto& a : arms)
    if (a != reference_arm) {
      col["arm:" + a] = static_cast<Eigen::Index>(d.names.size());
      d.names.push_back("arm:" + a);
    }
  for (auto it = std::next(scenarios.begin()); it != scenarios.end() && !scenarios.empty(); ++it) {
    col["scenario:" + *it] = static_cast<Eigen::Index>(d.names.size());
    d.names.push_back("scenario:" + *it);
  }
  for (auto it = std::next(actors.begin()); it != actors.end() && !actors.empty(); ++it) {
    col["actor:" + *it] = static_cast<Eigen::Index>(d.names.size());
    d.names.push_back("actor:" + *it);
  }
  const auto n = static_cast<Eigen::Index>(rows.size());
  d.x = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(d.names.size()));
  d.y.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = rows[static_cast<std::size_t>(i)];
    d.x(i, 0) = 1.0;
    for (const auto& key : {"arm:" + r.arm, "scenario:" + r.scenario, "actor:" + r.actor})
      if (auto it = col.find(key); it != col.end()) d.x(i, it->second) = 1.0;
    d.y(i) = r.value;
  }
  return d;
}

OlsFit fit_ols_fixed_effects(const ScoreTable& table, const std::string& category,
                             const std::string& reference_arm) {
  auto rows = table.category(category);
  if (rows.empty()) throw Error(ErrorCode::EmptyInput, "no rows for category '" + category + "'");
  std::set<std::string> arms;
  for (const auto& r : rows) arms.insert(r.arm);
  if (!arms.count(reference_arm))
    throw Error(ErrorCode::UnknownArm, "reference arm '" + reference_arm + "' has no rows in '" + category + "'");

  auto d = build_design(rows, reference_arm);
  const auto n = d.x.rows();
  const auto p = d.x.cols();
  if (n - p <= 0)
    throw Error(ErrorCode::InsufficientData, "category '" + category + "': " + std::to_string(n) +
                                                 " rows for " + std::to_string(p) + " regressors");
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(d.x);
  if (qr.rank() < p)
    throw Error(ErrorCode::RankDeficient, "design for '" + category + "' has rank " +
                                              std::to_string(qr.rank()) + " < " + std::to_string(p));

  OlsFit fit;
  fit.names = d.names;
  // Solve on y - y0 so a constant shift of the scores reaches only the
  // intercept: when the differences are exact, contrasts are bit-identical.
  const double y0 = d.y(0);
  Eigen::VectorXd yc = d.y.array() - y0;
  fit.coefficients = qr.solve(yc);
  Eigen::VectorXd resid = yc - d.x * fit.coefficients;
  fit.coefficients(0) += y0;
  fit.rss = resid.squaredNorm();
  fit.n = static_cast<int>(n);
  fit.df = static_cast<int>(n - p);
  fit.sigma2 = fit.rss / fit.df;
  // (X'X)^-1 = P R^-1 R^-T P' from the pivoted QR.
  Eigen::MatrixXd r = qr.matrixR().topLeftCorner(p, p).template triangularView<Eigen::Upper>();
  Eigen::MatrixXd rinv = r.template triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(p, p));
  Eigen::MatrixXd inv_perm = rinv * rinv.transpose();
  Eigen::MatrixXd inv = qr.colsPermutation() * inv_perm * qr.colsPermutation().transpose();
  fit.covariance = fit.sigma2 * inv;
  fit.reference_arm = reference_arm;
  fit.arms.assign(arms.begin(), arms.end());
  return fit;
}

double t_test_p_value(double t, int df) {
  if (df <= 0) throw Error(ErrorCode::InvalidArgument, "t test needs df > 0");
  if (std::isnan(t)) return std::numeric_limits<double>::quiet_NaN();
  if (std::isinf(t)) return 0.0;
  boost::math::students_t dist(static_cast<double>(df));
  return 2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(t)));
}

Contrast pairwise_contrast(const OlsFit& fit, const std::string& arm_a, const std::string& arm_b) {
  auto index = [&](const std::string& arm) -> std::optional<Eigen::Index> {
    if (std::find(fit.arms.begin(), fit.arms.end(), arm) == fit.arms.end())
      throw Error(ErrorCode::UnknownArm, "arm '" + arm + "' not in fit");
    if (arm == fit.reference_arm) return std::nullopt;
    for (std::size_t i = 0; i < fit.names.size(); ++i)
      if (fit.names[i] == "arm:" + arm) return static_cast<Eigen::Index>(i);
    throw Error(ErrorCode::UnknownArm, "arm '" + arm + "' not in fit");
  };
  auto ia = index(arm_a);
  auto ib = index(arm_b);
  Contrast c;
  c.df = fit.df;
  if (arm_a == arm_b) return c;

  Eigen::VectorXd w = Eigen::VectorXd::Zero(fit.coefficients.size());
  if (ia) w(*ia) += 1.0;
  if (ib) w(*ib) -= 1.0;
  c.estimate = w.dot(fit.coefficients);
  double var = w.dot(fit.covariance * w);
  c.standard_error = std::sqrt(std::max(var, 0.0));
  if (c.standard_error == 0.0) {
    c.t = c.estimate == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), c.estimate);
    c.p_value = c.estimate == 0.0 ? 1.0 : 0.0;
  } else {
    c.t = c.estimate / c.standard_error;
    c.p_value = t_test_p_value(c.t, fit.df);
  }
  return c;
}

// ---- bootstrap ----

double quantile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw Error(ErrorCode::EmptyInput, "quantile of empty data");
  double h = (static_cast<double>(sorted.size()) - 1.0) * q;
  auto lo = static_cast<std::size_t>(std::floor(h));
  auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

BootstrapCi bootstrap_mean_ci(std::span<const double> values, int n_resamples, double level,
                              std::uint64_t seed) {
  if (values.empty()) throw Error(ErrorCode::EmptyInput, "bootstrap of empty sample");
  if (n_resamples < 1) throw Error(ErrorCode::InvalidArgument, "bootstrap needs >= 1 resample");
  if (!(level > 0.0 && level < 1.0)) throw Error(ErrorCode::InvalidArgument, "ci level must be in (0, 1)");

  const auto n = values.size();
  BootstrapCi ci;
  ci.estimate = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(n);
  ci.level = level;
  ci.n_resamples = n_resamples;
  ci.seed = seed;

  std::vector<double> means(static_cast<std::size_t>(n_resamples));
  for (int b = 0; b < n_resamples; ++b) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(b)));
    double sum = 0;
    for (std::size_t i = 0; i < n; ++i) sum += values[bounded(rng, n)];
    means[static_cast<std::size_t>(b)] = sum / static_cast<double>(n);
  }
  std::sort(means.begin(), means.end());
  double alpha = 1.0 - level;
  ci.lower = quantile_sorted(means, alpha / 2.0);
  ci.upper = quantile_sorted(means, 1.0 - alpha / 2.0);
  return ci;
}

// ---- Kendall tau-b ----

namespace {

// Merge sort counting inversions (strictly decreasing pairs).
std::int64_t sort_count_swaps(std::vector<double>& a, std::vector<double>& buf, std::size_t lo,
                              std::size_t hi) {
  if (hi - lo < 2) return 0;
  std::size_t mid = lo + (hi - lo) / 2;
  std::int64_t swaps = sort_count_swaps(a, buf, lo, mid) + sort_count_swaps(a, buf, mid, hi);
  std::size_t i = lo, j = mid, k = lo;
  while (i < mid && j < hi) {
    if (a[j] < a[i]) {
      swaps += static_cast<std::int64_t>(mid - i);
      buf[k++] = a[j++];
    } else {
      buf[k++] = a[i++];
    }
  }
  while (i < mid) buf[k++] = a[i++];
  while (j < hi) buf[k++] = a[j++];
  std::copy(buf.begin() + static_cast<std::ptrdiff_t>(lo), buf.begin() + static_cast<std::ptrdiff_t>(hi),
            a.begin() + static_cast<std::ptrdiff_t>(lo));
  return swaps;
}

// Sum over runs of equal values of t(t-1)/2; input sorted by the key.
template <class Eq>
std::int64_t tied_pairs(std::size_t n, Eq eq) {
  std::int64_t total = 0, run = 1;
  for (std::size_t i = 1; i < n; ++i) {
    if (eq(i - 1, i)) {
      ++run;
    } else {
      total += run * (run - 1) / 2;
      run = 1;
    }
  }
  return total + run * (run - 1) / 2;
}

}  // namespace

TauResult kendall_tau_b(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size())
    throw Error(ErrorCode::LengthMismatch, "kendall_tau_b: lengths " + std::to_string(x.size()) + " and " +
                                               std::to_string(y.size()));
  const auto n = x.size();
  if (n < 2) throw Error(ErrorCode::InsufficientData, "kendall_tau_b needs at least 2 observations");
  for (std::size_t i = 0; i < n; ++i)
    if (std::isnan(x[i]) || std::isnan(y[i])) throw Error(ErrorCode::InvalidArgument, "kendall_tau_b: NaN input");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return x[a] < x[b] || (x[a] == x[b] && y[a] < y[b]);
  });
  std::vector<double> xs(n), ys(n);
  for (std::size_t i = 0; i < n; ++i) {
    xs[i] = x[order[i]];
    ys[i] = y[order[i]];
  }
  const auto n0 = static_cast<std::int64_t>(n) * static_cast<std::int64_t>(n - 1) / 2;
  const auto n1 = tied_pairs(n, [&](std::size_t a, std::size_t b) { return xs[a] == xs[b]; });
  const auto n3 = tied_pairs(n, [&](std::size_t a, std::size_t b) { return xs[a] == xs[b] && ys[a] == ys[b]; });
  std::vector<double> buf(n);
  const auto swaps = sort_count_swaps(ys, buf, 0, n);  // ys now sorted
  const auto n2 = tied_pairs(n, [&](std::size_t a, std::size_t b) { return ys[a] == ys[b]; });

  if (n0 == n1 || n0 == n2) throw Error(ErrorCode::TauUndefined, "kendall_tau_b: a vector is entirely tied");
  // Concordant - discordant among pairs untied in both.
  const std::int64_t s = n0 - n1 - n2 + n3 - 2 * swaps;
  TauResult r;
  r.n_pairs = n0;
  r.tau_b = static_cast<double>(s) /
            std::sqrt(static_cast<double>(n0 - n1) * static_cast<double>(n0 - n2));
  r.tau_b = std::clamp(r.tau_b, -1.0, 1.0);
  return r;
}

// ---- gap map ----

GapMap gap_map(const ScoreTable& table, const std::string& arm_a, const std::string& arm_b) {
  static const std::string kPrefix = "item_mean:";
  GapMap g;
  g.arm_a = arm_a;
  g.arm_b = arm_b;
  std::set<std::string> domains, scenarios;
  // (scenario, domain, arm) -> (sum, count)
  std::map<std::tuple<std::string, std::string, std::string>, std::pair<double, int>> acc;
  for (const auto& r : table.rows()) {
    if (r.category.rfind(kPrefix, 0) != 0) continue;
    auto dom = r.category.substr(kPrefix.size());
    domains.insert(dom);
    scenarios.insert(r.scenario);
    if (r.arm != arm_a && r.arm != arm_b) continue;
    auto& a = acc[{r.scenario, dom, r.arm}];
    a.first += r.value;
    a.second += 1;
  }
  if (scenarios.empty()) throw Error(ErrorCode::EmptyInput, "no item_mean rows for a gap map");
  g.scenarios.assign(scenarios.begin(), scenarios.end());
  // Keep the canonical domain order where possible.
  static const std::vector<std::string> kOrder = {"HistoryTaking", "PhysicalExam", "ClinicalReasoning",
                                                  "CommunicationCounseling", "TreatmentSteps", "Triage",
                                                  "RedFlags"};
  for (const auto& d : kOrder)
    if (domains.count(d)) g.domains.push_back(d);
  for (const auto& d : domains)
    if (std::find(kOrder.begin(), kOrder.end(), d) == kOrder.end()) g.domains.push_back(d);

  for (const auto& s : g.scenarios) {
    std::vector<double> row;
    for (const auto& d : g.domains) {
      auto mean = [&](const std::string& arm) {
        auto it = acc.find({s, d, arm});
        if (it == acc.end())
          throw Error(ErrorCode::MissingArm, "scenario '" + s + "' has no '" + arm + "' rows for " + d);
        return it->second.first / it->second.second;
      };
      row.push_back(mean(arm_a) - mean(arm_b));
    }
    g.values.push_back(std::move(row));
  }
  return g;
}

std::string to_csv(const GapMap& map) {
  std::string out = "scenario";
  for (const auto& d : map.domains) out += "," + d;
  out += "\n";
  for (std::size_t i = 0; i < map.scenarios.size(); ++i) {
    out += csv_field(map.scenarios[i]);
    for (double v : map.values[i]) out += "," + format_double(v);
    out += "\n";
  }
  return out;
}

// ---- replication ----

bool is_tau_category(const std::string& category) {
  return category.rfind("rubric:", 0) == 0 || category.rfind("telepaces:", 0) == 0;
}

std::map<std::string, PairedVectors> replication_pairs(
    const ScoreTable& table, const std::vector<std::string>& replicated_scenarios,
    const std::vector<std::string>& arms,
    const std::map<std::string, std::pair<std::string, std::string>>& actor_order) {
  std::vector<std::string> scenarios = replicated_scenarios;
  std::sort(scenarios.begin(), scenarios.end());
  scenarios.erase(std::unique(scenarios.begin(), scenarios.end()), scenarios.end());
  if (scenarios.empty()) throw Error(ErrorCode::EmptyInput, "no replicated scenarios");

  // (category, scenario, arm) -> actor -> value
  std::map<std::tuple<std::string, std::string, std::string>, std::map<std::string, double>> cells;
  std::set<std::string> categories;
  std::set<std::string> wanted(scenarios.begin(), scenarios.end());
  for (const auto& r : table.rows()) {
    if (!is_tau_category(r.category) || !wanted.count(r.scenario)) continue;
    categories.insert(r.category);
    auto& cell = cells[{r.category, r.scenario, r.arm}];
    if (!cell.emplace(r.actor, r.value).second)
      throw Error(ErrorCode::ReplicationViolated, "actor '" + r.actor + "' appears twice for (" + r.scenario +
                                                      ", " + r.arm + ", " + r.category + ")");
  }

  std::map<std::string, PairedVectors> out;
  for (const auto& cat : categories) {
    PairedVectors pv;
    for (const auto& s : scenarios)
      for (const auto& a : arms) {
        auto it = cells.find({cat, s, a});
        if (it == cells.end() || it->second.size() != 2)
          throw Error(ErrorCode::ReplicationViolated,
                      "scenario '" + s + "' arm '" + a + "' needs exactly two actors for " + cat + ", has " +
                          std::to_string(it == cells.end() ? 0 : it->second.size()));
        auto first = it->second.begin();
        auto second = std::next(first);
        if (auto ord = actor_order.find(s); ord != actor_order.end()) {
          first = it->second.find(ord->second.first);
          second = it->second.find(ord->second.second);
          if (first == it->second.end() || second == it->second.end())
            throw Error(ErrorCode::ReplicationViolated, "scenario '" + s + "' actors do not match the replication map");
        }
        pv.first.push_back(first->second);
        pv.second.push_back(second->second);
        pv.keys.emplace_back(s, a);
      }
    out.emplace(cat, std::move(pv));
  }
  return out;
}

}  // namespace telesim::stats
