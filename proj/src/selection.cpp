#include "dimscale/selection.hpp"

#include <cmath>
#include <stdexcept>

namespace dimscale {

double bic(double log_likelihood, std::size_t n_parameters, std::size_t n) {
  if (n < 1) throw std::invalid_argument("bic: sample size must be >= 1");
  return -2.0 * log_likelihood + static_cast<double>(n_parameters) * std::log(static_cast<double>(n));
}

double aic(double log_likelihood, std::size_t n_parameters) {
  return -2.0 * log_likelihood + 2.0 * static_cast<double>(n_parameters);
}

double lr_statistic(double loglik_restricted, double loglik_general) {
  return 2.0 * (loglik_general - loglik_restricted);
}

std::size_t min_bic_index(const std::vector<std::pair<std::size_t, double>>& s_and_bic) {
  if (s_and_bic.empty()) throw std::invalid_argument("min_bic_index: empty sequence");
  std::size_t best = 0;
  for (std::size_t i = 1; i < s_and_bic.size(); ++i) {
    const auto& [s, value] = s_and_bic[i];
    const auto& [best_s, best_value] = s_and_bic[best];
    if (value < best_value || (value == best_value && s < best_s)) best = i;
  }
  return best;
}

CutResult cut_by_min_bic(ClusteringPath& path) {
  std::vector<std::pair<std::size_t, double>> entries;
  entries.reserve(path.steps.size() + 1);
  entries.emplace_back(path.initial_fit.partition.n_groups(), path.initial_fit.bic);
  for (const auto& step : path.steps) {
    entries.emplace_back(step.partition.n_groups(), step.fit.bic);
  }
  const std::size_t winner = min_bic_index(entries);

  CutResult result{path.initial_fit.partition, path.initial_fit.partition.n_groups(), std::nullopt,
                   path.initial_fit.bic};
  if (winner > 0) {
    const auto& step = path.steps[winner - 1];
    result.partition = step.partition;
    result.s = step.partition.n_groups();
    result.selected_step = winner - 1;
    result.bic = step.fit.bic;
  }
  path.selected_step = result.selected_step;
  return result;
}

CriterionReport criterion_report(const ClusteringPath& path) {
  CriterionReport report;
  const auto& initial = path.initial_fit;
  report.rows.push_back({0, initial.partition.n_groups(), initial.log_likelihood,
                         initial.n_parameters, initial.bic, initial.aic, std::nullopt});
  double prev_ll = initial.log_likelihood;
  for (const auto& step : path.steps) {
    report.rows.push_back({step.step_index, step.partition.n_groups(), step.fit.log_likelihood,
                           step.fit.n_parameters, step.fit.bic, step.fit.aic,
                           lr_statistic(step.fit.log_likelihood, prev_ll)});
    prev_ll = step.fit.log_likelihood;
  }
  std::vector<std::pair<std::size_t, double>> entries;
  entries.reserve(report.rows.size());
  for (const auto& row : report.rows) entries.emplace_back(row.s, row.bic);
  report.selected_s = report.rows[min_bic_index(entries)].s;
  return report;
}

}  // namespace dimscale
