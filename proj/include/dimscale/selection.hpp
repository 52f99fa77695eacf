#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "dimscale/clustering.hpp"

namespace dimscale {

// -2 * loglik + n_parameters * log(n), natural log, n = respondent count.
double bic(double log_likelihood, std::size_t n_parameters, std::size_t n);

// -2 * loglik + 2 * n_parameters.
double aic(double log_likelihood, std::size_t n_parameters);

// 2 * (loglik_general - loglik_restricted). May be slightly negative under EM
// local optima; never clamped so diagnostics can see it.
double lr_statistic(double loglik_restricted, double loglik_general);

struct CriterionRow {
  std::size_t step = 0;  // 0 = initial s=J model
  std::size_t s = 0;
  double log_likelihood = 0.0;
  std::size_t n_parameters = 0;
  double bic = 0.0;
  double aic = 0.0;
  std::optional<double> lr_vs_previous;  // empty on the initial row
};

struct CriterionReport {
  std::vector<CriterionRow> rows;  // ordered by step, initial model first
  std::size_t selected_s = 0;      // global BIC minimum, ties toward smaller s
};

struct CutResult {
  ItemPartition partition;
  std::size_t s = 0;
  std::optional<std::size_t> selected_step;  // empty when the initial model wins
  double bic = 0.0;
};

// Core cut rule on plain (s, bic) rows: index of the minimum BIC, ties broken
// toward smaller s (more parsimonious).
std::size_t min_bic_index(const std::vector<std::pair<std::size_t, double>>& s_and_bic);

// Applies the cut rule over {initial model} + all steps and records the
// winning step on the path.
CutResult cut_by_min_bic(ClusteringPath& path);

CriterionReport criterion_report(const ClusteringPath& path);

}  // namespace dimscale
