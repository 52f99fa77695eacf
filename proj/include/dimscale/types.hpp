#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace dimscale {

// Minimal dense row-major matrix, sized for k-by-s ability grids.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// N-by-J binary response matrix with unique item identifiers. Cells are
// validated to be exactly 0 or 1 on construction; missingness is resolved
// upstream by the data-io pipeline.
class ResponseMatrix {
 public:
  ResponseMatrix(std::vector<std::string> item_ids, std::vector<std::uint8_t> cells,
                 std::size_t n_respondents);

  static ResponseMatrix from_rows(std::vector<std::string> item_ids,
                                  const std::vector<std::vector<int>>& rows);

  std::size_t n_respondents() const { return n_respondents_; }
  std::size_t n_items() const { return item_ids_.size(); }

  std::uint8_t operator()(std::size_t respondent, std::size_t item) const {
    return cells_[respondent * n_items() + item];
  }

  std::span<const std::uint8_t> row(std::size_t respondent) const {
    return {cells_.data() + respondent * n_items(), n_items()};
  }

  const std::vector<std::string>& item_ids() const { return item_ids_; }

  double item_mean(std::size_t item) const;

 private:
  std::vector<std::string> item_ids_;
  std::vector<std::uint8_t> cells_;  // row-major
  std::size_t n_respondents_ = 0;
};

// Assignment of J items to s disjoint, exhaustive dimension groups. This is
// the indicator delta_jd: item j loads on dimension d iff j is in group d.
// Groups are kept in canonical order (ascending smallest member) and each
// group's items are sorted, so equal partitions compare equal.
class ItemPartition {
 public:
  ItemPartition() = default;  // empty placeholder, no items
  ItemPartition(std::vector<std::vector<int>> groups, std::size_t n_items);

  static ItemPartition singletons(std::size_t n_items);
  static ItemPartition single_group(std::size_t n_items);

  std::size_t n_groups() const { return groups_.size(); }
  std::size_t n_items() const { return item_to_group_.size(); }

  const std::vector<int>& group(std::size_t d) const { return groups_[d]; }
  const std::vector<std::vector<int>>& groups() const { return groups_; }

  // Dimension index d(j) of the unique group containing item j.
  std::size_t dimension_of(std::size_t item) const;

  // Lowest-indexed item of group d; anchors that dimension's discrimination.
  int reference_item(std::size_t d) const { return groups_[d].front(); }

  bool is_reference(std::size_t item) const {
    return reference_item(dimension_of(item)) == static_cast<int>(item);
  }

  // Partition obtained by merging groups a and b (positions in this
  // partition); remains in canonical order.
  ItemPartition merged(std::size_t a, std::size_t b) const;

  bool operator==(const ItemPartition&) const = default;

 private:
  std::vector<std::vector<int>> groups_;
  std::vector<std::size_t> item_to_group_;
};

// Parameters of the multidimensional latent-class 2-PL model:
// class weights pi_c, abilities theta_cd, difficulties beta_j,
// discriminations gamma_j. Anchoring convention: theta_{1,d} = 0 for every
// dimension and gamma = 1 for the lowest-indexed item of each group.
struct ModelParameters {
  std::vector<double> class_weights;  // length k, simplex
  Matrix abilities;                   // k x s, first row pinned to zero
  std::vector<double> difficulties;   // length J
  std::vector<double> discriminations;  // length J, strictly positive

  std::size_t n_classes() const { return class_weights.size(); }
  std::size_t n_dimensions() const { return abilities.cols(); }
  std::size_t n_items() const { return difficulties.size(); }

  // Throws std::invalid_argument if any invariant fails: simplex weights
  // (within 1e-12), anchored first class, unit reference discriminations,
  // finite strictly positive discriminations.
  void validate(const ItemPartition& partition) const;
};

struct FitDiagnostics {
  // Count of M-step blocks where the Newton direction was rejected and a
  // damped gradient step was used instead, summed over all chains.
  std::size_t newton_fallbacks = 0;
  // Largest single-iteration log-likelihood decrease observed over all
  // chains (0 when the trace is monotone, as EM guarantees up to rounding).
  double max_loglik_decrease = 0.0;
  // Requested number of classes exceeds the distinct response patterns.
  bool k_exceeds_patterns = false;
};

struct FitResult {
  ModelParameters parameters;
  ItemPartition partition;
  double log_likelihood = 0.0;
  std::size_t n_parameters = 0;
  double bic = 0.0;
  double aic = 0.0;
  std::size_t n_em_iterations = 0;
  bool converged = false;
  std::size_t start_index = 0;  // which start won
  FitDiagnostics diagnostics;

  // Consistency of bic/aic with log_likelihood and n_parameters, and
  // log_likelihood <= 0 (a sum of log-probabilities of observed patterns).
  void validate(std::size_t n_respondents) const;
};

}  // namespace dimscale
